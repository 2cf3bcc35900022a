//! Versioned binary container shared by model and index artifacts.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic[4] | version u16 | metadata_len u32 | metadata | payload | crc32 u32
//! ```
//!
//! The CRC covers every byte before it.

use crate::{Error, Result};

const HEADER_LEN: usize = 4 + 2 + 4;
const TRAILER_LEN: usize = 4;

pub fn encode(magic: [u8; 4], version: u16, metadata: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + metadata.len() + payload.len() + TRAILER_LEN);
    out.extend_from_slice(&magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(metadata.len() as u32).to_le_bytes());
    out.extend_from_slice(metadata);
    out.extend_from_slice(payload);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Validates magic, version and checksum, returning `(version, metadata, payload)`.
pub fn decode(bytes: &[u8], magic: [u8; 4], supported: u16) -> Result<(u16, &[u8], &[u8])> {
    if bytes.len() < 4 || bytes[..4] != magic {
        return Err(Error::BadMagic { expected: magic });
    }
    if bytes.len() < HEADER_LEN + TRAILER_LEN {
        return Err(Error::Corrupt(format!(
            "file is only {} bytes",
            bytes.len()
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version > supported {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported,
        });
    }
    let body = &bytes[..bytes.len() - TRAILER_LEN];
    let stored = u32::from_le_bytes(bytes[bytes.len() - TRAILER_LEN..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }
    let meta_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    if HEADER_LEN + meta_len > body.len() {
        return Err(Error::Corrupt("metadata length exceeds file".into()));
    }
    let metadata = &body[HEADER_LEN..HEADER_LEN + meta_len];
    let payload = &body[HEADER_LEN + meta_len..];
    Ok((version, metadata, payload))
}

/// Little-endian cursor over a payload.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Corrupt("payload ends early".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn str(&mut self) -> Result<&'a str> {
        let len = self.u32()? as usize;
        std::str::from_utf8(self.take(len)?).map_err(|_| Error::Corrupt("invalid utf-8".into()))
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Corrupt(format!(
                "{} trailing payload bytes",
                self.buf.len() - self.pos
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: [u8; 4] = *b"TEST";

    #[test]
    fn round_trip() {
        let bytes = encode(MAGIC, 1, b"{}", &[1, 2, 3]);
        let (v, m, p) = decode(&bytes, MAGIC, 1).unwrap();
        assert_eq!((v, m, p), (1, &b"{}"[..], &[1u8, 2, 3][..]));
    }

    #[test]
    fn rejects_truncation_and_flips() {
        let bytes = encode(MAGIC, 1, b"meta", &[9; 64]);
        for cut in [bytes.len() - 1, bytes.len() / 2, 11] {
            assert!(matches!(
                decode(&bytes[..cut], MAGIC, 1),
                Err(Error::Corrupt(_))
            ));
        }
        let mut flipped = bytes.clone();
        flipped[20] ^= 0x40;
        assert!(matches!(decode(&flipped, MAGIC, 1), Err(Error::Corrupt(_))));
    }

    #[test]
    fn future_version_and_wrong_magic() {
        let bytes = encode(MAGIC, 7, b"", b"");
        assert!(matches!(
            decode(&bytes, MAGIC, 1),
            Err(Error::UnsupportedVersion {
                found: 7,
                supported: 1
            })
        ));
        assert!(matches!(
            decode(&bytes, *b"NOPE", 7),
            Err(Error::BadMagic { .. })
        ));
    }
}
