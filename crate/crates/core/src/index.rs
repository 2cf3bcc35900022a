//! Prefix-tree completion index.
//!
//! Entries are kept sorted by query text. Because byte order of UTF-8 equals
//! code-point order, the completions of any prefix form one contiguous run of
//! that array, and each tree node stores the bounds of its run. Retrieval is
//! a walk down the tree followed by a top-n selection over the run.

use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{self, Reader};
use crate::{normalize_prefix, normalize_query, Error, Result};

pub const INDEX_MAGIC: [u8; 4] = *b"SQIX";
pub const INDEX_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub query: String,
    pub frequency: u64,
    pub l1_score: f64,
}

impl IndexEntry {
    pub fn new(query: impl Into<String>, frequency: u64, l1_score: f64) -> Self {
        Self {
            query: query.into(),
            frequency,
            l1_score,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Most-popular completion: `f(q) / Σ f`.
    Mpc,
    /// Stored offline L1 score.
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Completion<'a> {
    pub entry: &'a IndexEntry,
    pub score: f64,
}

#[derive(Debug, Clone)]
struct Node {
    ch: char,
    lo: u32,
    hi: u32,
    first_child: u32,
    n_children: u32,
}

#[derive(Debug, Clone)]
pub struct CompletionIndex {
    entries: Vec<IndexEntry>,
    nodes: Vec<Node>,
    total_frequency: u64,
}

impl CompletionIndex {
    /// Index with no entries; every prefix completes to nothing.
    pub fn empty() -> Self {
        Self::from_sorted(Vec::new())
    }

    /// Normalizes and indexes `entries`. Duplicate or empty queries and
    /// non-finite scores are rejected.
    pub fn build(entries: Vec<IndexEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("index entries"));
        }
        let mut entries: Vec<IndexEntry> = entries
            .into_iter()
            .map(|mut e| {
                e.query = normalize_query(&e.query);
                if e.query.is_empty() {
                    return Err(Error::EmptyQuery);
                }
                if !e.l1_score.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "non-finite l1 score for {:?}",
                        e.query
                    )));
                }
                Ok(e)
            })
            .collect::<Result<_>>()?;
        entries.sort_by(|a, b| a.query.cmp(&b.query));
        if let Some(w) = entries.windows(2).find(|w| w[0].query == w[1].query) {
            return Err(Error::DuplicateQuery(w[0].query.clone()));
        }
        if entries.len() > u32::MAX as usize {
            return Err(Error::InvalidConfig("too many entries".into()));
        }
        Ok(Self::from_sorted(entries))
    }

    fn from_sorted(entries: Vec<IndexEntry>) -> Self {
        let total_frequency = entries.iter().map(|e| e.frequency).sum();
        let mut nodes = vec![Node {
            ch: '\0',
            lo: 0,
            hi: entries.len() as u32,
            first_child: 0,
            n_children: 0,
        }];
        // (node, byte depth)
        let mut queue = VecDeque::from([(0usize, 0usize)]);
        while let Some((node, depth)) = queue.pop_front() {
            let (lo, hi) = (nodes[node].lo as usize, nodes[node].hi as usize);
            let mut i = lo;
            if i < hi && entries[i].query.len() == depth {
                i += 1;
            }
            let first_child = nodes.len();
            while i < hi {
                let c = entries[i].query[depth..].chars().next().unwrap();
                let mut j = i + 1;
                while j < hi && entries[j].query[depth..].starts_with(c) {
                    j += 1;
                }
                queue.push_back((nodes.len(), depth + c.len_utf8()));
                nodes.push(Node {
                    ch: c,
                    lo: i as u32,
                    hi: j as u32,
                    first_child: 0,
                    n_children: 0,
                });
                i = j;
            }
            nodes[node].first_child = first_child as u32;
            nodes[node].n_children = (nodes.len() - first_child) as u32;
        }
        Self {
            entries,
            nodes,
            total_frequency,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in lexicographic order.
    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn total_frequency(&self) -> u64 {
        self.total_frequency
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn get(&self, query: &str) -> Option<&IndexEntry> {
        self.entries
            .binary_search_by(|e| e.query.as_str().cmp(query))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Most-popular-completion weight `f(q) / Σ f(i)`.
    pub fn mpc_weight(&self, query: &str) -> Result<f64> {
        let entry = self
            .get(&normalize_query(query))
            .ok_or_else(|| Error::UnknownQuery(query.to_owned()))?;
        if self.total_frequency == 0 {
            return Err(Error::InvalidConfig(
                "corpus has zero total frequency".into(),
            ));
        }
        Ok(entry.frequency as f64 / self.total_frequency as f64)
    }

    fn range(&self, prefix: &str) -> (usize, usize) {
        let mut node = &self.nodes[0];
        for c in prefix.chars() {
            let first = node.first_child as usize;
            let children = &self.nodes[first..first + node.n_children as usize];
            match children.binary_search_by(|n| n.ch.cmp(&c)) {
                Ok(k) => node = &children[k],
                Err(_) => return (0, 0),
            }
        }
        (node.lo as usize, node.hi as usize)
    }

    fn score(&self, entry: &IndexEntry, order: Order) -> f64 {
        match order {
            Order::L1 => entry.l1_score,
            Order::Mpc if self.total_frequency == 0 => 0.0,
            Order::Mpc => entry.frequency as f64 / self.total_frequency as f64,
        }
    }

    /// All queries starting with `prefix` (unranked, lexicographic).
    pub fn matches(&self, prefix: &str) -> &[IndexEntry] {
        let (lo, hi) = self.range(&normalize_prefix(prefix));
        &self.entries[lo..hi]
    }

    /// Up to `n` completions of `prefix`, best score first; equal scores
    /// are ordered by ascending query text.
    pub fn complete(&self, prefix: &str, n: usize, order: Order) -> Vec<Completion<'_>> {
        let (lo, hi) = self.range(&normalize_prefix(prefix));
        if n == 0 || lo == hi {
            return Vec::new();
        }
        let mut picked: Vec<(f64, usize)> = (lo..hi)
            .map(|i| (self.score(&self.entries[i], order), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if picked.len() > n {
            picked.select_nth_unstable_by(n - 1, cmp);
            picked.truncate(n);
        }
        picked.sort_unstable_by(cmp);
        picked
            .into_iter()
            .map(|(score, i)| Completion {
                entry: &self.entries[i],
                score,
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::json!({
            "entries": self.entries.len(),
            "total_frequency": self.total_frequency,
        });
        let mut payload = Vec::new();
        payload.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            payload.extend_from_slice(&(e.query.len() as u32).to_le_bytes());
            payload.extend_from_slice(e.query.as_bytes());
            payload.extend_from_slice(&e.frequency.to_le_bytes());
            payload.extend_from_slice(&e.l1_score.to_le_bytes());
        }
        container::encode(
            INDEX_MAGIC,
            INDEX_VERSION,
            meta.to_string().as_bytes(),
            &payload,
        )
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (_, _, payload) = container::decode(bytes, INDEX_MAGIC, INDEX_VERSION)?;
        let mut r = Reader::new(payload);
        let n = r.u32()? as usize;
        let mut entries = Vec::with_capacity(n.min(payload.len() / 20));
        for _ in 0..n {
            let query = r.str()?.to_owned();
            let frequency = r.u64()?;
            let l1_score = r.f64()?;
            entries.push(IndexEntry {
                query,
                frequency,
                l1_score,
            });
        }
        r.finish()?;
        if entries.is_empty() {
            return Ok(Self::empty());
        }
        Self::build(entries).map_err(|e| Error::Corrupt(e.to_string()))
    }

    /// SHA-256 of the serialized index.
    pub fn fingerprint(&self) -> String {
        crate::fingerprint(&self.to_bytes())
    }
}

pub fn save_index(index: &CompletionIndex, path: &Path) -> Result<()> {
    std::fs::write(path, index.to_bytes()).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_index(path: &Path) -> Result<CompletionIndex> {
    let bytes = std::fs::read(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    CompletionIndex::from_bytes(&bytes)
}

/// Reads `query<TAB>frequency<TAB>l1_score` lines.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<IndexEntry>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::parse(
                i + 1,
                "expected query<TAB>frequency<TAB>l1_score",
            ));
        }
        let frequency = f[1]
            .trim()
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("bad frequency {:?}", f[1])))?;
        let l1_score: f64 = f[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("bad l1 score {:?}", f[2])))?;
        out.push(IndexEntry::new(f[0], frequency, l1_score));
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(mut w: W, entries: &[IndexEntry]) -> Result<()> {
    for e in entries {
        writeln!(w, "{}\t{}\t{}", e.query, e.frequency, e.l1_score)?;
    }
    Ok(())
}
