use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Calendar month, 1 = January through 12 = December.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Month(u8);

impl Month {
    pub const JANUARY: Month = Month(1);
    pub const MAY: Month = Month(5);
    pub const OCTOBER: Month = Month(10);
    pub const DECEMBER: Month = Month(12);

    pub fn new(month: u8) -> Result<Self> {
        Self::try_from(month as i64)
    }

    /// Builds from a zero-based index (0 = January).
    pub fn from_index(index: usize) -> Result<Self> {
        Self::try_from(index as i64 + 1)
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based index for array lookups.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all() -> impl Iterator<Item = Month> {
        (1..=12).map(Month)
    }

    /// Month `delta` steps away, wrapping around the year.
    pub fn offset(self, delta: i32) -> Month {
        let idx = (self.index() as i32 + delta).rem_euclid(12);
        Month(idx as u8 + 1)
    }

    /// Circular distance in months (0..=6).
    pub fn distance(self, other: Month) -> u8 {
        let d = (self.0 as i32 - other.0 as i32).rem_euclid(12) as u8;
        d.min(12 - d)
    }
}

impl TryFrom<i64> for Month {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        if (1..=12).contains(&value) {
            Ok(Month(value as u8))
        } else {
            Err(Error::InvalidMonth(value))
        }
    }
}

impl TryFrom<u8> for Month {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Self::try_from(value as i64)
    }
}

impl From<Month> for u8 {
    fn from(m: Month) -> u8 {
        m.0
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::str::FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: i64 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("not a month number: {s:?}")))?;
        Month::try_from(v)
    }
}
