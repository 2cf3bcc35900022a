//! Seasonality-aware query autocomplete.
//!
//! The crate is organised along the offline/online split of a typeahead
//! system:
//!
//! * [`loglab`] turns raw query-log events into monthly volume tables and
//!   per-(query, month) seasonality targets.
//! * [`seasonnet`] is a small feed-forward regressor that predicts the
//!   seasonality of any query for any month, including queries never seen
//!   in the logs.
//! * [`index`] is the prefix tree used for candidate retrieval.
//! * [`ranker`] blends the offline L1 score with the predicted seasonality.
//! * [`eval`] replays logged queries keystroke by keystroke and reports
//!   mean reciprocal rank.
//! * [`experiment`] chains all of the above on synthetic logs.

pub mod container;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod index;
pub mod loglab;
pub mod month;
pub mod normalize;
pub mod ranker;
pub mod seasonnet;

pub use error::{Error, Result};
pub use month::Month;
pub use normalize::{normalize_prefix, normalize_query};

/// Lowercase hex SHA-256 of `bytes`, used as an artifact fingerprint.
pub fn fingerprint(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
