//! Two-stage ranking.
//!
//! The offline L1 score is a linear combination of engagement counts and is
//! stored in the completion index. At request time the L2 re-ranker takes the
//! top-N L1 candidates for a prefix, min-max normalizes their L1 scores
//! within that candidate set and blends them with the predicted seasonality:
//!
//! ```text
//! final = (1 - alpha) * minmax(l1) + alpha * seasonality(query, month)
//! ```
//!
//! and returns the best K. With `alpha = 0` this is exactly the L1 order.

use std::borrow::Borrow;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::index::Completion;
use crate::loglab::SeasonalityTarget;
use crate::seasonnet::{SeasonModel, MONTHS};
use crate::{normalize_query, Error, Month, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementRecord {
    pub query: String,
    pub add_to_carts: f64,
    pub clicks: f64,
    pub impressions: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct L1Weights {
    pub add_to_cart: f64,
    pub click: f64,
    pub impression: f64,
}

impl Default for L1Weights {
    fn default() -> Self {
        Self {
            add_to_cart: 1.0,
            click: 0.25,
            impression: 0.01,
        }
    }
}

/// Dot product of the engagement counts with `weights`.
pub fn l1_score(record: &EngagementRecord, weights: &L1Weights) -> Result<f64> {
    let w = [weights.add_to_cart, weights.click, weights.impression];
    if w.iter().any(|x| x.is_nan() || *x < 0.0) || w.iter().all(|x| *x == 0.0) {
        return Err(Error::InvalidConfig(
            "l1 weights must be non-negative and not all zero".into(),
        ));
    }
    let x = [record.add_to_carts, record.clicks, record.impressions];
    if x.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "negative engagement for {:?}",
            record.query
        )));
    }
    Ok(w.iter().zip(x).map(|(w, x)| w * x).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct L2Config {
    /// Weight of the seasonality signal in `[0, 1]`.
    pub alpha: f64,
    /// Candidates pulled from the index (N).
    pub n_candidates: usize,
    /// Suggestions shown (K).
    pub k_display: usize,
}

impl Default for L2Config {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            n_candidates: 50,
            k_display: 10,
        }
    }
}

impl L2Config {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.k_display == 0 || self.n_candidates < self.k_display {
            return Err(Error::InvalidConfig(format!(
                "need n_candidates ({}) >= k_display ({}) >= 1",
                self.n_candidates, self.k_display
            )));
        }
        Ok(())
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }
}

/// Source of the seasonality signal.
pub trait SeasonalityScorer {
    /// Score in `[0, 1]` for a normalized query.
    fn seasonality(&self, query: &str, month: Month) -> f64;
}

impl SeasonalityScorer for SeasonModel {
    fn seasonality(&self, query: &str, month: Month) -> f64 {
        self.predict(query, month)
    }
}

impl<T: SeasonalityScorer + ?Sized> SeasonalityScorer for &T {
    fn seasonality(&self, query: &str, month: Month) -> f64 {
        (**self).seasonality(query, month)
    }
}

impl<T: SeasonalityScorer + ?Sized> SeasonalityScorer for std::sync::Arc<T> {
    fn seasonality(&self, query: &str, month: Month) -> f64 {
        (**self).seasonality(query, month)
    }
}

/// Fixed per-(query, month) scores; unknown queries score 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableScorer {
    scores: HashMap<String, [f64; 12]>,
}

impl TableScorer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query: &str, month: Month, score: f64) {
        self.scores
            .entry(normalize_query(query))
            .or_insert([0.0; 12])[month.index()] = score.clamp(0.0, 1.0);
    }

    pub fn from_targets(targets: &[SeasonalityTarget]) -> Self {
        let mut t = Self::new();
        for target in targets {
            t.insert(&target.query, target.month, target.value);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl SeasonalityScorer for TableScorer {
    fn seasonality(&self, query: &str, month: Month) -> f64 {
        self.scores.get(query).map_or(0.0, |s| s[month.index()])
    }
}

/// Seasonality profiles of a fixed query set computed up front, so that
/// scoring those queries is a lookup. Other queries go to the model.
#[derive(Debug, Clone)]
pub struct ProfileScorer<M = SeasonModel> {
    model: M,
    profiles: HashMap<String, [f64; MONTHS]>,
}

impl<M: Borrow<SeasonModel>> ProfileScorer<M> {
    pub fn new<'a>(model: M, queries: impl IntoIterator<Item = &'a str>) -> Self {
        let m = model.borrow();
        let profiles = queries
            .into_iter()
            .map(|q| (q.to_owned(), m.predict_all(q)))
            .collect();
        Self { model, profiles }
    }

    pub fn model(&self) -> &SeasonModel {
        self.model.borrow()
    }

    pub fn profile(&self, query: &str) -> [f64; MONTHS] {
        self.profiles
            .get(query)
            .copied()
            .unwrap_or_else(|| self.model().predict_all(query))
    }
}

impl<M: Borrow<SeasonModel>> SeasonalityScorer for ProfileScorer<M> {
    fn seasonality(&self, query: &str, month: Month) -> f64 {
        match self.profiles.get(query) {
            Some(p) => p[month.index()],
            None => self.model().predict(query, month),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSuggestion {
    pub query: String,
    pub l1_score: f64,
    pub seasonality: f64,
    pub final_score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Re-ranks candidates by the blended score and keeps the top `k_display`.
///
/// Ordering: final score descending, then raw L1 descending, then query
/// ascending. The L1 key only separates candidates whose blended scores
/// coincide, which keeps `alpha = 0` identical to the L1 order even when
/// min-max rounding collapses two close L1 values.
pub fn l2_rerank<S: SeasonalityScorer + ?Sized>(
    candidates: &[Completion<'_>],
    month: Month,
    scorer: &S,
    config: &L2Config,
) -> Vec<RankedSuggestion> {
    let mut all = rerank_all(candidates, month, scorer, config.alpha);
    all.truncate(config.k_display);
    all
}

/// Full re-ranked candidate list before truncation.
pub fn rerank_all<S: SeasonalityScorer + ?Sized>(
    candidates: &[Completion<'_>],
    month: Month,
    scorer: &S,
    alpha: f64,
) -> Vec<RankedSuggestion> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let (min, max) = candidates
        .iter()
        .map(|c| c.entry.l1_score)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
    let span = max - min;
    let mut out: Vec<RankedSuggestion> = candidates
        .iter()
        .map(|c| {
            let l1 = c.entry.l1_score;
            let norm = if span > 0.0 { (l1 - min) / span } else { 0.5 };
            let s = scorer.seasonality(&c.entry.query, month).clamp(0.0, 1.0);
            RankedSuggestion {
                query: c.entry.query.clone(),
                l1_score: l1,
                seasonality: s,
                final_score: (1.0 - alpha) * norm + alpha * s,
                rank: 0,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.final_score
            .total_cmp(&a.final_score)
            .then(b.l1_score.total_cmp(&a.l1_score))
            .then_with(|| a.query.cmp(&b.query))
    });
    for (i, s) in out.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    out
}

/// Queries that L2 shows in its top K but that were not in L1's top K:
/// candidates promoted from the N - K tail.
pub fn promoted_from_tail(
    l1_top_k: &[Completion<'_>],
    l2_top_k: &[RankedSuggestion],
) -> Vec<String> {
    let l1: BTreeSet<&str> = l1_top_k.iter().map(|c| c.entry.query.as_str()).collect();
    l2_top_k
        .iter()
        .filter(|s| !l1.contains(s.query.as_str()))
        .map(|s| s.query.clone())
        .collect()
}
