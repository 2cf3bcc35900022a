//! Offline replay: every logged query is typed one character at a time,
//! each prefix is sent through retrieval and re-ranking, and the position
//! of the query the user actually submitted gives that prefix's
//! reciprocal rank.

use std::io::{BufRead, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::index::{CompletionIndex, Order};
use crate::loglab::LogEvent;
use crate::ranker::{l2_rerank, L2Config, SeasonalityScorer};
use crate::{normalize_query, Error, Month, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayCase {
    pub ground_truth: String,
    pub month: Month,
    /// Every non-empty character prefix, shortest first; the last is the
    /// full query.
    pub prefixes: Vec<String>,
}

impl ReplayCase {
    pub fn new(query: &str, month: Month) -> Result<Self> {
        let ground_truth = normalize_query(query);
        if ground_truth.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let prefixes = ground_truth
            .char_indices()
            .map(|(i, c)| ground_truth[..i + c.len_utf8()].to_owned())
            .collect();
        Ok(Self {
            ground_truth,
            month,
            prefixes,
        })
    }
}

/// One case per (query, month) pair.
pub fn gen_cases(pairs: &[(String, Month)]) -> Result<Vec<ReplayCase>> {
    if pairs.is_empty() {
        return Err(Error::Empty("query list"));
    }
    pairs.iter().map(|(q, m)| ReplayCase::new(q, *m)).collect()
}

/// Draws `n` searches from the events with probability proportional to
/// their counts; each draw keeps the event's own month.
pub fn sample_cases(events: &[LogEvent], n: usize, seed: u64) -> Result<Vec<(String, Month)>> {
    if events.is_empty() {
        return Err(Error::Empty("event list"));
    }
    let dist = WeightedIndex::new(events.iter().map(|e| e.count))
        .map_err(|e| Error::InvalidConfig(format!("event weights: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let e = &events[dist.sample(&mut rng)];
            (e.query.clone(), e.month_key.month)
        })
        .collect())
}

pub fn read_cases<R: BufRead>(reader: R) -> Result<Vec<(String, Month)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (q, m) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(i + 1, "expected query<TAB>month"))?;
        let month = m
            .parse()
            .map_err(|e: Error| Error::parse(i + 1, e.to_string()))?;
        out.push((q.to_owned(), month));
    }
    Ok(out)
}

pub fn write_cases<W: Write>(mut w: W, pairs: &[(String, Month)]) -> Result<()> {
    for (q, m) in pairs {
        writeln!(w, "{q}\t{m}")?;
    }
    Ok(())
}

/// `1 / rank` of `truth` among the shown suggestions, 0 when absent.
pub fn reciprocal_rank<'a>(shown: impl IntoIterator<Item = &'a str>, truth: &str) -> f64 {
    shown
        .into_iter()
        .position(|q| q == truth)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Everything needed to answer a prefix.
pub struct Pipeline<'a, S: ?Sized> {
    pub index: &'a CompletionIndex,
    pub scorer: &'a S,
    pub config: L2Config,
    /// Identifies the seasonality source in the report fingerprint.
    pub model_hash: String,
}

impl<S: SeasonalityScorer + ?Sized> Pipeline<'_, S> {
    /// Query texts shown for `prefix` in `month`.
    pub fn suggest(&self, prefix: &str, month: Month) -> Vec<String> {
        let candidates = self
            .index
            .complete(prefix, self.config.n_candidates, Order::L1);
        l2_rerank(&candidates, month, self.scorer, &self.config)
            .into_iter()
            .map(|s| s.query)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFingerprint {
    pub alpha: f64,
    pub k_display: usize,
    pub n_candidates: usize,
    pub model_hash: String,
    pub cases_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mrr: f64,
    pub case_count: usize,
    pub prefix_count: usize,
    pub fingerprint: EvalFingerprint,
    /// One entry per replayed prefix, cases in order, prefixes shortest first.
    pub reciprocal_ranks: Vec<f64>,
}

pub fn cases_hash(cases: &[ReplayCase]) -> String {
    let mut text = String::new();
    for c in cases {
        text.push_str(&c.ground_truth);
        text.push('\t');
        text.push_str(&c.month.to_string());
        text.push('\n');
    }
    crate::fingerprint(text.as_bytes())
}

pub fn run_eval<S>(cases: &[ReplayCase], pipeline: &Pipeline<'_, S>) -> Result<EvalReport>
where
    S: SeasonalityScorer + Sync + ?Sized,
{
    pipeline.config.validate()?;
    let requests: Vec<(&str, &str, Month)> = cases
        .iter()
        .flat_map(|c| {
            c.prefixes
                .iter()
                .map(move |p| (p.as_str(), c.ground_truth.as_str(), c.month))
        })
        .collect();
    let reciprocal_ranks: Vec<f64> = requests
        .par_iter()
        .map(|(prefix, truth, month)| {
            let shown = pipeline.suggest(prefix, *month);
            reciprocal_rank(shown.iter().map(String::as_str), truth)
        })
        .collect();
    let mrr = if reciprocal_ranks.is_empty() {
        0.0
    } else {
        reciprocal_ranks.iter().sum::<f64>() / reciprocal_ranks.len() as f64
    };
    Ok(EvalReport {
        mrr,
        case_count: cases.len(),
        prefix_count: reciprocal_ranks.len(),
        fingerprint: EvalFingerprint {
            alpha: pipeline.config.alpha,
            k_display: pipeline.config.k_display,
            n_candidates: pipeline.config.n_candidates,
            model_hash: pipeline.model_hash.clone(),
            cases_hash: cases_hash(cases),
        },
        reciprocal_ranks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub control_mrr: f64,
    pub test_mrr: f64,
    /// `(test - control) / control` in percent; absent when control is 0.
    pub lift_percent: Option<f64>,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// Two-sided exact sign test over the non-tied paired prefixes.
    pub sign_test_p: f64,
    /// `test - control` per prefix.
    pub deltas: Vec<f64>,
}

pub fn ab_compare(control: &EvalReport, test: &EvalReport) -> Result<LiftReport> {
    if control.fingerprint.cases_hash != test.fingerprint.cases_hash
        || control.reciprocal_ranks.len() != test.reciprocal_ranks.len()
    {
        return Err(Error::CaseSetMismatch);
    }
    let deltas: Vec<f64> = control
        .reciprocal_ranks
        .iter()
        .zip(&test.reciprocal_ranks)
        .map(|(c, t)| t - c)
        .collect();
    let wins = deltas.iter().filter(|d| **d > 0.0).count();
    let losses = deltas.iter().filter(|d| **d < 0.0).count();
    let lift_percent = (control.mrr > 0.0).then(|| (test.mrr - control.mrr) / control.mrr * 100.0);
    Ok(LiftReport {
        control_mrr: control.mrr,
        test_mrr: test.mrr,
        lift_percent,
        wins,
        losses,
        ties: deltas.len() - wins - losses,
        sign_test_p: sign_test(wins, losses),
        deltas,
    })
}

/// Two-sided exact binomial sign test p-value.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if n == 0 {
        return 1.0;
    }
    let k = wins.min(losses) as u64;
    let binom = Binomial::new(0.5, n).expect("valid binomial");
    (2.0 * binom.cdf(k)).min(1.0)
}
