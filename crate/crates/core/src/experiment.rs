//! End-to-end offline run on synthetic logs: generate, aggregate the first
//! year, train, index, then replay searches sampled from the following year
//! with and without the seasonality signal.

use serde::{Deserialize, Serialize};

use crate::eval::{
    ab_compare, gen_cases, run_eval, sample_cases, EvalReport, LiftReport, Pipeline,
};
use crate::index::{CompletionIndex, IndexEntry};
use crate::loglab::{
    seasonality_targets, synth_corpus, IngestReport, LogEvent, MonthlyVolumeTable,
    SeasonalityTarget, SynthQuery, SynthSpec, DEFAULT_K_THRESHOLD,
};
use crate::ranker::{l1_score, EngagementRecord, L1Weights, L2Config, ProfileScorer};
use crate::seasonnet::{train, EmbeddingInit, SeasonModel, TrainConfig, TrainReport};
use crate::{Error, Month, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must cover at least two years: the first trains, the second replays.
    pub synth: SynthSpec,
    pub train: TrainConfig,
    pub l2: L2Config,
    pub l1_weights: L1Weights,
    pub k_threshold: u64,
    pub n_cases: usize,
    pub case_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            synth: SynthSpec {
                years: 2,
                ..SynthSpec::default()
            },
            train: TrainConfig::default(),
            l2: L2Config::default(),
            l1_weights: L1Weights::default(),
            k_threshold: DEFAULT_K_THRESHOLD,
            n_cases: 2000,
            case_seed: 11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub queries: Vec<SynthQuery>,
    pub targets: Vec<SeasonalityTarget>,
    pub model: SeasonModel,
    pub train_report: TrainReport,
    pub index: CompletionIndex,
    pub cases: Vec<(String, Month)>,
    pub control: EvalReport,
    pub test: EvalReport,
    pub lift: LiftReport,
}

/// Deterministic stand-in for engagement logs: impressions follow search
/// volume, click and add-to-cart rates vary per query.
pub fn synthetic_engagement(query: &str, frequency: u64) -> EngagementRecord {
    let h = crate::fingerprint(query.as_bytes());
    let unit = |s: &str| u32::from_str_radix(s, 16).unwrap() as f64 / u32::MAX as f64;
    let ctr = 0.05 + 0.30 * unit(&h[0..8]);
    let cart_rate = 0.05 + 0.25 * unit(&h[8..16]);
    let impressions = 10.0 * frequency as f64;
    let clicks = impressions * ctr;
    EngagementRecord {
        query: query.to_owned(),
        add_to_carts: clicks * cart_rate,
        clicks,
        impressions,
    }
}

/// One index entry per query of `table` with its annual volume and the L1
/// score of its synthetic engagement.
pub fn corpus_from_volume(
    table: &MonthlyVolumeTable,
    weights: &L1Weights,
) -> Result<Vec<IndexEntry>> {
    table
        .rows()
        .map(|(q, row)| {
            let f: u64 = row.iter().sum();
            Ok(IndexEntry::new(
                q,
                f,
                l1_score(&synthetic_engagement(q, f), weights)?,
            ))
        })
        .collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    if config.synth.years < 2 {
        return Err(Error::InvalidConfig(
            "the experiment needs at least two synthetic years".into(),
        ));
    }
    let corpus = synth_corpus(&config.synth)?;
    let train_year = config.synth.start_year;
    let lines: Vec<String> = corpus
        .events_for_year(train_year)
        .map(LogEvent::to_line)
        .collect();
    let ingest = IngestReport::from_lines(lines.iter().map(String::as_str))?;
    let targets = seasonality_targets(&ingest.table, config.k_threshold)?;
    let (model, train_report) = train(&targets, EmbeddingInit::Corpus, &config.train)?;

    let index = CompletionIndex::build(corpus_from_volume(&ingest.table, &config.l1_weights)?)?;
    let replay: Vec<LogEvent> = corpus.events_for_year(train_year + 1).cloned().collect();
    let cases = sample_cases(&replay, config.n_cases, config.case_seed)?;
    let replay_cases = gen_cases(&cases)?;

    let model_hash = model.fingerprint();
    let scorer = ProfileScorer::new(&model, index.entries().iter().map(|e| e.query.as_str()));
    let pipeline = |alpha| Pipeline {
        index: &index,
        scorer: &scorer,
        config: config.l2.with_alpha(alpha),
        model_hash: model_hash.clone(),
    };
    let control = run_eval(&replay_cases, &pipeline(0.0))?;
    let test = run_eval(&replay_cases, &pipeline(config.l2.alpha))?;
    let lift = ab_compare(&control, &test)?;
    Ok(ExperimentOutcome {
        queries: corpus.queries,
        targets,
        model,
        train_report,
        index,
        cases,
        control,
        test,
        lift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engagement_is_deterministic_and_scales_with_volume() {
        let a = synthetic_engagement("winter scarf", 100);
        assert_eq!(a, synthetic_engagement("winter scarf", 100));
        let b = synthetic_engagement("winter scarf", 200);
        assert!((b.clicks - 2.0 * a.clicks).abs() < 1e-9);
        assert!(a.clicks <= a.impressions && a.add_to_carts <= a.clicks);
    }

    #[test]
    fn rejects_single_year() {
        let cfg = ExperimentConfig {
            synth: SynthSpec::default(),
            ..Default::default()
        };
        assert!(matches!(run_experiment(&cfg), Err(Error::InvalidConfig(_))));
    }
}
