use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::loglab::SeasonalityTarget;
use crate::{Error, Month, Result};

use super::{
    adam_step, corpus_vocab, AdamConfig, AdamState, Embeddings, Pass, SeasonModel, DEFAULT_DROPOUT,
};

/// Smallest target set `train` accepts.
pub const MIN_TARGETS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    /// Upper bound on epochs; early stopping may end sooner.
    pub epochs: usize,
    pub validation_fraction: f64,
    /// Hold out whole queries rather than individual rows.
    pub split_by_query: bool,
    pub patience: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// Width of randomly initialised embeddings when no pre-trained table
    /// is supplied.
    pub embedding_dim: usize,
    pub min_token_freq: usize,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            batch_size: 256,
            epochs: 50,
            validation_fraction: 0.2,
            split_by_query: true,
            patience: 5,
            seed: 7,
            hidden: vec![128, 64],
            dropout: DEFAULT_DROPOUT,
            embedding_dim: 300,
            min_token_freq: 2,
            init_scale: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.epsilon,
            self.init_scale,
        ];
        if positive.iter().any(|x| x.is_nan() || *x <= 0.0)
            || self.beta1 >= 1.0
            || self.beta2 >= 1.0
        {
            return Err(Error::InvalidConfig(
                "optimizer hyperparameters out of range".into(),
            ));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.patience == 0 || self.embedding_dim == 0
        {
            return Err(Error::InvalidConfig(
                "batch_size, epochs, patience and embedding_dim must be positive".into(),
            ));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "validation_fraction must be in (0, 1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Where the embedding table comes from.
#[derive(Debug, Clone)]
pub enum EmbeddingInit {
    Pretrained(Embeddings),
    /// Vocabulary from training queries, uniform random rows.
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub history: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_validation_mse: f64,
    /// MSE of predicting 1/12 for every validation row.
    pub baseline_validation_mse: f64,
    pub train_rows: usize,
    pub validation_rows: usize,
    pub validation_queries: Vec<String>,
    pub stopped_early: bool,
}

struct Row {
    ids: Vec<usize>,
    month: Month,
    target: f64,
}

/// Fits the regressor with Adam on batch-mean squared error, keeping the
/// parameters of the best validation epoch. The returned model is rounded to
/// `f32`, the persisted precision.
pub fn train(
    targets: &[SeasonalityTarget],
    init: EmbeddingInit,
    config: &TrainConfig,
) -> Result<(SeasonModel, TrainReport)> {
    config.validate()?;
    if targets.len() < MIN_TARGETS {
        return Err(Error::DatasetTooSmall {
            got: targets.len(),
            min: MIN_TARGETS,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let (train_idx, val_idx, validation_queries) = if config.split_by_query {
        let mut queries: Vec<&str> = targets
            .iter()
            .map(|t| t.query.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        queries.shuffle(&mut rng);
        let n_val = (queries.len() as f64 * config.validation_fraction).round() as usize;
        let held: BTreeSet<&str> = queries[..n_val.min(queries.len())]
            .iter()
            .copied()
            .collect();
        let (val, tr): (Vec<usize>, Vec<usize>) =
            (0..targets.len()).partition(|&i| held.contains(targets[i].query.as_str()));
        (tr, val, held.into_iter().map(str::to_owned).collect())
    } else {
        let mut idx: Vec<usize> = (0..targets.len()).collect();
        idx.shuffle(&mut rng);
        let n_val = (idx.len() as f64 * config.validation_fraction).round() as usize;
        let val = idx[..n_val].to_vec();
        let mut tr = idx[n_val..].to_vec();
        tr.sort_unstable();
        (tr, val, Vec::new())
    };
    if val_idx.is_empty() {
        return Err(Error::DegenerateSplit("validation"));
    }
    if train_idx.is_empty() {
        return Err(Error::DegenerateSplit("training"));
    }

    let embeddings = match init {
        EmbeddingInit::Pretrained(e) => e,
        EmbeddingInit::Corpus => {
            let train_queries: BTreeSet<&str> = train_idx
                .iter()
                .map(|&i| targets[i].query.as_str())
                .collect();
            let vocab = corpus_vocab(train_queries, config.min_token_freq);
            Embeddings::random_uniform(
                vocab,
                config.embedding_dim,
                config.init_scale,
                config.seed ^ 0x5eed,
            )
        }
    };
    let encode = |i: &usize| {
        let t = &targets[*i];
        Row {
            ids: embeddings.vocab().encode(&t.query),
            month: t.month,
            target: t.value,
        }
    };
    let train_rows: Vec<Row> = train_idx.iter().map(encode).collect();
    let val_rows: Vec<Row> = val_idx.iter().map(encode).collect();

    let mut model = SeasonModel::new(
        embeddings,
        &config.hidden,
        config.dropout,
        config.seed.wrapping_add(1),
    )?;
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(2));
    let adam = config.adam();
    let mut state = AdamState::new();

    let baseline_validation_mse = val_rows
        .iter()
        .map(|r| (r.target - 1.0 / 12.0).powi(2))
        .sum::<f64>()
        / val_rows.len() as f64;
    let mut history = Vec::new();
    let mut best = (model.clone(), 0, evaluate(&model, &val_rows)?);
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train_rows.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut sq_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut caches = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let r = &train_rows[i];
                let (out, cache) =
                    model.forward_ids(&r.ids, r.month, Pass::Train(&mut dropout_rng))?;
                sq_sum += (out - r.target).powi(2);
                caches.push((cache, r.target));
            }
            let batch: Vec<_> = caches.iter().map(|(c, t)| (c, *t)).collect();
            let grads = model.backward(&batch)?;
            adam_step(&mut model, &grads, &mut state, &adam)?;
        }
        let validation_mse = evaluate(&model, &val_rows)?;
        history.push(EpochMetrics {
            epoch,
            train_mse: sq_sum / train_rows.len() as f64,
            validation_mse,
        });
        if validation_mse < best.2 {
            best = (model.clone(), epoch, validation_mse);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (mut model, best_epoch, best_validation_mse) = best;
    model.round_to_f32();
    let report = TrainReport {
        history,
        best_epoch,
        best_validation_mse,
        baseline_validation_mse,
        train_rows: train_rows.len(),
        validation_rows: val_rows.len(),
        validation_queries,
        stopped_early,
    };
    Ok((model, report))
}

fn evaluate(model: &SeasonModel, rows: &[Row]) -> Result<f64> {
    let mut sum = 0.0;
    for r in rows {
        let (out, _) = model.forward_ids(&r.ids, r.month, Pass::Infer)?;
        sum += (out - r.target).powi(2);
    }
    Ok(sum / rows.len() as f64)
}
