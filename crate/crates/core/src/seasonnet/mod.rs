//! Seasonality regressor: `(query, month) -> score in [0, 1]`.
//!
//! A query is embedded as the mean of its token vectors, concatenated with a
//! one-hot month and passed through relu hidden layers (with dropout during
//! training) into one linear output unit. Training minimises squared error
//! against the log-derived seasonality targets with Adam.

mod adam;
mod model;
mod persist;
mod train;
mod vocab;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use model::{
    mse_loss, Dense, DenseGrad, ForwardCache, Gradients, Pass, SeasonModel, DEFAULT_DROPOUT, MONTHS,
};
pub use persist::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{train, EmbeddingInit, EpochMetrics, TrainConfig, TrainReport, MIN_TARGETS};
pub use vocab::{
    corpus_vocab, load_embeddings, parse_embeddings, tokenize, Embeddings, Vocab, UNK_TOKEN,
};
