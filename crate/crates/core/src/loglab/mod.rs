//! Query-log aggregation and seasonality targets.
//!
//! Raw events (`query<TAB>YYYY-MM<TAB>count`) are summed into a
//! [`MonthlyVolumeTable`] holding the per-query monthly traffic `t_qm` and the
//! overall monthly traffic `t_m`. For every query above a volume threshold the
//! seasonality of month `m` is
//!
//! ```text
//! V_qm = (t_qm / t_m) / Σ_m' (t_qm' / t_m')
//! ```
//!
//! which lies in `[0, 1]` and sums to one over the twelve months.

mod events;
mod synth;
mod targets;
mod volume;

pub use events::{
    ingest_events, ingest_files, parse_events, read_event_files, IngestReport, LogEvent,
    MalformedLine, MonthKey,
};
pub use synth::{synth_corpus, synth_logs, SynthCorpus, SynthQuery, SynthSpec};
pub use targets::{
    read_targets, seasonality_targets, seasonality_targets_with, write_targets, SeasonalityTarget,
    TargetOptions, DEFAULT_K_THRESHOLD,
};
pub use volume::{merge_years, MonthlyVolumeTable};
