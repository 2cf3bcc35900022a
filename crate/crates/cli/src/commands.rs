use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sqac_core::eval::{
    ab_compare, gen_cases, read_cases, run_eval, sample_cases, write_cases, Pipeline,
};
use sqac_core::experiment::corpus_from_volume;
use sqac_core::index::{read_corpus, save_index, write_corpus, CompletionIndex, Order};
use sqac_core::loglab::{
    ingest_files, read_event_files, read_targets, seasonality_targets_with, synth_corpus,
    write_targets, LogEvent, TargetOptions,
};
use sqac_core::ranker::{l2_rerank, ProfileScorer};
use sqac_core::seasonnet::{load_embeddings, load_model, save_model, train, EmbeddingInit};
use sqac_core::Month;

use crate::service::{serve, AppState, ArtifactPaths};
use crate::{CliError, Config};

#[derive(Debug, Parser)]
#[command(name = "sqac", version, about = "Seasonality-aware query autocomplete")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic query logs with planted seasonal tokens.
    Synth(SynthArgs),
    /// Aggregate logs into seasonality targets (and optionally an index corpus).
    Ingest(IngestArgs),
    /// Sample replay cases from logs, weighted by search count.
    Cases(CasesArgs),
    /// Train the seasonality model.
    Train(TrainArgs),
    /// Print a query's predicted seasonality.
    Predict(PredictArgs),
    /// Build the completion index from a corpus TSV.
    Index(IndexArgs),
    /// Complete and re-rank one prefix.
    Rerank(RerankArgs),
    /// Replay cases and report mean reciprocal rank.
    Eval(EvalArgs),
    /// Run the HTTP completion service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator description; the `[synth]` config table otherwise.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_queries: Option<usize>,
    #[arg(long)]
    pub years: Option<u32>,
    /// Also write `query<TAB>peak_month` for every generated query (0 = none).
    #[arg(long)]
    pub truth_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Event files, read as one stream.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Targets TSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an index corpus with synthetic engagement L1 scores.
    #[arg(long)]
    pub corpus_out: Option<PathBuf>,
    /// Minimum total count for a query to produce targets.
    #[arg(long)]
    pub k: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CasesArgs {
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n: Option<usize>,
    /// Only sample events from this year.
    #[arg(long)]
    pub year: Option<i32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Pre-trained embeddings in text format; otherwise a corpus vocabulary is used.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Embedding width.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Write the training report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub query: String,
    /// 1-12; all months when omitted.
    #[arg(long)]
    pub month: Option<u8>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub prefix: String,
    #[arg(long)]
    pub month: u8,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Candidates fetched from the index.
    #[arg(long)]
    pub n: Option<usize>,
    /// Suggestions kept after re-ranking.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub cases: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Also run this alpha as the control and report the paired lift.
    #[arg(long)]
    pub baseline_alpha: Option<f64>,
    /// Write the full report (with per-prefix reciprocal ranks) as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    /// Month used when a request omits one; the wall clock otherwise.
    #[arg(long)]
    pub month: Option<u8>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })
}

fn flush(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    flush(w, path)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.reseed(seed);
    }
    match cli.command {
        Command::Synth(a) => synth(&config, cli.seed, a),
        Command::Ingest(a) => ingest(&config, a),
        Command::Cases(a) => cases(&config, a),
        Command::Train(a) => train_cmd(&config, a),
        Command::Predict(a) => predict(a),
        Command::Index(a) => index(a),
        Command::Rerank(a) => rerank(&config, a),
        Command::Eval(a) => eval(&config, a),
        Command::Serve(a) => serve_cmd(&config, a),
    }
}

fn synth(config: &Config, seed: Option<u64>, a: SynthArgs) -> Result<(), CliError> {
    let mut spec = match &a.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => config.synth.clone(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(n) = a.n_queries {
        spec.n_queries = n;
    }
    if let Some(y) = a.years {
        spec.years = y;
    }
    let corpus = synth_corpus(&spec)?;
    let mut w = create(&a.out)?;
    w.write_all(corpus.to_tsv().as_bytes())
        .map_err(|source| CliError::Io {
            path: a.out.clone(),
            source,
        })?;
    flush(w, &a.out)?;
    if let Some(path) = &a.truth_out {
        let mut w = create(path)?;
        for q in &corpus.queries {
            writeln!(w, "{}\t{}", q.text, q.peak.map_or(0, Month::get)).map_err(|source| {
                CliError::Io {
                    path: path.clone(),
                    source,
                }
            })?;
        }
        flush(w, path)?;
    }
    eprintln!(
        "{} queries, {} events",
        corpus.queries.len(),
        corpus.events.len()
    );
    Ok(())
}

fn ingest(config: &Config, a: IngestArgs) -> Result<(), CliError> {
    let report = ingest_files(&a.inputs)?;
    for bad in &report.malformed {
        eprintln!("skipped line {}: {}", bad.line, bad.reason);
    }
    let opts = TargetOptions {
        k_threshold: a.k.unwrap_or(config.ingest.k_threshold),
        sample_fraction: config.ingest.sample_fraction,
        sample_seed: config.ingest.sample_seed,
    };
    let targets = seasonality_targets_with(&report.table, &opts)?;
    let mut w = create(&a.out)?;
    write_targets(&mut w, &targets)?;
    flush(w, &a.out)?;
    if let Some(path) = &a.corpus_out {
        let mut w = create(path)?;
        write_corpus(
            &mut w,
            &corpus_from_volume(&report.table, &config.l1_weights)?,
        )?;
        flush(w, path)?;
    }
    eprintln!(
        "{} events, {} malformed, {} queries, {} targets",
        report.events,
        report.malformed.len(),
        report.table.len(),
        targets.len()
    );
    Ok(())
}

fn cases(config: &Config, a: CasesArgs) -> Result<(), CliError> {
    let (events, malformed) = read_event_files(&a.inputs)?;
    if !malformed.is_empty() {
        eprintln!("skipped {} malformed lines", malformed.len());
    }
    let events: Vec<LogEvent> = events
        .into_iter()
        .filter(|e| a.year.is_none_or(|y| e.month_key.year == y))
        .collect();
    let pairs = sample_cases(
        &events,
        a.n.unwrap_or(config.eval.n_cases),
        config.eval.case_seed,
    )?;
    let mut w = create(&a.out)?;
    write_cases(&mut w, &pairs)?;
    flush(w, &a.out)
}

fn train_cmd(config: &Config, a: TrainArgs) -> Result<(), CliError> {
    let targets = read_targets(open(&a.targets)?)?;
    let mut train_config = config.train.clone();
    if let Some(dim) = a.dim {
        train_config.embedding_dim = dim;
    }
    let init = match &a.embeddings {
        Some(path) => EmbeddingInit::Pretrained(load_embeddings(path, train_config.embedding_dim)?),
        None => EmbeddingInit::Corpus,
    };
    let (model, report) = train(&targets, init, &train_config)?;
    save_model(&model, &a.out)?;
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    eprintln!(
        "best epoch {} of {}: validation mse {:.6} (constant baseline {:.6})",
        report.best_epoch,
        report.history.len(),
        report.best_validation_mse,
        report.baseline_validation_mse
    );
    Ok(())
}

#[derive(Serialize)]
struct Prediction {
    query: String,
    month: u8,
    seasonality: f64,
}

fn predict(a: PredictArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let months: Vec<Month> = match a.month {
        Some(m) => vec![Month::new(m)?],
        None => Month::all().collect(),
    };
    let out: Vec<Prediction> = months
        .into_iter()
        .map(|m| Prediction {
            query: sqac_core::normalize_query(&a.query),
            month: m.get(),
            seasonality: model.predict(&a.query, m),
        })
        .collect();
    print_json(&out)
}

fn index(a: IndexArgs) -> Result<(), CliError> {
    let index = CompletionIndex::build(read_corpus(open(&a.corpus)?)?)?;
    save_index(&index, &a.out)?;
    eprintln!("{} entries, {} nodes", index.len(), index.node_count());
    Ok(())
}

fn rerank(config: &Config, a: RerankArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let index = sqac_core::index::load_index(&a.index)?;
    let mut l2 = config.l2.with_alpha(a.alpha.unwrap_or(config.l2.alpha));
    l2.n_candidates = a.n.unwrap_or(l2.n_candidates);
    l2.k_display = a.k.unwrap_or(l2.k_display);
    l2.validate()?;
    let prefix = sqac_core::normalize_prefix(&a.prefix);
    let candidates = index.complete(&prefix, l2.n_candidates, Order::L1);
    let mut out = std::io::stdout().lock();
    let write = |out: &mut std::io::StdoutLock, line: String| {
        writeln!(out, "{line}").map_err(CliError::Server)
    };
    write(
        &mut out,
        "rank\tquery\tfinal_score\tl1_score\tseasonality".into(),
    )?;
    for s in l2_rerank(&candidates, Month::new(a.month)?, &model, &l2) {
        write(
            &mut out,
            format!(
                "{}\t{}\t{:.9}\t{:.9}\t{:.9}",
                s.rank, s.query, s.final_score, s.l1_score, s.seasonality
            ),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary {
    alpha: f64,
    mrr: f64,
    model_hash: String,
    cases_hash: String,
    case_count: usize,
    prefix_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    lift: Option<LiftSummary>,
}

#[derive(Serialize)]
struct LiftSummary {
    baseline_alpha: f64,
    control_mrr: f64,
    test_mrr: f64,
    lift_percent: Option<f64>,
    wins: usize,
    losses: usize,
    ties: usize,
    sign_test_p: f64,
}

fn eval(config: &Config, a: EvalArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let index = sqac_core::index::load_index(&a.index)?;
    let cases = gen_cases(&read_cases(open(&a.cases)?)?)?;
    let alpha = a.alpha.unwrap_or(config.l2.alpha);
    let model_hash = model.fingerprint();
    let scorer = ProfileScorer::new(&model, index.entries().iter().map(|e| e.query.as_str()));
    let pipeline = |alpha| Pipeline {
        index: &index,
        scorer: &scorer,
        config: config.l2.with_alpha(alpha),
        model_hash: model_hash.clone(),
    };
    let test = run_eval(&cases, &pipeline(alpha))?;
    let mut summary = EvalSummary {
        alpha,
        mrr: test.mrr,
        case_count: test.case_count,
        prefix_count: test.prefix_count,
        model_hash: test.fingerprint.model_hash.clone(),
        cases_hash: test.fingerprint.cases_hash.clone(),
        lift: None,
    };
    if let Some(baseline_alpha) = a.baseline_alpha {
        let control = run_eval(&cases, &pipeline(baseline_alpha))?;
        let lift = ab_compare(&control, &test)?;
        summary.lift = Some(LiftSummary {
            baseline_alpha,
            control_mrr: lift.control_mrr,
            test_mrr: lift.test_mrr,
            lift_percent: lift.lift_percent,
            wins: lift.wins,
            losses: lift.losses,
            ties: lift.ties,
            sign_test_p: lift.sign_test_p,
        });
    }
    if let Some(path) = &a.out {
        write_json(path, &test)?;
    }
    print_json(&summary)
}

fn serve_cmd(config: &Config, a: ServeArgs) -> Result<(), CliError> {
    let missing =
        |what: &str| CliError::Config(format!("no {what} path given (flag or [service] table)"));
    let paths = ArtifactPaths {
        model: a
            .model
            .or_else(|| config.service.model.clone())
            .ok_or_else(|| missing("model"))?,
        index: a
            .index
            .or_else(|| config.service.index.clone())
            .ok_or_else(|| missing("index"))?,
    };
    let month = a
        .month
        .or(config.service.month)
        .map(Month::new)
        .transpose()?;
    let state = Arc::new(AppState::load(paths, config.l2)?.with_month(month));
    let bind = a.bind.unwrap_or_else(|| config.service.bind.clone());
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::Server)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .map_err(CliError::Server)?;
        eprintln!(
            "listening on http://{}",
            listener.local_addr().map_err(CliError::Server)?
        );
        serve(listener, state).await.map_err(CliError::Server)
    })
}
