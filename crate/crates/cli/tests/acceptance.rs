//! Acceptance checks. Each prints one PASS/FAIL line with its measurements.
//!
//! The process exits non-zero if any check fails, except the service latency
//! check: its result depends on the host (client and server share the same
//! cores), so it only affects the exit status when `SQAC_ACCEPTANCE_STRICT=1`.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqac_cli::service::{router, AppState, Snapshot, SuggestResponse};
use sqac_core::eval::{ab_compare, gen_cases, run_eval, Pipeline};
use sqac_core::experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
use sqac_core::index::{read_corpus, CompletionIndex, IndexEntry, Order};
use sqac_core::loglab::{read_targets, seasonality_targets, MonthlyVolumeTable, SynthSpec};
use sqac_core::ranker::{l2_rerank, L2Config, ProfileScorer, TableScorer};
use sqac_core::seasonnet::{
    corpus_vocab, load_model, save_model, Embeddings, Pass, SeasonModel, TrainConfig, Vocab,
};
use sqac_core::Month;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(id: u8, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "{} [{id}] {name}: {}; {:.2}s (limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn seasonality_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut max_err: f64 = 0.0;
    let mut max_sum_dev: f64 = 0.0;
    let mut checked = 0usize;
    for _ in 0..100 {
        let mut table = MonthlyVolumeTable::new();
        let n = rng.random_range(1..=50);
        for q in 0..n {
            for m in Month::all() {
                let c = if rng.random_bool(0.2) {
                    0
                } else {
                    rng.random_range(0..500)
                };
                table.add(&format!("query {q}"), m, c);
            }
        }
        for m in Month::all() {
            table.add_background(m, rng.random_range(1..10_000));
        }
        let k = rng.random_range(1..=600);
        let got = seasonality_targets(&table, k).expect("targets");

        let totals = table.month_totals();
        let mut want = Vec::new();
        for (q, row) in table.rows() {
            if row.iter().sum::<u64>() < k {
                continue;
            }
            let denom: f64 = (0..12).map(|m| row[m] as f64 / totals[m] as f64).sum();
            for m in 0..12 {
                want.push((q.to_owned(), m, (row[m] as f64 / totals[m] as f64) / denom));
            }
        }
        if got.len() != want.len() {
            return check(
                false,
                format!("{} targets, oracle has {}", got.len(), want.len()),
            );
        }
        for (g, (q, m, v)) in got.iter().zip(&want) {
            if &g.query != q || g.month.index() != *m {
                return check(false, format!("row mismatch at {q} month {}", m + 1));
            }
            max_err = max_err.max((g.value - v).abs());
        }
        for chunk in got.chunks(12) {
            let s: f64 = chunk.iter().map(|t| t.value).sum();
            max_sum_dev = max_sum_dev.max((s - 1.0).abs());
        }
        checked += got.len();
    }
    check(
        max_err <= 1e-12 && max_sum_dev <= 1e-9,
        format!("{checked} values, max |err| {max_err:.2e} (<= 1e-12), max |sum-1| {max_sum_dev:.2e} (<= 1e-9)"),
    )
}

fn gradient_check() -> Outcome {
    const STEP: f64 = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for batch_seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(batch_seed);
        let vocab = Vocab::from_tokens((0..12).map(|i| format!("w{i}")));
        let emb = Embeddings::random_uniform(vocab, 8, 0.5, batch_seed);
        let mut model = SeasonModel::new(emb, &[16, 8], 0.2, batch_seed + 1000).expect("model");
        let batch: Vec<(Vec<usize>, Month, f64)> = (0..rng.random_range(2..8))
            .map(|_| {
                let n = rng.random_range(1..5);
                (
                    (0..n).map(|_| rng.random_range(0..13)).collect(),
                    Month::new(rng.random_range(1..=12)).unwrap(),
                    rng.random(),
                )
            })
            .collect();
        let loss = |m: &SeasonModel| {
            batch
                .iter()
                .map(|(ids, month, t)| {
                    (m.forward(&m.embeddings.mean_of(ids), *month, Pass::Infer)
                        .unwrap()
                        .0
                        - t)
                        .powi(2)
                })
                .sum::<f64>()
                / batch.len() as f64
        };
        let caches: Vec<_> = batch
            .iter()
            .map(|(ids, month, t)| (model.forward_ids(ids, *month, Pass::Infer).unwrap().1, *t))
            .collect();
        let items: Vec<_> = caches.iter().map(|(c, t)| (c, *t)).collect();
        let grads = model.backward(&items).unwrap().to_dense(&model);
        for (t, g) in grads.iter().enumerate() {
            for (i, analytic) in g.iter().enumerate() {
                let orig = model.tensors()[t][i];
                model.tensors_mut()[t][i] = orig + STEP;
                let up = loss(&model);
                model.tensors_mut()[t][i] = orig - STEP;
                let down = loss(&model);
                model.tensors_mut()[t][i] = orig;
                let numeric = (up - down) / (2.0 * STEP);
                worst = worst
                    .max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
                checked += 1;
            }
        }
    }
    check(
        worst <= 1e-4,
        format!("{checked} partials over 20 batches, max relative error {worst:.2e} (<= 1e-4)"),
    )
}

fn planted_config() -> ExperimentConfig {
    ExperimentConfig {
        synth: SynthSpec {
            n_queries: 5000,
            seasonal_fraction: 0.5,
            years: 2,
            seed: 2024,
            ..SynthSpec::default()
        },
        ..ExperimentConfig::default()
    }
}

fn planted_learning(out: &ExperimentOutcome) -> Outcome {
    let r = &out.train_report;
    let held: BTreeSet<&str> = r.validation_queries.iter().map(String::as_str).collect();
    let mut planted = 0;
    let mut hits = 0;
    for q in out
        .queries
        .iter()
        .filter(|q| held.contains(q.text.as_str()))
    {
        let Some(peak) = q.peak else { continue };
        let profile = out.model.predict_all(&q.text);
        let best = (0..12)
            .max_by(|&a, &b| profile[a].total_cmp(&profile[b]))
            .unwrap();
        planted += 1;
        if Month::from_index(best).unwrap().distance(peak) <= 1 {
            hits += 1;
        }
    }
    let ratio = r.best_validation_mse / r.baseline_validation_mse;
    let share = hits as f64 / planted.max(1) as f64;
    check(
        ratio <= 0.5 && share >= 0.8 && planted > 0,
        format!(
            "{} queries, validation mse {:.5} = {ratio:.3}x baseline (<= 0.5), peak within 1 month for {hits}/{planted} = {:.1}% of held-out planted queries (>= 80%)",
            out.queries.len(),
            r.best_validation_mse,
            share * 100.0
        ),
    )
}

fn trie_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    while entries.len() < 10_000 {
        let q: String = (0..rng.random_range(1..10))
            .map(|_| b"abcdefgh "[rng.random_range(0..9)] as char)
            .collect();
        let q = sqac_core::normalize_query(&q);
        if !q.is_empty() && seen.insert(q.clone()) {
            entries.push(IndexEntry::new(
                q,
                rng.random_range(1..100),
                rng.random_range(0..40) as f64,
            ));
        }
    }
    let index = CompletionIndex::build(entries.clone()).expect("index");
    let mut compared = 0;
    for _ in 0..200 {
        let src = &entries[rng.random_range(0..entries.len())].query;
        let prefix = &src[..rng.random_range(1..=src.len())];
        for order in [Order::Mpc, Order::L1] {
            let got: Vec<&str> = index
                .complete(prefix, 10, order)
                .iter()
                .map(|c| c.entry.query.as_str())
                .collect();
            let p = sqac_core::normalize_prefix(prefix);
            let mut scan: Vec<&IndexEntry> =
                entries.iter().filter(|e| e.query.starts_with(&p)).collect();
            let key = |e: &IndexEntry| match order {
                Order::Mpc => e.frequency as f64,
                Order::L1 => e.l1_score,
            };
            scan.sort_by(|a, b| {
                key(b)
                    .total_cmp(&key(a))
                    .then_with(|| a.query.cmp(&b.query))
            });
            let want: Vec<&str> = scan.iter().take(10).map(|e| e.query.as_str()).collect();
            if got != want {
                return check(
                    false,
                    format!("prefix {prefix:?} ({order:?}): {got:?} vs {want:?}"),
                );
            }
            compared += 1;
        }
    }
    check(
        true,
        format!("10000 entries, {compared} prefix/order lists identical to linear scan"),
    )
}

fn mrr_lift(out: &ExperimentOutcome) -> Outcome {
    let cases = gen_cases(&out.cases).expect("cases");
    let hash = out.model.fingerprint();
    let scorer = ProfileScorer::new(
        &out.model,
        out.index.entries().iter().map(|e| e.query.as_str()),
    );
    let run = |alpha| {
        let p = Pipeline {
            index: &out.index,
            scorer: &scorer,
            config: L2Config::default().with_alpha(alpha),
            model_hash: hash.clone(),
        };
        run_eval(&cases, &p).expect("eval")
    };
    let control = run(0.0);
    let test = run(0.3);
    let lift = ab_compare(&control, &test).expect("paired");
    check(
        lift.test_mrr > lift.control_mrr && lift.sign_test_p < 0.05 && control.prefix_count >= 2000,
        format!(
            "{} cases / {} prefixes, MRR control {:.4} test {:.4} (lift {:+.2}%), wins {} losses {}, sign test p {:.2e} (< 0.05)",
            control.case_count,
            control.prefix_count,
            lift.control_mrr,
            lift.test_mrr,
            lift.lift_percent.unwrap_or(f64::NAN),
            lift.wins,
            lift.losses,
            lift.sign_test_p
        ),
    )
}

fn memo_scenario() -> Outcome {
    // Hand arithmetic (alpha 0.3, minmax(l1) = (l1 - 10) / 100):
    //   memorial day flowers         0.7*0.65 + 0.3*0.95 = 0.740
    //   memory foam mattress topper  0.7*1.00 + 0.3*0.08 = 0.724
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let open =
        |n: &str| std::io::BufReader::new(std::fs::File::open(dir.join(n)).expect("fixture"));
    let index = CompletionIndex::build(read_corpus(open("memo_corpus.tsv")).unwrap()).unwrap();
    let scorer = TableScorer::from_targets(&read_targets(open("memo_seasonality.tsv")).unwrap());
    let cands = index.complete("memo", 50, Order::L1);
    let rank = |alpha| {
        l2_rerank(
            &cands,
            Month::MAY,
            &scorer,
            &L2Config::default().with_alpha(alpha),
        )
    };
    let control = rank(0.0);
    let test = rank(0.3);
    let pass = control[0].query == "memory foam mattress topper"
        && control[0].seasonality < 0.5
        && test[0].query == "memorial day flowers"
        && (test[0].final_score - 0.740).abs() < 1e-12
        && (test[1].final_score - 0.724).abs() < 1e-12;
    check(
        pass,
        format!(
            "control first {:?}, test first {:?} ({:.3} vs runner-up {:.3})",
            control[0].query, test[0].query, test[0].final_score, test[1].final_score
        ),
    )
}

fn determinism(out: &ExperimentOutcome) -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("model.sqac");
    save_model(&out.model, &path).expect("save");
    let back = load_model(&path).expect("load");
    let mut predictions = 0;
    let mut identical = true;
    for q in out
        .queries
        .iter()
        .take(500)
        .map(|q| q.text.as_str())
        .chain(["winter scarf", "unseen words"])
    {
        for m in Month::all() {
            identical &= out.model.predict(q, m).to_bits() == back.predict(q, m).to_bits();
            predictions += 1;
        }
    }

    let small = ExperimentConfig {
        synth: SynthSpec {
            n_queries: 800,
            years: 2,
            seed: 99,
            ..SynthSpec::default()
        },
        train: TrainConfig {
            embedding_dim: 32,
            hidden: vec![32, 16],
            epochs: 10,
            ..TrainConfig::default()
        },
        n_cases: 300,
        ..ExperimentConfig::default()
    };
    let a = run_experiment(&small).expect("first run");
    let b = run_experiment(&small).expect("second run");
    let same_reports = a.control == b.control && a.test == b.test && a.lift == b.lift;
    let same_model = a.model.to_bytes() == b.model.to_bytes();
    check(
        identical && same_reports && same_model,
        format!(
            "{predictions} predictions bit-identical after save/load: {identical}; two pipeline runs give identical eval reports: {same_reports}, identical model bytes: {same_model}"
        ),
    )
}

fn latency_index(n: usize) -> (CompletionIndex, Vocab) {
    const SYLLABLES: [&str; 24] = [
        "ba", "ko", "ri", "ten", "lu", "mar", "so", "vi", "del", "ga", "po", "ne", "sha", "tur",
        "fi", "mo", "qua", "ze", "lin", "da", "ro", "ca", "wen", "pi",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let words: Vec<String> = (0..600)
        .map(|_| {
            (0..rng.random_range(2..4))
                .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
                .collect()
        })
        .collect::<BTreeSet<String>>()
        .into_iter()
        .collect();
    let mut seen = BTreeSet::new();
    let mut entries = Vec::with_capacity(n);
    while entries.len() < n {
        let q = (0..rng.random_range(1..4))
            .map(|_| words[rng.random_range(0..words.len())].as_str())
            .collect::<Vec<_>>()
            .join(" ");
        if seen.insert(q.clone()) {
            let f = rng.random_range(1..100_000u64);
            entries.push(IndexEntry::new(q, f, f as f64 * rng.random_range(0.1..1.0)));
        }
    }
    let vocab = corpus_vocab(words.iter().map(String::as_str), 1);
    (CompletionIndex::build(entries).expect("index"), vocab)
}

fn percentile(sorted: &[Duration], p: f64) -> Duration {
    sorted[((sorted.len() as f64 * p).ceil() as usize).clamp(1, sorted.len()) - 1]
}

fn service_latency() -> Outcome {
    const CONCURRENCY: usize = 100;
    const PER_WORKER: usize = 100;
    let (index, vocab) = latency_index(100_000);
    let model = SeasonModel::new(
        Embeddings::random_uniform(vocab, 300, 0.05, 1),
        &[128, 64],
        0.2,
        1,
    )
    .expect("model");
    let prep = Instant::now();
    let snapshot = Snapshot::new(index, model);
    let prep = prep.elapsed();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let prefixes: Vec<String> = (0..CONCURRENCY * PER_WORKER)
        .map(|_| {
            let q = &snapshot.index.entries()[rng.random_range(0..snapshot.index.len())].query;
            let cut = q
                .char_indices()
                .nth(rng.random_range(1..=6))
                .map_or(q.len(), |(i, _)| i);
            q[..cut].trim_end().to_owned()
        })
        .collect();
    let state = Arc::new(AppState::in_memory(snapshot, L2Config::default()));
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("runtime");
    let latencies = runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
        let client = reqwest::Client::builder()
            .pool_max_idle_per_host(CONCURRENCY)
            .build()
            .unwrap();
        let prefixes = Arc::new(prefixes);
        let run = |measure: bool| {
            let tasks: Vec<_> = (0..CONCURRENCY)
                .map(|w| {
                    let client = client.clone();
                    let base = base.clone();
                    let prefixes = prefixes.clone();
                    tokio::spawn(async move {
                        let mut out = Vec::new();
                        let count = if measure { PER_WORKER } else { 5 };
                        for i in 0..count {
                            let p = &prefixes[w * PER_WORKER + i];
                            let url = format!(
                                "{base}/complete?prefix={}&month={}",
                                p.replace(' ', "%20"),
                                1 + i % 12
                            );
                            let start = Instant::now();
                            let body: SuggestResponse =
                                client.get(url).send().await.unwrap().json().await.unwrap();
                            out.push((start.elapsed(), Duration::from_micros(body.latency_micros)));
                            assert!(body.suggestions.len() <= 10);
                        }
                        out
                    })
                })
                .collect();
            async move {
                let mut all = Vec::new();
                for t in tasks {
                    all.extend(t.await.unwrap());
                }
                all
            }
        };
        run(false).await;
        run(true).await
    });
    let mut server: Vec<Duration> = latencies.iter().map(|l| l.1).collect();
    let mut latencies: Vec<Duration> = latencies.into_iter().map(|l| l.0).collect();
    latencies.sort();
    server.sort();
    let p50 = percentile(&latencies, 0.50);
    let p99 = percentile(&latencies, 0.99);
    check(
        p50 <= Duration::from_millis(2) && p99 <= Duration::from_millis(10),
        format!(
            "{} requests at {CONCURRENCY} concurrent on {} cpu(s), client-side p50 {:.3}ms (<= 2) p99 {:.3}ms (<= 10); in-handler p50 {:.3}ms p99 {:.3}ms; profile precompute {:.1}s",
            latencies.len(),
            std::thread::available_parallelism().map_or(1, |n| n.get()),
            p50.as_secs_f64() * 1e3,
            p99.as_secs_f64() * 1e3,
            percentile(&server, 0.50).as_secs_f64() * 1e3,
            percentile(&server, 0.99).as_secs_f64() * 1e3,
            prep.as_secs_f64()
        ),
    )
}

fn main() {
    let secs = Duration::from_secs;
    let mut results = Vec::new();
    results.push(report(1, "seasonality oracle", secs(5), seasonality_oracle));
    results.push(report(2, "gradient check", secs(30), gradient_check));

    let mut planted = None;
    results.push(report(
        3,
        "planted learning",
        secs(600),
        || match run_experiment(&planted_config()) {
            Ok(out) => {
                let o = planted_learning(&out);
                planted = Some(out);
                o
            }
            Err(e) => check(false, format!("pipeline failed: {e}")),
        },
    ));
    results.push(report(4, "trie oracle", secs(5), trie_oracle));
    match &planted {
        Some(out) => {
            results.push(report(5, "MRR lift", secs(300), || mrr_lift(out)));
            results.push(report(6, "memo scenario", secs(5), memo_scenario));
            results.push(report(7, "determinism and persistence", secs(600), || {
                determinism(out)
            }));
        }
        None => {
            println!("FAIL [5] MRR lift: planted pipeline unavailable");
            results.push(false);
            results.push(report(6, "memo scenario", secs(5), memo_scenario));
            println!("FAIL [7] determinism and persistence: planted pipeline unavailable");
            results.push(false);
        }
    }
    let latency = report(8, "service latency", secs(600), service_latency);
    results.push(latency);

    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    let strict = std::env::var("SQAC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let gating_failed = results[..7].iter().any(|p| !p) || (strict && !latency);
    if !latency && !strict {
        println!("note: the service latency result is host-dependent and does not set the exit status (SQAC_ACCEPTANCE_STRICT=1 to make it)");
    }
    if gating_failed {
        std::process::exit(1);
    }
}
