//! Runs the synthetic end-to-end experiment and prints a summary.
//!
//! `cargo run --release -p sqac-core --example planted -- [n_queries] [embedding_dim]`

use std::time::Instant;

use sqac_core::experiment::{run_experiment, ExperimentConfig};

fn main() -> sqac_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::default();
    if let Some(n) = args.next() {
        cfg.synth.n_queries = n.parse().expect("n_queries");
    }
    if let Some(d) = args.next() {
        cfg.train.embedding_dim = d.parse().expect("embedding_dim");
    }
    let start = Instant::now();
    let out = run_experiment(&cfg)?;
    let r = &out.train_report;
    println!(
        "train rows {} | best epoch {} of {} | val mse {:.5} vs baseline {:.5}",
        r.train_rows,
        r.best_epoch,
        r.history.len(),
        r.best_validation_mse,
        r.baseline_validation_mse
    );
    println!(
        "mrr control {:.4} test {:.4} | lift {:?}% | wins {} losses {} ties {} | p {:.3e}",
        out.lift.control_mrr,
        out.lift.test_mrr,
        out.lift.lift_percent,
        out.lift.wins,
        out.lift.losses,
        out.lift.ties,
        out.lift.sign_test_p
    );
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
