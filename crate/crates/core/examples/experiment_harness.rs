//! Driving experiments through the harness: a config, replicas, rendered
//! output, and a decay curve from a sweep.
//!
//!     cargo run --release --example experiment_harness

use treecolor::harness::{run_experiment, run_sweep, ExperimentConfig, ExperimentKind, OutputFormat};
use treecolor::Result;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Couple);
    cfg.apply_text("delta = 4\nk = 3\ndepth = 3\nsamples = 40000\nseed = 21\nreplicas = 4\n")?;
    let record = run_experiment(&cfg)?;
    println!("{} replicas folded into:", record.replicas.len());
    print!("{}", record.render(OutputFormat::Json)?);

    let again = run_experiment(&cfg)?;
    assert_eq!(record.render(OutputFormat::Csv)?, again.render(OutputFormat::Csv)?);
    println!("rerun is byte-identical");

    let mut sweep = ExperimentConfig::new(ExperimentKind::Bias);
    sweep.apply_text("delta = 2\nk = 5\ndepth_range = 1..5\nsamples = 5000\nseed = 3")?;
    let (_, curve) = run_sweep(&sweep)?;
    print!("{}", curve.render(OutputFormat::Csv));

    let mut bad = ExperimentConfig::new(ExperimentKind::Unbiasing);
    bad.k = 3;
    bad.color = 4;
    match run_experiment(&bad) {
        Err(e) => println!("rejected (exit code {}): {e}", e.exit_code()),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
