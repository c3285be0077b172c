//! Runs a preset through the harness and prints its aggregate metric rows.
//!
//! `cargo run --release --example run_preset -- fp-nongaussian [out-dir]`

use mirror_langevin::harness::config::ExperimentConfig;
use mirror_langevin::harness::output::AGGREGATE_RUN;
use mirror_langevin::harness::run::{run_experiment, run_in_memory};
use mirror_langevin::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "gengauss-desk".into());
    if let Some(out) = args.next() {
        let summary = run_experiment(&ExperimentConfig::new(&preset, out))?;
        println!("wrote {} rows to {}", summary.rows, summary.output_dir.display());
        return Ok(());
    }
    let (outcome, meta) = run_in_memory(&ExperimentConfig::new(&preset, "unused"))?;
    println!("{} ({})", meta["preset"], meta["summary"]);
    let mut last = std::collections::BTreeMap::new();
    for r in outcome.metrics.rows.iter().filter(|r| r.run == AGGREGATE_RUN || outcome.runs_total <= 1) {
        last.insert((r.sampler.clone(), r.metric), (r.iter, r.value));
    }
    for ((sampler, metric), (iter, value)) in last {
        println!("{sampler:<20} {metric:<22} iter {iter:>6}: {value:.4e}");
    }
    Ok(())
}
