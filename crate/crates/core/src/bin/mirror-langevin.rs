use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mirror_langevin::harness::config::{parse_config, ExperimentConfig, Overrides};
use mirror_langevin::harness::presets::list_presets;
use mirror_langevin::harness::run::run_experiment;
use mirror_langevin::harness::suite::{inequality_suite, property_checks};
use mirror_langevin::Result;

#[derive(Parser)]
#[command(name = "mirror-langevin", version, about = "Mirror-Langevin sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset and write metrics.csv and meta.json.
    Run {
        #[arg(long)]
        preset: String,
        /// TOML file with `preset`, `outputDir` and override keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: runs/<preset>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// `key=value`, applied after the config file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the preset registry, or the named presets.
    ListPresets { names: Vec<String> },
    /// Run the inequality suite and property oracles.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print every check, not only failures.
        #[arg(long)]
        verbose: bool,
    },
}

fn build_config(
    preset: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    overrides: &[String],
) -> Result<ExperimentConfig> {
    let mut merged = Overrides::default();
    let mut out_dir = None;
    if let Some(path) = config {
        let file = parse_config(&path)?;
        if let Some(p) = file.preset.filter(|p| *p != preset) {
            return Err(mirror_langevin::Error::Config {
                key: "preset".into(),
                reason: format!("config file names `{p}` but --preset is `{preset}`"),
            });
        }
        out_dir = file.output_dir;
        merged = file.overrides;
    }
    for assignment in overrides {
        merged.set_assignment(assignment)?;
    }
    if let Some(s) = seed {
        merged.seed = Some(s);
    }
    let dir = out.or(out_dir).unwrap_or_else(|| PathBuf::from("runs").join(&preset));
    Ok(ExperimentConfig {
        preset,
        overrides: merged,
        output_dir: dir,
    })
}

fn check(seed: u64, verbose: bool) -> Result<bool> {
    let mut checks = inequality_suite(seed)?.checks;
    checks.extend(property_checks(seed)?);
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for c in &checks {
        let e = tally.entry(c.check.as_str()).or_default();
        e.0 += 1;
        if !c.holds {
            e.1 += 1;
        }
        if verbose || !c.holds {
            let mark = if c.holds { "PASS" } else { "FAIL" };
            println!("{mark} {} [{}] lhs={:.6e} rhs={:.6e}", c.check, c.instance, c.lhs, c.rhs);
        }
    }
    for (name, (n, failed)) in &tally {
        println!("{name}: {}/{n} passed", n - failed);
    }
    let ok = tally.values().all(|(_, f)| *f == 0);
    println!("{}", if ok { "all checks passed" } else { "some checks failed" });
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            preset,
            config,
            out,
            seed,
            overrides,
        } => build_config(preset, config, out, seed, &overrides).and_then(|cfg| {
            let s = run_experiment(&cfg)?;
            println!(
                "{}: {} metric rows in {} ({} of {} runs failed)",
                s.preset,
                s.rows,
                s.output_dir.display(),
                s.runs_failed,
                s.runs_total
            );
            if s.checks.0 > 0 {
                println!("{} checks, {} failed", s.checks.0, s.checks.1);
            }
            Ok(!s.all_runs_failed())
        }),
        Command::ListPresets { names } => list_presets(&names).map(|text| {
            print!("{text}");
            true
        }),
        Command::Check { seed, verbose } => check(seed, verbose),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
