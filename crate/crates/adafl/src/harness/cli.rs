//! Command-line front end: `run`, `schedule`, and `validate` subcommands.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Result;
use crate::harness::config::RunConfig;
use crate::harness::metrics::communication_cost;
use crate::harness::{run_experiment, trace};
use crate::selection::cohort_size;

#[derive(Parser)]
#[command(name = "adafl", version, about = "Deterministic federated-learning simulator")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write trace.csv + summary.json.
    Run {
        /// Path to a TOML experiment config.
        config: PathBuf,
        /// Override the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Dotted-path config override, e.g. federation.alpha=0.8 (repeatable).
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the per-block fraction table and the projected full-run cost.
    Schedule {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Parse and validate a config file without running anything.
    Validate {
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

/// Entry point used by the `adafl` binary; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here with exit code 0
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            overrides,
        } => cmd_run(&config, seed, out, &overrides),
        Command::Schedule { config, overrides } => cmd_schedule(&config, &overrides),
        Command::Validate { config, overrides } => cmd_validate(&config, &overrides),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load(config_path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let cfg = RunConfig::load_with_overrides(config_path, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    overrides: &[String],
) -> Result<()> {
    let mut cfg = RunConfig::load_with_overrides(config_path, overrides)?;
    if let Some(seed) = seed {
        cfg.experiment.seed = seed;
    }
    cfg.validate()?;
    let out_dir = out.unwrap_or_else(|| cfg.output_dir());
    std::fs::create_dir_all(&out_dir)?;

    let result = run_experiment(&cfg)?;
    let trace_path = out_dir.join("trace.csv");
    let summary_path = out_dir.join("summary.json");
    trace::write_trace_csv(&trace_path, &result.records)?;
    trace::write_summary_json(&summary_path, &cfg, &result.summary)?;

    let s = &result.summary;
    println!(
        "{}: {} rounds, avg(last {}) {:.4}, best {:.4}, total cost {} units",
        cfg.experiment.name, s.rounds, s.metric_window, s.average_last_window, s.best_accuracy,
        s.total_cost
    );
    for t in &s.targets {
        match (t.stopping_round, t.cost) {
            (Some(round), Some(cost)) => println!(
                "  target {:.2}: reached at round {round} for {cost} units",
                t.target
            ),
            _ => println!("  target {:.2}: not reached", t.target),
        }
    }
    println!("  trace:   {}", trace_path.display());
    println!("  summary: {}", summary_path.display());
    Ok(())
}

fn cmd_schedule(config_path: &Path, overrides: &[String]) -> Result<()> {
    let cfg = load(config_path, overrides)?;
    let schedule = cfg.schedule()?;
    let m = cfg.federation.clients;
    println!("block  rounds           fraction  clients/round  block cost");
    for (index, (first, last, gamma)) in schedule.blocks().into_iter().enumerate() {
        let k = cohort_size(gamma, m);
        let block_cost = (last - first + 1) as u64 * k as u64;
        println!(
            "{:>5}  {:>6}-{:<6}  {:>8}  {:>13}  {:>10}",
            index + 1,
            first,
            last,
            format_fraction(gamma),
            k,
            block_cost,
        );
    }
    let total = communication_cost(&schedule, schedule.total_rounds(), m)?;
    println!(
        "full {}-round run: {} units",
        schedule.total_rounds(),
        total
    );
    Ok(())
}

fn cmd_validate(config_path: &Path, overrides: &[String]) -> Result<()> {
    load(config_path, overrides)?;
    println!("ok: {} parses and validates", config_path.display());
    Ok(())
}

/// Fractions print at 4 decimals with trailing zeros trimmed, so the
/// reference 5-block table reads 0.1, 0.2, 0.3, 0.4, 0.5.
fn format_fraction(gamma: f64) -> String {
    let mut s = format!("{gamma:.4}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.push('0');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_formatting_trims_zeros() {
        assert_eq!(format_fraction(0.1), "0.1");
        assert_eq!(format_fraction(0.1 + 2.0 * 0.1), "0.3");
        assert_eq!(format_fraction(0.25), "0.25");
        assert_eq!(format_fraction(0.1234), "0.1234");
        assert_eq!(format_fraction(1.0), "1.0");
    }
}
