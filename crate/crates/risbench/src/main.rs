//! Command-line benchmark driver. Exit codes: 0 on success, 2 for
//! configuration or I/O problems, 3 when solver failures exceed the
//! configured tolerance or a self test fails.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use risbench::config::load_config;
use risbench::output::write_outputs;
use risbench::sweep::{generate_frozen_channels, run_sweep};
use risbench::validate::run_self_tests;
use risbench::HarnessError;
use risopt::channel::{generate_channel_set, read_channel_file, write_channel_file};
use risopt::numerics::RngStream;
use risopt::optimizer::da_cbpg_solve;

#[derive(Parser)]
#[command(
    name = "risbench",
    version,
    about = "Monte Carlo benchmarks for joint precoder / discrete-RIS rate optimization"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance from a config and print the result.
    Solve {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Which sweep point to instantiate (index into the sweep axis).
        #[arg(long, default_value_t = 0)]
        sweep_index: usize,
        /// Which Monte Carlo trial's channel to draw.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Print a machine-readable JSON summary instead of text.
        #[arg(long)]
        json: bool,
        /// Also write the objective trace as CSV to this path.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Run the full Monte Carlo sweep and write CSV outputs.
    Sweep {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (falls back to `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replay frozen channels from this file instead of generating.
        #[arg(long)]
        channels: Option<PathBuf>,
    },
    /// Generate every channel realization for a config and freeze it.
    GenChannels {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Destination file for the frozen channel set.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in self tests and report per-check results.
    Validate,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(i32::from(code));
}

fn run(cmd: Command) -> Result<u8, HarnessError> {
    match cmd {
        Command::Solve { config, sweep_index, trial, json, trace_out } => {
            solve_cmd(&config, sweep_index, trial, json, trace_out.as_deref())
        }
        Command::Sweep { config, out, channels } => {
            sweep_cmd(&config, out.as_deref(), channels.as_deref())
        }
        Command::GenChannels { config, out } => gen_channels_cmd(&config, &out),
        Command::Validate => Ok(validate_cmd()),
    }
}

fn solve_cmd(
    config: &std::path::Path,
    sweep_index: usize,
    trial: u64,
    json: bool,
    trace_out: Option<&std::path::Path>,
) -> Result<u8, HarnessError> {
    let cfg = load_config(config)?;
    let points = cfg.sweep_points();
    let point = points.get(sweep_index).ok_or_else(|| {
        HarnessError::Config(format!(
            "sweep-index: {sweep_index} is out of range, the sweep has {} points",
            points.len()
        ))
    })?;
    let scenario = cfg.scenario(point.n_ris)?;
    let codebook = cfg.codebook(point.bits)?;
    let budget = cfg.link_budget()?;
    let channels = generate_channel_set(RngStream::new(cfg.base_seed, trial), &scenario)?;
    let sol = da_cbpg_solve(&channels, &budget, &codebook, &cfg.optimizer, cfg.n_streams, None, None)?;

    if let Some(path) = trace_out {
        let mut text = String::from("iter,f_value\n");
        for (i, f) in sol.trace.iter().enumerate() {
            text.push_str(&format!("{i},{f}\n"));
        }
        std::fs::write(path, text)?;
    }

    let phi_indices: Vec<usize> =
        sol.phi_discrete.iter().map(|&z| codebook.nearest_index(z)).collect();
    if json {
        let summary = serde_json::json!({
            "sweep": point.value,
            "n_ris": point.n_ris,
            "bits": point.bits,
            "trial": trial,
            "seed": cfg.base_seed,
            "rate_relaxed_bps_hz": sol.rate_relaxed,
            "rate_discrete_bps_hz": sol.rate_discrete,
            "iterations": sol.iterations,
            "backtrack_evals": sol.backtrack_evals,
            "restarts": sol.restarts,
            "wall_ms": sol.wall_ms,
            "phi_indices": phi_indices,
        });
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        println!(
            "instance: sweep={} (n_ris={}, bits={}), trial={}, seed={}",
            point.value, point.n_ris, point.bits, trial, cfg.base_seed
        );
        println!("rate_relaxed:  {:.6} bit/s/Hz", sol.rate_relaxed);
        println!("rate_discrete: {:.6} bit/s/Hz", sol.rate_discrete);
        println!(
            "iterations: {}  backtrack_evals: {}  restarts: {}  wall_ms: {:.3}",
            sol.iterations, sol.backtrack_evals, sol.restarts, sol.wall_ms
        );
    }
    Ok(0)
}

fn sweep_cmd(
    config: &std::path::Path,
    out: Option<&std::path::Path>,
    channels: Option<&std::path::Path>,
) -> Result<u8, HarnessError> {
    let cfg = load_config(config)?;
    let out_dir = out
        .map(PathBuf::from)
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| {
            HarnessError::Config("out: pass --out or set out_dir in the config".into())
        })?;
    let frozen = match channels {
        Some(path) => Some(read_channel_file(&mut BufReader::new(File::open(path)?))?),
        None => None,
    };
    let output = run_sweep(&cfg, frozen.as_deref())?;
    write_outputs(&out_dir, &cfg, &output)?;
    println!(
        "sweep complete: {} records across {} sweep points x {} trials -> {}",
        output.records.len(),
        cfg.sweep_points().len(),
        cfg.trials,
        out_dir.display()
    );
    if output.failed > 0 {
        eprintln!(
            "warning: {} of {} solver runs failed (rate {:.4})",
            output.failed,
            output.records.len(),
            output.failure_rate()
        );
    }
    if output.failure_rate() > cfg.max_failure_rate {
        return Err(HarnessError::FailureThreshold {
            failed: output.failed,
            total: output.records.len(),
            threshold: cfg.max_failure_rate,
        });
    }
    Ok(0)
}

fn gen_channels_cmd(config: &std::path::Path, out: &std::path::Path) -> Result<u8, HarnessError> {
    let cfg = load_config(config)?;
    let records = generate_frozen_channels(&cfg)?;
    let mut w = BufWriter::new(File::create(out)?);
    write_channel_file(&mut w, &records)?;
    println!("froze {} channel realizations -> {}", records.len(), out.display());
    Ok(0)
}

fn validate_cmd() -> u8 {
    let reports = run_self_tests();
    let mut failed = 0usize;
    for report in &reports {
        match &report.result {
            Ok(()) => println!("ok   {}", report.name),
            Err(msg) => {
                failed += 1;
                println!("FAIL {}: {msg}", report.name);
            }
        }
    }
    if failed == 0 {
        println!("all {} self tests passed", reports.len());
        0
    } else {
        eprintln!("{failed} of {} self tests failed", reports.len());
        3
    }
}
