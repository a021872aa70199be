//! The Monte Carlo sweep driver.
//!
//! For every (sweep point, trial) pair one channel set is generated from
//! the stream `(base_seed, trial)` — or taken from a frozen channel file —
//! and handed to every algorithm, so comparisons are paired. The per-trial
//! RNG streams make execution order irrelevant: any parallelism degree
//! produces the same records, and records are sorted before emission.

use std::time::Instant;

use rayon::prelude::*;

use risopt::channel::{channel_hash, generate_channel_set, ChannelSet, FrozenChannel};
use risopt::numerics::RngStream;
use risopt::optimizer::{baseline_suite, da_cbpg_solve, AlgoOutcome};

use crate::config::{ExperimentConfig, SweepPoint};
use crate::HarnessError;

/// Labels of the five schemes, in the order they appear within one trial.
pub const ALGORITHMS: [&str; 5] =
    ["da_cbpg", "no_ris", "static_ris", "cont_quant", "cont_unquant"];

/// Suffix marking a record whose solver failed; such records carry zero
/// rate and are aggregated under their own label.
pub const FAILED_SUFFIX: &str = "_failed";

/// Stream-id offset separating the static baseline's phase draw from the
/// channel streams (which use the bare trial index).
pub const STATIC_STREAM_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub sweep: f64,
    pub trial: u64,
    pub algorithm: String,
    pub rate_bps_hz: f64,
    pub iters: u64,
    pub bt_evals: u64,
    pub wall_ms: f64,
    pub seed: u64,
}

/// Channel fingerprint for one (sweep, trial) cell; every algorithm label
/// in that cell saw exactly this channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelHashRecord {
    pub sweep: f64,
    pub trial: u64,
    pub channel_hash: u64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    /// All records, sorted by (sweep, trial, algorithm).
    pub records: Vec<TrialRecord>,
    /// One hash per (sweep, trial), sorted.
    pub hashes: Vec<ChannelHashRecord>,
    /// Number of failed solver runs among `records`.
    pub failed: usize,
}

impl SweepOutput {
    /// Fraction of records that are failure markers.
    pub fn failure_rate(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.failed as f64 / self.records.len() as f64
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    point: &SweepPoint,
    trial: u64,
    seed: u64,
    algorithm: &str,
    rate: f64,
    iters: usize,
    bt_evals: usize,
    wall_ms: f64,
) -> TrialRecord {
    TrialRecord {
        sweep: point.value,
        trial,
        algorithm: algorithm.to_string(),
        rate_bps_hz: rate,
        iters: iters as u64,
        bt_evals: bt_evals as u64,
        wall_ms,
        seed,
    }
}

fn baseline_record(
    point: &SweepPoint,
    trial: u64,
    seed: u64,
    label: &str,
    out: &AlgoOutcome,
) -> TrialRecord {
    record(point, trial, seed, label, out.rate, out.iterations, out.backtrack_evals, out.wall_ms)
}

/// Runs every algorithm on one channel instance and returns its records
/// plus the channel fingerprint.
fn run_cell(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    trial: u64,
    channels: &ChannelSet,
) -> Result<(Vec<TrialRecord>, ChannelHashRecord), HarnessError> {
    let seed = cfg.base_seed;
    let budget = cfg.link_budget()?;
    let codebook = cfg.codebook(point.bits)?;
    let hash =
        ChannelHashRecord { sweep: point.value, trial, channel_hash: channel_hash(channels) };
    let mut records = Vec::with_capacity(ALGORITHMS.len());

    let t_da = Instant::now();
    match da_cbpg_solve(channels, &budget, &codebook, &cfg.optimizer, cfg.n_streams, None, None) {
        Ok(sol) => records.push(record(
            point,
            trial,
            seed,
            "da_cbpg",
            sol.rate_discrete,
            sol.iterations,
            sol.backtrack_evals,
            t_da.elapsed().as_secs_f64() * 1e3,
        )),
        Err(err) => {
            eprintln!(
                "warning: da_cbpg failed at sweep {} trial {trial}: {err}",
                point.value
            );
            records.push(record(
                point,
                trial,
                seed,
                &format!("da_cbpg{FAILED_SUFFIX}"),
                0.0,
                0,
                0,
                t_da.elapsed().as_secs_f64() * 1e3,
            ));
        }
    }

    let t_base = Instant::now();
    let static_stream = RngStream::new(seed, trial + STATIC_STREAM_OFFSET);
    match baseline_suite(channels, &budget, &codebook, &cfg.optimizer, cfg.n_streams, static_stream)
    {
        Ok(suite) => {
            records.push(baseline_record(point, trial, seed, "no_ris", &suite.no_ris));
            records.push(baseline_record(point, trial, seed, "static_ris", &suite.static_ris));
            records.push(baseline_record(point, trial, seed, "cont_quant", &suite.cont_quant));
            records.push(baseline_record(point, trial, seed, "cont_unquant", &suite.cont_unquant));
        }
        Err(err) => {
            eprintln!(
                "warning: baselines failed at sweep {} trial {trial}: {err}",
                point.value
            );
            let wall = t_base.elapsed().as_secs_f64() * 1e3;
            for label in ["no_ris", "static_ris", "cont_quant", "cont_unquant"] {
                records.push(record(
                    point,
                    trial,
                    seed,
                    &format!("{label}{FAILED_SUFFIX}"),
                    0.0,
                    0,
                    0,
                    wall,
                ));
            }
        }
    }

    Ok((records, hash))
}

fn channel_for_cell(
    cfg: &ExperimentConfig,
    point: &SweepPoint,
    trial: u64,
    frozen: Option<&[FrozenChannel]>,
) -> Result<ChannelSet, HarnessError> {
    match frozen {
        Some(bank) => {
            let hit = bank
                .iter()
                .find(|fc| fc.sweep == point.value && fc.trial == trial)
                .ok_or_else(|| {
                    HarnessError::Format(format!(
                        "frozen channel file has no entry for sweep {} trial {trial}",
                        point.value
                    ))
                })?;
            let set = hit.set.clone();
            if set.n_tx() != cfg.arrays.n_tx
                || set.n_rx() != cfg.arrays.n_rx
                || set.n_ris() != point.n_ris
            {
                return Err(HarnessError::Format(format!(
                    "frozen channels for sweep {} trial {trial} have shape \
                     n_tx={} n_rx={} n_ris={}, but the config needs {}x{} with {} elements",
                    point.value,
                    set.n_tx(),
                    set.n_rx(),
                    set.n_ris(),
                    cfg.arrays.n_tx,
                    cfg.arrays.n_rx,
                    point.n_ris
                )));
            }
            Ok(set)
        }
        None => {
            let scenario = cfg.scenario(point.n_ris)?;
            Ok(generate_channel_set(RngStream::new(cfg.base_seed, trial), &scenario)?)
        }
    }
}

/// Generates (or replays) every channel realization and runs all algorithms
/// on each. Individual solver failures become failure-labeled records;
/// infrastructure errors (I/O, impossible configs) abort.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    frozen: Option<&[FrozenChannel]>,
) -> Result<SweepOutput, HarnessError> {
    cfg.validate()?;
    let points = cfg.sweep_points();
    let cells: Vec<(SweepPoint, u64)> = points
        .iter()
        .flat_map(|p| (0..cfg.trials as u64).map(move |t| (*p, t)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| HarnessError::Config(format!("parallelism: {e}")))?;
    let results: Result<Vec<_>, HarnessError> = pool.install(|| {
        cells
            .par_iter()
            .map(|(point, trial)| {
                let channels = channel_for_cell(cfg, point, *trial, frozen)?;
                run_cell(cfg, point, *trial, &channels)
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut hashes = Vec::new();
    for (cell_records, hash) in results? {
        records.extend(cell_records);
        hashes.push(hash);
    }
    records.sort_by(|a, b| {
        a.sweep
            .total_cmp(&b.sweep)
            .then(a.trial.cmp(&b.trial))
            .then(a.algorithm.cmp(&b.algorithm))
    });
    hashes.sort_by(|a, b| a.sweep.total_cmp(&b.sweep).then(a.trial.cmp(&b.trial)));

    let failed = records.iter().filter(|r| r.algorithm.ends_with(FAILED_SUFFIX)).count();
    Ok(SweepOutput { records, hashes, failed })
}

/// Copy of the records with `wall_ms` zeroed, for comparing reruns:
/// everything except wall-clock time is reproducible bit for bit.
pub fn mask_wall_ms(records: &[TrialRecord]) -> Vec<TrialRecord> {
    records
        .iter()
        .map(|r| TrialRecord { wall_ms: 0.0, ..r.clone() })
        .collect()
}

/// Generates the full set of channel realizations for a config without
/// solving anything, for freezing to disk.
pub fn generate_frozen_channels(
    cfg: &ExperimentConfig,
) -> Result<Vec<FrozenChannel>, HarnessError> {
    cfg.validate()?;
    let mut out = Vec::new();
    for point in cfg.sweep_points() {
        let scenario = cfg.scenario(point.n_ris)?;
        for trial in 0..cfg.trials as u64 {
            let set = generate_channel_set(RngStream::new(cfg.base_seed, trial), &scenario)?;
            out.push(FrozenChannel { sweep: point.value, trial, set });
        }
    }
    Ok(out)
}
