//! CSV and manifest emission, plus the aggregation step.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! parsing an emitted CSV reproduces the in-memory records exactly and
//! reruns of a deterministic sweep diff clean (wall-clock columns aside).

use std::fs;
use std::path::Path;

use crate::config::ExperimentConfig;
use crate::sweep::{ChannelHashRecord, SweepOutput, TrialRecord};
use crate::HarnessError;

pub const RECORDS_HEADER: &str = "sweep,trial,algorithm,rate_bps_hz,iters,bt_evals,wall_ms,seed";
pub const AGGREGATES_HEADER: &str = "sweep,algorithm,mean_rate,std_rate,n";
pub const HASHES_HEADER: &str = "sweep,trial,channel_hash";

pub const RECORDS_FILE: &str = "records.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const HASHES_FILE: &str = "channel_hashes.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Mean rate over the trials of one (sweep value, algorithm) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub sweep: f64,
    pub algorithm: String,
    pub mean_rate: f64,
    /// Sample standard deviation (n-1 denominator); 0 for a single trial.
    pub std_rate: f64,
    pub n: u64,
}

pub fn records_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.sweep, r.trial, r.algorithm, r.rate_bps_hz, r.iters, r.bt_evals, r.wall_ms, r.seed
        ));
    }
    out
}

pub fn parse_records_csv(text: &str) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| HarnessError::Format("empty records CSV".into()))?;
    if header != RECORDS_HEADER {
        return Err(HarnessError::Format(format!(
            "unexpected records header: {header:?}"
        )));
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(HarnessError::Format(format!(
                "records line {}: expected 8 fields, got {}",
                idx + 2,
                fields.len()
            )));
        }
        let parse_err = |what: &str| {
            HarnessError::Format(format!("records line {}: bad {what}", idx + 2))
        };
        records.push(TrialRecord {
            sweep: fields[0].parse().map_err(|_| parse_err("sweep"))?,
            trial: fields[1].parse().map_err(|_| parse_err("trial"))?,
            algorithm: fields[2].to_string(),
            rate_bps_hz: fields[3].parse().map_err(|_| parse_err("rate"))?,
            iters: fields[4].parse().map_err(|_| parse_err("iters"))?,
            bt_evals: fields[5].parse().map_err(|_| parse_err("bt_evals"))?,
            wall_ms: fields[6].parse().map_err(|_| parse_err("wall_ms"))?,
            seed: fields[7].parse().map_err(|_| parse_err("seed"))?,
        });
    }
    Ok(records)
}

/// Groups records by (sweep value, algorithm label) and reports mean rate,
/// sample standard deviation, and count. Failure records aggregate under
/// their own `*_failed` labels, keeping success means uncontaminated while
/// still counting every run.
pub fn aggregate(records: &[TrialRecord]) -> Vec<AggregateRow> {
    use std::collections::BTreeMap;
    // Sweep values are validated positive, so their IEEE bit patterns sort
    // in numeric order.
    let mut groups: BTreeMap<(u64, String), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.sweep.to_bits(), r.algorithm.clone()))
            .or_default()
            .push(r.rate_bps_hz);
    }
    groups
        .into_iter()
        .map(|((sweep_bits, algorithm), rates)| {
            let n = rates.len() as u64;
            let mean = rates.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                let ss = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>();
                (ss / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            AggregateRow {
                sweep: f64::from_bits(sweep_bits),
                algorithm,
                mean_rate: mean,
                std_rate: std,
                n,
            }
        })
        .collect()
}

pub fn aggregates_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.sweep, r.algorithm, r.mean_rate, r.std_rate, r.n
        ));
    }
    out
}

pub fn hashes_csv(hashes: &[ChannelHashRecord]) -> String {
    let mut out = String::from(HASHES_HEADER);
    out.push('\n');
    for h in hashes {
        out.push_str(&format!("{},{},{:016x}\n", h.sweep, h.trial, h.channel_hash));
    }
    out
}

/// Returns the records CSV text with the `wall_ms` field of every data row
/// replaced by `-`, so two runs can be compared byte for byte: wall-clock
/// time is the only field that is not reproducible.
pub fn mask_wall_column(csv: &str) -> String {
    let mut out = String::with_capacity(csv.len());
    for (idx, line) in csv.lines().enumerate() {
        if idx == 0 || line.is_empty() {
            out.push_str(line);
        } else {
            let fields: Vec<&str> = line.split(',').collect();
            for (i, field) in fields.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(if i == 6 { "-" } else { field });
            }
        }
        out.push('\n');
    }
    out
}

/// Writes records.csv, aggregates.csv, channel_hashes.csv, and a JSON
/// manifest holding the fully resolved config and package version into
/// `dir`, creating it if needed.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    output: &SweepOutput,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(RECORDS_FILE), records_csv(&output.records))?;
    fs::write(dir.join(AGGREGATES_FILE), aggregates_csv(&aggregate(&output.records)))?;
    fs::write(dir.join(HASHES_FILE), hashes_csv(&output.hashes))?;
    let manifest = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "records": output.records.len(),
        "failed": output.failed,
    });
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
