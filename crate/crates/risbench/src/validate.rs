//! Built-in self tests for the `validate` subcommand: fast, seeded spot
//! checks of the numerical core (gradients, projections, waterfilling,
//! solver descent) and of the harness pairing/determinism contracts.
//! These mirror the repository's test suites at reduced size so a deployed
//! binary can vouch for itself in seconds.

use rand::Rng;

use risopt::channel::ChannelSet;
use risopt::codebook::{PhaseCodebook, SimplexWeights};
use risopt::numerics::{frob_norm_sq, sample_cgaussian, RVec, RngStream};
use risopt::objective::{
    achievable_rate, fd_grad_complex, fd_grad_real, grad_precoder, grad_weights, objective_f,
    rel_error_c, rel_error_r, LinkBudget,
};
use risopt::optimizer::{
    da_cbpg_solve, project_frobenius_ball, project_simplex, waterfilling_oracle, OptimizerConfig,
};

use crate::config::ExperimentConfig;
use crate::sweep::{mask_wall_ms, run_sweep};

pub struct CheckReport {
    pub name: &'static str,
    pub result: Result<(), String>,
}

/// Synthetic unit-scale Gaussian channel set for solver checks, with the
/// direct link scaled by `sqrt(sd_variance)`.
pub fn synthetic_channel(
    n_tx: usize,
    n_rx: usize,
    n_ris: usize,
    seed: u64,
    stream: u64,
    sd_variance: f64,
) -> ChannelSet {
    let key = RngStream::new(seed, stream);
    let mut rng = key.rng();
    let h_sd = sample_cgaussian(&mut rng, n_rx, n_tx, sd_variance);
    let h_sr = sample_cgaussian(&mut rng, n_ris, n_tx, 1.0);
    let h_rd = sample_cgaussian(&mut rng, n_rx, n_ris, 1.0);
    ChannelSet::new(h_sd, h_sr, h_rd, key).expect("synthetic channels are well-formed")
}

/// Random point on the product of per-element simplices (interior).
pub fn random_interior_weights(n_ris: usize, m: usize, seed: u64, stream: u64) -> SimplexWeights {
    let mut rng = RngStream::new(seed, stream).rng();
    let mut t = RVec::zeros(n_ris * m);
    for i in 0..n_ris {
        let mut block: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
        let sum: f64 = block.iter().sum();
        for v in &mut block {
            *v /= sum;
        }
        for (k, v) in block.iter().enumerate() {
            t[i * m + k] = *v;
        }
    }
    SimplexWeights::new(t, m).expect("normalized blocks lie on the simplex")
}

/// Brute-force simplex projection over all support sets: each support gives
/// one stationary candidate (shift members by the common multiplier, zero
/// the rest); the projection is the feasible candidate nearest the input.
/// Exponential in the dimension — a reference, not an implementation.
pub fn simplex_oracle(x: &RVec) -> RVec {
    let n = x.len();
    assert!(n <= 20, "oracle is exponential in the dimension");
    let mut best: Option<(f64, RVec)> = None;
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sum: f64 = members.iter().map(|&i| x[i]).sum();
        let shift = (1.0 - sum) / members.len() as f64;
        let mut y = RVec::zeros(n);
        let mut feasible = true;
        for &i in &members {
            y[i] = x[i] + shift;
            if y[i] < -1e-12 {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        let dist = (&y - x).norm_squared();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, y));
        }
    }
    best.expect("the full support is always feasible").1
}

fn check_gradients() -> Result<(), String> {
    let budget = LinkBudget::new(1.0, 0.1).map_err(|e| e.to_string())?;
    let cb = PhaseCodebook::new(1.0, 2).map_err(|e| e.to_string())?;
    for stream in 0..5u64 {
        let ch = synthetic_channel(6, 3, 5, 21, stream, 1.0);
        let mut rng = RngStream::new(22, stream).rng();
        let f0 = project_frobenius_ball(&sample_cgaussian(&mut rng, 6, 2, 1.0), 2.0);
        let t0 = random_interior_weights(5, 4, 23, stream);

        let phi = risopt::codebook::phases_from_weights(&t0, &cb);
        let analytic_f = grad_precoder(&f0, &phi, &ch, &budget).map_err(|e| e.to_string())?;
        let mut eval_f = |x: &risopt::numerics::CMat| objective_f(x, &phi, &ch, &budget).unwrap();
        let numeric_f = fd_grad_complex(&mut eval_f, &f0, 1e-6);
        let err_f = rel_error_c(&analytic_f, &numeric_f);
        if err_f > 1e-6 {
            return Err(format!("precoder gradient off by {err_f:.3e} on stream {stream}"));
        }

        let analytic_t =
            grad_weights(&f0, t0.as_vector(), &cb, &ch, &budget).map_err(|e| e.to_string())?;
        let mut eval_t = |t: &RVec| {
            let phi_t = risopt::codebook::phases_from_flat_weights(t, &cb);
            objective_f(&f0, &phi_t, &ch, &budget).unwrap()
        };
        let numeric_t = fd_grad_real(&mut eval_t, t0.as_vector(), 1e-6);
        let err_t = rel_error_r(&analytic_t, &numeric_t);
        if err_t > 1e-6 {
            return Err(format!("weight gradient off by {err_t:.3e} on stream {stream}"));
        }
    }
    Ok(())
}

fn check_simplex_projection() -> Result<(), String> {
    let mut rng = RngStream::new(24, 0).rng();
    for trial in 0..200 {
        let n = rng.gen_range(1..=6);
        let x = RVec::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let fast = project_simplex(&x);
        let slow = simplex_oracle(&x);
        let err = (&fast - &slow).norm();
        if err > 1e-9 {
            return Err(format!("projection off by {err:.3e} on trial {trial}"));
        }
    }
    Ok(())
}

fn check_ball_projection() -> Result<(), String> {
    let mut rng = RngStream::new(25, 0).rng();
    for trial in 0..200 {
        let x = sample_cgaussian(&mut rng, 4, 2, 2.0);
        let once = project_frobenius_ball(&x, 2.0);
        if frob_norm_sq(&once) > 2.0 * (1.0 + 1e-9) {
            return Err(format!("projected point infeasible on trial {trial}"));
        }
        let twice = project_frobenius_ball(&once, 2.0);
        if once != twice {
            return Err(format!("projection not idempotent on trial {trial}"));
        }
    }
    Ok(())
}

fn check_waterfilling() -> Result<(), String> {
    let budget = LinkBudget::new(1.0, 0.1).map_err(|e| e.to_string())?;
    let mut rng = RngStream::new(26, 0).rng();
    for trial in 0..20 {
        let h = sample_cgaussian(&mut rng, 3, 5, 1.0);
        let sol = waterfilling_oracle(&h, &budget, 2).map_err(|e| e.to_string())?;
        let direct =
            achievable_rate(sol.precoder.as_mat(), &h, &budget).map_err(|e| e.to_string())?;
        if (sol.rate - direct).abs() > 1e-9 * sol.rate.max(1.0) {
            return Err(format!(
                "trial {trial}: reported rate {} but objective gives {direct}",
                sol.rate
            ));
        }
        for _ in 0..3 {
            let f = project_frobenius_ball(&sample_cgaussian(&mut rng, 5, 2, 1.0), 2.0);
            let rate = achievable_rate(&f, &h, &budget).map_err(|e| e.to_string())?;
            if rate > sol.rate + 1e-9 {
                return Err(format!("trial {trial}: random precoder beat waterfilling"));
            }
        }
    }
    Ok(())
}

fn check_solver_descent() -> Result<(), String> {
    let budget = LinkBudget::new(1.0, 0.1).map_err(|e| e.to_string())?;
    let cb = PhaseCodebook::new(1.0, 1).map_err(|e| e.to_string())?;
    let cfg = OptimizerConfig::default();
    for stream in 0..5u64 {
        let ch = synthetic_channel(8, 4, 8, 27, stream, 1.0);
        let sol =
            da_cbpg_solve(&ch, &budget, &cb, &cfg, 2, None, None).map_err(|e| e.to_string())?;
        for w in sol.trace.windows(2) {
            if w[1] > w[0] {
                return Err(format!(
                    "stream {stream}: objective rose from {} to {}",
                    w[0], w[1]
                ));
            }
        }
        if frob_norm_sq(sol.precoder.as_mat()) > 2.0 + 1e-9 {
            return Err(format!("stream {stream}: final precoder violates the power budget"));
        }
    }
    Ok(())
}

fn micro_config() -> ExperimentConfig {
    serde_json::from_value(serde_json::json!({
        "arrays": { "n_tx": 4, "n_rx": 4 },
        "sweep": { "axis": "ris_elements", "values": [1, 4] },
        "trials": 2,
        "base_seed": 9,
    }))
    .expect("micro config is valid JSON")
}

fn check_sweep_contracts() -> Result<(), String> {
    let cfg = micro_config();
    let a = run_sweep(&cfg, None).map_err(|e| e.to_string())?;
    let b = run_sweep(&cfg, None).map_err(|e| e.to_string())?;
    let expected = 2 * 2 * 5;
    if a.records.len() != expected {
        return Err(format!("expected {expected} records, got {}", a.records.len()));
    }
    if mask_wall_ms(&a.records) != mask_wall_ms(&b.records) {
        return Err("rerun produced different records".into());
    }
    if a.hashes != b.hashes {
        return Err("rerun produced different channel hashes".into());
    }
    if a.failed != 0 {
        return Err(format!("{} solver runs failed on the micro sweep", a.failed));
    }
    Ok(())
}

type Check = (&'static str, fn() -> Result<(), String>);

/// Runs every self test and reports per-check results.
pub fn run_self_tests() -> Vec<CheckReport> {
    let checks: Vec<Check> = vec![
        ("gradients_match_finite_differences", check_gradients),
        ("simplex_projection_matches_oracle", check_simplex_projection),
        ("ball_projection_idempotent_and_feasible", check_ball_projection),
        ("waterfilling_consistent_and_optimal", check_waterfilling),
        ("solver_trace_monotone_and_feasible", check_solver_descent),
        ("sweep_paired_and_deterministic", check_sweep_contracts),
    ];
    checks
        .into_iter()
        .map(|(name, f)| CheckReport { name, result: f() })
        .collect()
}
