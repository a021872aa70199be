use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use risopt::channel::{effective_channel, ChannelSet};
use risopt::codebook::{PhaseCodebook, SimplexWeights};
use risopt::numerics::{frob_norm_sq, sample_cgaussian, CMat, CVec, RVec, RngStream};
use risopt::objective::{achievable_rate, LinkBudget, ObjectiveError};
use risopt::optimizer::{
    backtracking_step, baseline_suite, continuous_phase_solve, da_cbpg_solve,
    exhaustive_discrete_oracle, project_block_simplex, project_circle, project_frobenius_ball,
    project_simplex, refit_precoder, waterfilling_oracle, BacktrackingState, LineSearchError,
    LineSearchParams, OptimizerConfig, OptimizerError,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn gaussian_channel(n_tx: usize, n_rx: usize, n_ris: usize, stream: u64) -> ChannelSet {
    let key = RngStream::new(404, stream);
    let mut rng = key.rng();
    let h_sd = sample_cgaussian(&mut rng, n_rx, n_tx, 1.0);
    let h_sr = sample_cgaussian(&mut rng, n_ris, n_tx, 1.0);
    let h_rd = sample_cgaussian(&mut rng, n_rx, n_ris, 1.0);
    ChannelSet::new(h_sd, h_sr, h_rd, key).unwrap()
}

/// Channel with a much weaker direct link than the reflected path, the
/// regime a RIS deployment targets.
fn weak_direct_channel(n_tx: usize, n_rx: usize, n_ris: usize, stream: u64) -> ChannelSet {
    let key = RngStream::new(505, stream);
    let mut rng = key.rng();
    let h_sd = sample_cgaussian(&mut rng, n_rx, n_tx, 0.0025);
    let h_sr = sample_cgaussian(&mut rng, n_ris, n_tx, 1.0);
    let h_rd = sample_cgaussian(&mut rng, n_rx, n_ris, 1.0);
    ChannelSet::new(h_sd, h_sr, h_rd, key).unwrap()
}

fn test_budget() -> LinkBudget {
    LinkBudget::new(1.0, 0.1).unwrap()
}

fn default_params() -> LineSearchParams {
    LineSearchParams {
        shrink: 0.5,
        growth: 2.0,
        sufficient_decrease: 1.0,
        min_step: 1e-18,
        max_step: 1e12,
    }
}

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

#[test]
fn ball_projection_keeps_interior_points_bitwise() {
    let mut rng = RngStream::new(11, 0).rng();
    let x = sample_cgaussian(&mut rng, 4, 2, 0.1);
    assert!(frob_norm_sq(&x) < 2.0);
    let y = project_frobenius_ball(&x, 2.0);
    assert_eq!(x, y);
}

#[test]
fn ball_projection_hits_the_boundary_and_keeps_direction() {
    let mut rng = RngStream::new(11, 1).rng();
    let x = sample_cgaussian(&mut rng, 6, 3, 4.0);
    assert!(frob_norm_sq(&x) > 3.0);
    let y = project_frobenius_ball(&x, 3.0);
    let n2 = frob_norm_sq(&y);
    assert!((n2 - 3.0).abs() <= 3.0 * 1e-12, "projected norm^2 = {n2}");
    // Same direction: y is a positive scalar multiple of x.
    let scale = (3.0 / frob_norm_sq(&x)).sqrt();
    for (yi, xi) in y.iter().zip(x.iter()) {
        assert!((yi - xi * c(scale, 0.0)).norm() <= 1e-12);
    }
}

#[test]
fn ball_projection_is_idempotent_bitwise() {
    for stream in 0..50 {
        let mut rng = RngStream::new(11, 2 + stream).rng();
        let x = sample_cgaussian(&mut rng, 5, 2, 3.0);
        let once = project_frobenius_ball(&x, 2.0);
        let twice = project_frobenius_ball(&once, 2.0);
        assert_eq!(once, twice, "re-projection moved the point (stream {stream})");
    }
}

/// Brute-force simplex projection: every support set yields one stationary
/// candidate (shift the support by the common multiplier, zero the rest);
/// the projection is the feasible candidate closest to the input.
fn simplex_oracle(x: &RVec) -> RVec {
    let n = x.len();
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
    best.unwrap().1
}

#[test]
fn simplex_projection_matches_enumeration_oracle() {
    let mut rng = RngStream::new(12, 0).rng();
    for trial in 0..1000 {
        let n = rng.gen_range(1..=6);
        let x = RVec::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let fast = project_simplex(&x);
        let slow = simplex_oracle(&x);
        let err = (&fast - &slow).norm();
        assert!(err <= 1e-9, "trial {trial}: |fast - oracle| = {err:.3e} for x = {x:?}");
    }
}

#[test]
fn simplex_projection_handles_extremes() {
    // Far-negative vector collapses onto the largest coordinate.
    let x = RVec::from_vec(vec![-5.0, -3.0, -4.0]);
    let y = project_simplex(&x);
    assert_eq!(y[1], 1.0);
    assert_eq!(y[0] + y[2], 0.0);

    // A feasible interior point is untouched.
    let x = RVec::from_vec(vec![0.25, 0.5, 0.25]);
    assert_eq!(project_simplex(&x), x);

    // A vertex stays a vertex.
    let x = RVec::from_vec(vec![1.0, 0.0]);
    assert_eq!(project_simplex(&x), x);
}

#[test]
fn block_simplex_projects_each_block_independently() {
    let t = RVec::from_vec(vec![0.9, 0.9, -0.3, 0.1, 2.0, -1.0]);
    let out = project_block_simplex(&t, 2).unwrap();
    for i in 0..3 {
        let block = t.rows(i * 2, 2).into_owned();
        let expect = project_simplex(&block);
        assert_eq!(out.rows(i * 2, 2).into_owned(), expect, "block {i}");
    }

    assert!(matches!(
        project_block_simplex(&t, 4),
        Err(OptimizerError::DimensionMismatch(_))
    ));
}

#[test]
fn circle_projection_restores_modulus_and_handles_zero() {
    let phi = CVec::from_vec(vec![c(3.0, 4.0), c(0.0, 0.0), c(-2e-3, 1e-3), c(0.0, -7.0)]);
    let out = project_circle(&phi, 0.8);
    for (i, z) in out.iter().enumerate() {
        assert!((z.norm() - 0.8).abs() <= 1e-12, "entry {i} has modulus {}", z.norm());
    }
    assert_eq!(out[1], c(0.8, 0.0));
    assert!((out[0] - c(0.48, 0.64)).norm() <= 1e-12);
    assert!((out[3] - c(0.0, -0.8)).norm() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_simplex_projection_is_feasible_and_idempotent(
        raw in proptest::collection::vec(-10.0f64..10.0, 1..12),
    ) {
        let x = RVec::from_vec(raw);
        let y = project_simplex(&x);
        for &v in y.iter() {
            prop_assert!(v >= 0.0);
        }
        prop_assert!((y.sum() - 1.0).abs() <= 1e-12);
        let z = project_simplex(&y);
        prop_assert!((&z - &y).norm() <= 1e-12);
    }

    #[test]
    fn prop_ball_projection_is_feasible(seed in 0u64..500, power in 0.5f64..8.0) {
        let mut rng = RngStream::new(13, seed).rng();
        let x = sample_cgaussian(&mut rng, 3, 2, 2.0);
        let y = project_frobenius_ball(&x, power);
        prop_assert!(frob_norm_sq(&y) <= power * (1.0 + 1e-9));
    }
}

// ---------------------------------------------------------------------------
// Line search
// ---------------------------------------------------------------------------

#[test]
fn line_search_accepts_stationary_point_immediately() {
    let params = default_params();
    let mut state = BacktrackingState::new(1.0);
    let x = RVec::from_vec(vec![0.3, 0.7]);
    let grad = RVec::zeros(2);
    let prox = |p: &RVec| p.clone();
    let mut evals = 0usize;
    let mut eval = |p: &RVec| -> Result<f64, ObjectiveError> {
        evals += 1;
        Ok(p.norm_squared())
    };
    let out = backtracking_step(&params, &mut state, &x, x.norm_squared(), &grad, &prox, &mut eval)
        .unwrap();
    assert_eq!(out.point, x);
    assert_eq!(out.evals, 1);
    assert_eq!(out.alpha, 1.0);
    assert_eq!(state.alpha, 2.0);
}

#[test]
fn line_search_on_quadratic_accepts_exactly_at_unit_step() {
    // f(x) = x^2 / 2 from x = 1: the acceptance test reduces to
    // alpha (alpha - 1) / 2 <= 0, so alpha = 1 is the first accepted step
    // when starting from 4 with halving.
    let params = default_params();
    let mut state = BacktrackingState::new(4.0);
    let x = RVec::from_vec(vec![1.0]);
    let grad = RVec::from_vec(vec![1.0]);
    let prox = |p: &RVec| p.clone();
    let mut eval = |p: &RVec| -> Result<f64, ObjectiveError> { Ok(0.5 * p[0] * p[0]) };
    let out =
        backtracking_step(&params, &mut state, &x, 0.5, &grad, &prox, &mut eval).unwrap();
    assert_eq!(out.alpha, 1.0);
    assert_eq!(out.evals, 3);
    assert_eq!(out.point[0], 0.0);
    assert_eq!(out.f_value, 0.0);
    assert_eq!(state.alpha, 2.0);
}

#[test]
fn line_search_never_accepts_an_increase_from_the_current_point() {
    // Random quadratics f(x) = ||x - m||^2 / 2; starting points are current
    // iterates (no extrapolation), so accepted values may never exceed the
    // starting value.
    let params = default_params();
    let mut rng = RngStream::new(14, 0).rng();
    for _ in 0..200 {
        let n = rng.gen_range(1..6);
        let m = RVec::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let x = RVec::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
        let f0 = 0.5 * (&x - &m).norm_squared();
        let grad = &x - &m;
        let mut state = BacktrackingState::new(rng.gen_range(0.01..30.0));
        let prox = |p: &RVec| p.clone();
        let mut eval =
            |p: &RVec| -> Result<f64, ObjectiveError> { Ok(0.5 * (p - &m).norm_squared()) };
        let out =
            backtracking_step(&params, &mut state, &x, f0, &grad, &prox, &mut eval).unwrap();
        assert!(out.f_value <= f0 + 1e-15);
        // The recheck: the accepted point satisfies the printed condition.
        let step = &out.point - &x;
        let rhs = f0 + grad.dot(&step) + step.norm_squared() / (2.0 * out.alpha);
        assert!(out.f_value <= rhs + 1e-12);
    }
}

#[test]
fn line_search_accepts_a_null_step_once_alpha_vanishes() {
    // The objective is constant but the claimed gradient is not. Once alpha
    // drops below one ulp the candidate rounds back onto the base point,
    // the step is zero, and the (consistent) base value satisfies the
    // acceptance test: the search terminates with a no-op instead of
    // spinning down to the floor.
    let params = default_params();
    let mut state = BacktrackingState::new(1.0);
    let x = RVec::from_vec(vec![1.0]);
    let grad = RVec::from_vec(vec![1.0]);
    let prox = |p: &RVec| p.clone();
    let mut eval = |_: &RVec| -> Result<f64, ObjectiveError> { Ok(0.0) };
    let out = backtracking_step(&params, &mut state, &x, 0.0, &grad, &prox, &mut eval).unwrap();
    assert_eq!(out.point, x);
    assert_eq!(out.f_value, 0.0);
    assert!(out.alpha < 1e-15);
}

#[test]
fn line_search_reports_step_underflow_for_unattainable_base_value() {
    // A claimed base value below anything the objective attains can never
    // be improved on, not even by the null step; the search must fail at
    // the step floor rather than loop forever.
    let params = default_params();
    let mut state = BacktrackingState::new(1.0);
    let x = RVec::from_vec(vec![1.0]);
    let grad = RVec::from_vec(vec![1.0]);
    let prox = |p: &RVec| p.clone();
    let mut eval = |_: &RVec| -> Result<f64, ObjectiveError> { Ok(0.0) };
    let err = backtracking_step(&params, &mut state, &x, -1.0, &grad, &prox, &mut eval)
        .unwrap_err();
    assert!(matches!(err, LineSearchError::StepUnderflow { .. }));
}

// ---------------------------------------------------------------------------
// Waterfilling
// ---------------------------------------------------------------------------

#[test]
fn waterfilling_identity_channel_splits_power_evenly() {
    let h = CMat::identity(4, 4);
    let budget = test_budget();
    let sol = waterfilling_oracle(&h, &budget, 2).unwrap();
    let c_snr = budget.snr_scale();
    assert!((sol.powers[0] - 1.0).abs() <= 1e-12);
    assert!((sol.powers[1] - 1.0).abs() <= 1e-12);
    assert!((sol.rate - 2.0 * (1.0 + c_snr).log2()).abs() <= 1e-12);
    assert!(!sol.rank_deficient);
}

#[test]
fn waterfilling_low_snr_pours_everything_into_the_best_mode() {
    // Diagonal channel with gains 1 and 0.5 at very low SNR: the weaker
    // mode's threshold is out of reach, so the whole budget goes to mode 1.
    let mut h = CMat::zeros(2, 2);
    h[(0, 0)] = c(1.0, 0.0);
    h[(1, 1)] = c(0.5f64.sqrt(), 0.0);
    let budget = LinkBudget::new(1e-6, 1.0).unwrap();
    let sol = waterfilling_oracle(&h, &budget, 2).unwrap();
    assert!((sol.powers[0] - 2.0).abs() <= 1e-9);
    assert_eq!(sol.powers[1], 0.0);
}

#[test]
fn waterfilling_handles_rank_deficient_channels() {
    let mut rng = RngStream::new(15, 0).rng();
    let h = sample_cgaussian(&mut rng, 1, 4, 1.0); // rank 1
    let sol = waterfilling_oracle(&h, &test_budget(), 2).unwrap();
    assert!(sol.rank_deficient);
    assert!((sol.powers[0] - 2.0).abs() <= 1e-9);
    assert_eq!(sol.powers[1], 0.0);
    let f = sol.precoder.as_mat();
    assert!(f.column(1).iter().all(|z| z.norm() == 0.0));
    assert!((frob_norm_sq(f) - 2.0).abs() <= 1e-9);
}

#[test]
fn waterfilling_rejects_zero_channel() {
    let h = CMat::zeros(3, 5);
    assert!(matches!(
        waterfilling_oracle(&h, &test_budget(), 2),
        Err(OptimizerError::ZeroChannel)
    ));
}

#[test]
fn waterfilling_rate_is_consistent_and_beats_random_precoders() {
    let budget = test_budget();
    let mut rng = RngStream::new(15, 1).rng();
    for trial in 0..20 {
        let n_tx = rng.gen_range(2..6);
        let n_rx = rng.gen_range(2..6);
        let h = sample_cgaussian(&mut rng, n_rx, n_tx, 1.0);
        let n_s = 2.min(n_tx).min(n_rx);
        let sol = waterfilling_oracle(&h, &budget, n_s).unwrap();

        let direct = achievable_rate(sol.precoder.as_mat(), &h, &budget).unwrap();
        assert!(
            (sol.rate - direct).abs() <= 1e-9 * sol.rate.max(1.0),
            "trial {trial}: waterfilling reports {} but the objective gives {direct}",
            sol.rate
        );
        assert!((frob_norm_sq(sol.precoder.as_mat()) - n_s as f64).abs() <= 1e-9);

        for _ in 0..5 {
            let raw = sample_cgaussian(&mut rng, n_tx, n_s, 1.0);
            let feasible = project_frobenius_ball(&raw, n_s as f64);
            let rate = achievable_rate(&feasible, &h, &budget).unwrap();
            assert!(
                rate <= sol.rate + 1e-9,
                "trial {trial}: random precoder reached {rate} > waterfilling {}",
                sol.rate
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

#[test]
fn exhaustive_single_element_picks_the_better_entry() {
    let ch = gaussian_channel(3, 2, 1, 0);
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 1).unwrap();
    let best = exhaustive_discrete_oracle(&ch, &budget, &cb, 2).unwrap();

    let mut rates = Vec::new();
    for k in 0..2 {
        let phi = CVec::from_vec(vec![cb.entry(k)]);
        let h = effective_channel(&ch, &phi).unwrap();
        rates.push(waterfilling_oracle(&h, &budget, 2).unwrap().rate);
    }
    let expect = rates[0].max(rates[1]);
    assert_eq!(best.rate, expect);
    assert_eq!(best.indices.len(), 1);
    assert_eq!(best.rate, rates[best.indices[0]]);
}

#[test]
fn exhaustive_without_ris_is_plain_waterfilling() {
    let key = RngStream::new(404, 77);
    let mut rng = key.rng();
    let h_sd = sample_cgaussian(&mut rng, 3, 4, 1.0);
    let ch = ChannelSet::without_ris(h_sd.clone(), key);
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 2).unwrap();
    let best = exhaustive_discrete_oracle(&ch, &budget, &cb, 2).unwrap();
    let wf = waterfilling_oracle(&h_sd, &budget, 2).unwrap();
    assert_eq!(best.rate, wf.rate);
    assert_eq!(best.phi.len(), 0);
}

#[test]
fn exhaustive_matches_independent_nested_loops() {
    // Same search written as four explicit nested loops instead of a
    // mixed-radix counter.
    let ch = gaussian_channel(3, 2, 4, 1);
    let budget = test_budget();
    let cb = PhaseCodebook::new(0.9, 1).unwrap();
    let best = exhaustive_discrete_oracle(&ch, &budget, &cb, 2).unwrap();

    let mut best_rate = f64::NEG_INFINITY;
    let mut best_combo = [0usize; 4];
    for k3 in 0..2 {
        for k2 in 0..2 {
            for k1 in 0..2 {
                for k0 in 0..2 {
                    let phi = CVec::from_vec(vec![
                        cb.entry(k0),
                        cb.entry(k1),
                        cb.entry(k2),
                        cb.entry(k3),
                    ]);
                    let h = effective_channel(&ch, &phi).unwrap();
                    let rate = waterfilling_oracle(&h, &budget, 2).unwrap().rate;
                    if rate > best_rate {
                        best_rate = rate;
                        best_combo = [k0, k1, k2, k3];
                    }
                }
            }
        }
    }
    assert_eq!(best.rate, best_rate);
    assert_eq!(best.indices, best_combo);
}

#[test]
fn exhaustive_refuses_oversized_searches() {
    let ch = gaussian_channel(2, 2, 30, 2);
    let cb = PhaseCodebook::new(1.0, 2).unwrap();
    assert!(matches!(
        exhaustive_discrete_oracle(&ch, &test_budget(), &cb, 1),
        Err(OptimizerError::TooLarge { .. })
    ));
}

// ---------------------------------------------------------------------------
// Full solver
// ---------------------------------------------------------------------------

#[test]
fn solver_without_ris_recovers_waterfilling() {
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 1).unwrap();
    let cfg = OptimizerConfig::default();
    for stream in 0..20 {
        let key = RngStream::new(404, 100 + stream);
        let mut rng = key.rng();
        let h_sd = sample_cgaussian(&mut rng, 4, 6, 1.0);
        let ch = ChannelSet::without_ris(h_sd.clone(), key);
        let wf = waterfilling_oracle(&h_sd, &budget, 2).unwrap();
        let sol = da_cbpg_solve(&ch, &budget, &cb, &cfg, 2, None, None).unwrap();
        let gap = (wf.rate - sol.rate_relaxed).abs() / wf.rate;
        assert!(gap <= 1e-2, "stream {stream}: relaxed rate off by {gap:.3e}");
        // The discrete read-out refits on the same matrix, so it reproduces
        // the waterfilling rate exactly.
        assert_eq!(sol.rate_discrete, wf.rate);
    }
}

#[test]
fn solver_trace_is_monotone_and_iterates_stay_feasible() {
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 1).unwrap();
    let cfg = OptimizerConfig::default();
    for stream in 0..10 {
        let ch = gaussian_channel(8, 4, 16, 200 + stream);
        let sol = da_cbpg_solve(&ch, &budget, &cb, &cfg, 2, None, None).unwrap();
        for w in sol.trace.windows(2) {
            assert!(w[1] <= w[0], "stream {stream}: trace increased from {} to {}", w[0], w[1]);
        }
        assert!(frob_norm_sq(sol.precoder.as_mat()) <= 2.0 + 1e-9);
        for i in 0..sol.weights.n_ris() {
            let row = sol.weights.row(i).into_owned();
            assert!((row.sum() - 1.0).abs() <= 1e-9);
            assert!(row.iter().all(|&v| v >= -1e-12));
        }
        // Discrete phases are exact codebook entries.
        for z in sol.phi_discrete.iter() {
            assert!((0..cb.size()).any(|k| cb.entry(k) == *z));
        }
        assert!(sol.iterations >= 1);
        assert_eq!(sol.trace.len(), sol.iterations + 1);
    }
}

#[test]
fn solver_never_beats_the_exhaustive_oracle_but_gets_close() {
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 1).unwrap();
    let cfg = OptimizerConfig::default();
    let mut ratio_sum = 0.0;
    let n_trials = 30;
    for stream in 0..n_trials {
        let ch = weak_direct_channel(4, 2, 6, 300 + stream);
        let oracle = exhaustive_discrete_oracle(&ch, &budget, &cb, 2).unwrap();
        let sol = da_cbpg_solve(&ch, &budget, &cb, &cfg, 2, None, None).unwrap();
        assert!(
            sol.rate_discrete <= oracle.rate + 1e-9,
            "stream {stream}: solver 'beat' the global optimum ({} > {})",
            sol.rate_discrete,
            oracle.rate
        );
        ratio_sum += sol.rate_discrete / oracle.rate;
    }
    let mean_ratio = ratio_sum / n_trials as f64;
    assert!(mean_ratio >= 0.85, "mean optimality ratio {mean_ratio:.4} too far from 1");
}

#[test]
fn solver_is_deterministic() {
    let ch = gaussian_channel(6, 3, 12, 400);
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 2).unwrap();
    let cfg = OptimizerConfig::default();
    let a = da_cbpg_solve(&ch, &budget, &cb, &cfg, 2, None, None).unwrap();
    let b = da_cbpg_solve(&ch, &budget, &cb, &cfg, 2, None, None).unwrap();
    assert_eq!(a.rate_relaxed, b.rate_relaxed);
    assert_eq!(a.rate_discrete, b.rate_discrete);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.precoder.as_mat(), b.precoder.as_mat());
    assert_eq!(a.phi_discrete, b.phi_discrete);
}

#[test]
fn solver_validates_inputs() {
    let ch = gaussian_channel(4, 2, 4, 500);
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 1).unwrap();
    let cfg = OptimizerConfig::default();

    // Wrong weight dimensions.
    let wts = SimplexWeights::uniform(3, 2);
    assert!(matches!(
        da_cbpg_solve(&ch, &budget, &cb, &cfg, 2, None, Some(&wts)),
        Err(OptimizerError::DimensionMismatch(_))
    ));

    // Infeasible initial precoder.
    let f0 = CMat::from_element(4, 2, c(10.0, 0.0));
    assert!(matches!(
        da_cbpg_solve(&ch, &budget, &cb, &cfg, 2, Some(&f0), None),
        Err(OptimizerError::Objective(ObjectiveError::InfeasiblePrecoder { .. }))
    ));

    // Degenerate config.
    let mut bad = cfg;
    bad.shrink = 1.5;
    assert!(matches!(
        da_cbpg_solve(&ch, &budget, &cb, &bad, 2, None, None),
        Err(OptimizerError::InvalidConfig(_))
    ));

    assert!(matches!(
        da_cbpg_solve(&ch, &budget, &cb, &cfg, 0, None, None),
        Err(OptimizerError::InvalidConfig(_))
    ));
}

#[test]
fn solver_improves_on_its_starting_point() {
    // From uniform weights and the waterfilling warm start, the final
    // relaxed objective must be at least as good as the initial one, and
    // strictly better on generic instances.
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 2).unwrap();
    let cfg = OptimizerConfig::default();
    let ch = weak_direct_channel(6, 3, 10, 600);
    let sol = da_cbpg_solve(&ch, &budget, &cb, &cfg, 2, None, None).unwrap();
    let first = sol.trace.first().copied().unwrap();
    let last = sol.trace.last().copied().unwrap();
    assert!(last < first, "no progress: f went from {first} to {last}");
}

// ---------------------------------------------------------------------------
// Refit
// ---------------------------------------------------------------------------

#[test]
fn refit_matches_waterfilling_on_the_snapped_channel() {
    let budget = test_budget();
    let cfg = OptimizerConfig::default();
    for stream in 0..10 {
        let ch = gaussian_channel(6, 3, 8, 700 + stream);
        let mut rng = RngStream::new(16, stream).rng();
        let cb = PhaseCodebook::new(1.0, 2).unwrap();
        let phi = CVec::from_iterator(8, (0..8).map(|_| cb.entry(rng.gen_range(0..4))));
        let h = effective_channel(&ch, &phi).unwrap();
        let wf = waterfilling_oracle(&h, &budget, 2).unwrap();

        let raw = sample_cgaussian(&mut rng, 6, 2, 1.0);
        let f_init = project_frobenius_ball(&raw, 2.0);
        let refit = refit_precoder(&ch, &budget, &phi, &cfg, &f_init).unwrap();

        let gap = (wf.rate - refit.rate) / wf.rate;
        assert!(
            (-1e-9..=5e-3).contains(&gap),
            "stream {stream}: refit rate {} vs waterfilling {} (gap {gap:.2e})",
            refit.rate,
            wf.rate
        );
        for w in refit.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}

#[test]
fn refit_never_worsens_a_feasible_start() {
    let budget = test_budget();
    let cfg = OptimizerConfig::default();
    let ch = gaussian_channel(5, 3, 6, 800);
    let cb = PhaseCodebook::new(1.0, 1).unwrap();
    let phi = CVec::from_iterator(6, (0..6).map(|k| cb.entry(k % 2)));
    let h = effective_channel(&ch, &phi).unwrap();

    let wf = waterfilling_oracle(&h, &budget, 2).unwrap();
    let start_rate = achievable_rate(wf.precoder.as_mat(), &h, &budget).unwrap();
    let refit = refit_precoder(&ch, &budget, &phi, &cfg, wf.precoder.as_mat()).unwrap();
    assert!(refit.rate >= start_rate - 1e-9);
    assert!(
        refit.iterations <= cfg.tolerance_patience + 2,
        "a start at the optimum should stop once the patience window fills, got {}",
        refit.iterations
    );
}

// ---------------------------------------------------------------------------
// Continuous baseline and suite
// ---------------------------------------------------------------------------

#[test]
fn continuous_solver_keeps_phases_on_the_circle() {
    let budget = test_budget();
    let cfg = OptimizerConfig::default();
    let ch = weak_direct_channel(6, 3, 12, 900);
    let sol = continuous_phase_solve(&ch, &budget, 0.9, &cfg, 2, None, None).unwrap();
    for z in sol.phi.iter() {
        assert!((z.norm() - 0.9).abs() <= 1e-12);
    }
    for w in sol.trace.windows(2) {
        assert!(w[1] <= w[0]);
    }
    let first = sol.trace.first().copied().unwrap();
    assert!(sol.f_value < first);
}

#[test]
fn baseline_suite_orders_as_physics_dictates() {
    // On RIS-dominated channels, adapting phases must on average beat a
    // frozen random configuration, which in turn beats no RIS at all; the
    // unquantized read can only improve on the quantized one on average.
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 1).unwrap();
    let cfg = OptimizerConfig::default();
    let n = 15;
    let (mut no_ris, mut static_ris, mut quant, mut unquant) = (0.0, 0.0, 0.0, 0.0);
    for stream in 0..n {
        let ch = weak_direct_channel(4, 2, 8, 1000 + stream);
        let suite =
            baseline_suite(&ch, &budget, &cb, &cfg, 2, RngStream::new(7, stream)).unwrap();
        no_ris += suite.no_ris.rate;
        static_ris += suite.static_ris.rate;
        quant += suite.cont_quant.rate;
        unquant += suite.cont_unquant.rate;
        assert!(suite.no_ris.rate >= 0.0);
        assert!(suite.cont_quant.iterations >= 1);
    }
    assert!(
        unquant >= quant && quant > static_ris && static_ris > no_ris,
        "mean rates out of order: no_ris {no_ris}, static {static_ris}, quant {quant}, unquant {unquant}"
    );
}

#[test]
fn static_baseline_is_reproducible_per_stream() {
    let budget = test_budget();
    let cb = PhaseCodebook::new(1.0, 2).unwrap();
    let cfg = OptimizerConfig::default();
    let ch = gaussian_channel(4, 2, 8, 1100);
    let a = baseline_suite(&ch, &budget, &cb, &cfg, 2, RngStream::new(7, 42)).unwrap();
    let b = baseline_suite(&ch, &budget, &cb, &cfg, 2, RngStream::new(7, 42)).unwrap();
    let c = baseline_suite(&ch, &budget, &cb, &cfg, 2, RngStream::new(7, 43)).unwrap();
    assert_eq!(a.static_ris.rate, b.static_ris.rate);
    assert_ne!(a.static_ris.rate, c.static_ris.rate);
    assert_eq!(a.no_ris.rate, c.no_ris.rate);
}
