//! Joint precoder / discrete-phase optimization.
//!
//! The solver relaxes each RIS element's codebook choice to a point in the
//! convex hull of the codebook (a probability-simplex weighting of the
//! entries) and runs an extrapolated cyclic block proximal-gradient descent
//! on the negated log-det rate objective:
//!
//! 1. take a gradient step in the precoder from an extrapolated base point
//!    and project back onto the transmit-power ball, with a backtracking
//!    line search;
//! 2. take a gradient step in the stacked selection weights from their own
//!    extrapolated base point and project each element's block back onto
//!    the simplex, again with backtracking;
//! 3. repeat until the objective decrease stays below tolerance for
//!    several consecutive iterations (a patience window, so a single flat
//!    plateau iteration is not mistaken for convergence).
//!
//! The extrapolation weight is `q / (q + 3)` with `q` counting iterations
//! since the last restart, so the first iteration is plain proximal
//! gradient. When an iteration ends above the current objective value —
//! possible only because of extrapolation, since an accepted backtracking
//! step from the current iterate cannot increase the objective — the
//! iteration is redone without extrapolation and the counter resets, so
//! momentum rebuilds gradually instead of overshooting again on the next
//! iteration; the recorded objective trace is therefore non-increasing.
//! After convergence each element snaps to its heaviest-weight codebook
//! entry and the precoder is refit for the resulting channel, which yields
//! the reported discrete rate.
//!
//! All objective and gradient evaluations go through the factored forms in
//! [`crate::objective`]; the full cascade matrix is never assembled inside
//! the iteration.

mod baselines;
mod linesearch;
mod oracles;
mod projections;
mod space;
mod waterfilling;

pub use baselines::{
    baseline_suite, continuous_phase_solve, AlgoOutcome, BaselineSuite, ContinuousSolution,
};
pub use linesearch::{
    backtracking_step, BacktrackingState, LineSearchError, LineSearchParams, StepOutcome,
    MAX_STEP, MIN_STEP,
};
pub use oracles::{exhaustive_discrete_oracle, ExhaustiveSolution, MAX_COMBINATIONS};
pub use projections::{
    project_block_simplex, project_circle, project_frobenius_ball, project_simplex,
};
pub use space::BlockVec;
pub use waterfilling::{waterfilling_oracle, waterfilling_rate_or_zero, WaterfillingSolution};

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{effective_channel, ChannelSet, ChannelError};
use crate::codebook::{phases_from_flat_weights, CodebookError, PhaseCodebook, SimplexWeights};
use crate::numerics::{frob_norm_sq, CMat, CVec, RVec};
use crate::objective::{
    eval_terms, grad_precoder_from_terms, precoder_products, rate_from_objective,
    zdiag_from_terms, LinkBudget, ObjectiveError, Precoder,
};

#[derive(Debug, thiserror::Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error("line search underflowed to alpha = {alpha:.3e} after {} accepted iterations", trace.len().saturating_sub(1))]
    StepUnderflow { alpha: f64, trace: Vec<f64> },
    #[error("exhaustive search over {combinations:.3e} phase combinations exceeds the {limit:.0e} limit")]
    TooLarge { combinations: f64, limit: f64 },
    #[error("channel has no usable spatial mode")]
    ZeroChannel,
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Tuning knobs for the block proximal-gradient solver. The defaults are
/// the settings used throughout the benchmark experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    /// Iteration cap.
    pub max_iters: usize,
    /// Initial line-search step for both blocks.
    pub alpha0: f64,
    /// Step multiplier while a candidate is rejected (in `(0, 1)`).
    pub shrink: f64,
    /// Step multiplier applied after an accepted step (at least 1).
    pub growth: f64,
    /// Scale on the quadratic term of the acceptance test.
    pub sufficient_decrease: f64,
    /// Relative objective-decrease threshold that stops the iteration.
    pub tolerance: f64,
    /// Consecutive sub-tolerance iterations required before stopping. A
    /// single slow iteration is often a plateau the growing step size will
    /// cross a few iterations later, not convergence; patience keeps the
    /// solver from declaring victory there.
    pub tolerance_patience: usize,
    /// Redo an iteration without extrapolation when it would increase the
    /// objective, keeping the trace non-increasing. Disable only to study
    /// raw extrapolation behavior.
    pub momentum_restart: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            alpha0: 1.0,
            shrink: 0.5,
            growth: 2.0,
            sufficient_decrease: 1.0,
            tolerance: 1e-6,
            tolerance_patience: 10,
            momentum_restart: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |msg: &str| Err(OptimizerError::InvalidConfig(msg.into()));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.alpha0.is_finite() && self.alpha0 > 0.0) {
            return bad("alpha0 must be positive and finite");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink must lie strictly between 0 and 1");
        }
        if !(self.growth.is_finite() && self.growth >= 1.0) {
            return bad("growth must be at least 1");
        }
        if !(self.sufficient_decrease.is_finite() && self.sufficient_decrease > 0.0) {
            return bad("sufficient_decrease must be positive");
        }
        if !(self.tolerance.is_finite() && self.tolerance >= 0.0) {
            return bad("tolerance must be nonnegative");
        }
        if self.tolerance_patience == 0 {
            return bad("tolerance_patience must be at least 1");
        }
        Ok(())
    }

    fn line_search_params(&self) -> LineSearchParams {
        LineSearchParams {
            shrink: self.shrink,
            growth: self.growth,
            sufficient_decrease: self.sufficient_decrease,
            min_step: MIN_STEP,
            max_step: MAX_STEP,
        }
    }
}

/// Output of [`da_cbpg_solve`].
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    /// Optimized precoder at the relaxed solution.
    pub precoder: Precoder,
    /// Relaxed per-element selection weights at convergence.
    pub weights: SimplexWeights,
    /// Phases implied by the relaxed weights (inside the codebook hull).
    pub phi_relaxed: CVec,
    /// Phases after snapping each element to its heaviest codebook entry.
    pub phi_discrete: CVec,
    /// Rate of the relaxed point `(precoder, phi_relaxed)` in bit/s/Hz.
    pub rate_relaxed: f64,
    /// Rate at `phi_discrete` after refitting the precoder for the snapped
    /// channel, in bit/s/Hz. This is the number a deployment would see.
    pub rate_discrete: f64,
    /// The refit precoder behind `rate_discrete`; `None` when the snapped
    /// channel is identically zero and no refit exists.
    pub discrete_precoder: Option<Precoder>,
    /// Objective value (`-ln det`) after every accepted iteration, starting
    /// with the initial point. Non-increasing when `momentum_restart` is on.
    pub trace: Vec<f64>,
    /// Accepted iterations.
    pub iterations: usize,
    /// Objective evaluations spent inside line searches.
    pub backtrack_evals: usize,
    /// Iterations redone without extrapolation by the safeguard.
    pub restarts: usize,
    /// Wall-clock solve time in milliseconds.
    pub wall_ms: f64,
}

/// One block's role in the descent: how its point maps to RIS phases, how to
/// project onto its feasible set, and how its gradient reads off the
/// cascade diagonal.
trait RisBlock {
    type Point: BlockVec;
    fn phases(&self, p: &Self::Point) -> CVec;
    fn prox(&self, p: &Self::Point) -> Self::Point;
    fn grad_from_zdiag(&self, z: &CVec) -> Self::Point;
}

/// Relaxed codebook-selection weights on per-element simplices.
struct WeightsBlock<'a> {
    codebook: &'a PhaseCodebook,
}

impl RisBlock for WeightsBlock<'_> {
    type Point = RVec;

    fn phases(&self, p: &RVec) -> CVec {
        phases_from_flat_weights(p, self.codebook)
    }

    fn prox(&self, p: &RVec) -> RVec {
        projections::project_block_simplex_flat(p, self.codebook.size())
    }

    fn grad_from_zdiag(&self, z: &CVec) -> RVec {
        crate::objective::weight_grad_from_zdiag(z, self.codebook)
    }
}

/// Continuous constant-modulus phases (the relaxation the quantizing
/// baselines optimize before snapping).
struct CirclePhaseBlock {
    amplitude: f64,
}

impl RisBlock for CirclePhaseBlock {
    type Point = CVec;

    fn phases(&self, p: &CVec) -> CVec {
        p.clone()
    }

    fn prox(&self, p: &CVec) -> CVec {
        project_circle(p, self.amplitude)
    }

    fn grad_from_zdiag(&self, z: &CVec) -> CVec {
        crate::objective::phase_grad_from_zdiag(z)
    }
}

/// Fixed phases; only the precoder moves. Used for post-discretization
/// refits.
struct FrozenPhases {
    phi: CVec,
}

impl RisBlock for FrozenPhases {
    type Point = RVec;

    fn phases(&self, _p: &RVec) -> CVec {
        self.phi.clone()
    }

    fn prox(&self, p: &RVec) -> RVec {
        p.clone()
    }

    fn grad_from_zdiag(&self, _z: &CVec) -> RVec {
        RVec::zeros(0)
    }
}

struct EngineRun<P> {
    f_mat: CMat,
    ris: P,
    f_value: f64,
    trace: Vec<f64>,
    iterations: usize,
    backtrack_evals: usize,
    restarts: usize,
}

struct AttemptOutcome<P> {
    f_new: CMat,
    r_new: P,
    f_value: f64,
    evals: usize,
}

fn extrapolation_weight(q: usize) -> f64 {
    q as f64 / (q as f64 + 3.0)
}

/// One full iteration (precoder block, then RIS block) from the given
/// extrapolated base points.
#[allow(clippy::too_many_arguments)]
fn attempt_iteration<B: RisBlock>(
    channels: &ChannelSet,
    budget: &LinkBudget,
    block: &B,
    params: &LineSearchParams,
    state_f: &mut BacktrackingState,
    state_r: &mut BacktrackingState,
    f_cur: &CMat,
    f_prev: &CMat,
    r_cur: &B::Point,
    r_prev: &B::Point,
    w: f64,
    power: f64,
) -> Result<AttemptOutcome<B::Point>, LineSearchError> {
    let mut evals = 0usize;

    // Precoder block: gradient at the extrapolated precoder with the phases
    // held at the current RIS point.
    let phi_cur = block.phases(r_cur);
    let base_f = if w == 0.0 { f_cur.clone() } else { f_cur.add_scaled(w, &f_cur.sub(f_prev)) };
    let base_prod = precoder_products(channels, &base_f)?;
    let base_terms = eval_terms(channels, budget, &base_prod, &phi_cur)?;
    let grad_f = grad_precoder_from_terms(channels, budget, &phi_cur, &base_terms)?;
    let prox_f = |x: &CMat| project_frobenius_ball(x, power);
    let mut eval_f = |x: &CMat| -> Result<f64, ObjectiveError> {
        let prod = precoder_products(channels, x)?;
        Ok(eval_terms(channels, budget, &prod, &phi_cur)?.f)
    };
    let step_f =
        backtracking_step(params, state_f, &base_f, base_terms.f, &grad_f, &prox_f, &mut eval_f)?;
    evals += step_f.evals;
    let f_new = step_f.point;

    // RIS block: gradient at the extrapolated RIS point with the precoder
    // held at its fresh value. The factored precoder products are computed
    // once and reused by every evaluation in this search.
    let prod_new = precoder_products(channels, &f_new)?;
    let base_r =
        if w == 0.0 { r_cur.clone() } else { r_cur.add_scaled(w, &r_cur.sub(r_prev)) };
    let phi_base = block.phases(&base_r);
    let terms_base = eval_terms(channels, budget, &prod_new, &phi_base)?;
    let z = zdiag_from_terms(channels, budget, &prod_new.w, &terms_base)?;
    let grad_r = block.grad_from_zdiag(&z);
    let prox_r = |x: &B::Point| block.prox(x);
    let mut eval_r = |x: &B::Point| -> Result<f64, ObjectiveError> {
        Ok(eval_terms(channels, budget, &prod_new, &block.phases(x))?.f)
    };
    let step_r = backtracking_step(
        params,
        state_r,
        &base_r,
        terms_base.f,
        &grad_r,
        &prox_r,
        &mut eval_r,
    )?;
    evals += step_r.evals;

    Ok(AttemptOutcome { f_new, r_new: step_r.point, f_value: step_r.f_value, evals })
}

fn wrap_linesearch(err: LineSearchError, trace: &[f64]) -> OptimizerError {
    match err {
        LineSearchError::StepUnderflow { alpha, .. } => {
            OptimizerError::StepUnderflow { alpha, trace: trace.to_vec() }
        }
        LineSearchError::Objective(e) => OptimizerError::Objective(e),
    }
}

/// Shared descent loop for every block parameterization.
fn block_descent<B: RisBlock>(
    channels: &ChannelSet,
    budget: &LinkBudget,
    block: &B,
    cfg: &OptimizerConfig,
    f0: CMat,
    r0: B::Point,
) -> Result<EngineRun<B::Point>, OptimizerError> {
    cfg.validate()?;
    let power = f0.ncols() as f64;
    let params = cfg.line_search_params();
    let mut state_f = BacktrackingState::new(cfg.alpha0);
    let mut state_r = BacktrackingState::new(cfg.alpha0);

    let prod0 = precoder_products(channels, &f0)?;
    let phi0 = block.phases(&r0);
    let mut f_value = eval_terms(channels, budget, &prod0, &phi0)?.f;
    let mut trace = vec![f_value];

    let mut f_mat_cur = f0.clone();
    let mut f_mat_prev = f0;
    let mut r_prev = r0.clone();
    let mut r_cur = r0;

    let mut backtrack_evals = 0usize;
    let mut restarts = 0usize;
    let mut iterations = 0usize;

    let mut quiet_iters = 0usize;
    // Extrapolation counter. It tracks the iteration count until a restart,
    // which resets it so the momentum weight rebuilds from zero; without
    // the reset the very next iteration would extrapolate at full weight
    // again, overshoot again, and thrash restarts until the line-search
    // step size is ground down to nothing.
    let mut q_momentum = 0usize;
    for _ in 0..cfg.max_iters {
        let w = extrapolation_weight(q_momentum);
        let mut outcome = attempt_iteration(
            channels, budget, block, &params, &mut state_f, &mut state_r, &f_mat_cur,
            &f_mat_prev, &r_cur, &r_prev, w, power,
        )
        .map_err(|e| wrap_linesearch(e, &trace))?;
        backtrack_evals += outcome.evals;

        if cfg.momentum_restart && outcome.f_value > f_value && w > 0.0 {
            // The extrapolated base points overshot. From the current
            // iterate an accepted step cannot increase the objective, so
            // redoing the iteration without extrapolation restores descent.
            restarts += 1;
            q_momentum = 0;
            outcome = attempt_iteration(
                channels, budget, block, &params, &mut state_f, &mut state_r, &f_mat_cur,
                &f_mat_prev, &r_cur, &r_prev, 0.0, power,
            )
            .map_err(|e| wrap_linesearch(e, &trace))?;
            backtrack_evals += outcome.evals;
        }

        if cfg.momentum_restart && outcome.f_value > f_value {
            // Not even the plain step improved within roundoff; keep the
            // current iterate.
            break;
        }

        let f_old = f_value;
        f_mat_prev = std::mem::replace(&mut f_mat_cur, outcome.f_new);
        r_prev = std::mem::replace(&mut r_cur, outcome.r_new);
        f_value = outcome.f_value;
        trace.push(f_value);
        iterations += 1;
        q_momentum += 1;

        if (f_old - f_value).abs() <= cfg.tolerance * f_old.abs().max(1.0) {
            quiet_iters += 1;
            if quiet_iters >= cfg.tolerance_patience {
                break;
            }
        } else {
            quiet_iters = 0;
        }
    }

    Ok(EngineRun { f_mat: f_mat_cur, ris: r_cur, f_value, trace, iterations, backtrack_evals, restarts })
}

/// Feasible starting precoder for a dead channel: unit power spread over
/// transmit antennas, scaled to the exact budget.
fn fallback_precoder(n_tx: usize, n_s: usize) -> CMat {
    let mut f = CMat::zeros(n_tx, n_s);
    for k in 0..n_s {
        f[(k % n_tx, k)] += Complex64::ONE;
    }
    let scale = (n_s as f64 / frob_norm_sq(&f)).sqrt();
    f * Complex64::from(scale)
}

/// Default starting precoder: the waterfilling solution for the channel at
/// the given phases, falling back to a uniform feasible precoder when that
/// channel has no usable mode.
pub fn initial_precoder(
    channels: &ChannelSet,
    budget: &LinkBudget,
    phi: &CVec,
    n_s: usize,
) -> Result<CMat, OptimizerError> {
    let h = effective_channel(channels, phi)?;
    match waterfilling_oracle(&h, budget, n_s) {
        Ok(sol) => Ok(sol.precoder.into_mat()),
        Err(OptimizerError::ZeroChannel) => Ok(fallback_precoder(channels.n_tx(), n_s)),
        Err(e) => Err(e),
    }
}

/// Runs the relaxed block proximal-gradient solver and reports both the
/// relaxed and the discretized solutions.
///
/// `init_precoder` defaults to the waterfilling precoder for the channel at
/// the initial phases; `init_weights` defaults to uniform weights (every
/// element at its hull barycenter). When supplied, the initial precoder
/// must already satisfy the power budget for `n_s` streams.
pub fn da_cbpg_solve(
    channels: &ChannelSet,
    budget: &LinkBudget,
    codebook: &PhaseCodebook,
    cfg: &OptimizerConfig,
    n_s: usize,
    init_precoder: Option<&CMat>,
    init_weights: Option<&SimplexWeights>,
) -> Result<SolveResult, OptimizerError> {
    let start = Instant::now();
    cfg.validate()?;
    if n_s == 0 {
        return Err(OptimizerError::InvalidConfig("need at least one stream".into()));
    }

    let n_ris = channels.n_ris();
    let m = codebook.size();
    let t0: RVec = match init_weights {
        Some(wts) => {
            if wts.n_ris() != n_ris || wts.m() != m {
                return Err(OptimizerError::DimensionMismatch(format!(
                    "initial weights are {}x{} but the problem needs {}x{}",
                    wts.n_ris(),
                    wts.m(),
                    n_ris,
                    m
                )));
            }
            wts.as_vector().clone()
        }
        None => SimplexWeights::uniform(n_ris, m).as_vector().clone(),
    };

    let f0: CMat = match init_precoder {
        Some(f) => {
            if f.ncols() != n_s {
                return Err(OptimizerError::DimensionMismatch(format!(
                    "initial precoder has {} columns but n_s = {}",
                    f.ncols(),
                    n_s
                )));
            }
            Precoder::new(f.clone())?.into_mat()
        }
        None => {
            let phi0 = phases_from_flat_weights(&t0, codebook);
            initial_precoder(channels, budget, &phi0, n_s)?
        }
    };

    let block = WeightsBlock { codebook };
    let run = block_descent(channels, budget, &block, cfg, f0, t0)?;

    let weights = SimplexWeights::new(run.ris, m)?;
    let phi_relaxed = phases_from_flat_weights(weights.as_vector(), codebook);
    let phi_discrete = weights.discretize(codebook);
    let h_discrete = effective_channel(channels, &phi_discrete)?;
    let (rate_discrete, discrete_precoder) = match waterfilling_oracle(&h_discrete, budget, n_s) {
        Ok(sol) => (sol.rate, Some(sol.precoder)),
        Err(OptimizerError::ZeroChannel) => (0.0, None),
        Err(e) => return Err(e),
    };

    Ok(SolveResult {
        precoder: Precoder::new(run.f_mat)?,
        weights,
        phi_relaxed,
        phi_discrete,
        rate_relaxed: rate_from_objective(run.f_value),
        rate_discrete,
        discrete_precoder,
        trace: run.trace,
        iterations: run.iterations,
        backtrack_evals: run.backtrack_evals,
        restarts: run.restarts,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Output of [`refit_precoder`].
#[derive(Debug, Clone)]
pub struct RefitResult {
    pub precoder: Precoder,
    /// Rate at `(precoder, phi)` in bit/s/Hz.
    pub rate: f64,
    pub iterations: usize,
    pub backtrack_evals: usize,
    pub trace: Vec<f64>,
}

/// Re-optimizes the precoder for a fixed phase configuration by running the
/// solver's precoder block alone, starting from `f_init`.
///
/// This is the iterative counterpart of [`waterfilling_oracle`] on the
/// combined channel at `phi`; the two agree to within the solver tolerance
/// and the iterative form exists to recover a precoder after quantizing
/// phases without leaving the descent framework.
pub fn refit_precoder(
    channels: &ChannelSet,
    budget: &LinkBudget,
    phi: &CVec,
    cfg: &OptimizerConfig,
    f_init: &CMat,
) -> Result<RefitResult, OptimizerError> {
    let f0 = Precoder::new(f_init.clone())?.into_mat();
    let block = FrozenPhases { phi: phi.clone() };
    let run = block_descent(channels, budget, &block, cfg, f0, RVec::zeros(0))?;
    Ok(RefitResult {
        precoder: Precoder::new(run.f_mat)?,
        rate: rate_from_objective(run.f_value),
        iterations: run.iterations,
        backtrack_evals: run.backtrack_evals,
        trace: run.trace,
    })
}
