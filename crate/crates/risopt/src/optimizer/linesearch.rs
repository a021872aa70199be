//! Backtracking proximal line search with a persistent step size.
//!
//! Each block update takes a gradient step from the extrapolated point,
//! applies the block's projection, and accepts the candidate when the
//! sufficient-decrease condition
//!
//! `f(x+) <= f(xbar) + Re<g, x+ - xbar> + c * ||x+ - xbar||^2 / (2 alpha)`
//!
//! holds (with `c` the sufficient-decrease constant, 1 by default). An
//! accepted candidate with that condition can never exceed `f(xbar)`:
//! optimality of the projection gives `Re<g, d> <= -||d||^2 / (2 alpha)`
//! for the step `d = x+ - xbar`, so the right-hand side is at most
//! `f(xbar)`. The step size persists across calls — each search starts from
//! the previous accepted step grown by a constant factor — so the solver
//! pays only a handful of extra evaluations per iteration in steady state.

use super::space::BlockVec;
use crate::objective::ObjectiveError;

/// Step-size floor below which the search reports failure instead of
/// shrinking further.
pub const MIN_STEP: f64 = 1e-18;

/// Step-size ceiling. Growth on acceptance is clamped here; without a cap,
/// a long run of first-try acceptances (e.g. a block whose gradient has
/// gone to zero) doubles the step every iteration until it overflows, and
/// `inf * 0` then poisons the candidate with NaNs.
pub const MAX_STEP: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
pub struct LineSearchParams {
    /// Multiplier applied while a candidate is rejected (in `(0, 1)`).
    pub shrink: f64,
    /// Multiplier applied to an accepted step before the next search starts.
    pub growth: f64,
    /// Scale on the quadratic term of the acceptance test.
    pub sufficient_decrease: f64,
    /// Failure threshold for the step size.
    pub min_step: f64,
    /// Ceiling for the persistent step size.
    pub max_step: f64,
}

/// Step size kept between successive searches on the same block.
#[derive(Debug, Clone, Copy)]
pub struct BacktrackingState {
    pub alpha: f64,
}

impl BacktrackingState {
    pub fn new(alpha0: f64) -> Self {
        assert!(alpha0.is_finite() && alpha0 > 0.0, "initial step must be positive");
        Self { alpha: alpha0 }
    }
}

#[derive(Debug)]
pub struct StepOutcome<P> {
    /// Accepted point `x+`.
    pub point: P,
    /// Objective value at the accepted point.
    pub f_value: f64,
    /// Step size that produced the accepted point.
    pub alpha: f64,
    /// Number of objective evaluations spent in this search.
    pub evals: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum LineSearchError {
    #[error("step size underflow: alpha = {alpha:.3e} fell below {floor:.3e}")]
    StepUnderflow { alpha: f64, floor: f64 },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Runs one backtracking search for the block starting at `x_bar` with
/// objective value `f_bar` and (conjugate) gradient `grad`.
///
/// `prox` must be the projection onto the block's feasible set and `eval`
/// the objective restricted to this block. On success the state's step size
/// is set to the accepted step times the growth factor.
pub fn backtracking_step<P: BlockVec>(
    params: &LineSearchParams,
    state: &mut BacktrackingState,
    x_bar: &P,
    f_bar: f64,
    grad: &P,
    prox: &dyn Fn(&P) -> P,
    eval: &mut dyn FnMut(&P) -> Result<f64, ObjectiveError>,
) -> Result<StepOutcome<P>, LineSearchError> {
    debug_assert!(params.shrink > 0.0 && params.shrink < 1.0);
    debug_assert!(params.growth >= 1.0);
    let mut alpha = state.alpha.min(params.max_step);
    let mut evals = 0;
    loop {
        let candidate = prox(&x_bar.add_scaled(-alpha, grad));
        let f_cand = eval(&candidate)?;
        evals += 1;

        let step = candidate.sub(x_bar);
        let linear = grad.re_dot(&step);
        let quadratic = params.sufficient_decrease * step.norm_sq() / (2.0 * alpha);
        if f_cand <= f_bar + linear + quadratic {
            state.alpha = (alpha * params.growth).min(params.max_step);
            return Ok(StepOutcome { point: candidate, f_value: f_cand, alpha, evals });
        }

        alpha *= params.shrink;
        if alpha < params.min_step {
            return Err(LineSearchError::StepUnderflow { alpha, floor: params.min_step });
        }
    }
}
