//! Euclidean projections onto the solver's feasible sets: the Frobenius-norm
//! power ball for precoders, the probability simplex (per RIS element) for
//! relaxed selection weights, and the constant-modulus circle for
//! continuous-phase baselines.

use num_complex::Complex64;

use super::OptimizerError;
use crate::numerics::{frob_norm_sq, CMat, CVec, RVec};

/// Projects `x` onto the ball `{ X : ||X||_F^2 <= power }`.
///
/// Points already inside the ball are returned unchanged (a clone of the
/// input, bit for bit). The feasibility test carries a few ulps of slack so
/// that re-projecting an already-projected matrix is a no-op even when the
/// scaled norm rounds a hair above the boundary; the slack is orders of
/// magnitude below every tolerance used elsewhere.
pub fn project_frobenius_ball(x: &CMat, power: f64) -> CMat {
    assert!(power.is_finite() && power > 0.0, "power budget must be positive");
    let n2 = frob_norm_sq(x);
    if n2 <= power * (1.0 + 4.0 * f64::EPSILON) {
        x.clone()
    } else {
        x * Complex64::from((power / n2).sqrt())
    }
}

/// Projects `x` onto the probability simplex `{ y : y_i >= 0, sum y_i = 1 }`.
///
/// Uses the sort-and-threshold rule: with `u` the entries of `x` sorted in
/// descending order, the active-set size is the largest `j` such that
/// `u_j + (1 - sum_{i<=j} u_i) / j > 0`, and every entry is shifted by the
/// corresponding multiplier and clipped at zero. The output is exactly
/// nonnegative and sums to one up to roundoff.
pub fn project_simplex(x: &RVec) -> RVec {
    assert!(!x.is_empty(), "cannot project an empty vector onto a simplex");
    let mut sorted: Vec<f64> = x.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("simplex projection needs finite entries"));

    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (1.0 - cumsum) / (j + 1) as f64;
        if u + candidate > 0.0 {
            shift = candidate;
        } else {
            break;
        }
    }
    RVec::from_iterator(x.len(), x.iter().map(|&v| (v + shift).max(0.0)))
}

/// Projects a flat weight vector onto the product of per-element simplices.
///
/// The vector stacks one length-`m` block per RIS element; each block is
/// projected independently. Fails if the length is not a multiple of `m`.
pub fn project_block_simplex(t: &RVec, m: usize) -> Result<RVec, OptimizerError> {
    if m == 0 || !t.len().is_multiple_of(m) {
        return Err(OptimizerError::DimensionMismatch(format!(
            "weight vector of length {} does not split into blocks of {}",
            t.len(),
            m
        )));
    }
    Ok(project_block_simplex_flat(t, m))
}

pub(super) fn project_block_simplex_flat(t: &RVec, m: usize) -> RVec {
    debug_assert!(m > 0 && t.len().is_multiple_of(m));
    let mut out = RVec::zeros(t.len());
    for i in 0..t.len() / m {
        let block = project_simplex(&t.rows(i * m, m).into_owned());
        out.rows_mut(i * m, m).copy_from(&block);
    }
    out
}

/// Projects each entry of `phi` onto the circle of radius `amplitude`.
///
/// An entry at (or numerically indistinguishable from) the origin has no
/// nearest point on the circle; by convention it maps to `amplitude + 0i`.
pub fn project_circle(phi: &CVec, amplitude: f64) -> CVec {
    assert!(amplitude.is_finite() && amplitude > 0.0, "amplitude must be positive");
    CVec::from_iterator(
        phi.len(),
        phi.iter().map(|z| {
            let r = z.norm();
            if r < 1e-300 {
                Complex64::new(amplitude, 0.0)
            } else {
                z * Complex64::from(amplitude / r)
            }
        }),
    )
}
