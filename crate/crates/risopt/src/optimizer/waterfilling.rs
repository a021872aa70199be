//! Closed-form capacity-achieving precoder for a fixed channel.
//!
//! For a channel `H` with per-stream transmit power `rho` and noise power
//! `p_n`, the rate-optimal precoder under `||F||_F^2 <= N_s` steers along
//! the top right singular vectors of `H` and waterfills the power budget
//! over the corresponding singular values. The water level is found exactly
//! by trying active sets in decreasing size: modes are sorted by inverse
//! gain, and the largest set whose common level clears every member's
//! threshold is the optimum.

use num_complex::Complex64;

use super::OptimizerError;
use crate::numerics::{hermitian_eigen, CMat, RVec};
use crate::objective::{LinkBudget, Precoder};

/// Relative eigenvalue threshold below which a mode counts as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct WaterfillingSolution {
    pub precoder: Precoder,
    /// Achievable rate in bit/s/Hz at the waterfilled allocation.
    pub rate: f64,
    /// Set when the channel offers fewer usable modes than requested
    /// streams; the power budget is then spread over the modes that exist
    /// and the remaining precoder columns are zero.
    pub rank_deficient: bool,
    /// Per-stream transmit powers (length `n_s`, zeros past the rank).
    pub powers: RVec,
    /// Squared singular values of the channel for the allocated modes.
    pub gains: RVec,
}

/// Computes the waterfilling precoder and rate for channel `h` with `n_s`
/// requested streams.
///
/// Fails with [`OptimizerError::ZeroChannel`] when `h` has no usable mode at
/// all (an all-zero matrix), since no power allocation is meaningful there.
pub fn waterfilling_oracle(
    h: &CMat,
    budget: &LinkBudget,
    n_s: usize,
) -> Result<WaterfillingSolution, OptimizerError> {
    if n_s == 0 {
        return Err(OptimizerError::InvalidConfig("waterfilling needs at least one stream".into()));
    }
    let (n_rx, n_tx) = h.shape();
    if n_rx == 0 || n_tx == 0 {
        return Err(OptimizerError::ZeroChannel);
    }

    // Eigen-decompose the smaller Gram matrix; its eigenvalues are the
    // squared singular values, and the right singular vectors follow either
    // directly or through one product with the adjoint.
    let (values, vectors) = if n_rx <= n_tx {
        hermitian_eigen(&(h * h.adjoint()))?
    } else {
        hermitian_eigen(&(h.adjoint() * h))?
    };

    let top = values[0].max(0.0);
    if top <= 0.0 {
        return Err(OptimizerError::ZeroChannel);
    }
    let usable = values.iter().take_while(|&&v| v > top * RANK_TOL).count();
    let m = usable.min(n_s);
    let rank_deficient = m < n_s;

    let c = budget.snr_scale();
    let thresholds: Vec<f64> = (0..m).map(|k| 1.0 / (c * values[k])).collect();

    // Thresholds are ascending (eigenvalues descending), so the optimal
    // active set is a prefix. Scan from the largest candidate set down; the
    // singleton always succeeds.
    let mut level = 0.0;
    let mut active = 0;
    for j in (1..=m).rev() {
        let candidate = (n_s as f64 + thresholds[..j].iter().sum::<f64>()) / j as f64;
        if candidate > thresholds[j - 1] {
            level = candidate;
            active = j;
            break;
        }
    }
    debug_assert!(active >= 1);

    let mut powers = RVec::zeros(n_s);
    let mut gains = RVec::zeros(n_s);
    let mut rate = 0.0;
    for k in 0..active {
        powers[k] = level - thresholds[k];
        gains[k] = values[k];
        rate += (1.0 + c * values[k] * powers[k]).log2();
    }
    for k in active..m {
        gains[k] = values[k];
    }

    let mut f = CMat::zeros(n_tx, n_s);
    for k in 0..active {
        let v = if n_rx <= n_tx {
            let u = vectors.column(k).into_owned();
            let sigma = values[k].sqrt();
            h.adjoint() * u / Complex64::from(sigma)
        } else {
            vectors.column(k).into_owned()
        };
        f.column_mut(k).copy_from(&(v * Complex64::from(powers[k].sqrt())));
    }

    let precoder = Precoder::new(f)?;
    Ok(WaterfillingSolution { precoder, rate, rank_deficient, powers, gains })
}

/// Waterfilling rate for `h`, with an all-zero channel reported as zero rate
/// rather than an error. Convenience for baselines and discretized refits
/// where a dead channel is a legitimate (if hopeless) operating point.
pub fn waterfilling_rate_or_zero(h: &CMat, budget: &LinkBudget, n_s: usize) -> Result<f64, OptimizerError> {
    match waterfilling_oracle(h, budget, n_s) {
        Ok(sol) => Ok(sol.rate),
        Err(OptimizerError::ZeroChannel) => Ok(0.0),
        Err(e) => Err(e),
    }
}
