//! The discrete reflection-coefficient set and its convex-hull relaxation.
//!
//! Each RIS element applies a coefficient from the codebook
//! `theta_k = a e^{j 2 pi k / M}`, `k = 0..M-1`, `M = 2^{N_b}`. Optimizing
//! over that set directly is combinatorial, so the solver relaxes element
//! `i`'s choice to a convex combination `phi_i = sum_k T_ik theta_k` with
//! the weight row `T_i` on the probability simplex. A vertex of the simplex
//! recovers an exact codebook entry; the interior covers the convex hull of
//! the `M` roots of unity (scaled by `a`), which always lies inside the
//! disc `|phi_i| <= a`.

use crate::numerics::{CVec, RVec};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodebookError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("weight vector length {len} is not divisible into rows of {m}")]
    BadWeightLength { len: usize, m: usize },
    #[error("weight row {row} violates the simplex: {reason}")]
    NotOnSimplex { row: usize, reason: String },
}

/// The `M = 2^{N_b}` allowed reflection coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCodebook {
    amplitude: f64,
    bits: u32,
    theta: CVec,
}

impl PhaseCodebook {
    pub fn new(amplitude: f64, bits: u32) -> Result<Self, CodebookError> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(CodebookError::Invalid {
                field: "amplitude",
                reason: format!("must be positive and finite, got {amplitude}"),
            });
        }
        if bits == 0 || bits > 16 {
            return Err(CodebookError::Invalid {
                field: "bits",
                reason: format!("must be in 1..=16, got {bits}"),
            });
        }
        let m = 1usize << bits;
        let theta = CVec::from_fn(m, |k, _| {
            Complex64::from_polar(amplitude, 2.0 * PI * k as f64 / m as f64)
        });
        Ok(Self { amplitude, bits, theta })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of codebook entries, `M = 2^{bits}`.
    pub fn size(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &CVec {
        &self.theta
    }

    pub fn entry(&self, k: usize) -> Complex64 {
        self.theta[k]
    }

    /// Index of the codebook entry closest to `z` in Euclidean distance,
    /// ties broken toward the smallest index.
    pub fn nearest_index(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, theta) in self.theta.iter().enumerate() {
            let d = (z - theta).norm_sqr();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }
}

/// Maps each entry of `phi` to its nearest codebook coefficient.
pub fn quantize_nearest(phi: &CVec, cb: &PhaseCodebook) -> CVec {
    CVec::from_fn(phi.len(), |i, _| cb.entry(cb.nearest_index(phi[i])))
}

/// The relaxed RIS variable: one weight row per element, each row a point
/// on the probability simplex over the `M` codebook entries.
///
/// Stored as the flat vector `t` with block `i` (entries `i*M .. (i+1)*M`)
/// holding element `i`'s row.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SimplexWeights {
    t: RVec,
    m: usize,
}

/// Row-feasibility slack tolerated by the constructor.
pub const SIMPLEX_TOL: f64 = 1e-9;

impl SimplexWeights {
    /// Wraps a flat weight vector, checking block structure and feasibility
    /// (entries `>= -1e-9`, each block summing to 1 within `1e-9`).
    pub fn new(t: RVec, m: usize) -> Result<Self, CodebookError> {
        if m == 0 || !t.len().is_multiple_of(m) {
            return Err(CodebookError::BadWeightLength { len: t.len(), m });
        }
        let n_ris = t.len() / m;
        for i in 0..n_ris {
            let block = t.rows(i * m, m);
            let mut sum = 0.0;
            for &w in block.iter() {
                if w.is_nan() || w < -SIMPLEX_TOL {
                    return Err(CodebookError::NotOnSimplex {
                        row: i,
                        reason: format!("negative or NaN weight {w}"),
                    });
                }
                sum += w;
            }
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(CodebookError::NotOnSimplex {
                    row: i,
                    reason: format!("row sums to {sum}"),
                });
            }
        }
        Ok(Self { t, m })
    }

    /// Uniform rows `1/M`: the barycenter of the hull, which maps to
    /// `phi = 0` (the surface starts out transparent).
    pub fn uniform(n_ris: usize, m: usize) -> Self {
        assert!(m >= 1, "codebook must be non-empty");
        Self { t: RVec::from_element(n_ris * m, 1.0 / m as f64), m }
    }

    /// Vertex weights: element `i` committed to codebook index `ks[i]`.
    pub fn vertex(ks: &[usize], m: usize) -> Self {
        let mut t = RVec::zeros(ks.len() * m);
        for (i, &k) in ks.iter().enumerate() {
            assert!(k < m, "codebook index {k} out of range for M = {m}");
            t[i * m + k] = 1.0;
        }
        Self { t, m }
    }

    pub fn n_ris(&self) -> usize {
        self.t.len().checked_div(self.m).unwrap_or(0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The flat weight vector `t`.
    pub fn as_vector(&self) -> &RVec {
        &self.t
    }

    pub fn row(&self, i: usize) -> nalgebra::DVectorView<'_, f64> {
        self.t.rows(i * self.m, self.m)
    }

    /// Commits each element to its heaviest codebook entry (ties to the
    /// smallest index), returning exact codebook values.
    pub fn discretize(&self, cb: &PhaseCodebook) -> CVec {
        assert_eq!(self.m, cb.size(), "weights and codebook disagree on M");
        CVec::from_fn(self.n_ris(), |i, _| {
            let row = self.row(i);
            let mut best = 0;
            let mut best_w = f64::NEG_INFINITY;
            for (k, &w) in row.iter().enumerate() {
                if w > best_w {
                    best_w = w;
                    best = k;
                }
            }
            cb.entry(best)
        })
    }
}

/// The relaxation map `phi_i = sum_k T_ik theta_k` from weights to
/// reflection coefficients. Accepts any flat vector with the right block
/// structure (extrapolated points may sit slightly off the simplex).
pub fn phases_from_flat_weights(t: &RVec, cb: &PhaseCodebook) -> CVec {
    let m = cb.size();
    assert_eq!(t.len() % m, 0, "weight vector length {} not divisible by M={m}", t.len());
    let n_ris = t.len() / m;
    CVec::from_fn(n_ris, |i, _| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..m {
            acc += cb.entry(k) * t[i * m + k];
        }
        acc
    })
}

/// [`phases_from_flat_weights`] for a feasible [`SimplexWeights`].
pub fn phases_from_weights(w: &SimplexWeights, cb: &PhaseCodebook) -> CVec {
    assert_eq!(w.m(), cb.size(), "weights and codebook disagree on M");
    phases_from_flat_weights(w.as_vector(), cb)
}
