//! Minimal vector-space operations shared by the line search and the
//! extrapolation steps, implemented for the block types the solver moves
//! through: complex precoder matrices, complex phase vectors, and real
//! weight vectors.

use crate::numerics::{CMat, CVec, RVec};
use num_complex::Complex64;

pub trait BlockVec: Clone {
    /// `self - other`.
    fn sub(&self, other: &Self) -> Self;
    /// `self + alpha * dir`.
    fn add_scaled(&self, alpha: f64, dir: &Self) -> Self;
    /// `Re <self, other>` under the Frobenius inner product.
    fn re_dot(&self, other: &Self) -> f64;
    /// Squared Frobenius norm.
    fn norm_sq(&self) -> f64;
}

macro_rules! impl_complex_blockvec {
    ($t:ty) => {
        impl BlockVec for $t {
            fn sub(&self, other: &Self) -> Self {
                self - other
            }

            fn add_scaled(&self, alpha: f64, dir: &Self) -> Self {
                self + dir * Complex64::new(alpha, 0.0)
            }

            fn re_dot(&self, other: &Self) -> f64 {
                self.iter().zip(other.iter()).map(|(a, b)| (a.conj() * b).re).sum()
            }

            fn norm_sq(&self) -> f64 {
                self.iter().map(|z| z.norm_sqr()).sum()
            }
        }
    };
}

impl_complex_blockvec!(CMat);
impl_complex_blockvec!(CVec);

impl BlockVec for RVec {
    fn sub(&self, other: &Self) -> Self {
        self - other
    }

    fn add_scaled(&self, alpha: f64, dir: &Self) -> Self {
        self + dir * alpha
    }

    fn re_dot(&self, other: &Self) -> f64 {
        self.dot(other)
    }

    fn norm_sq(&self) -> f64 {
        self.norm_squared()
    }
}
