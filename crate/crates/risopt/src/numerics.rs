//! Complex linear-algebra primitives and reproducible random streams.
//!
//! Everything downstream (channel synthesis, rate objectives, the solver)
//! funnels through the handful of operations here, so the contracts are
//! deliberately strict:
//!
//! - Log-determinants and solves of Hermitian positive-definite matrices go
//!   through a Cholesky factorization. An explicit inverse or a raw
//!   determinant would amplify rounding badly at high SNR, where the Gram
//!   matrix `I + c F^H H^H H F` is poorly conditioned.
//! - Inputs are checked for Hermitian symmetry (tolerance `1e-10` relative
//!   to the Frobenius norm) and then symmetrized as `(A + A^H) / 2` before
//!   factoring, absorbing round-off from upstream products.
//! - Randomness is keyed by a `(seed, stream)` pair mapped onto independent
//!   ChaCha streams, so trial `k` can draw from stream `k` and reproduce
//!   bitwise regardless of scheduling or thread count.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Dense complex matrix: the universal carrier for channels, precoders,
/// Gram matrices and gradients. Entries are stored column-major.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector (reflection coefficients, steering vectors).
pub type CVec = DVector<Complex64>;
/// Dense real column vector (relaxed selection weights, eigenvalues).
pub type RVec = DVector<f64>;

/// Relative tolerance of the Hermitian-symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix must be non-empty, got {rows}x{cols}")]
    Empty { rows: usize, cols: usize },
    #[error("entry count {len} does not match {rows}x{cols}")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { asymmetry: f64, tolerance: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
}

/// Builds a matrix from column-major entries, enforcing the construction
/// invariants (non-empty shape, matching length, all entries finite).
///
/// Internal arithmetic produces matrices directly through `nalgebra`; this
/// checked path is for data crossing a trust boundary (files, configs).
pub fn checked_cmat(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<CMat, NumericsError> {
    if rows == 0 || cols == 0 {
        return Err(NumericsError::Empty { rows, cols });
    }
    if entries.len() != rows * cols {
        return Err(NumericsError::BadLength { rows, cols, len: entries.len() });
    }
    let m = CMat::from_vec(rows, cols, entries);
    ensure_finite(&m)?;
    Ok(m)
}

/// Errors with the offending index if any entry is NaN or infinite.
pub fn ensure_finite(m: &CMat) -> Result<(), NumericsError> {
    for col in 0..m.ncols() {
        for row in 0..m.nrows() {
            let z = m[(row, col)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(NumericsError::NonFinite { row, col });
            }
        }
    }
    Ok(())
}

/// Squared Frobenius norm, `sum |a_ij|^2`.
pub fn frob_norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Real part of the Frobenius inner product `<a, b> = trace(a^H b)`.
pub fn re_inner(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Verifies `A` is square and Hermitian within [`HERMITIAN_TOL`] relative to
/// its Frobenius norm, then returns the symmetrized `(A + A^H) / 2`.
fn checked_hermitian(a: &CMat) -> Result<CMat, NumericsError> {
    if a.nrows() != a.ncols() {
        return Err(NumericsError::DimensionMismatch {
            context: format!("expected square matrix, got {}x{}", a.nrows(), a.ncols()),
        });
    }
    if a.is_empty() {
        return Err(NumericsError::Empty { rows: a.nrows(), cols: a.ncols() });
    }
    ensure_finite(a)?;
    let adj = a.adjoint();
    let asymmetry = frob_norm_sq(&(a - &adj)).sqrt();
    let tolerance = HERMITIAN_TOL * frob_norm_sq(a).sqrt();
    if asymmetry > tolerance {
        return Err(NumericsError::NotHermitian { asymmetry, tolerance });
    }
    Ok((a + adj).map(|z| z * 0.5))
}

/// Cholesky-factors a symmetrized Hermitian matrix, rejecting inputs that
/// are not positive definite.
///
/// `nalgebra` factors in the complex field, where `sqrt` of a negative
/// pivot quietly succeeds (e.g. `sqrt(-1) = i`), so a `Some` result alone
/// does not certify definiteness; a valid factor of a Hermitian PD matrix
/// must have a strictly positive real diagonal with negligible imaginary
/// part, and that is checked explicitly.
fn pd_cholesky(sym: CMat) -> Result<Cholesky<Complex64, nalgebra::Dyn>, NumericsError> {
    let chol = Cholesky::new(sym).ok_or(NumericsError::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !d.re.is_finite() || !d.im.is_finite() || d.re <= 0.0 || d.im.abs() > 1e-8 * d.re {
            return Err(NumericsError::NotPositiveDefinite);
        }
    }
    Ok(chol)
}

/// `ln det(A)` for Hermitian positive-definite `A`, computed as twice the
/// sum of the log-diagonal of the Cholesky factor.
pub fn hermitian_logdet(a: &CMat) -> Result<f64, NumericsError> {
    let sym = checked_hermitian(a)?;
    let chol = pd_cholesky(sym)?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        acc += l[(i, i)].re.ln();
    }
    Ok(2.0 * acc)
}

/// Solves `A X = B` for Hermitian positive-definite `A` via Cholesky.
/// Never forms `A^{-1}`.
pub fn pd_solve(a: &CMat, b: &CMat) -> Result<CMat, NumericsError> {
    let sym = checked_hermitian(a)?;
    if sym.ncols() != b.nrows() {
        return Err(NumericsError::DimensionMismatch {
            context: format!("A is {}x{} but B has {} rows", sym.nrows(), sym.ncols(), b.nrows()),
        });
    }
    let chol = pd_cholesky(sym)?;
    Ok(chol.solve(b))
}

/// Eigendecomposition of a Hermitian matrix. Returns `(values, vectors)`
/// with eigenvalues sorted descending and eigenvectors in matching columns.
pub fn hermitian_eigen(a: &CMat) -> Result<(RVec, CMat), NumericsError> {
    let sym = checked_hermitian(a)?;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let values = RVec::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// A reproducible random stream identified by `(seed, stream)`.
///
/// The same pair always yields the same sample sequence; distinct stream ids
/// under one seed are statistically independent. Monte Carlo trial `k`
/// conventionally owns stream `k`, which makes results independent of
/// execution order and worker count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Instantiates the generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Draws a `rows x cols` matrix of i.i.d. circularly-symmetric complex
/// Gaussian entries with `E|x|^2 = variance` (real and imaginary parts each
/// `N(0, variance/2)`). Entries are drawn in column-major order, real part
/// before imaginary part, so the sequence is part of the format contract.
///
/// Panics if `variance <= 0`.
pub fn sample_cgaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize, variance: f64) -> CMat {
    assert!(variance > 0.0, "variance must be positive, got {variance}");
    let sigma = (variance / 2.0).sqrt();
    CMat::from_iterator(
        rows,
        cols,
        std::iter::repeat_with(|| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re * sigma, im * sigma)
        })
        .take(rows * cols),
    )
}
