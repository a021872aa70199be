//! Rate objective and its closed-form gradients.
//!
//! For a precoder `F`, reflection coefficients `phi`, and effective channel
//! `H = H_SD + H_RD diag(phi) H_SR`, the achievable rate is
//!
//! ```text
//! R = log2 det(I + c F^H H^H H F),   c = rho / P_n,
//! ```
//!
//! and the solver minimizes `f = -ln det(I + c F^H H^H H F) = -R ln 2`.
//!
//! Gradients follow the conjugate-cogradient convention: for a real scalar
//! function of a complex matrix, `df = 2 Re tr(G^H dX)` defines the gradient
//! `G` with respect to the conjugated variable, and `X - alpha G` is the
//! steepest-descent step. Writing `G = H F` and `M = I + c G^H G`:
//!
//! - precoder:  `grad_F = -c H^H G M^{-1}`;
//! - relaxed RIS weights: with `Z = c H_SR F M^{-1} G^H H_RD` (note the
//!   leading `c`, which the chain rule forces onto the same footing as the
//!   precoder gradient), the entry of `grad_t` for element `i` and codebook
//!   index `k` is `-2 Re(theta_k Z_ii)`;
//! - continuous phases: `grad_phi_i = -conj(Z_ii)`.
//!
//! Everything is evaluated through factored products (`H_SR F`, `H_SD F`,
//! row scalings by `phi`), never by forming `H` itself: a line search probes
//! many candidate points per iteration and the factored form makes each
//! probe linear instead of cubic in the RIS size. A finite-difference
//! oracle is included so the closed forms can be cross-checked instead of
//! trusted.

use crate::channel::ChannelSet;
use crate::codebook::{phases_from_flat_weights, PhaseCodebook};
use crate::numerics::{
    ensure_finite, frob_norm_sq, hermitian_logdet, pd_solve, CMat, CVec, NumericsError, RVec,
};
use num_complex::Complex64;
use std::f64::consts::LN_2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid link budget: {0}")]
    InvalidBudget(String),
    #[error("infeasible precoder: squared Frobenius norm {got:.6e} exceeds {bound:.6e}")]
    InfeasiblePrecoder { got: f64, bound: f64 },
}

/// Transmit power per stream and noise power, both in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    rho: f64,
    p_n: f64,
}

impl LinkBudget {
    pub fn new(rho: f64, p_n: f64) -> Result<Self, ObjectiveError> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(ObjectiveError::InvalidBudget(format!("rho must be > 0, got {rho}")));
        }
        if !(p_n > 0.0 && p_n.is_finite()) {
            return Err(ObjectiveError::InvalidBudget(format!("P_n must be > 0, got {p_n}")));
        }
        Ok(Self { rho, p_n })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn p_n(&self) -> f64 {
        self.p_n
    }

    /// The SNR scale `c = rho / P_n` multiplying the Gram matrix.
    pub fn snr_scale(&self) -> f64 {
        self.rho / self.p_n
    }
}

/// A transmit precoder, feasible w.r.t. the per-codeword power constraint
/// `||F||_F^2 <= N_s` (with `1e-9` slack for projected iterates).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Precoder {
    mat: CMat,
}

/// Feasibility slack tolerated on the squared Frobenius norm.
pub const POWER_TOL: f64 = 1e-9;

impl Precoder {
    pub fn new(mat: CMat) -> Result<Self, ObjectiveError> {
        if mat.is_empty() {
            return Err(ObjectiveError::DimensionMismatch("precoder must be non-empty".into()));
        }
        ensure_finite(&mat)?;
        let got = frob_norm_sq(&mat);
        let bound = mat.ncols() as f64 + POWER_TOL;
        if got > bound {
            return Err(ObjectiveError::InfeasiblePrecoder { got, bound });
        }
        Ok(Self { mat })
    }

    pub fn as_mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn n_streams(&self) -> usize {
        self.mat.ncols()
    }
}

/// The two precoder-dependent products reused across every evaluation at a
/// fixed `F`: `w = H_SR F` and `g_sd = H_SD F`.
#[derive(Debug, Clone)]
pub struct PrecoderProducts {
    pub w: CMat,
    pub g_sd: CMat,
}

/// Computes the factored products for one precoder.
pub fn precoder_products(ch: &ChannelSet, f_mat: &CMat) -> Result<PrecoderProducts, ObjectiveError> {
    if f_mat.nrows() != ch.n_tx() {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "precoder has {} rows but the channel has {} transmit antennas",
            f_mat.nrows(),
            ch.n_tx()
        )));
    }
    Ok(PrecoderProducts { w: &ch.h_sr * f_mat, g_sd: &ch.h_sd * f_mat })
}

/// Everything the solver needs at one `(F, phi)` point: the received mix
/// `g = H(phi) F`, the Gram matrix `m = I + c g^H g`, and the objective
/// value `f = -ln det m`.
#[derive(Debug, Clone)]
pub struct EvalTerms {
    pub g: CMat,
    pub m: CMat,
    pub f: f64,
}

/// Scales row `i` of `w` by `phi_i` (that is, `diag(phi) * w`).
fn scale_rows(w: &CMat, phi: &CVec) -> CMat {
    let mut out = w.clone();
    for i in 0..out.nrows() {
        let mut row = out.row_mut(i);
        row *= phi[i];
    }
    out
}

/// Evaluates the objective at `(F, phi)` given the precoder products,
/// assembling `H F` as `g_sd + H_RD (phi o (H_SR F))` without forming `H`.
pub fn eval_terms(
    ch: &ChannelSet,
    lb: &LinkBudget,
    prod: &PrecoderProducts,
    phi: &CVec,
) -> Result<EvalTerms, ObjectiveError> {
    if phi.len() != ch.n_ris() {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "phi has {} entries but the RIS has {} elements",
            phi.len(),
            ch.n_ris()
        )));
    }
    let g = if phi.is_empty() {
        prod.g_sd.clone()
    } else {
        &prod.g_sd + &ch.h_rd * scale_rows(&prod.w, phi)
    };
    let n_s = g.ncols();
    let c = lb.snr_scale();
    let m = CMat::identity(n_s, n_s) + (g.adjoint() * &g) * Complex64::new(c, 0.0);
    let f = -hermitian_logdet(&m)?;
    Ok(EvalTerms { g, m, f })
}

/// `-ln det(I + c F^H H^H H F)` at `(F, phi)`. Satisfies `f = -R ln 2`.
pub fn objective_f(
    f_mat: &CMat,
    phi: &CVec,
    ch: &ChannelSet,
    lb: &LinkBudget,
) -> Result<f64, ObjectiveError> {
    let prod = precoder_products(ch, f_mat)?;
    Ok(eval_terms(ch, lb, &prod, phi)?.f)
}

/// Achievable rate in bits/s/Hz for a precoder and an explicit channel
/// matrix (already combined, or RIS-free).
pub fn achievable_rate(f_mat: &CMat, h: &CMat, lb: &LinkBudget) -> Result<f64, ObjectiveError> {
    if h.ncols() != f_mat.nrows() {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "channel is {}x{} but precoder has {} rows",
            h.nrows(),
            h.ncols(),
            f_mat.nrows()
        )));
    }
    let g = h * f_mat;
    let n_s = g.ncols();
    let c = lb.snr_scale();
    let m = CMat::identity(n_s, n_s) + (g.adjoint() * &g) * Complex64::new(c, 0.0);
    Ok(hermitian_logdet(&m)? / LN_2)
}

/// Converts an objective value to a rate in bits/s/Hz.
pub fn rate_from_objective(f: f64) -> f64 {
    -f / LN_2
}

/// Conjugate-cogradient of `f` with respect to the precoder, assembled from
/// precomputed terms: `-c H^H g m^{-1}` with `H^H x` expanded through the
/// factored channel (`H^H x = H_SD^H x + H_SR^H (conj(phi) o (H_RD^H x))`).
pub fn grad_precoder_from_terms(
    ch: &ChannelSet,
    lb: &LinkBudget,
    phi: &CVec,
    terms: &EvalTerms,
) -> Result<CMat, ObjectiveError> {
    let c = lb.snr_scale();
    // x = g m^{-1} = (m^{-1} g^H)^H because m is Hermitian.
    let x = pd_solve(&terms.m, &terms.g.adjoint())?.adjoint();
    let mut acc = ch.h_sd.adjoint() * &x;
    if !phi.is_empty() {
        let rd_x = ch.h_rd.adjoint() * &x;
        let phi_conj = CVec::from_fn(phi.len(), |i, _| phi[i].conj());
        acc += ch.h_sr.adjoint() * scale_rows(&rd_x, &phi_conj);
    }
    Ok(acc * Complex64::new(-c, 0.0))
}

/// Diagonal of `Z = c H_SR F m^{-1} (H F)^H H_RD`, the common core of the
/// RIS-side gradients. `w` must be `H_SR F` for the same precoder that
/// produced `terms`.
pub fn zdiag_from_terms(
    ch: &ChannelSet,
    lb: &LinkBudget,
    w: &CMat,
    terms: &EvalTerms,
) -> Result<CVec, ObjectiveError> {
    let c = lb.snr_scale();
    // a = w m^{-1} (N_ris x N_s), b = g^H H_RD (N_s x N_ris).
    let a = pd_solve(&terms.m, &w.adjoint())?.adjoint();
    let b = terms.g.adjoint() * &ch.h_rd;
    let n_ris = ch.n_ris();
    Ok(CVec::from_fn(n_ris, |i, _| {
        let mut acc = Complex64::new(0.0, 0.0);
        for s in 0..a.ncols() {
            acc += a[(i, s)] * b[(s, i)];
        }
        acc * c
    }))
}

/// Gradient of `f` with respect to the flat relaxed weights: entry
/// `(i, k)` is `-2 Re(theta_k Z_ii)`.
pub fn weight_grad_from_zdiag(z: &CVec, cb: &PhaseCodebook) -> RVec {
    let m = cb.size();
    RVec::from_fn(z.len() * m, |idx, _| {
        let i = idx / m;
        let k = idx % m;
        -2.0 * (cb.entry(k) * z[i]).re
    })
}

/// Conjugate-cogradient of `f` with respect to the continuous reflection
/// coefficients: entry `i` is `-conj(Z_ii)`.
pub fn phase_grad_from_zdiag(z: &CVec) -> CVec {
    CVec::from_fn(z.len(), |i, _| -z[i].conj())
}

/// Gradient with respect to the precoder at `(F, phi)`.
pub fn grad_precoder(
    f_mat: &CMat,
    phi: &CVec,
    ch: &ChannelSet,
    lb: &LinkBudget,
) -> Result<CMat, ObjectiveError> {
    let prod = precoder_products(ch, f_mat)?;
    let terms = eval_terms(ch, lb, &prod, phi)?;
    grad_precoder_from_terms(ch, lb, phi, &terms)
}

/// Gradient with respect to the flat relaxed weights `t` at `(F, t)`.
pub fn grad_weights(
    f_mat: &CMat,
    t: &RVec,
    cb: &PhaseCodebook,
    ch: &ChannelSet,
    lb: &LinkBudget,
) -> Result<RVec, ObjectiveError> {
    let m = cb.size();
    if t.len() != ch.n_ris() * m {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "t has {} entries, expected N_ris * M = {} * {}",
            t.len(),
            ch.n_ris(),
            m
        )));
    }
    let phi = phases_from_flat_weights(t, cb);
    let prod = precoder_products(ch, f_mat)?;
    let terms = eval_terms(ch, lb, &prod, &phi)?;
    let z = zdiag_from_terms(ch, lb, &prod.w, &terms)?;
    Ok(weight_grad_from_zdiag(&z, cb))
}

/// Central-difference gradient of a real function of a complex matrix in
/// the same conjugate-cogradient convention as the closed forms: entry
/// `(i, j)` is `(df/dRe + j df/dIm) / 2` estimated with step `h`.
pub fn fd_grad_complex(eval: &mut dyn FnMut(&CMat) -> f64, x0: &CMat, h: f64) -> CMat {
    assert!(h > 0.0, "step must be positive");
    let mut grad = CMat::zeros(x0.nrows(), x0.ncols());
    let mut probe = x0.clone();
    for j in 0..x0.ncols() {
        for i in 0..x0.nrows() {
            let base = x0[(i, j)];
            probe[(i, j)] = base + Complex64::new(h, 0.0);
            let fp = eval(&probe);
            probe[(i, j)] = base - Complex64::new(h, 0.0);
            let fm = eval(&probe);
            let d_re = (fp - fm) / (2.0 * h);
            probe[(i, j)] = base + Complex64::new(0.0, h);
            let fp = eval(&probe);
            probe[(i, j)] = base - Complex64::new(0.0, h);
            let fm = eval(&probe);
            let d_im = (fp - fm) / (2.0 * h);
            probe[(i, j)] = base;
            grad[(i, j)] = Complex64::new(d_re, d_im) * 0.5;
        }
    }
    grad
}

/// Central-difference gradient of a real function of a real vector.
pub fn fd_grad_real(eval: &mut dyn FnMut(&RVec) -> f64, x0: &RVec, h: f64) -> RVec {
    assert!(h > 0.0, "step must be positive");
    let mut grad = RVec::zeros(x0.len());
    let mut probe = x0.clone();
    for i in 0..x0.len() {
        let base = x0[i];
        probe[i] = base + h;
        let fp = eval(&probe);
        probe[i] = base - h;
        let fm = eval(&probe);
        probe[i] = base;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Relative error `||a - b|| / max(||b||, floor)` used by the gradient
/// cross-checks.
pub fn rel_error_c(a: &CMat, b: &CMat) -> f64 {
    let diff = frob_norm_sq(&(a - b)).sqrt();
    diff / frob_norm_sq(b).sqrt().max(1e-12)
}

/// Real-vector counterpart of [`rel_error_c`].
pub fn rel_error_r(a: &RVec, b: &RVec) -> f64 {
    ((a - b).norm_squared()).sqrt() / b.norm().max(1e-12)
}
