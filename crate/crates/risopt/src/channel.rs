//! Clustered geometric mmWave channel synthesis.
//!
//! One Monte Carlo realization consists of three matrices: the direct
//! source-destination link `H_SD`, the source-RIS link `H_SR`, and the
//! RIS-destination link `H_RD`. Each is a sum of a deterministic
//! line-of-sight ray (optional) and `N_ray` random non-line-of-sight rays:
//!
//! ```text
//! H = sqrt(b_los) e^{-j 2 pi d / lambda} a_rx(az0, el0) a_tx(az0, el0)^H
//!   + sqrt(b_nlos / K_Rice) sum_l alpha_l a_rx(az_l, el_l) a_tx(az_l, el_l)^H
//! ```
//!
//! with `alpha_l ~ CN(0, 1/N_ray)` so the NLOS rays carry unit total power
//! in expectation, azimuths uniform on `[-pi, pi)`, elevations uniform on
//! `[-pi/2, pi/2)`, and path gains `b = G A / (4 pi d^gamma) e^{-k_abs d}`
//! with the LOS/NLOS exponents applied separately. All nodes use square
//! uniform planar arrays; LOS angles are drawn from the same distributions
//! as NLOS angles because the scenario fixes node positions but not array
//! orientations.
//!
//! Given a vector of per-element reflection coefficients `phi`, the channel
//! observed by the receiver is `H_SD + H_RD diag(phi) H_SR`.

use crate::numerics::{checked_cmat, ensure_finite, CMat, CVec, NumericsError, RngStream};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("channel file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ChannelError {
    ChannelError::Invalid { field, reason: reason.into() }
}

/// Node positions (meters, common height folded out) plus carrier and
/// bandwidth. Positions must be pairwise distinct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioGeometry {
    pub tx: [f64; 2],
    pub rx: [f64; 2],
    pub ris: [f64; 2],
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl ScenarioGeometry {
    pub fn new(
        tx: [f64; 2],
        rx: [f64; 2],
        ris: [f64; 2],
        carrier_hz: f64,
        bandwidth_hz: f64,
    ) -> Result<Self, ChannelError> {
        for v in tx.iter().chain(&rx).chain(&ris) {
            if !v.is_finite() {
                return Err(invalid("position", "coordinates must be finite"));
            }
        }
        let g = Self { tx, rx, ris, carrier_hz, bandwidth_hz };
        if !carrier_hz.is_finite() || carrier_hz <= 0.0 {
            return Err(invalid("carrier_hz", format!("must be finite and > 0, got {carrier_hz}")));
        }
        if !bandwidth_hz.is_finite() || bandwidth_hz <= 0.0 {
            return Err(invalid("bandwidth_hz", format!("must be finite and > 0, got {bandwidth_hz}")));
        }
        if g.d_tx_rx() <= 0.0 || g.d_tx_ris() <= 0.0 || g.d_ris_rx() <= 0.0 {
            return Err(invalid("position", "all pairwise distances must be > 0"));
        }
        Ok(g)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn d_tx_rx(&self) -> f64 {
        dist(self.tx, self.rx)
    }

    pub fn d_tx_ris(&self) -> f64 {
        dist(self.tx, self.ris)
    }

    pub fn d_ris_rx(&self) -> f64 {
        dist(self.ris, self.rx)
    }
}

/// A square uniform planar array: `n` elements on a `side x side` grid with
/// uniform spacing in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    n: usize,
    side: usize,
    spacing_m: f64,
}

impl ArrayConfig {
    pub fn new(n: usize, spacing_m: f64) -> Result<Self, ChannelError> {
        if n == 0 {
            return Err(invalid("array size", "element count must be >= 1"));
        }
        let side = (n as f64).sqrt().round() as usize;
        if side * side != n {
            return Err(invalid("array size", format!("{n} is not a perfect square")));
        }
        if !spacing_m.is_finite() || spacing_m <= 0.0 {
            return Err(invalid("spacing", format!("must be finite and > 0, got {spacing_m}")));
        }
        Ok(Self { n, side, spacing_m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }
}

/// Statistical parameters of the ray model, shared by all three links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModelParams {
    /// Ricean factor: LOS-to-NLOS power ratio. The NLOS sum is scaled by
    /// `1/sqrt(K_Rice)` even on links without a LOS ray.
    pub k_rice: f64,
    pub n_ray: usize,
    pub gamma_los: f64,
    pub gamma_nlos: f64,
    pub g_tx: f64,
    pub g_rx: f64,
    /// RIS element aperture used as the area term of RIS-adjacent links.
    pub a_ris_m2: f64,
    /// Molecular-absorption coefficient, 1/m.
    pub k_abs: f64,
}

impl ChannelModelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !self.k_rice.is_finite() || self.k_rice <= 0.0 {
            return Err(invalid("k_rice", "must be finite and > 0"));
        }
        if self.n_ray == 0 {
            return Err(invalid("n_ray", "must be >= 1"));
        }
        if !(self.gamma_los > 0.0 && self.gamma_nlos > 0.0) {
            return Err(invalid("gamma", "path-loss exponents must be > 0"));
        }
        if !(self.g_tx > 0.0 && self.g_rx > 0.0 && self.a_ris_m2 > 0.0) {
            return Err(invalid("gains", "antenna gains and RIS aperture must be > 0"));
        }
        if !self.k_abs.is_finite() || self.k_abs < 0.0 {
            return Err(invalid("k_abs", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// One channel realization plus the stream that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_sd: CMat,
    pub h_sr: CMat,
    pub h_rd: CMat,
    pub origin: RngStream,
}

impl ChannelSet {
    pub fn new(h_sd: CMat, h_sr: CMat, h_rd: CMat, origin: RngStream) -> Result<Self, ChannelError> {
        if h_sr.nrows() != h_rd.ncols() {
            return Err(ChannelError::DimensionMismatch(format!(
                "H_SR has {} rows but H_RD has {} columns",
                h_sr.nrows(),
                h_rd.ncols()
            )));
        }
        if h_sd.ncols() != h_sr.ncols() || h_sd.nrows() != h_rd.nrows() {
            return Err(ChannelError::DimensionMismatch(format!(
                "H_SD is {}x{}, H_SR is {}x{}, H_RD is {}x{}",
                h_sd.nrows(),
                h_sd.ncols(),
                h_sr.nrows(),
                h_sr.ncols(),
                h_rd.nrows(),
                h_rd.ncols()
            )));
        }
        for m in [&h_sd, &h_sr, &h_rd] {
            ensure_finite(m)?;
        }
        Ok(Self { h_sd, h_sr, h_rd, origin })
    }

    /// A degenerate set with zero RIS elements: the effective channel is the
    /// direct link for every (empty) phase vector.
    pub fn without_ris(h_sd: CMat, origin: RngStream) -> Self {
        let n_rx = h_sd.nrows();
        let n_tx = h_sd.ncols();
        Self { h_sr: CMat::zeros(0, n_tx), h_rd: CMat::zeros(n_rx, 0), h_sd, origin }
    }

    pub fn n_tx(&self) -> usize {
        self.h_sd.ncols()
    }

    pub fn n_rx(&self) -> usize {
        self.h_sd.nrows()
    }

    pub fn n_ris(&self) -> usize {
        self.h_sr.nrows()
    }
}

/// Everything needed to draw one [`ChannelSet`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub geometry: ScenarioGeometry,
    pub tx_array: ArrayConfig,
    pub rx_array: ArrayConfig,
    pub ris_array: ArrayConfig,
    pub params: ChannelModelParams,
    /// Whether the direct link keeps its LOS ray (off when obstructed).
    pub direct_has_los: bool,
}

/// Array response of a square UPA at azimuth `az` and elevation `el`.
///
/// The entry for grid position `(p, q)`, `0 <= p, q < side`, is
/// `exp(j (2 pi / lambda) d (p sin(az) sin(el) + q cos(el)))`, laid out with
/// `p` varying fastest: index `i` maps to `p = i % side`, `q = i / side`.
pub fn steering_vector(cfg: &ArrayConfig, az: f64, el: f64, lambda_m: f64) -> CVec {
    assert!(lambda_m > 0.0, "wavelength must be positive, got {lambda_m}");
    let k = 2.0 * PI / lambda_m * cfg.spacing_m;
    let u = az.sin() * el.sin();
    let v = el.cos();
    let side = cfg.side;
    CVec::from_fn(cfg.n, |i, _| {
        let p = (i % side) as f64;
        let q = (i / side) as f64;
        Complex64::from_polar(1.0, k * (p * u + q * v))
    })
}

/// Distance-dependent power gain `G A / (4 pi d^gamma) e^{-k_abs d}`.
pub fn path_loss(d_m: f64, gamma: f64, gain: f64, aperture_m2: f64, k_abs: f64) -> f64 {
    assert!(d_m > 0.0, "distance must be positive, got {d_m}");
    gain * aperture_m2 / (4.0 * PI * d_m.powf(gamma)) * (-k_abs * d_m).exp()
}

/// Per-link inputs for [`synthesize_link`]: propagation distance, carrier
/// wavelength, and the gain/area pair of the path-loss template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub distance_m: f64,
    pub lambda_m: f64,
    pub gain: f64,
    pub aperture_m2: f64,
    pub has_los: bool,
}

/// Draws one link realization. Consumes the generator in a fixed order
/// (LOS angles first when present, then per NLOS ray: arrival azimuth,
/// arrival elevation, departure azimuth, departure elevation, complex gain),
/// making realizations a pure function of the stream position.
pub fn synthesize_link(
    rng: &mut ChaCha8Rng,
    tx_cfg: &ArrayConfig,
    rx_cfg: &ArrayConfig,
    link: &LinkParams,
    params: &ChannelModelParams,
) -> CMat {
    let draw_ray = |rng: &mut ChaCha8Rng| {
        let az_arr = rng.gen_range(-PI..PI);
        let el_arr = rng.gen_range(-FRAC_PI_2..FRAC_PI_2);
        let az_dep = rng.gen_range(-PI..PI);
        let el_dep = rng.gen_range(-FRAC_PI_2..FRAC_PI_2);
        let a_rx = steering_vector(rx_cfg, az_arr, el_arr, link.lambda_m);
        let a_tx = steering_vector(tx_cfg, az_dep, el_dep, link.lambda_m);
        (a_rx, a_tx)
    };

    let mut h = CMat::zeros(rx_cfg.n, tx_cfg.n);
    if link.has_los {
        let beta_los =
            path_loss(link.distance_m, params.gamma_los, link.gain, link.aperture_m2, params.k_abs);
        let phase = Complex64::from_polar(1.0, -2.0 * PI * link.distance_m / link.lambda_m);
        let (a_rx, a_tx) = draw_ray(rng);
        h += (&a_rx * a_tx.adjoint()) * (phase * beta_los.sqrt());
    }
    let beta_nlos =
        path_loss(link.distance_m, params.gamma_nlos, link.gain, link.aperture_m2, params.k_abs);
    let nlos_scale = (beta_nlos / params.k_rice).sqrt();
    let ray_sigma = (0.5 / params.n_ray as f64).sqrt();
    for _ in 0..params.n_ray {
        let (a_rx, a_tx) = draw_ray(rng);
        let alpha = Complex64::new(
            rng.sample::<f64, _>(rand_distr::StandardNormal) * ray_sigma,
            rng.sample::<f64, _>(rand_distr::StandardNormal) * ray_sigma,
        );
        h += (&a_rx * a_tx.adjoint()) * (alpha * nlos_scale);
    }
    h
}

/// Draws the full `(H_SD, H_SR, H_RD)` triple for one trial, in that fixed
/// order, from a single stream.
///
/// Path-loss budgets per link: the source-RIS link uses `(G_tx, A_RIS)`,
/// the RIS-destination link `(G_rx, A_RIS)`, and the direct link
/// `(G_tx, G_rx lambda^2 / (4 pi))` - the receive antenna's effective
/// aperture standing in for the area term.
pub fn generate_channel_set(stream: RngStream, sc: &Scenario) -> Result<ChannelSet, ChannelError> {
    sc.params.validate()?;
    let lambda = sc.geometry.wavelength();
    let mut rng = stream.rng();

    let sd_link = LinkParams {
        distance_m: sc.geometry.d_tx_rx(),
        lambda_m: lambda,
        gain: sc.params.g_tx,
        aperture_m2: sc.params.g_rx * lambda * lambda / (4.0 * PI),
        has_los: sc.direct_has_los,
    };
    let h_sd = synthesize_link(&mut rng, &sc.tx_array, &sc.rx_array, &sd_link, &sc.params);

    let sr_link = LinkParams {
        distance_m: sc.geometry.d_tx_ris(),
        lambda_m: lambda,
        gain: sc.params.g_tx,
        aperture_m2: sc.params.a_ris_m2,
        has_los: true,
    };
    let h_sr = synthesize_link(&mut rng, &sc.tx_array, &sc.ris_array, &sr_link, &sc.params);

    let rd_link = LinkParams {
        distance_m: sc.geometry.d_ris_rx(),
        lambda_m: lambda,
        gain: sc.params.g_rx,
        aperture_m2: sc.params.a_ris_m2,
        has_los: true,
    };
    let h_rd = synthesize_link(&mut rng, &sc.ris_array, &sc.rx_array, &rd_link, &sc.params);

    ChannelSet::new(h_sd, h_sr, h_rd, stream)
}

/// Effective channel `H_SD + H_RD diag(phi) H_SR` for reflection
/// coefficients `phi`. With zero RIS elements this is the direct link.
pub fn effective_channel(ch: &ChannelSet, phi: &CVec) -> Result<CMat, ChannelError> {
    if phi.len() != ch.n_ris() {
        return Err(ChannelError::DimensionMismatch(format!(
            "phi has {} entries but the RIS has {} elements",
            phi.len(),
            ch.n_ris()
        )));
    }
    if phi.is_empty() {
        return Ok(ch.h_sd.clone());
    }
    // diag(phi) * H_SR as a row scaling, avoiding the N_ris x N_ris matrix.
    let mut scaled = ch.h_sr.clone();
    for i in 0..scaled.nrows() {
        let mut row = scaled.row_mut(i);
        row *= phi[i];
    }
    Ok(&ch.h_sd + &ch.h_rd * scaled)
}

/// FNV-1a hash over dimensions and raw little-endian entry bytes of the
/// three matrices. Used to assert that algorithm arms of one trial really
/// saw the same realization.
pub fn channel_hash(ch: &ChannelSet) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut state = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            state ^= b as u64;
            state = state.wrapping_mul(PRIME);
        }
    };
    for m in [&ch.h_sd, &ch.h_sr, &ch.h_rd] {
        eat(&(m.nrows() as u64).to_le_bytes());
        eat(&(m.ncols() as u64).to_le_bytes());
        for z in m.iter() {
            eat(&z.re.to_le_bytes());
            eat(&z.im.to_le_bytes());
        }
    }
    state
}

/// A [`ChannelSet`] tagged with the sweep point and trial it belongs to,
/// as stored in frozen-channel files.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenChannel {
    pub sweep: f64,
    pub trial: u64,
    pub set: ChannelSet,
}

const CHANNEL_FILE_MAGIC: &[u8; 8] = b"RISCHSET";
const CHANNEL_FILE_VERSION: u32 = 1;

fn write_mat(w: &mut impl Write, m: &CMat) -> std::io::Result<()> {
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for z in m.iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact_u64(r: &mut impl Read) -> Result<u64, ChannelError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_exact_f64(r: &mut impl Read) -> Result<f64, ChannelError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_mat(r: &mut impl Read) -> Result<CMat, ChannelError> {
    let rows = read_exact_u64(r)? as usize;
    let cols = read_exact_u64(r)? as usize;
    if rows.saturating_mul(cols) > 100_000_000 {
        return Err(ChannelError::Format(format!("implausible matrix size {rows}x{cols}")));
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re = read_exact_f64(r)?;
        let im = read_exact_f64(r)?;
        entries.push(Complex64::new(re, im));
    }
    if rows == 0 || cols == 0 {
        // Legitimate for the RIS-free edge case; bypass the non-empty check.
        return Ok(CMat::from_vec(rows, cols, entries));
    }
    Ok(checked_cmat(rows, cols, entries)?)
}

/// Writes frozen channels as little-endian binary: an 8-byte magic, format
/// version, record count, then per record the sweep value, trial, stream
/// key, and the three matrices (dims + column-major re/im doubles).
pub fn write_channel_file(w: &mut impl Write, records: &[FrozenChannel]) -> std::io::Result<()> {
    w.write_all(CHANNEL_FILE_MAGIC)?;
    w.write_all(&CHANNEL_FILE_VERSION.to_le_bytes())?;
    w.write_all(&(records.len() as u64).to_le_bytes())?;
    for rec in records {
        w.write_all(&rec.sweep.to_le_bytes())?;
        w.write_all(&rec.trial.to_le_bytes())?;
        w.write_all(&rec.set.origin.seed.to_le_bytes())?;
        w.write_all(&rec.set.origin.stream.to_le_bytes())?;
        write_mat(w, &rec.set.h_sd)?;
        write_mat(w, &rec.set.h_sr)?;
        write_mat(w, &rec.set.h_rd)?;
    }
    Ok(())
}

/// Reads a frozen-channel file written by [`write_channel_file`].
pub fn read_channel_file(r: &mut impl Read) -> Result<Vec<FrozenChannel>, ChannelError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHANNEL_FILE_MAGIC {
        return Err(ChannelError::Format("bad magic, not a channel file".into()));
    }
    let mut version = [0u8; 4];
    r.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != CHANNEL_FILE_VERSION {
        return Err(ChannelError::Format(format!("unsupported version {version}")));
    }
    let count = read_exact_u64(r)?;
    if count > 10_000_000 {
        return Err(ChannelError::Format(format!("implausible record count {count}")));
    }
    let mut records = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let sweep = read_exact_f64(r)?;
        let trial = read_exact_u64(r)?;
        let seed = read_exact_u64(r)?;
        let stream = read_exact_u64(r)?;
        let h_sd = read_mat(r)?;
        let h_sr = read_mat(r)?;
        let h_rd = read_mat(r)?;
        let set = ChannelSet::new(h_sd, h_sr, h_rd, RngStream::new(seed, stream))
            .map_err(|e| ChannelError::Format(e.to_string()))?;
        records.push(FrozenChannel { sweep, trial, set });
    }
    Ok(records)
}
