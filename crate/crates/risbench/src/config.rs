//! Experiment configuration: JSON schema, defaults, validation, and the
//! mapping onto the library's scenario, codebook, and link-budget types.
//!
//! Defaults reproduce the reference deployment: transmitter at the origin,
//! receiver 50 m away on the x-axis, RIS at (40, 10), 28 GHz carrier with
//! 800 MHz bandwidth, 64-antenna transmitter and 16-antenna receiver (both
//! square planar arrays at half-wavelength spacing), Ricean factor 10 with
//! 10 NLOS rays, path-loss exponents 1.90 (LOS) / 4.39 (NLOS), a blocked
//! direct link, 30 dBm transmit power split over 2 streams, and a thermal
//! noise floor of -174 dBm/Hz plus noise figure over the full bandwidth.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use risopt::channel::{ArrayConfig, ChannelModelParams, Scenario, ScenarioGeometry};
use risopt::codebook::PhaseCodebook;
use risopt::objective::LinkBudget;
use risopt::optimizer::OptimizerConfig;

use crate::HarnessError;

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Transmitter position in meters.
    pub tx: [f64; 2],
    /// Receiver position in meters.
    pub rx: [f64; 2],
    /// RIS position in meters.
    pub ris: [f64; 2],
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            tx: [0.0, 0.0],
            rx: [50.0, 0.0],
            ris: [40.0, 10.0],
            carrier_hz: 28e9,
            bandwidth_hz: 800e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArraysConfig {
    /// Transmit antennas (must be a perfect square).
    pub n_tx: usize,
    /// Receive antennas (must be a perfect square).
    pub n_rx: usize,
    /// Element spacing for all arrays, in carrier wavelengths.
    pub spacing_wavelengths: f64,
}

impl Default for ArraysConfig {
    fn default() -> Self {
        Self { n_tx: 64, n_rx: 16, spacing_wavelengths: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Ricean factor (LOS-to-NLOS power ratio).
    pub k_rice: f64,
    /// NLOS rays per link.
    pub n_ray: usize,
    pub gamma_los: f64,
    pub gamma_nlos: f64,
    /// Transmit antenna gain (linear).
    pub g_tx: f64,
    /// Receive antenna gain (linear).
    pub g_rx: f64,
    /// RIS element aperture in m^2; `null` means a half-wavelength square.
    pub a_ris_m2: Option<f64>,
    /// Molecular absorption coefficient, 1/m.
    pub k_abs: f64,
    /// Whether the direct transmitter-receiver link keeps a LOS ray.
    pub direct_has_los: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            k_rice: 10.0,
            n_ray: 10,
            gamma_los: 1.90,
            gamma_nlos: 4.39,
            g_tx: 1.0,
            g_rx: 1.0,
            a_ris_m2: None,
            k_abs: 0.0,
            direct_has_los: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub p_tx_dbm: f64,
    pub noise_figure_db: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { p_tx_dbm: 30.0, noise_figure_db: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodebookConfig {
    /// Phase resolution in bits (codebook size 2^bits). Ignored for a
    /// bits-axis sweep, which supplies the resolution per sweep point.
    pub bits: u32,
    /// Reflection amplitude of every codebook entry.
    pub amplitude: f64,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self { bits: 1, amplitude: 1.0 }
    }
}

/// What varies across the sweep: the RIS element count (rate vs surface
/// size) or the phase resolution in bits (rate vs quantization).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepAxis {
    RisElements(Vec<usize>),
    Bits(Vec<u32>),
}

fn default_n_streams() -> usize {
    2
}

fn default_base_seed() -> u64 {
    1
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub arrays: ArraysConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub power: PowerConfig,
    #[serde(default)]
    pub codebook: CodebookConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub sweep: SweepAxis,
    /// RIS element count; required for (and only valid with) a bits sweep.
    #[serde(default)]
    pub n_ris: Option<usize>,
    #[serde(default = "default_n_streams")]
    pub n_streams: usize,
    /// Monte Carlo channel realizations per sweep point.
    pub trials: i64,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    /// Worker threads for trial execution; results are order-independent.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Fraction of solver runs allowed to fail before the run itself is
    /// reported as failed (exit code 3).
    #[serde(default)]
    pub max_failure_rate: f64,
    /// Default output directory for `sweep` when `--out` is not given.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// One resolved sweep point: the value recorded in output rows plus the
/// geometry/codebook parameters it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub n_ris: usize,
    pub bits: u32,
}

fn is_perfect_square(n: usize) -> bool {
    let side = (n as f64).sqrt().round() as usize;
    side * side == n
}

fn check_strictly_increasing<T: PartialOrd + Copy + std::fmt::Display>(
    name: &str,
    values: &[T],
) -> Result<(), HarnessError> {
    if values.is_empty() {
        return Err(bad(format!("{name}: sweep values must be non-empty")));
    }
    for pair in values.windows(2) {
        if pair[1] <= pair[0] {
            return Err(bad(format!(
                "{name}: sweep values must be strictly increasing ({} then {})",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials < 1 {
            return Err(bad(format!("trials: must be at least 1, got {}", self.trials)));
        }
        if self.n_streams < 1 {
            return Err(bad("n_streams: must be at least 1"));
        }
        if self.parallelism < 1 {
            return Err(bad("parallelism: must be at least 1"));
        }
        if !(self.max_failure_rate >= 0.0 && self.max_failure_rate <= 1.0) {
            return Err(bad("max_failure_rate: must lie in [0, 1]"));
        }
        if !self.power.p_tx_dbm.is_finite() || !self.power.noise_figure_db.is_finite() {
            return Err(bad("power: transmit power and noise figure must be finite"));
        }
        if !self.arrays.spacing_wavelengths.is_finite() || self.arrays.spacing_wavelengths <= 0.0 {
            return Err(bad("arrays.spacing_wavelengths: must be positive"));
        }

        match &self.sweep {
            SweepAxis::RisElements(values) => {
                check_strictly_increasing("sweep.values", values)?;
                for &n in values {
                    if n == 0 || !is_perfect_square(n) {
                        return Err(bad(format!(
                            "sweep.values: RIS element counts must be positive perfect squares \
                             (square planar surface), got {n}"
                        )));
                    }
                }
                if self.n_ris.is_some() {
                    return Err(bad(
                        "n_ris: only applies to a bits sweep; the ris_elements axis already \
                         carries the element counts",
                    ));
                }
                if self.codebook.bits < 1 || self.codebook.bits > 16 {
                    return Err(bad("codebook.bits: must lie in 1..=16"));
                }
            }
            SweepAxis::Bits(values) => {
                check_strictly_increasing("sweep.values", values)?;
                for &b in values {
                    if !(1..=16).contains(&b) {
                        return Err(bad(format!("sweep.values: bits must lie in 1..=16, got {b}")));
                    }
                }
                let n_ris = self
                    .n_ris
                    .ok_or_else(|| bad("n_ris: required for a bits sweep"))?;
                if n_ris == 0 || !is_perfect_square(n_ris) {
                    return Err(bad(format!(
                        "n_ris: must be a positive perfect square, got {n_ris}"
                    )));
                }
            }
        }

        // Everything the sweep will construct must construct now: geometry,
        // arrays, codebooks, budget, optimizer settings.
        self.optimizer.validate()?;
        let budget = self.link_budget()?;
        if !(budget.rho() > 0.0 && budget.p_n() > 0.0) {
            return Err(bad("power: derived signal and noise powers must be positive"));
        }
        for point in self.sweep_points() {
            self.scenario(point.n_ris)?;
            self.codebook(point.bits)?;
        }
        Ok(())
    }

    /// The resolved sweep points in axis order.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        match &self.sweep {
            SweepAxis::RisElements(values) => values
                .iter()
                .map(|&n| SweepPoint { value: n as f64, n_ris: n, bits: self.codebook.bits })
                .collect(),
            SweepAxis::Bits(values) => values
                .iter()
                .map(|&b| SweepPoint {
                    value: b as f64,
                    n_ris: self.n_ris.expect("validated"),
                    bits: b,
                })
                .collect(),
        }
    }

    /// Builds the physical scenario for one RIS size.
    pub fn scenario(&self, n_ris: usize) -> Result<Scenario, HarnessError> {
        let geometry = ScenarioGeometry::new(
            self.geometry.tx,
            self.geometry.rx,
            self.geometry.ris,
            self.geometry.carrier_hz,
            self.geometry.bandwidth_hz,
        )?;
        let lambda = geometry.wavelength();
        let spacing_m = self.arrays.spacing_wavelengths * lambda;
        let tx_array = ArrayConfig::new(self.arrays.n_tx, spacing_m)?;
        let rx_array = ArrayConfig::new(self.arrays.n_rx, spacing_m)?;
        let ris_array = ArrayConfig::new(n_ris, spacing_m)?;
        let params = ChannelModelParams {
            k_rice: self.channel.k_rice,
            n_ray: self.channel.n_ray,
            gamma_los: self.channel.gamma_los,
            gamma_nlos: self.channel.gamma_nlos,
            g_tx: self.channel.g_tx,
            g_rx: self.channel.g_rx,
            a_ris_m2: self.channel.a_ris_m2.unwrap_or(lambda * lambda / 4.0),
            k_abs: self.channel.k_abs,
        };
        params.validate()?;
        Ok(Scenario {
            geometry,
            tx_array,
            rx_array,
            ris_array,
            params,
            direct_has_los: self.channel.direct_has_los,
        })
    }

    pub fn codebook(&self, bits: u32) -> Result<PhaseCodebook, HarnessError> {
        Ok(PhaseCodebook::new(self.codebook.amplitude, bits)?)
    }

    /// Per-stream signal power and noise power implied by the config:
    /// the transmit power splits evenly over streams, and the noise floor
    /// is thermal (-174 dBm/Hz) over the bandwidth plus the noise figure.
    pub fn link_budget(&self) -> Result<LinkBudget, HarnessError> {
        let p_tx_w = 10f64.powf((self.power.p_tx_dbm - 30.0) / 10.0);
        let rho = p_tx_w / self.n_streams as f64;
        let p_n_dbm =
            -174.0 + 10.0 * self.geometry.bandwidth_hz.log10() + self.power.noise_figure_db;
        let p_n = 10f64.powf((p_n_dbm - 30.0) / 10.0);
        Ok(LinkBudget::new(rho, p_n)?)
    }
}

/// Loads and fully validates a config file, filling in every default.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path)?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}
