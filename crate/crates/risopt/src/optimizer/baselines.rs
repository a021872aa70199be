//! Reference schemes the relaxed solver is benchmarked against.
//!
//! * `no_ris` — waterfilling on the direct link alone.
//! * `static_ris` — the RIS holds a uniformly random codebook configuration
//!   that never adapts to the channel.
//! * `cont_quant` — optimize continuous constant-modulus phases by the same
//!   extrapolated descent (circle projection instead of simplex blocks),
//!   snap each phase to the nearest codebook entry, then refit the
//!   precoder.
//! * `cont_unquant` — the continuous solution read out before snapping; an
//!   upper reference that needs infinite phase resolution.
//!
//! All four report rates with a waterfilling precoder on their final
//! channel, so comparisons isolate the phase configurations themselves.

use std::time::Instant;

use rand::Rng;

use super::waterfilling::waterfilling_rate_or_zero;
use super::{
    block_descent, initial_precoder, CirclePhaseBlock, OptimizerConfig, OptimizerError,
};
use crate::channel::{effective_channel, ChannelSet};
use crate::codebook::{quantize_nearest, PhaseCodebook};
use crate::numerics::{CMat, CVec, RngStream};
use crate::objective::{rate_from_objective, LinkBudget, Precoder};

/// Rate and work counters for one scheme on one channel instance.
#[derive(Debug, Clone, Copy)]
pub struct AlgoOutcome {
    /// Achievable rate in bit/s/Hz.
    pub rate: f64,
    /// Descent iterations spent (zero for closed-form schemes).
    pub iterations: usize,
    /// Objective evaluations spent inside line searches.
    pub backtrack_evals: usize,
    /// End-to-end wall time of the scheme in milliseconds. The two reads of
    /// the shared continuous descent each include that descent's cost.
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BaselineSuite {
    pub no_ris: AlgoOutcome,
    pub static_ris: AlgoOutcome,
    pub cont_quant: AlgoOutcome,
    pub cont_unquant: AlgoOutcome,
}

/// Output of [`continuous_phase_solve`].
#[derive(Debug, Clone)]
pub struct ContinuousSolution {
    /// Optimized constant-modulus phases.
    pub phi: CVec,
    pub precoder: Precoder,
    /// Objective value at `(precoder, phi)`.
    pub f_value: f64,
    /// Rate at `(precoder, phi)` in bit/s/Hz.
    pub rate: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub backtrack_evals: usize,
    pub restarts: usize,
}

/// Optimizes continuous phases of fixed modulus `amplitude` jointly with the
/// precoder, using the same extrapolated block descent as the relaxed
/// solver but projecting phases onto the circle instead of weights onto
/// simplices.
///
/// `init_phases` defaults to all elements at phase zero; entries are
/// projected onto the circle before use. `init_precoder` defaults to the
/// waterfilling solution at the initial phases.
pub fn continuous_phase_solve(
    channels: &ChannelSet,
    budget: &LinkBudget,
    amplitude: f64,
    cfg: &OptimizerConfig,
    n_s: usize,
    init_precoder: Option<&CMat>,
    init_phases: Option<&CVec>,
) -> Result<ContinuousSolution, OptimizerError> {
    if n_s == 0 {
        return Err(OptimizerError::InvalidConfig("need at least one stream".into()));
    }
    let n_ris = channels.n_ris();
    let phi0: CVec = match init_phases {
        Some(p) => {
            if p.len() != n_ris {
                return Err(OptimizerError::DimensionMismatch(format!(
                    "initial phases have {} entries but the RIS has {} elements",
                    p.len(),
                    n_ris
                )));
            }
            super::project_circle(p, amplitude)
        }
        None => CVec::from_element(n_ris, num_complex::Complex64::new(amplitude, 0.0)),
    };
    let f0: CMat = match init_precoder {
        Some(f) => Precoder::new(f.clone())?.into_mat(),
        None => initial_precoder(channels, budget, &phi0, n_s)?,
    };

    let block = CirclePhaseBlock { amplitude };
    let run = block_descent(channels, budget, &block, cfg, f0, phi0)?;
    Ok(ContinuousSolution {
        phi: run.ris,
        precoder: Precoder::new(run.f_mat)?,
        f_value: run.f_value,
        rate: rate_from_objective(run.f_value),
        trace: run.trace,
        iterations: run.iterations,
        backtrack_evals: run.backtrack_evals,
        restarts: run.restarts,
    })
}

/// Runs the four baselines on one channel instance.
///
/// `static_stream` seeds the static scheme's random phase draw so that a
/// given `(seed, stream)` pair always holds the same configuration.
pub fn baseline_suite(
    channels: &ChannelSet,
    budget: &LinkBudget,
    codebook: &PhaseCodebook,
    cfg: &OptimizerConfig,
    n_s: usize,
    static_stream: RngStream,
) -> Result<BaselineSuite, OptimizerError> {
    let ms = |from: Instant| from.elapsed().as_secs_f64() * 1e3;

    let t_no_ris = Instant::now();
    let no_ris = waterfilling_rate_or_zero(&channels.h_sd, budget, n_s)?;
    let no_ris_ms = ms(t_no_ris);

    let t_static = Instant::now();
    let mut rng = static_stream.rng();
    let n_ris = channels.n_ris();
    let phi_static = CVec::from_iterator(
        n_ris,
        (0..n_ris).map(|_| codebook.entry(rng.gen_range(0..codebook.size()))),
    );
    let h_static = effective_channel(channels, &phi_static)?;
    let static_rate = waterfilling_rate_or_zero(&h_static, budget, n_s)?;
    let static_ms = ms(t_static);

    let t_cont = Instant::now();
    let cont = continuous_phase_solve(channels, budget, codebook.amplitude(), cfg, n_s, None, None)?;
    let cont_ms = ms(t_cont);
    let t_unquant = Instant::now();
    let h_cont = effective_channel(channels, &cont.phi)?;
    let unquant_rate = waterfilling_rate_or_zero(&h_cont, budget, n_s)?;
    let unquant_ms = ms(t_unquant);
    let t_quant = Instant::now();
    let phi_quant = quantize_nearest(&cont.phi, codebook);
    let h_quant = effective_channel(channels, &phi_quant)?;
    let quant_rate = waterfilling_rate_or_zero(&h_quant, budget, n_s)?;
    let quant_ms = ms(t_quant);

    Ok(BaselineSuite {
        no_ris: AlgoOutcome {
            rate: no_ris,
            iterations: 0,
            backtrack_evals: 0,
            wall_ms: no_ris_ms,
        },
        static_ris: AlgoOutcome {
            rate: static_rate,
            iterations: 0,
            backtrack_evals: 0,
            wall_ms: static_ms,
        },
        cont_quant: AlgoOutcome {
            rate: quant_rate,
            iterations: cont.iterations,
            backtrack_evals: cont.backtrack_evals,
            wall_ms: cont_ms + quant_ms,
        },
        cont_unquant: AlgoOutcome {
            rate: unquant_rate,
            iterations: cont.iterations,
            backtrack_evals: cont.backtrack_evals,
            wall_ms: cont_ms + unquant_ms,
        },
    })
}
