//! Brute-force reference solver for small instances.
//!
//! Enumerates every assignment of codebook entries to RIS elements, pairs
//! each with its capacity-achieving precoder, and returns the best. The cost
//! is `M^N` waterfilling solves, so the enumeration is refused beyond a
//! fixed combination budget.

use super::waterfilling::waterfilling_oracle;
use super::OptimizerError;
use crate::channel::{effective_channel, ChannelSet};
use crate::codebook::PhaseCodebook;
use crate::numerics::CVec;
use crate::objective::LinkBudget;

/// Largest number of phase combinations the oracle will enumerate.
pub const MAX_COMBINATIONS: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct ExhaustiveSolution {
    /// Globally optimal discrete phase configuration (first maximizer in
    /// counter order on ties, so the result is deterministic).
    pub phi: CVec,
    /// Rate of that configuration under a waterfilled precoder.
    pub rate: f64,
    /// Codebook indices realizing `phi`.
    pub indices: Vec<usize>,
}

/// Exhaustively maximizes the rate over all discrete phase configurations.
pub fn exhaustive_discrete_oracle(
    channels: &ChannelSet,
    budget: &LinkBudget,
    codebook: &PhaseCodebook,
    n_s: usize,
) -> Result<ExhaustiveSolution, OptimizerError> {
    let n_ris = channels.n_ris();
    let m = codebook.size();
    let combos = (m as f64).powi(n_ris as i32);
    if combos > MAX_COMBINATIONS {
        return Err(OptimizerError::TooLarge { combinations: combos, limit: MAX_COMBINATIONS });
    }

    let mut counter = vec![0usize; n_ris];
    let mut best_rate = f64::NEG_INFINITY;
    let mut best_indices = vec![0usize; n_ris];
    loop {
        let phi = CVec::from_iterator(n_ris, counter.iter().map(|&k| codebook.entry(k)));
        let h = effective_channel(channels, &phi)?;
        let rate = match waterfilling_oracle(&h, budget, n_s) {
            Ok(sol) => sol.rate,
            Err(OptimizerError::ZeroChannel) => 0.0,
            Err(e) => return Err(e),
        };
        if rate > best_rate {
            best_rate = rate;
            best_indices.copy_from_slice(&counter);
        }

        // Mixed-radix increment, least significant digit first.
        let mut pos = 0;
        loop {
            if pos == n_ris {
                let phi = CVec::from_iterator(n_ris, best_indices.iter().map(|&k| codebook.entry(k)));
                return Ok(ExhaustiveSolution { phi, rate: best_rate, indices: best_indices });
            }
            counter[pos] += 1;
            if counter[pos] < m {
                break;
            }
            counter[pos] = 0;
            pos += 1;
        }
    }
}
