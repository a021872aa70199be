//! Monte Carlo benchmark harness for the RIS rate-optimization library.
//!
//! The harness owns everything experiment-shaped: the JSON configuration
//! schema ([`config`]), the sweep driver that pairs every algorithm with
//! identical channel realizations ([`sweep`]), CSV/manifest emission
//! ([`output`]), and a built-in self-test suite ([`validate`]). All math
//! lives in `risopt`; records pass through here untouched.

pub mod config;
pub mod output;
pub mod sweep;
pub mod validate;

use risopt::channel::ChannelError;
use risopt::codebook::CodebookError;
use risopt::objective::ObjectiveError;
use risopt::optimizer::OptimizerError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    /// A semantically invalid configuration value, named by field.
    #[error("invalid config: {0}")]
    Config(String),
    /// Malformed configuration text (message carries line/column).
    #[error("config parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("malformed data file: {0}")]
    Format(String),
    #[error("{failed} of {total} solver runs failed, exceeding the allowed failure rate {threshold}")]
    FailureThreshold { failed: usize, total: usize, threshold: f64 },
}

impl HarnessError {
    /// Process exit code for this error: 2 for configuration and I/O
    /// problems, 3 when solvers failed beyond the configured tolerance.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::FailureThreshold { .. } | HarnessError::Optimizer(_) => 3,
            _ => 2,
        }
    }
}
