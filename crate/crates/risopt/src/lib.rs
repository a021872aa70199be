//! Joint optimization of a MIMO transmit precoder and the discrete phase
//! shifts of a reconfigurable intelligent surface (RIS).
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: complex dense linear algebra helpers (Hermitian
//!   log-determinant, positive-definite solves, eigendecompositions) and
//!   reproducible random number streams.
//! - [`channel`]: clustered geometric mmWave channel synthesis for the
//!   source-destination, source-RIS and RIS-destination links, plus the
//!   cascaded effective channel seen through the surface.
//! - [`codebook`]: the discrete reflection-coefficient set, its convex-hull
//!   relaxation as per-element probability-simplex weights, and the maps
//!   between weights, continuous phases, and codebook entries.
//! - [`objective`]: the negated log-det rate objective, its closed-form
//!   Wirtinger gradients with respect to the precoder and the relaxed
//!   RIS selection weights, and a finite-difference oracle used to
//!   cross-check them.
//! - [`optimizer`]: the block proximal-gradient solver with extrapolation
//!   and backtracking, the projection operators it relies on, the
//!   waterfilling and exhaustive-search oracles, and baseline schemes
//!   (no RIS, random static RIS, continuous-then-quantize).

pub mod channel;
pub mod codebook;
pub mod numerics;
pub mod objective;
pub mod optimizer;

pub use numerics::{CMat, CVec, RVec};
