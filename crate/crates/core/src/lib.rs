//! Correlated-channel (CC) one-shot watermarking for language-model tokens.
//!
//! The crate is organised bottom-up:
//!
//! - [`prob`] and [`rng`]: probability vectors, divergences and counter-based
//!   random streams shared by everything else.
//! - [`partition`]: the public vocabulary partition `b^m` and the
//!   distribution it induces over side-information symbols.
//! - [`coupling`]: the maximum coupling of the partition value with uniform
//!   side information, the resulting channel, and the watermarked sampler.
//! - [`theory`]: closed-form detection rates and bounds.
//! - [`optimizer`]: a small-scale solver for the detection/perception frontier.
//! - [`simulator`]: Monte Carlo estimates, ROC sweeps and z-tests.
//! - [`protocol`]: keyed derivation of per-step shared randomness.

pub mod coupling;
pub mod error;
pub mod optimizer;
pub mod partition;
pub mod prob;
pub mod protocol;
pub mod rng;
pub mod simulator;
pub mod theory;

pub use coupling::{
    detect, max_coupling, sample_token, watermark_conditional, CcChannel, Coupling, Decision,
    WatermarkConfig,
};
pub use error::{Error, Result};
pub use partition::{PartitionSeq, PartitionStrategy};
pub use prob::{e_gamma, hellinger_sq, tv, ProbVector};
pub use rng::RngStream;
