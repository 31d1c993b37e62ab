//! Monte Carlo experiments: one-shot detection, sequence-level ROC, the
//! Hellinger sandwich for i.i.d. sequences, and z-tests.
//!
//! Trials are cut into fixed-size chunks and chunk `i` draws from its own
//! [`RngStream`] substream, so results do not depend on how many worker
//! threads run the chunks.

mod one_shot;
mod sandwich;
mod sequence;
mod ztest;

pub use one_shot::{run_one_shot, OneShotReport};
pub use sandwich::{hellinger_sandwich, SandwichReport};
pub use sequence::{run_sequence, RocCurve, SequenceReport, ROC_GRID_POINTS};
pub use ztest::{
    null_match_chi_square, p_value, simulate_null_z, z_score, ChiSquareReport, NullZReport,
};

use serde::{Deserialize, Serialize};

use crate::coupling::max_coupling;
use crate::error::{Error, Result};
use crate::partition::{fill, worst_case_q, PartitionStrategy};
use crate::prob::ProbVector;
use crate::rng::RngStream;

/// Trials per substream chunk.
pub const CHUNK: u64 = 4096;

/// Where the next-token law comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Uniform,
    /// `(lambda, ..., lambda, 1 - t lambda, 0, ...)`.
    WorstCase { lambda: f64 },
    /// One token at `lambda`, the rest uniform.
    SpikeUniform { lambda: f64 },
    Explicit { probs: Vec<f64> },
}

impl SourceSpec {
    pub fn build(&self, m: usize) -> Result<ProbVector> {
        match self {
            SourceSpec::Uniform => Ok(ProbVector::uniform(m)),
            SourceSpec::WorstCase { lambda } => worst_case_q(*lambda, m),
            SourceSpec::SpikeUniform { lambda } => {
                if !(0.0..=1.0).contains(lambda) || m < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "spike {lambda} needs lambda in [0, 1] and m >= 2"
                    )));
                }
                let rest = (1.0 - lambda) / (m - 1) as f64;
                let mut v = vec![rest; m];
                v[0] = *lambda;
                ProbVector::new(v)
            }
            SourceSpec::Explicit { probs } => {
                if probs.len() != m {
                    return Err(Error::DimensionMismatch {
                        left: m,
                        right: probs.len(),
                    });
                }
                ProbVector::new(probs.clone())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scheme {
    Cc,
    /// Green list `{x : b_x = s}`, logits of green tokens raised by `delta`.
    RedGreen { delta: f64 },
}

fn default_strategy() -> PartitionStrategy {
    PartitionStrategy::Balanced
}

fn default_scheme() -> Scheme {
    Scheme::Cc
}

fn default_n() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub k: usize,
    pub source: SourceSpec,
    #[serde(default = "default_strategy")]
    pub partition_strategy: PartitionStrategy,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Sequence length (steps per trial).
    #[serde(default = "default_n")]
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<ProbVector> {
        if self.k < 2 || self.m < self.k {
            return Err(Error::InvalidParameter(format!(
                "need m >= k >= 2 (m={}, k={})",
                self.m, self.k
            )));
        }
        if self.trials < 1 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.n < 1 {
            return Err(Error::InvalidParameter("sequence length n must be >= 1".into()));
        }
        if let Scheme::RedGreen { delta } = self.scheme {
            if delta.is_nan() || delta < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "red-green delta must be >= 0, got {delta}"
                )));
            }
        }
        self.source.build(self.m)
    }
}

/// Reusable state for drawing one watermarking step.
pub(crate) struct Stepper<'a> {
    q: &'a ProbVector,
    k: usize,
    strategy: PartitionStrategy,
    scheme: Scheme,
    pub bins: Vec<usize>,
    weights: Vec<f64>,
    py: Vec<f64>,
    #[cfg_attr(not(test), allow(dead_code))]
    last_s: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(q: &'a ProbVector, k: usize, strategy: PartitionStrategy, scheme: Scheme) -> Self {
        Self {
            q,
            k,
            strategy,
            scheme,
            bins: vec![0; q.len()],
            weights: vec![0.0; q.len()],
            py: vec![0.0; k],
            last_s: 0,
        }
    }

    /// Fresh partition and side information, then a token from the
    /// watermarked law (`watermark`) or from `q`. Returns whether the token's
    /// bin matches the side information.
    pub fn step(&mut self, rng: &mut RngStream, watermark: bool) -> Result<bool> {
        fill(self.strategy, self.k, rng, &mut self.bins);
        let s = rng.index(self.k);
        let token = if watermark {
            self.watermarked_weights(s)?;
            rng.categorical(&self.weights)
        } else {
            rng.categorical(self.q.as_slice())
        };
        self.last_s = s;
        Ok(self.bins[token] == s)
    }

    fn watermarked_weights(&mut self, s: usize) -> Result<()> {
        let q = self.q.as_slice();
        match self.scheme {
            Scheme::Cc => {
                self.py.iter_mut().for_each(|v| *v = 0.0);
                for (x, &b) in self.bins.iter().enumerate() {
                    self.py[b] += q[x];
                }
                let coupling = max_coupling(&ProbVector::new(self.py.clone())?);
                let kf = self.k as f64;
                for (x, &b) in self.bins.iter().enumerate() {
                    self.weights[x] = if q[x] > 0.0 {
                        q[x] * kf * coupling.get(b, s) / self.py[b]
                    } else {
                        0.0
                    };
                }
            }
            Scheme::RedGreen { delta } => {
                let red = (-delta).exp();
                let mut total = 0.0;
                for (x, &b) in self.bins.iter().enumerate() {
                    let w = if b == s { q[x] } else { q[x] * red };
                    self.weights[x] = w;
                    total += w;
                }
                if total > 0.0 {
                    self.weights.iter_mut().for_each(|w| *w /= total);
                } else {
                    self.weights.copy_from_slice(q);
                }
            }
        }
        Ok(())
    }
}

/// Chunk boundaries `(chunk_index, trials_in_chunk)` covering `trials`.
pub(crate) fn chunks(trials: u64) -> impl rayon::iter::ParallelIterator<Item = (u64, u64)> {
    use rayon::prelude::*;
    let n_chunks = trials.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(move |c| (c, CHUNK.min(trials - c * CHUNK)))
}
