//! The match-count z-test and its null calibration.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{chunks, Scheme, Stepper};
use crate::error::{Error, Result};
use crate::partition::PartitionStrategy;
use crate::prob::ProbVector;
use crate::rng::RngStream;

/// `(Z - T gamma) / sqrt(T gamma (1 - gamma))`; for CC with `k` symbols the
/// null match probability is `gamma = 1/k`.
pub fn z_score(matches: u64, t: u64, gamma: f64) -> Result<f64> {
    if t < 1 {
        return Err(Error::InvalidParameter("T must be >= 1".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    let tf = t as f64;
    Ok((matches as f64 - tf * gamma) / (tf * gamma * (1.0 - gamma)).sqrt())
}

/// One-sided p-value `1 - Phi(z)`.
pub fn p_value(z: f64) -> f64 {
    Normal::standard().sf(z)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullZReport {
    pub runs: u64,
    pub t: u64,
    pub k: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
}

/// z-scores of `runs` unwatermarked sequences of length `t`: tokens from
/// uniform `q` over `m`, fresh partition and side information every step.
pub fn simulate_null_z(
    m: usize,
    k: usize,
    strategy: PartitionStrategy,
    t: u64,
    runs: u64,
    seed: u64,
) -> Result<NullZReport> {
    if k < 2 || m < k || runs < 2 {
        return Err(Error::InvalidParameter(format!(
            "need m >= k >= 2 and runs >= 2 (m={m}, k={k}, runs={runs})"
        )));
    }
    let q = ProbVector::uniform(m);
    let gamma = 1.0 / k as f64;
    let (sum, sum_sq) = chunks(runs)
        .map(|(chunk, len)| -> Result<(f64, f64)> {
            let mut rng = RngStream::new(seed, chunk);
            let mut stepper = Stepper::new(&q, k, strategy, Scheme::Cc);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let mut matches = 0u64;
                for _ in 0..t {
                    matches += u64::from(stepper.step(&mut rng, false)?);
                }
                let z = z_score(matches, t, gamma)?;
                s1 += z;
                s2 += z * z;
            }
            Ok((s1, s2))
        })
        .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
    let n = runs as f64;
    let mean = sum / n;
    Ok(NullZReport {
        runs,
        t,
        k,
        mean,
        variance: (sum_sq - n * mean * mean) / (n - 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareReport {
    pub tokens: u64,
    pub matches: u64,
    pub statistic: f64,
    pub p_value: f64,
}

/// Goodness of fit of per-token null matches to `Ber(1/k)`.
pub fn null_match_chi_square(
    q: &ProbVector,
    k: usize,
    strategy: PartitionStrategy,
    tokens: u64,
    seed: u64,
) -> Result<ChiSquareReport> {
    if k < 2 || q.len() < k || tokens < 1 {
        return Err(Error::InvalidParameter("need m >= k >= 2 and tokens >= 1".into()));
    }
    let matches = chunks(tokens)
        .map(|(chunk, len)| -> Result<u64> {
            let mut rng = RngStream::new(seed, chunk);
            let mut stepper = Stepper::new(q, k, strategy, Scheme::Cc);
            let mut hits = 0;
            for _ in 0..len {
                hits += u64::from(stepper.step(&mut rng, false)?);
            }
            Ok(hits)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let n = tokens as f64;
    let p = 1.0 / k as f64;
    let (e1, e0) = (n * p, n * (1.0 - p));
    let o1 = matches as f64;
    let o0 = n - o1;
    let statistic = (o1 - e1).powi(2) / e1 + (o0 - e0).powi(2) / e0;
    let dist = ChiSquared::new(1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquareReport {
        tokens,
        matches,
        statistic,
        p_value: dist.sf(statistic),
    })
}
