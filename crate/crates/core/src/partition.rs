//! The public vocabulary partition `b^m` and the quantities derived from it.
//!
//! A partition sequence assigns each token `x` in `0..m` to a side-information
//! symbol `b_x` in `0..k`; the token-to-bin map is `f(x, b) = b_x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{tv, ProbVector};
use crate::rng::RngStream;

/// How the partition randomness is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// Uniform over sequences with (near-)equal symbol counts.
    Balanced,
    /// Every entry i.i.d. uniform over the alphabet.
    Iid,
}

impl PartitionStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            PartitionStrategy::Balanced => "balanced",
            PartitionStrategy::Iid => "iid",
        }
    }
}

impl std::str::FromStr for PartitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Self::Balanced),
            "iid" => Ok(Self::Iid),
            other => Err(Error::InvalidParameter(format!(
                "unknown partition strategy '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionSeq {
    bins: Vec<usize>,
    k: usize,
}

impl PartitionSeq {
    pub fn new(bins: Vec<usize>, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("alphabet size must be >= 1".into()));
        }
        if bins.is_empty() {
            return Err(Error::InvalidParameter("empty partition".into()));
        }
        if let Some(&bad) = bins.iter().find(|&&b| b >= k) {
            return Err(Error::InvalidParameter(format!(
                "bin {bad} outside alphabet of size {k}"
            )));
        }
        Ok(Self { bins, k })
    }

    /// Number of tokens `m`.
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Alphabet size `k`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// `f(x, b) = b_x`.
    pub fn bin(&self, token: usize) -> usize {
        self.bins[token]
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.k];
        for &b in &self.bins {
            c[b] += 1;
        }
        c
    }

    /// Applies a token permutation: entry `x` of the result is `b_{perm[x]}`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            bins: perm.iter().map(|&i| self.bins[i]).collect(),
            k: self.k,
        }
    }
}

/// Uniform draw from the sequences whose symbol counts are `floor(m/k)` or
/// `ceil(m/k)`. Which symbols receive the extra count is itself uniform, then
/// the multiset is shuffled.
pub fn sample_balanced(m: usize, k: usize, rng: &mut RngStream) -> Result<PartitionSeq> {
    if k < 1 || m < k {
        return Err(Error::InvalidParameter(format!(
            "balanced partition needs m >= k >= 1 (m={m}, k={k})"
        )));
    }
    let mut bins = vec![0; m];
    fill_balanced(&mut bins, k, rng);
    Ok(PartitionSeq { bins, k })
}

pub fn sample_iid(m: usize, k: usize, rng: &mut RngStream) -> Result<PartitionSeq> {
    if k < 1 || m < 1 {
        return Err(Error::InvalidParameter(format!(
            "i.i.d. partition needs m >= 1 and k >= 1 (m={m}, k={k})"
        )));
    }
    let mut bins = vec![0; m];
    fill_iid(&mut bins, k, rng);
    Ok(PartitionSeq { bins, k })
}

fn fill_balanced(bins: &mut [usize], k: usize, rng: &mut RngStream) {
    let m = bins.len();
    let base = m / k;
    let extra = m % k;
    let mut symbols: Vec<usize> = (0..k).collect();
    if extra > 0 {
        rng.shuffle(&mut symbols);
    }
    let mut pos = 0;
    for (rank, &s) in symbols.iter().enumerate() {
        let count = base + usize::from(rank < extra);
        bins[pos..pos + count].fill(s);
        pos += count;
    }
    rng.shuffle(bins);
}

fn fill_iid(bins: &mut [usize], k: usize, rng: &mut RngStream) {
    for b in bins.iter_mut() {
        *b = rng.index(k);
    }
}

/// Overwrites `bins` with a fresh draw, consuming randomness exactly as
/// [`sample`] does. Callers guarantee `bins.len() >= k` for balanced draws.
pub(crate) fn fill(strategy: PartitionStrategy, k: usize, rng: &mut RngStream, bins: &mut [usize]) {
    match strategy {
        PartitionStrategy::Balanced => fill_balanced(bins, k, rng),
        PartitionStrategy::Iid => fill_iid(bins, k, rng),
    }
}

pub fn sample(
    strategy: PartitionStrategy,
    m: usize,
    k: usize,
    rng: &mut RngStream,
) -> Result<PartitionSeq> {
    match strategy {
        PartitionStrategy::Balanced => sample_balanced(m, k, rng),
        PartitionStrategy::Iid => sample_iid(m, k, rng),
    }
}

/// `P_Y(s) = sum_x q(x) 1[b_x = s]`.
pub fn induced_partition_dist(q: &ProbVector, b: &PartitionSeq) -> Result<ProbVector> {
    if q.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: q.len(),
            right: b.len(),
        });
    }
    let mut py = vec![0.0; b.k()];
    for (x, p) in q.iter().enumerate() {
        py[b.bin(x)] += p;
    }
    ProbVector::new(py)
}

/// Number of entries equal to `lambda` in the extreme point of
/// `{q : ||q||_inf <= lambda}`, i.e. `floor(1/lambda)` with a relative guard
/// so that values such as `1/3` land on the intended integer.
pub(crate) fn full_entries(lambda: f64) -> usize {
    ((1.0 / lambda) * (1.0 + 1e-12)).floor() as usize
}

pub(crate) fn check_lambda(lambda: f64, m: usize) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0 && lambda <= 1.0 + 1e-12)
        || (m as f64) * lambda < 1.0 - 1e-12
    {
        return Err(Error::InfeasibleLambda { lambda, m });
    }
    Ok(())
}

/// The extreme point `(lambda, ..., lambda, 1 - t lambda, 0, ..., 0)` with
/// `t = floor(1/lambda)` entries equal to `lambda`.
pub fn worst_case_q(lambda: f64, m: usize) -> Result<ProbVector> {
    check_lambda(lambda, m)?;
    let lambda = lambda.min(1.0);
    let t = full_entries(lambda).min(m);
    let mut q = vec![0.0; m];
    for entry in q.iter_mut().take(t) {
        *entry = lambda;
    }
    let rest = 1.0 - t as f64 * lambda;
    if t < m && rest > 1e-12 {
        q[t] = rest;
    }
    ProbVector::from_weights(q)
}

/// `g(q, b) = sum_s |P_Y(s) - 1/k|`, i.e. twice the distance of the induced
/// partition distribution from uniform.
pub fn g_statistic(q: &ProbVector, b: &PartitionSeq) -> Result<f64> {
    let py = induced_partition_dist(q, b)?;
    let u = 1.0 / b.k() as f64;
    Ok(py.iter().map(|p| (p - u).abs()).sum())
}

/// `tv(P_Y, uniform)`; convenience for callers that already hold `P_Y`.
pub fn distance_from_uniform(py: &ProbVector) -> f64 {
    tv(py, &ProbVector::uniform(py.len())).expect("same length")
}
