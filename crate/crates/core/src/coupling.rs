//! Maximum coupling of uniform side information with the partition value, the
//! channel it induces, and the watermarked next-token distribution.
//!
//! Given the induced partition law `P_Y` over `k` bins, the coupling keeps
//! `min(1/k, P_Y(i))` on the diagonal. Every bin with surplus
//! `P_Y(i) - 1/k > 0` spills that surplus into the deficit bins
//! `1/k - P_Y(j) > 0`, in proportion to the deficits. The printed form of the
//! off-diagonal term is ambiguous about its sign; this surplus-into-deficit
//! reading is the only one whose marginals come out right, and the tests
//! check the marginals directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{induced_partition_dist, PartitionSeq, PartitionStrategy};
use crate::prob::{ProbVector, NORMALIZATION_TOL};
use crate::rng::RngStream;

/// A `k x k` joint law of `(Y, S)`, stored row-major: `joint[y * k + s]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    k: usize,
    joint: Vec<f64>,
}

impl Coupling {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, y: usize, s: usize) -> f64 {
        self.joint[y * self.k + s]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.joint[y * self.k..(y + 1) * self.k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.joint.chunks(self.k).map(<[f64]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.joint.chunks(self.k).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.k)
            .map(|s| (0..self.k).map(|y| self.get(y, s)).sum())
            .collect()
    }

    /// `Pr(S = Y)`, the trace of the joint.
    pub fn match_prob(&self) -> f64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn channel(&self) -> CcChannel {
        CcChannel::from_coupling(self)
    }
}

/// The maximum coupling of `p_y` with the uniform law on the same alphabet.
pub fn max_coupling(p_y: &ProbVector) -> Coupling {
    let k = p_y.len();
    let u = 1.0 / k as f64;
    let mut joint = vec![0.0; k * k];
    let surplus: Vec<f64> = p_y.iter().map(|p| (p - u).max(0.0)).collect();
    let deficit: Vec<f64> = p_y.iter().map(|p| (u - p).max(0.0)).collect();
    // Summing the deficits (rather than calling `tv`) keeps the column sums
    // consistent with the very numbers used to fill them.
    let t: f64 = deficit.iter().sum();
    for i in 0..k {
        joint[i * k + i] = p_y.get(i).min(u);
    }
    if t > 0.0 {
        for i in (0..k).filter(|&i| surplus[i] > 0.0) {
            for j in (0..k).filter(|&j| deficit[j] > 0.0) {
                joint[i * k + j] = surplus[i] * deficit[j] / t;
            }
        }
    }
    Coupling { k, joint }
}

/// Like [`max_coupling`], but with the side-information law spelled out.
/// Only the uniform law is supported.
pub fn max_coupling_to(p_y: &ProbVector, p_s: &ProbVector) -> Result<Coupling> {
    if p_y.len() != p_s.len() {
        return Err(Error::DimensionMismatch {
            left: p_y.len(),
            right: p_s.len(),
        });
    }
    if !p_s.is_uniform() {
        return Err(Error::NonUniformSideInfo);
    }
    Ok(max_coupling(p_y))
}

/// The conditional `P_{S|Y}`. Rows for bins with `P_Y(y) = 0` are undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcChannel {
    k: usize,
    rows: Vec<Option<Vec<f64>>>,
}

impl CcChannel {
    pub fn from_coupling(c: &Coupling) -> Self {
        let rows = (0..c.k)
            .map(|y| {
                let row = c.row(y);
                let py: f64 = row.iter().sum();
                (py > 0.0).then(|| row.iter().map(|v| v / py).collect())
            })
            .collect();
        Self { k: c.k, rows }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, y: usize) -> Option<&[f64]> {
        self.rows[y].as_deref()
    }

    /// `P_{S|Y}(s | y)`, if row `y` is defined.
    pub fn prob(&self, y: usize, s: usize) -> Option<f64> {
        self.rows[y].as_ref().map(|r| r[s])
    }

    /// True if some defined row is a point mass (for `k = 2`, this is the
    /// Z-channel shape: one input passes through deterministically).
    pub fn has_deterministic_row(&self) -> bool {
        self.rows
            .iter()
            .flatten()
            .any(|r| r.iter().any(|&v| (v - 1.0).abs() <= NORMALIZATION_TOL))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WatermarkConfig {
    pub m: usize,
    pub k: usize,
    pub partition_strategy: PartitionStrategy,
    #[serde(default = "default_coin_bias")]
    pub coin_bias: f64,
}

fn default_coin_bias() -> f64 {
    0.5
}

impl WatermarkConfig {
    pub fn new(m: usize, k: usize, partition_strategy: PartitionStrategy) -> Result<Self> {
        let cfg = Self {
            m,
            k,
            partition_strategy,
            coin_bias: default_coin_bias(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.m < self.k {
            return Err(Error::InvalidParameter(format!(
                "need m >= k >= 2 (m={}, k={})",
                self.m, self.k
            )));
        }
        check_coin_bias(self.coin_bias)
    }
}

fn check_coin_bias(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "coin bias {p} outside [0, 1]"
        )));
    }
    Ok(())
}

fn check_symbol(s: usize, k: usize) -> Result<()> {
    if s >= k {
        return Err(Error::InvalidParameter(format!(
            "side information {s} outside alphabet of size {k}"
        )));
    }
    Ok(())
}

/// The watermarked next-token law given side information `s`:
/// `x -> q(x) P_{S|Y}(s | b_x) / P_S(s)`.
pub fn watermark_conditional(q: &ProbVector, b: &PartitionSeq, s: usize) -> Result<ProbVector> {
    let k = b.k();
    check_symbol(s, k)?;
    let py = induced_partition_dist(q, b)?;
    let channel = max_coupling(&py).channel();
    let out = q
        .iter()
        .enumerate()
        .map(|(x, qx)| match channel.prob(b.bin(x), s) {
            Some(p) => qx * p * k as f64,
            None => 0.0,
        })
        .collect();
    ProbVector::new(out)
}

/// All `k` watermarked conditionals at once (one coupling computation).
pub fn watermark_conditionals(q: &ProbVector, b: &PartitionSeq) -> Result<Vec<ProbVector>> {
    let k = b.k();
    let py = induced_partition_dist(q, b)?;
    let channel = max_coupling(&py).channel();
    (0..k)
        .map(|s| {
            ProbVector::new(
                q.iter()
                    .enumerate()
                    .map(|(x, qx)| channel.prob(b.bin(x), s).map_or(0.0, |p| qx * p * k as f64))
                    .collect(),
            )
        })
        .collect()
}

/// Draws the latent coin (`true` = watermark), then a token: from `q` if the
/// coin is `false`, from the watermarked conditional otherwise.
pub fn sample_token(
    q: &ProbVector,
    b: &PartitionSeq,
    s: usize,
    coin_bias: f64,
    rng: &mut RngStream,
) -> Result<(usize, bool)> {
    check_coin_bias(coin_bias)?;
    check_symbol(s, b.k())?;
    if q.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: q.len(),
            right: b.len(),
        });
    }
    let coin = rng.bernoulli(coin_bias);
    let token = if coin {
        rng.categorical(watermark_conditional(q, b, s)?.as_slice())
    } else {
        rng.categorical(q.as_slice())
    };
    Ok((token, coin))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Watermarked,
    NotWatermarked,
}

impl Decision {
    pub fn is_watermarked(self) -> bool {
        self == Decision::Watermarked
    }
}

/// Watermarked iff the token's bin equals the side information.
pub fn detect(token: usize, b: &PartitionSeq, s: usize) -> Result<Decision> {
    if token >= b.len() {
        return Err(Error::TokenOutOfRange { token, m: b.len() });
    }
    check_symbol(s, b.k())?;
    Ok(if b.bin(token) == s {
        Decision::Watermarked
    } else {
        Decision::NotWatermarked
    })
}
