//! Closed-form detection quantities.
//!
//! Detection rates are probabilities of a correct decision under equal priors
//! on "watermarked" and "not watermarked", so every rate lies in `[1/2, 1]`.

mod maxmin;
mod red_green;
mod sequential;

pub use maxmin::{
    approx_error_bound, maxmin_rd, maxmin_rd_approx, maxmin_rd_corollary,
    maxmin_rd_k2_piecewise, MaxMinCurve,
};
pub use red_green::{red_green_rates, tilt};
pub use sequential::{sequential_g, sequential_rd_bounds};

use crate::error::{Error, Result};
use crate::partition::{induced_partition_dist, PartitionSeq, PartitionStrategy};
use crate::prob::ProbVector;

/// Detection rate of the CC watermark for a fixed partition:
/// `1 - 1/(2k) - tv(P_Y, uniform)/2`.
///
/// For `k = 2` this is `(1 + min(P_Y))/2`.
pub fn one_shot_rd(p_y: &ProbVector) -> f64 {
    let k = p_y.len() as f64;
    let u = 1.0 / k;
    let dist: f64 = 0.5 * p_y.iter().map(|p| (p - u).abs()).sum::<f64>();
    1.0 - 1.0 / (2.0 * k) - 0.5 * dist
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    Ok(())
}

/// Best detection rate any zero-perception scheme can reach with `k`
/// side-information symbols: `max(1/2, 1 - gamma/(2k))`.
pub fn zero_perception_upper(k: usize, gamma: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    check_gamma(gamma)?;
    Ok((1.0 - gamma / (2.0 * k as f64)).max(0.5))
}

/// Detection upper bound with no perception constraint:
/// `1 - gamma * min_x q(x) / 2`.
pub fn uniform_upper(q: &ProbVector, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(1.0 - gamma * q.min_entry() / 2.0)
}

/// Largest number of partitions enumerated by [`expected_one_shot_rd`].
pub const MAX_ENUMERATED_PARTITIONS: u64 = 1 << 24;

/// `E_b[one_shot_rd(P_Y(q, b))]` over the partition law, by exhaustive
/// enumeration of every partition sequence of length `m` (balanced ones only
/// for [`PartitionStrategy::Balanced`]).
pub fn expected_one_shot_rd(q: &ProbVector, k: usize, strategy: PartitionStrategy) -> Result<f64> {
    let m = q.len();
    if k < 2 || m < k {
        return Err(Error::InvalidParameter(format!(
            "need m >= k >= 2 (m={m}, k={k})"
        )));
    }
    let total = (k as u64).checked_pow(m as u32).filter(|&n| n <= MAX_ENUMERATED_PARTITIONS);
    let Some(total) = total else {
        return Err(Error::TooLarge(format!(
            "{k}^{m} partitions exceed the enumeration budget"
        )));
    };
    let (lo, hi) = (m / k, m.div_ceil(k));
    let mut bins = vec![0usize; m];
    let mut sum = 0.0;
    let mut count = 0u64;
    for code in 0..total {
        let mut c = code;
        for b in bins.iter_mut() {
            *b = (c % k as u64) as usize;
            c /= k as u64;
        }
        let b = PartitionSeq::new(bins.clone(), k)?;
        if strategy == PartitionStrategy::Balanced
            && !b.counts().iter().all(|&n| n == lo || n == hi)
        {
            continue;
        }
        sum += one_shot_rd(&induced_partition_dist(q, &b)?);
        count += 1;
    }
    Ok(sum / count as f64)
}
