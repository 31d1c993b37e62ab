//! Max-min detection: the best rate guaranteed against every token law with
//! `||q||_inf <= lambda`, with the partition law optimised.
//!
//! The worst case is the vertex `(lambda, ..., lambda, 1 - t lambda, 0, ...)`
//! with `t = floor(1/lambda)` and the optimal partition law is uniform over
//! balanced sequences. The expected `g` statistic then reduces to a
//! hypergeometric sum: of the `t` heavy tokens, `c` fall in a given bin of
//! size `m/k`, and the remainder token falls in that bin with probability
//! `(m/k - c)/(m - t)`.

use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::partition::{check_lambda, full_entries};

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    Ok(())
}

/// `P(c)` for `c` successes in `t` draws without replacement from an urn of
/// `m` balls, `good` of them successes. Computed in log space.
fn hypergeom_pmf(c: usize, m: usize, good: usize, t: usize) -> f64 {
    if c > good || t < c || t - c > m - good {
        return 0.0;
    }
    (ln_binomial(good as u64, c as u64) + ln_binomial((m - good) as u64, (t - c) as u64)
        - ln_binomial(m as u64, t as u64))
    .exp()
}

fn binom_pmf(c: usize, t: usize, p: f64) -> f64 {
    if c > t {
        return 0.0;
    }
    let lp = if c == 0 { 0.0 } else { c as f64 * p.ln() };
    let lq = if c == t { 0.0 } else { (t - c) as f64 * (1.0 - p).ln() };
    (ln_binomial(t as u64, c as u64) + lp + lq).exp()
}

/// Exact max-min detection rate for balanced partitions. Requires `k | m`.
pub fn maxmin_rd(lambda: f64, m: usize, k: usize) -> Result<f64> {
    check_k(k)?;
    if !m.is_multiple_of(k) {
        return Err(Error::NotDivisible { m, k });
    }
    check_lambda(lambda, m)?;
    let lambda = lambda.min(1.0);
    let t = full_entries(lambda).min(m);
    let rest = (1.0 - t as f64 * lambda).max(0.0);
    let per_bin = m / k;
    let u = 1.0 / k as f64;
    let mut expected_g = 0.0;
    for c in 0..=t.min(per_bin) {
        let w = hypergeom_pmf(c, m, per_bin, t);
        if w == 0.0 {
            continue;
        }
        let with_rest = if m > t {
            (per_bin - c) as f64 / (m - t) as f64
        } else {
            0.0
        };
        let heavy = c as f64 * lambda;
        expected_g += w
            * (with_rest * (heavy + rest - u).abs() + (1.0 - with_rest) * (heavy - u).abs());
    }
    expected_g *= k as f64;
    Ok(1.0 - 1.0 / (2.0 * k as f64) - 0.25 * expected_g)
}

/// The max-min rate at `lambda = 1/k`:
/// `1 - 1/(2k) - C((k-1)m/k, k) / (2 C(m, k))`.
pub fn maxmin_rd_corollary(m: usize, k: usize) -> Result<f64> {
    check_k(k)?;
    if !m.is_multiple_of(k) {
        return Err(Error::NotDivisible { m, k });
    }
    if m < k {
        return Err(Error::InfeasibleLambda {
            lambda: 1.0 / k as f64,
            m,
        });
    }
    let ratio = (ln_binomial(((k - 1) * m / k) as u64, k as u64) - ln_binomial(m as u64, k as u64))
        .exp();
    Ok(1.0 - 1.0 / (2.0 * k as f64) - 0.5 * ratio)
}

/// Binary side information, `lambda` in `[1/3, 1]`, even `m`.
pub fn maxmin_rd_k2_piecewise(lambda: f64, m: usize) -> Result<f64> {
    if !m.is_multiple_of(2) {
        return Err(Error::NotDivisible { m, k: 2 });
    }
    if !(1.0 / 3.0 - 1e-12..=1.0 + 1e-12).contains(&lambda) {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda} outside [1/3, 1]"
        )));
    }
    check_lambda(lambda, m)?;
    let mf = m as f64;
    Ok(if lambda >= 0.5 {
        0.75 - (mf * lambda - 1.0) / (4.0 * (mf - 1.0))
    } else {
        0.75 - (mf - 2.0) / (8.0 * (mf - 1.0))
    })
}

/// Vocabulary-size-free approximation, obtained by replacing the
/// hypergeometric law with `Bin(t, 1/k)` and dropping the remainder token.
pub fn maxmin_rd_approx(lambda: f64, k: usize) -> Result<f64> {
    check_k(k)?;
    if !(lambda.is_finite() && lambda > 0.0 && lambda <= 1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda} outside (0, 1]"
        )));
    }
    let lambda = lambda.min(1.0);
    let t = full_entries(lambda);
    let u = 1.0 / k as f64;
    let mut expected = 0.0;
    for c in 0..=t {
        let cf = c as f64;
        let tf = t as f64;
        expected += binom_pmf(c, t, u)
            * (((cf - tf) * lambda + (1.0 - u)).abs() + (k as f64 - 1.0) * (cf * lambda - u).abs());
    }
    Ok(1.0 - 1.0 / (2.0 * k as f64) - 0.25 * expected)
}

/// `2 k ceil(1/lambda) / m`, the bound on `|approx - exact|`.
pub fn approx_error_bound(lambda: f64, m: usize, k: usize) -> f64 {
    // Same relative guard as the floor: 1/(1/3) must count as 3, not 4.
    let ceil = ((1.0 / lambda) * (1.0 - 1e-12)).ceil();
    2.0 * k as f64 * ceil / m as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxMinCurve {
    pub m: usize,
    pub k: usize,
    pub lambda_grid: Vec<f64>,
    /// `None` where the exact rate is undefined (`k` does not divide `m`, or
    /// `lambda < 1/m`).
    pub exact: Vec<Option<f64>>,
    pub approx: Vec<f64>,
    pub error_bound: Vec<f64>,
}

impl MaxMinCurve {
    pub fn compute(lambda_grid: &[f64], m: usize, k: usize) -> Result<Self> {
        check_k(k)?;
        if lambda_grid.is_empty() {
            return Err(Error::InvalidParameter("empty lambda grid".into()));
        }
        let mut exact = Vec::with_capacity(lambda_grid.len());
        let mut approx = Vec::with_capacity(lambda_grid.len());
        let mut error_bound = Vec::with_capacity(lambda_grid.len());
        for &lambda in lambda_grid {
            approx.push(maxmin_rd_approx(lambda, k)?);
            exact.push(match maxmin_rd(lambda, m, k) {
                Ok(v) => Some(v),
                Err(Error::NotDivisible { .. } | Error::InfeasibleLambda { .. }) => None,
                Err(e) => return Err(e),
            });
            error_bound.push(approx_error_bound(lambda, m, k));
        }
        Ok(Self {
            m,
            k,
            lambda_grid: lambda_grid.to_vec(),
            exact,
            approx,
            error_bound,
        })
    }

    /// Indices where `|exact - approx|` exceeds the error bound.
    pub fn bound_violations(&self) -> Vec<usize> {
        (0..self.lambda_grid.len())
            .filter(|&i| {
                self.exact[i].is_some_and(|e| (e - self.approx[i]).abs() > self.error_bound[i])
            })
            .collect()
    }

    /// Whether the exact curve never increases with `lambda` (checked on the
    /// grid sorted by `lambda`). This is an observation, not a theorem.
    pub fn exact_is_nonincreasing(&self) -> bool {
        let mut pts: Vec<(f64, f64)> = self
            .lambda_grid
            .iter()
            .zip(&self.exact)
            .filter_map(|(&l, e)| e.map(|e| (l, e)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12)
    }
}
