//! Bounds on the detection rate when the one-shot scheme is applied at each of
//! `n` i.i.d. steps, via Hellinger tensorisation.

use crate::error::{Error, Result};

/// `g(p) = p + sqrt((1-p)/2) (1 + sqrt(1-2p))` on `[0, 1/2]`.
pub fn sequential_g(p: f64) -> f64 {
    p + ((1.0 - p) / 2.0).sqrt() * (1.0 + (1.0 - 2.0 * p).sqrt())
}

/// `g(p)/sqrt(2)`, written so that `p = 0` gives exactly one.
fn g_over_sqrt2(p: f64) -> f64 {
    p * std::f64::consts::FRAC_1_SQRT_2 + 0.5 * (1.0 - p).sqrt() * (1.0 + (1.0 - 2.0 * p).sqrt())
}

/// `(lower, upper)` with
/// `lower = 1 - 2^-(n/2 + 1) g^n` and `upper = (1 + sqrt(1 - (g^2/2)^n))/2`,
/// where `p_tilde` is the smaller mass of the binary induced partition law.
pub fn sequential_rd_bounds(p_tilde: f64, n: u32) -> Result<(f64, f64)> {
    if !(0.0..=0.5).contains(&p_tilde) {
        return Err(Error::InvalidParameter(format!(
            "p_tilde {p_tilde} outside [0, 1/2]"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sequence length must be >= 1".into()));
    }
    let h = g_over_sqrt2(p_tilde).min(1.0);
    let hn = h.powi(n as i32);
    let lower = 1.0 - 0.5 * hn;
    let upper = 0.5 * (1.0 + (1.0 - hn * hn).max(0.0).sqrt());
    Ok((lower, upper))
}
