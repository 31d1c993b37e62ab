//! The red/green-list baseline: shift the logits of a "green" token set by
//! `delta` and renormalise.

use crate::error::{Error, Result};
use crate::prob::{tv, ProbVector};

fn green_mask(m: usize, green: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; m];
    for &x in green {
        if x >= m {
            return Err(Error::TokenOutOfRange { token: x, m });
        }
        mask[x] = true;
    }
    Ok(mask)
}

/// `q` with every green logit raised by `delta`. Implemented as scaling red
/// tokens by `exp(-delta)` so that `delta = inf` is well defined (the result
/// is `q` restricted to the green set). A green set carrying no mass leaves
/// `q` unchanged.
pub fn tilt(q: &ProbVector, green: &[usize], delta: f64) -> Result<ProbVector> {
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tilt delta must be >= 0, got {delta}"
        )));
    }
    let mask = green_mask(q.len(), green)?;
    let green_mass: f64 = q.iter().zip(&mask).filter(|(_, &g)| g).map(|(p, _)| p).sum();
    if green_mass == 0.0 {
        return Ok(q.clone());
    }
    let red_scale = (-delta).exp();
    let weights = q
        .iter()
        .zip(&mask)
        .map(|(p, &g)| if g { p } else { p * red_scale })
        .collect();
    ProbVector::from_weights(weights)
}

/// `(rd, rp)` for a fixed green set under equal priors.
///
/// The likelihood ratio of the tilted law to `q` is constant on each of the
/// two sets and larger on the green one, so "token is green" is the optimal
/// test and `rd = (1 + P_tilt(G) - q(G))/2`. Perception is
/// `(1 + tv(tilt, q))/2`.
pub fn red_green_rates(q: &ProbVector, delta: f64, green: &[usize]) -> Result<(f64, f64)> {
    let tilted = tilt(q, green, delta)?;
    let mask = green_mask(q.len(), green)?;
    let gain: f64 = (0..q.len())
        .filter(|&x| mask[x])
        .map(|x| tilted.get(x) - q.get(x))
        .sum();
    let rd = 0.5 * (1.0 + gain);
    let rp = 0.5 * (1.0 + tv(&tilted, q)?);
    Ok((rd, rp))
}
