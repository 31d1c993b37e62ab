//! Finite probability vectors and the divergences used throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted deviation of the total mass from one without any correction.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Largest deviation that is silently renormalised. Anything beyond this is
/// rejected so that rounding drift cannot accumulate across a pipeline.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// A probability distribution over the indexed alphabet `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidProbability(format!("entry {i} is {p}")));
            }
        }
        let total: f64 = probs.iter().sum();
        let dev = (total - 1.0).abs();
        if dev <= NORMALIZATION_TOL {
            Ok(Self { probs })
        } else if dev <= RENORMALIZE_TOL {
            Ok(Self {
                probs: probs.into_iter().map(|p| p / total).collect(),
            })
        } else {
            Err(Error::InvalidProbability(format!("entries sum to {total}")))
        }
    }

    /// Normalises arbitrary non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::InvalidProbability(
                "weights must be finite, non-negative and not all zero".into(),
            ));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty alphabet");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        assert!(at < n, "point mass outside alphabet");
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.probs.iter().copied()
    }

    /// `max_i p_i`.
    pub fn inf_norm(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / self.len() as f64;
        self.probs.iter().all(|&p| (p - u).abs() <= NORMALIZATION_TOL)
    }
}

impl<'de> Deserialize<'de> for ProbVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(d)?;
        ProbVector::new(probs).map_err(serde::de::Error::custom)
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

fn check_dims(p: &ProbVector, q: &ProbVector) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

/// Total variation distance `(1/2) sum |p_i - q_i|`.
pub fn tv(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    check_dims(p, q)?;
    Ok(0.5 * p.iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Hockey-stick divergence `sum (p_i - gamma q_i)_+`.
///
/// The `(1 - gamma)_+` offset that some authors add is not included, so
/// `e_gamma(p, p, gamma) = (1 - gamma)_+` is *not* zero for `gamma < 1`.
pub fn e_gamma(p: &ProbVector, q: &ProbVector, gamma: f64) -> Result<f64> {
    check_dims(p, q)?;
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    Ok(p.iter()
        .zip(q.iter())
        .map(|(a, b)| (a - gamma * b).max(0.0))
        .sum())
}

/// Squared Hellinger divergence `2 - 2 sum sqrt(p_i q_i)`, in `[0, 2]`.
pub fn hellinger_sq(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    check_dims(p, q)?;
    let bc: f64 = p.iter().zip(q.iter()).map(|(a, b)| (a * b).sqrt()).sum();
    Ok((2.0 - 2.0 * bc).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv(&pv(&[0.5, 0.5]), &pv(&[0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(tv(&pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap(), 0.5);
        assert!((tv(&pv(&[0.3, 0.7]), &pv(&[0.5, 0.5])).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn e_gamma_examples() {
        let u = pv(&[0.5, 0.5]);
        assert_eq!(e_gamma(&u, &u, 1.0).unwrap(), 0.0);
        assert_eq!(e_gamma(&pv(&[1.0, 0.0]), &u, 1.0).unwrap(), 0.5);
        assert_eq!(e_gamma(&pv(&[0.6, 0.4]), &u, 2.0).unwrap(), 0.0);
        assert_eq!(e_gamma(&u, &u, -0.1), Err(Error::InvalidGamma(-0.1)));
    }

    #[test]
    fn hellinger_examples() {
        let u = ProbVector::uniform(4);
        assert!(hellinger_sq(&u, &u).unwrap().abs() < 1e-15);
        assert_eq!(hellinger_sq(&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])).unwrap(), 2.0);
        let h = hellinger_sq(&pv(&[0.5, 0.5]), &pv(&[1.0, 0.0])).unwrap();
        assert!((h - (2.0 - 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let err = tv(&ProbVector::uniform(2), &ProbVector::uniform(3)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { left: 2, right: 3 });
        assert!(hellinger_sq(&ProbVector::uniform(2), &ProbVector::uniform(3)).is_err());
    }

    #[test]
    fn construction_tolerances() {
        assert!(ProbVector::new(vec![0.5, 0.5 + 5e-13]).is_ok());
        let renorm = ProbVector::new(vec![0.5, 0.5 + 5e-10]).unwrap();
        assert!((renorm.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(ProbVector::new(vec![0.5, 0.5 + 1e-8]).is_err());
        assert!(ProbVector::new(vec![1.1, -0.1]).is_err());
        assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
    }

    #[test]
    fn inf_norm_is_exact_max() {
        let p = pv(&[0.1, 0.6, 0.3]);
        assert_eq!(p.inf_norm(), 0.6);
        assert_eq!(p.min_entry(), 0.1);
    }
}
