use rayon::prelude::*;
use serde::Serialize;

use super::{chunks, ExperimentConfig, Stepper};
use crate::error::Result;
use crate::rng::RngStream;

/// Threshold grid size: `tau_j = j / (ROC_GRID_POINTS - 1)`.
pub const ROC_GRID_POINTS: usize = 512;

const WATERMARKED_STREAMS: u64 = 1 << 40;
const NULL_STREAMS: u64 = 2 << 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

impl RocCurve {
    /// ROC of the test "match fraction >= tau" from per-population histograms
    /// of match counts (`hist[c]` = number of sequences with `c` matches out
    /// of `n = hist.len() - 1`).
    pub fn from_histograms(h1: &[u64], h0: &[u64]) -> Self {
        let n = h1.len() - 1;
        let tail = |hist: &[u64]| {
            let total: u64 = hist.iter().sum();
            let mut at_least = vec![0u64; hist.len() + 1];
            for c in (0..hist.len()).rev() {
                at_least[c] = at_least[c + 1] + hist[c];
            }
            (at_least, total as f64)
        };
        let (t1, n1) = tail(h1);
        let (t0, n0) = tail(h0);
        let last = (ROC_GRID_POINTS - 1) as u64;
        let mut thresholds = Vec::with_capacity(ROC_GRID_POINTS);
        let mut fpr = Vec::with_capacity(ROC_GRID_POINTS);
        let mut tpr = Vec::with_capacity(ROC_GRID_POINTS);
        for j in 0..=last {
            // Smallest count c with c / n >= j / last, in integer arithmetic.
            let c = (j * n as u64).div_ceil(last) as usize;
            thresholds.push(j as f64 / last as f64);
            fpr.push(t0[c] as f64 / n0);
            tpr.push(t1[c] as f64 / n1);
        }
        let auc = trapezoid_auc(&fpr, &tpr);
        Self {
            thresholds,
            fpr,
            tpr,
            auc,
        }
    }

    /// TPR at a given FPR, interpolating linearly along the curve.
    pub fn tpr_at_fpr(&self, target: f64) -> f64 {
        let pts = sorted_points(&self.fpr, &self.tpr);
        for w in pts.windows(2) {
            let ((f0, t0), (f1, t1)) = (w[0], w[1]);
            if target <= f1 {
                if f1 == f0 {
                    return t1;
                }
                return t0 + (t1 - t0) * (target - f0) / (f1 - f0);
            }
        }
        1.0
    }
}

fn sorted_points(fpr: &[f64], tpr: &[f64]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = fpr.iter().copied().zip(tpr.iter().copied()).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts
}

fn trapezoid_auc(fpr: &[f64], tpr: &[f64]) -> f64 {
    sorted_points(fpr, tpr)
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceReport {
    pub n: usize,
    pub trials: u64,
    /// `watermarked_hist[c]`: watermarked sequences with `c` matches.
    pub watermarked_hist: Vec<u64>,
    /// `null_hist[c]`: unwatermarked sequences with `c` matches.
    pub null_hist: Vec<u64>,
    pub watermarked_match_rate: f64,
    pub null_match_rate: f64,
    pub roc: RocCurve,
}

impl SequenceReport {
    /// `(fpr, tpr)` of the test "match fraction >= tau".
    pub fn rates_at(&self, tau: f64) -> (f64, f64) {
        let n = self.n as f64;
        let frac = |hist: &[u64]| {
            let total: u64 = hist.iter().sum();
            let hits: u64 = hist
                .iter()
                .enumerate()
                .filter(|&(c, _)| c as f64 >= tau * n - 1e-9)
                .map(|(_, &h)| h)
                .sum();
            hits as f64 / total as f64
        };
        (frac(&self.null_hist), frac(&self.watermarked_hist))
    }
}

fn population(config: &ExperimentConfig, q: &crate::prob::ProbVector, watermark: bool) -> Result<Vec<u64>> {
    let base = if watermark { WATERMARKED_STREAMS } else { NULL_STREAMS };
    chunks(config.trials)
        .map(|(chunk, len)| -> Result<Vec<u64>> {
            let mut rng = RngStream::new(config.seed, base + chunk);
            let mut stepper = Stepper::new(q, config.k, config.partition_strategy, config.scheme);
            let mut hist = vec![0u64; config.n + 1];
            for _ in 0..len {
                let mut matches = 0;
                for _ in 0..config.n {
                    matches += usize::from(stepper.step(&mut rng, watermark)?);
                }
                hist[matches] += 1;
            }
            Ok(hist)
        })
        .try_reduce(
            || vec![0u64; config.n + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

/// Simulates `trials` fully watermarked sequences and `trials` unwatermarked
/// ones, each step with fresh partition and side information, and sweeps the
/// match-fraction threshold.
pub fn run_sequence(config: &ExperimentConfig) -> Result<SequenceReport> {
    let q = config.validate()?;
    let watermarked_hist = population(config, &q, true)?;
    let null_hist = population(config, &q, false)?;
    let rate = |h: &[u64]| {
        let matches: u64 = h.iter().enumerate().map(|(c, &v)| c as u64 * v).sum();
        matches as f64 / (config.trials * config.n as u64) as f64
    };
    Ok(SequenceReport {
        n: config.n,
        trials: config.trials,
        watermarked_match_rate: rate(&watermarked_hist),
        null_match_rate: rate(&null_hist),
        roc: RocCurve::from_histograms(&watermarked_hist, &null_hist),
        watermarked_hist,
        null_hist,
    })
}
