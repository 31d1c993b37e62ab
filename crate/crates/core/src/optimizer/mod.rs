//! Detection/perception frontier for small vocabularies.
//!
//! For a token law `q`, `k` side-information symbols and a perception budget
//! `alpha`, the frontier is
//!
//! ```text
//! R_d(alpha) = 1/2 + 1/2 * max (1/k) sum_s E_gamma(Q_s, q)
//!              over conditionals Q_1..Q_k with tv(mean_s Q_s, q) <= alpha
//! ```
//!
//! (equal priors; `gamma` is left free). The objective is convex, so the
//! maximum sits at a vertex. Instances whose sign-pattern enumeration fits the
//! budget are solved exactly, one LP per pattern, and marked certified.
//! Larger instances fall back to multi-start projected subgradient ascent,
//! each start polished by the LP of its final sign pattern and then by
//! single-cell pattern flips; those results are best-found, not certified.

mod exact;
mod heuristic;
mod lp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{e_gamma, tv, ProbVector};
use crate::theory::{check_gamma, uniform_upper, zero_perception_upper};

/// Feasibility slack allowed on the perception constraint.
pub const PERCEPTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    /// Largest number of raw sign patterns for the exact path.
    pub pattern_budget: u64,
    /// Random starts in the heuristic path.
    pub starts: usize,
    /// Subgradient iterations per start.
    pub iterations: usize,
    /// Step size at iteration `t` is `step_scale / sqrt(t)`.
    pub step_scale: f64,
    /// Dykstra rounds per projection.
    pub projection_iters: usize,
    /// Passes of single-cell pattern flips after the LP polish.
    pub polish_sweeps: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            pattern_budget: 262_144,
            starts: 64,
            iterations: 2000,
            step_scale: 0.5,
            projection_iters: 10,
            polish_sweeps: 4,
            seed: 0,
        }
    }
}

/// One point of the frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub alpha_p: f64,
    pub rd: f64,
    /// `(1 + tv(mean_s Q_s, q))/2`, the perception actually used.
    pub rp: f64,
    pub conditionals: Vec<ProbVector>,
    /// True when the value is a proven optimum.
    pub certified: bool,
}

impl TradeoffPoint {
    /// Re-checks the point from its conditionals alone.
    pub fn verify(&self, q: &ProbVector, gamma: f64) -> Result<()> {
        if self.conditionals.is_empty() {
            return Err(Error::SolverBug("no conditionals".into()));
        }
        let mean = mean_conditional(&self.conditionals)?;
        let dist = tv(&mean, q)?;
        if dist > self.alpha_p + PERCEPTION_TOL {
            return Err(Error::SolverBug(format!(
                "perception {dist} exceeds budget {}",
                self.alpha_p
            )));
        }
        let rd = rd_of(&self.conditionals, q, gamma)?;
        if (rd - self.rd).abs() > 1e-9 {
            return Err(Error::SolverBug(format!(
                "reported rd {} but conditionals give {rd}",
                self.rd
            )));
        }
        Ok(())
    }
}

fn mean_conditional(cs: &[ProbVector]) -> Result<ProbVector> {
    let m = cs[0].len();
    let k = cs.len() as f64;
    let mut mean = vec![0.0; m];
    for c in cs {
        if c.len() != m {
            return Err(Error::DimensionMismatch { left: m, right: c.len() });
        }
        for (acc, p) in mean.iter_mut().zip(c.iter()) {
            *acc += p / k;
        }
    }
    ProbVector::new(mean)
}

/// `1/2 + 1/2 * mean_s E_gamma(Q_s, q)`.
pub fn rd_of(conditionals: &[ProbVector], q: &ProbVector, gamma: f64) -> Result<f64> {
    let mut total = 0.0;
    for c in conditionals {
        total += e_gamma(c, q, gamma)?;
    }
    Ok(0.5 + 0.5 * total / conditionals.len() as f64)
}

/// `(1/k) sum_s sum_x (Q_s(x) - gamma q_x)_+` on row-major raw rows.
pub(crate) fn objective(q: &[f64], rows: &[f64], k: usize, gamma: f64) -> f64 {
    let m = q.len();
    let mut total = 0.0;
    for s in 0..k {
        for x in 0..m {
            total += (rows[s * m + x] - gamma * q[x]).max(0.0);
        }
    }
    total / k as f64
}

/// Turns raw LP/ascent rows into validated conditionals.
fn to_conditionals(rows: &[f64], m: usize) -> Result<Vec<ProbVector>> {
    rows.chunks(m)
        .map(|r| ProbVector::from_weights(r.iter().map(|v| v.max(0.0)).collect()))
        .collect()
}

fn make_point(
    q: &ProbVector,
    k: usize,
    gamma: f64,
    alpha: f64,
    rows: &[f64],
    certified: bool,
) -> Result<TradeoffPoint> {
    let conditionals = to_conditionals(rows, q.len())?;
    debug_assert_eq!(conditionals.len(), k);
    let rd = rd_of(&conditionals, q, gamma)?;
    let rp = 0.5 * (1.0 + tv(&mean_conditional(&conditionals)?, q)?);
    Ok(TradeoffPoint {
        alpha_p: alpha,
        rd,
        rp,
        conditionals,
        certified,
    })
}

/// Whether `(q, k)` is solved exactly under `opts`.
pub fn is_exact_regime(q: &ProbVector, k: usize, opts: &SolveOptions) -> bool {
    exact::pattern_count(q.as_slice(), k) <= opts.pattern_budget
}

pub const MAX_M: usize = 20;
pub const MAX_K: usize = 4;

/// Frontier values on `alpha_grid` (returned in the grid's order).
///
/// Points are solved in increasing `alpha`; any point is feasible for every
/// larger budget, so each point is at least as good as its predecessor.
pub fn solve_frontier(
    q: &ProbVector,
    k: usize,
    gamma: f64,
    alpha_grid: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<TradeoffPoint>> {
    check_gamma(gamma)?;
    let m = q.len();
    if !(2..=MAX_K).contains(&k) {
        return Err(Error::InvalidParameter(format!("k must be in 2..={MAX_K}, got {k}")));
    }
    if m > MAX_M {
        return Err(Error::TooLarge(format!("m = {m} exceeds {MAX_M}")));
    }
    if let Some(&a) = alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::InvalidParameter(format!("alpha {a} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..alpha_grid.len()).collect();
    order.sort_by(|&a, &b| alpha_grid[a].total_cmp(&alpha_grid[b]));

    let exact_regime = is_exact_regime(q, k, opts);
    let enumeration = exact_regime.then(|| exact::Enumeration::new(q.as_slice(), k));
    let upper = uniform_upper(q, gamma)?;
    let zero_upper = zero_perception_upper(k, gamma)?;

    let mut out: Vec<Option<TradeoffPoint>> = vec![None; alpha_grid.len()];
    let mut prev: Option<(f64, Vec<f64>, bool)> = None;
    for idx in order {
        let alpha = alpha_grid[idx];
        let (mut value, mut rows, mut certified) = match &enumeration {
            Some(en) => {
                let r = exact::solve(q.as_slice(), k, gamma, alpha, en)?;
                (r.value, r.q_rows, true)
            }
            None => {
                let warm = prev.as_ref().map(|p| p.1.as_slice());
                let (v, rows) = heuristic::solve(q.as_slice(), k, gamma, alpha, warm, opts)?;
                (v, rows, false)
            }
        };
        if let Some((pv, prow, pcert)) = &prev {
            if *pv > value {
                value = *pv;
                rows = prow.clone();
                certified = certified && *pcert;
            }
        }
        let point = make_point(q, k, gamma, alpha, &rows, certified)?;
        point.verify(q, gamma)?;
        if point.rd > upper + 1e-9 {
            return Err(Error::SolverBug(format!(
                "rd {} above the unconstrained bound {upper}",
                point.rd
            )));
        }
        if alpha == 0.0 && point.rd > zero_upper + 1e-9 {
            return Err(Error::SolverBug(format!(
                "rd {} above the zero-perception bound {zero_upper}",
                point.rd
            )));
        }
        prev = Some((value, rows, certified));
        out[idx] = Some(point);
    }
    Ok(out.into_iter().map(|p| p.expect("every index visited")).collect())
}

/// The zero-perception optimum from the combinatorial reduction: maximise
/// `sum_j q_j (1 - gamma q_j)_+` over `q_j = n_j / k` with `n` a partition of
/// `k` into at most `m` parts, and return `(1 + optimum)/2`.
pub fn zero_perception_joint_opt(m: usize, k: usize, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if k < 1 || k > m {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= m (m={m}, k={k})")));
    }
    fn rec(left: usize, max_part: usize, parts_left: usize, k: f64, gamma: f64, acc: f64, best: &mut f64) {
        if left == 0 {
            *best = best.max(acc);
            return;
        }
        if parts_left == 0 {
            return;
        }
        for part in (1..=max_part.min(left)).rev() {
            let qj = part as f64 / k;
            let term = qj * (1.0 - gamma * qj).max(0.0);
            rec(left - part, part, parts_left - 1, k, gamma, acc + term, best);
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(k, k, m, k as f64, gamma, 0.0, &mut best);
    Ok(0.5 * (1.0 + best))
}
