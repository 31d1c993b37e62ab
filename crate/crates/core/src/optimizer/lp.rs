//! The linear program attached to one sign pattern.
//!
//! For a set `A` of `(s, x)` cells, `(1/k) sum_{(s,x) in A} (Q_s(x) - gamma q_x)`
//! is a lower bound on the frontier objective that is tight when `A` is the
//! set of cells above `gamma q_x`. Maximising it over the feasible set is the
//! LP below, with the total-variation constraint linearised through one slack
//! per token:
//!
//! ```text
//! max  (1/k) sum_A Q_{s,x}
//! s.t. sum_x Q_{s,x} = 1                          for every s
//!      +-((1/k) sum_s Q_{s,x} - q_x) <= u_x        for every x
//!      sum_x u_x <= 2 alpha,   0 <= Q <= 1,  u >= 0
//! ```

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

/// A sign pattern: `cells[x]` is the bit set of rows `s` with `(s, x)` in `A`.
pub(crate) type Pattern = Vec<u32>;

pub(crate) struct LpSolution {
    /// LP value of the pattern objective, constant included.
    pub value: f64,
    /// Row-major `k x m` conditionals.
    pub q_rows: Vec<f64>,
}

pub(crate) fn solve_pattern(
    q: &[f64],
    k: usize,
    gamma: f64,
    alpha: f64,
    pattern: &[u32],
) -> Result<LpSolution> {
    let m = q.len();
    let kf = k as f64;
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let mut vars = Vec::with_capacity(k * m);
    let mut constant = 0.0;
    for s in 0..k {
        for (x, &cells) in pattern.iter().enumerate() {
            let active = cells >> s & 1 == 1;
            if active {
                constant -= gamma * q[x] / kf;
            }
            vars.push(lp.add_var(if active { 1.0 / kf } else { 0.0 }, (0.0, 1.0)));
        }
    }
    for s in 0..k {
        lp.add_constraint(
            (0..m).map(|x| (vars[s * m + x], 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Eq,
            1.0,
        );
    }
    // With alpha >= 1 the TV constraint cannot bind; skip the slack block.
    if alpha < 1.0 {
        let slacks: Vec<_> = (0..m).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
        for x in 0..m {
            let mut up: Vec<_> = (0..k).map(|s| (vars[s * m + x], 1.0 / kf)).collect();
            up.push((slacks[x], -1.0));
            lp.add_constraint(up, ComparisonOp::Le, q[x]);
            let mut down: Vec<_> = (0..k).map(|s| (vars[s * m + x], -1.0 / kf)).collect();
            down.push((slacks[x], -1.0));
            lp.add_constraint(down, ComparisonOp::Le, -q[x]);
        }
        lp.add_constraint(
            slacks.iter().map(|&u| (u, 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Le,
            2.0 * alpha,
        );
    }
    let sol = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
    Ok(LpSolution {
        value: sol.objective() + constant,
        q_rows: vars.iter().map(|&v| *sol.var_value(v)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_split_is_three_quarters() {
        let q = vec![0.25; 4];
        // Row 0 takes tokens {0,1}, row 1 takes {2,3}.
        let sol = solve_pattern(&q, 2, 1.0, 0.0, &[0b01, 0b01, 0b10, 0b10]).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-9);
        for x in 0..4 {
            let mean = 0.5 * (sol.q_rows[x] + sol.q_rows[4 + x]);
            assert!((mean - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn unconstrained_point_mass_on_min() {
        let q = vec![0.1, 0.2, 0.7];
        let sol = solve_pattern(&q, 2, 1.0, 1.0, &[0b11, 0, 0]).unwrap();
        assert!((sol.value - 0.9).abs() < 1e-9);
    }
}
