//! Exact frontier values by enumerating sign patterns up to symmetry.
//!
//! The objective is a maximum of linear functions, one per sign pattern, so
//! its maximum over the (polyhedral) feasible set is the largest of the
//! per-pattern LP optima. Two symmetries shrink the enumeration:
//!
//! - tokens with equal `q` are interchangeable, so per group of equal-`q`
//!   tokens only the multiset of column types (row subsets) matters;
//! - rows are interchangeable, so only the lexicographically smallest image of
//!   a pattern under row permutations is solved.
//!
//! Tokens with `q_x = 0` always belong to every row of the pattern: the cell
//! contributes `Q_s(x) >= 0` at no cost.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::lp::{solve_pattern, Pattern};
use crate::error::Result;

pub(crate) struct Enumeration {
    k: usize,
    /// Token indices per group of equal, positive `q`.
    groups: Vec<Vec<usize>>,
    /// Tokens with `q = 0`.
    zeros: Vec<usize>,
    /// Per group, every composition of the group size into `2^k` type counts.
    choices: Vec<Vec<Vec<u16>>>,
    total: u64,
    row_perms: Vec<Vec<usize>>,
}

fn compositions(n: usize, parts: usize) -> Vec<Vec<u16>> {
    fn rec(left: usize, slot: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if slot + 1 == cur.len() {
            cur[slot] = left as u16;
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur[slot] = c as u16;
            rec(left - c, slot + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    rec(n, 0, &mut vec![0; parts], &mut out);
    out
}

/// `C(n + parts - 1, parts - 1)`, saturating.
fn count_compositions(n: usize, parts: usize) -> u64 {
    let mut acc: u128 = 1;
    for i in 1..parts {
        acc = acc * (n + i) as u128 / i as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

fn permute_type(t: usize, perm: &[usize]) -> usize {
    perm.iter()
        .enumerate()
        .filter(|&(s, _)| t >> s & 1 == 1)
        .fold(0, |acc, (_, &to)| acc | 1 << to)
}

/// Number of raw (pre-symmetry) patterns, saturating at `u64::MAX`.
pub(crate) fn pattern_count(q: &[f64], k: usize) -> u64 {
    let types = 1usize << k;
    group_tokens(q)
        .0
        .iter()
        .map(|g| count_compositions(g.len(), types))
        .fold(1u64, |a, b| a.saturating_mul(b))
}

fn group_tokens(q: &[f64]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut zeros = Vec::new();
    for x in order {
        if q[x] == 0.0 {
            zeros.push(x);
        } else if groups.last().is_some_and(|g| q[g[0]] == q[x]) {
            groups.last_mut().expect("non-empty").push(x);
        } else {
            groups.push(vec![x]);
        }
    }
    (groups, zeros)
}

impl Enumeration {
    pub(crate) fn new(q: &[f64], k: usize) -> Self {
        let types = 1usize << k;
        let (groups, zeros) = group_tokens(q);
        let choices: Vec<_> = groups.iter().map(|g| compositions(g.len(), types)).collect();
        let total = choices
            .iter()
            .map(|c| c.len() as u64)
            .fold(1u64, |a, b| a.saturating_mul(b));
        Self {
            k,
            groups,
            zeros,
            choices,
            total,
            row_perms: permutations(k),
        }
    }

    pub(crate) fn total(&self) -> u64 {
        self.total
    }

    fn decode(&self, mut index: u64) -> Vec<&[u16]> {
        self.choices
            .iter()
            .map(|c| {
                let n = c.len() as u64;
                let pick = &c[(index % n) as usize];
                index /= n;
                pick.as_slice()
            })
            .collect()
    }

    /// True if no row permutation maps the pattern to a lexicographically
    /// smaller sequence of per-group type counts.
    fn is_canonical(&self, counts: &[&[u16]]) -> bool {
        let types = 1usize << self.k;
        let mut image = vec![0u16; types];
        for perm in self.row_perms.iter().skip(1) {
            let mut ord = std::cmp::Ordering::Equal;
            for group in counts {
                for (t, &c) in group.iter().enumerate() {
                    image[permute_type(t, perm)] = c;
                }
                ord = image.as_slice().cmp(group);
                if ord != std::cmp::Ordering::Equal {
                    break;
                }
            }
            if ord == std::cmp::Ordering::Less {
                return false;
            }
        }
        true
    }

    fn build(&self, m: usize, counts: &[&[u16]]) -> Pattern {
        let full = (1u32 << self.k) - 1;
        let mut pattern = vec![0u32; m];
        for &x in &self.zeros {
            pattern[x] = full;
        }
        for (group, c) in self.groups.iter().zip(counts) {
            let mut it = group.iter();
            for (t, &n) in c.iter().enumerate() {
                for _ in 0..n {
                    pattern[*it.next().expect("counts sum to group size")] = t as u32;
                }
            }
        }
        pattern
    }
}

/// `(1/k) [ min(#rows used, sum_x min(n_x, k (q_x + alpha))) - gamma sum_x n_x q_x ]`
fn upper_bound(q: &[f64], k: usize, gamma: f64, alpha: f64, pattern: &[u32]) -> f64 {
    let kf = k as f64;
    let rows_used = pattern.iter().fold(0u32, |a, &t| a | t).count_ones() as f64;
    let mut mass = 0.0;
    let mut cost = 0.0;
    for (x, &t) in pattern.iter().enumerate() {
        let n = t.count_ones() as f64;
        mass += n.min(kf * (q[x] + alpha));
        cost += n * q[x];
    }
    (rows_used.min(mass) - gamma * cost) / kf
}

pub(crate) struct ExactOutcome {
    pub value: f64,
    pub q_rows: Vec<f64>,
}

pub(crate) fn solve(q: &[f64], k: usize, gamma: f64, alpha: f64, en: &Enumeration) -> Result<ExactOutcome> {
    let m = q.len();
    // The empty pattern is always feasible with value 0.
    let incumbent = AtomicU64::new(0f64.to_bits());
    let best = (0..en.total())
        .into_par_iter()
        .map(|idx| -> Result<Option<(f64, u64, Vec<f64>)>> {
            let counts = en.decode(idx);
            if !en.is_canonical(&counts) {
                return Ok(None);
            }
            let pattern = en.build(m, &counts);
            let current = f64::from_bits(incumbent.load(Ordering::Relaxed));
            if upper_bound(q, k, gamma, alpha, &pattern) < current - 1e-9 {
                return Ok(None);
            }
            let sol = solve_pattern(q, k, gamma, alpha, &pattern)?;
            if sol.value > 0.0 {
                incumbent.fetch_max(sol.value.to_bits(), Ordering::Relaxed);
            }
            Ok(Some((sol.value, idx, sol.q_rows)))
        })
        .try_fold(
            || None,
            |acc: Option<(f64, u64, Vec<f64>)>, item| item.map(|it| better(acc, it)),
        )
        .try_reduce(|| None, |a, b| Ok(better(a, b)))?;
    let (value, _, q_rows) = best.expect("at least the first pattern is canonical and unpruned");
    Ok(ExactOutcome { value, q_rows })
}

/// Larger value wins; ties go to the smaller pattern index so the result does
/// not depend on scheduling.
fn better(
    a: Option<(f64, u64, Vec<f64>)>,
    b: Option<(f64, u64, Vec<f64>)>,
) -> Option<(f64, u64, Vec<f64>)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}
