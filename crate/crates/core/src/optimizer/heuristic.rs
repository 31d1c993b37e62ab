//! Multi-start projected subgradient ascent with LP polishing, for instances
//! whose pattern enumeration is too large.

use rayon::prelude::*;

use super::lp::{solve_pattern, Pattern};
use super::{objective, SolveOptions};
use crate::error::Result;
use crate::rng::RngStream;

/// Euclidean projection onto the probability simplex (sort-based).
pub(crate) fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Euclidean projection of `v` onto `{w : ||w - center||_1 <= radius}`.
pub(crate) fn project_l1_ball(v: &mut [f64], center: &[f64], radius: f64) {
    let dist: f64 = v.iter().zip(center).map(|(a, c)| (a - c).abs()).sum();
    if dist <= radius {
        return;
    }
    if radius <= 0.0 {
        v.copy_from_slice(center);
        return;
    }
    // Soft-threshold the offset; the threshold comes from projecting |offset|
    // onto the simplex of the given radius.
    let mut mags: Vec<f64> = v.iter().zip(center).map(|(a, c)| (a - c).abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in mags.iter().enumerate() {
        cum += u;
        let t = (cum - radius) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for (a, &c) in v.iter_mut().zip(center) {
        let d = *a - c;
        *a = c + d.signum() * (d.abs() - theta).max(0.0);
    }
}

/// Projection onto `{Q : rows in the simplex, ||mean(Q) - q||_1 <= 2 alpha}`
/// by Dykstra's alternating scheme. The mean constraint is projected exactly
/// by shifting every row by the same offset.
fn project_feasible(rows: &mut [f64], q: &[f64], k: usize, alpha: f64, iters: usize) {
    let m = q.len();
    let mut p = vec![0.0; rows.len()];
    let mut r = vec![0.0; rows.len()];
    let mut y = vec![0.0; rows.len()];
    let mut mean = vec![0.0; m];
    for _ in 0..iters {
        for i in 0..rows.len() {
            y[i] = rows[i] + p[i];
        }
        for s in 0..k {
            project_simplex(&mut y[s * m..(s + 1) * m]);
        }
        for i in 0..rows.len() {
            p[i] = rows[i] + p[i] - y[i];
            rows[i] = y[i] + r[i];
        }
        mean.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..k {
            for x in 0..m {
                mean[x] += rows[s * m + x] / k as f64;
            }
        }
        let mut target = mean.clone();
        project_l1_ball(&mut target, q, 2.0 * alpha);
        for s in 0..k {
            for x in 0..m {
                rows[s * m + x] += target[x] - mean[x];
            }
        }
        for i in 0..rows.len() {
            r[i] = y[i] + r[i] - rows[i];
        }
    }
    for s in 0..k {
        project_simplex(&mut rows[s * m..(s + 1) * m]);
    }
}

fn pattern_of(rows: &[f64], q: &[f64], k: usize, gamma: f64) -> Pattern {
    let m = q.len();
    (0..m)
        .map(|x| {
            (0..k)
                .filter(|&s| rows[s * m + x] > gamma * q[x] + 1e-12)
                .fold(0u32, |acc, s| acc | 1 << s)
        })
        .collect()
}

/// Solves the LP of `pattern` and scores its solution with the true
/// objective (which is at least the LP value).
fn score(q: &[f64], k: usize, gamma: f64, alpha: f64, pattern: &[u32]) -> Result<(f64, Vec<f64>)> {
    let sol = solve_pattern(q, k, gamma, alpha, pattern)?;
    Ok((objective(q, &sol.q_rows, k, gamma), sol.q_rows))
}

fn polish(
    q: &[f64],
    k: usize,
    gamma: f64,
    alpha: f64,
    start: &[f64],
    sweeps: usize,
) -> Result<(f64, Vec<f64>)> {
    let m = q.len();
    let mut pattern = pattern_of(start, q, k, gamma);
    let (mut best, mut rows) = score(q, k, gamma, alpha, &pattern)?;
    for _ in 0..sweeps {
        let mut improved = false;
        for x in 0..m {
            for s in 0..k {
                pattern[x] ^= 1 << s;
                let (v, cand) = score(q, k, gamma, alpha, &pattern)?;
                if v > best + 1e-12 {
                    best = v;
                    rows = cand;
                    improved = true;
                    // Re-read the pattern from the new point: cells may have
                    // crossed the threshold elsewhere too.
                    pattern = pattern_of(&rows, q, k, gamma);
                } else {
                    pattern[x] ^= 1 << s;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok((best, rows))
}

fn ascend(q: &[f64], k: usize, gamma: f64, alpha: f64, rows: &mut [f64], opts: &SolveOptions) {
    let m = q.len();
    let kf = k as f64;
    project_feasible(rows, q, k, alpha, opts.projection_iters);
    for it in 1..=opts.iterations {
        let step = opts.step_scale / (it as f64).sqrt();
        for s in 0..k {
            for x in 0..m {
                // Zero subgradient at the kink.
                if rows[s * m + x] > gamma * q[x] {
                    rows[s * m + x] += step / kf;
                }
            }
        }
        project_feasible(rows, q, k, alpha, opts.projection_iters);
    }
}

fn random_start(m: usize, k: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut rows: Vec<f64> = (0..k * m).map(|_| rng.next_f64().powi(4)).collect();
    for s in 0..k {
        let row = &mut rows[s * m..(s + 1) * m];
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        } else {
            row[rng.index(m)] = 1.0;
        }
    }
    rows
}

/// Best `(objective, rows)` over all starts. `warm`, if given, is used as an
/// extra start and as the initial incumbent.
pub(crate) fn solve(
    q: &[f64],
    k: usize,
    gamma: f64,
    alpha: f64,
    warm: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(f64, Vec<f64>)> {
    let m = q.len();
    let mut candidates: Vec<Vec<f64>> = (0..opts.starts as u64)
        .map(|i| random_start(m, k, &mut RngStream::new(opts.seed, i)))
        .collect();
    if let Some(w) = warm {
        candidates.push(w.to_vec());
    }
    let results: Vec<(f64, Vec<f64>)> = candidates
        .into_par_iter()
        .map(|mut rows| {
            ascend(q, k, gamma, alpha, &mut rows, opts);
            polish(q, k, gamma, alpha, &rows, opts.polish_sweeps)
        })
        .collect::<Result<_>>()?;
    let mut best = results
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("at least one start");
    if let Some(w) = warm {
        let v = objective(q, w, k, gamma);
        if v > best.0 {
            best = (v, w.to_vec());
        }
    }
    Ok(best)
}
