//! Brute-force reference computations shared by the integration tests.

#![allow(dead_code)]

/// All sequences with exactly `m/k` entries per symbol.
pub fn balanced_sequences(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, left: &mut [usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for s in 0..left.len() {
            if left[s] > 0 {
                left[s] -= 1;
                cur[i] = s;
                rec(i + 1, left, cur, out);
                left[s] += 1;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, &mut vec![m / k; k], &mut vec![0; m], &mut out);
    out
}

/// Every distinct rearrangement of `v`.
pub fn distinct_permutations(v: &[f64]) -> Vec<Vec<f64>> {
    let mut cur = v.to_vec();
    cur.sort_by(f64::total_cmp);
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (0..cur.len().saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..cur.len()).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
        out.push(cur.clone());
    }
}

/// Detection rate from the coupling's match probability, `sum_y min(P_Y(y), 1/k)`.
pub fn rate_by_matching(q: &[f64], bins: &[usize], k: usize) -> f64 {
    let mut py = vec![0.0; k];
    for (x, &b) in bins.iter().enumerate() {
        py[b] += q[x];
    }
    let matched: f64 = py.iter().map(|&p| p.min(1.0 / k as f64)).sum();
    0.5 * (1.0 - 1.0 / k as f64) + 0.5 * matched
}

/// Worst case over every rearrangement of the extreme point, averaged over
/// every balanced partition.
pub fn maxmin_oracle(lambda: f64, m: usize, k: usize) -> f64 {
    let t = ((1.0 / lambda) * (1.0 + 1e-12)).floor() as usize;
    let t = t.min(m);
    let mut vertex = vec![0.0; m];
    vertex[..t].fill(lambda);
    if t < m {
        vertex[t] = (1.0 - t as f64 * lambda).max(0.0);
    }
    let seqs = balanced_sequences(m, k);
    distinct_permutations(&vertex)
        .iter()
        .map(|q| seqs.iter().map(|b| rate_by_matching(q, b, k)).sum::<f64>() / seqs.len() as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Best achievable rate from one observation `(s, x)` under equal priors:
/// `1/2 + tv(P_marked, P_null)/2` with `P_marked(s, x) = Q_s(x)/k` and
/// `P_null(s, x) = q(x)/k`.
pub fn bayes_optimal_rate(q: &[f64], conditionals: &[Vec<f64>]) -> f64 {
    let k = conditionals.len() as f64;
    let mut dist = 0.0;
    for c in conditionals {
        for (x, &qx) in q.iter().enumerate() {
            dist += (c[x] - qx).abs() / k;
        }
    }
    0.5 + 0.25 * dist
}

/// `Pr(X1 > X0) + Pr(X1 = X0)/2` from two count histograms.
pub fn mann_whitney(h1: &[u64], h0: &[u64]) -> f64 {
    let n1: u64 = h1.iter().sum();
    let n0: u64 = h0.iter().sum();
    let mut acc = 0.0;
    for (c1, &a) in h1.iter().enumerate() {
        for (c0, &b) in h0.iter().enumerate() {
            let w = if c1 > c0 {
                1.0
            } else if c1 == c0 {
                0.5
            } else {
                0.0
            };
            acc += w * a as f64 * b as f64;
        }
    }
    acc / (n1 as f64 * n0 as f64)
}

/// `C(n, r)` as a float, for small arguments.
pub fn choose(n: u64, r: u64) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
