//! Invariants checked over random inputs.

use ccwm_core::coupling::{detect, max_coupling, watermark_conditional, watermark_conditionals};
use ccwm_core::partition::{
    g_statistic, induced_partition_dist, sample, PartitionSeq, PartitionStrategy,
};
use ccwm_core::prob::{e_gamma, hellinger_sq, tv, ProbVector};
use ccwm_core::rng::RngStream;
use ccwm_core::theory::{
    maxmin_rd, one_shot_rd, red_green_rates, sequential_rd_bounds, tilt,
};
use proptest::prelude::*;

const EPS: f64 = 1e-12;

/// A distribution on `n` atoms; roughly one entry in five is exactly zero.
fn prob_vector(n: usize) -> impl Strategy<Value = ProbVector> {
    prop::collection::vec((0.0f64..1.0, prop::bool::weighted(0.2)), n).prop_map(|ws| {
        let mut w: Vec<f64> = ws.iter().map(|&(v, zero)| if zero { 0.0 } else { v }).collect();
        if w.iter().all(|&v| v == 0.0) {
            w[0] = 1.0;
        }
        ProbVector::from_weights(w).unwrap()
    })
}

fn pair(n: std::ops::Range<usize>) -> impl Strategy<Value = (ProbVector, ProbVector)> {
    n.prop_flat_map(|n| (prob_vector(n), prob_vector(n)))
}

/// `(q, b)` with `2 <= k <= min(m, 6)` and `b` drawn from either strategy.
fn instance() -> impl Strategy<Value = (ProbVector, PartitionSeq)> {
    (2usize..24)
        .prop_flat_map(|m| (prob_vector(m), 2..=m.min(6), any::<u64>(), any::<bool>()))
        .prop_map(|(q, k, seed, balanced)| {
            let strategy = if balanced {
                PartitionStrategy::Balanced
            } else {
                PartitionStrategy::Iid
            };
            let b = sample(strategy, q.len(), k, &mut RngStream::new(seed, 0)).unwrap();
            (q, b)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn tv_is_a_metric((p, q) in pair(1..12), r_seed in any::<u64>()) {
        let d = tv(&p, &q).unwrap();
        prop_assert!((0.0..=1.0 + EPS).contains(&d));
        prop_assert_eq!(d, tv(&q, &p).unwrap());
        prop_assert!(tv(&p, &p).unwrap() == 0.0);
        let mut rng = RngStream::new(r_seed, 0);
        let r = ProbVector::from_weights((0..p.len()).map(|_| rng.next_f64() + 1e-3).collect()).unwrap();
        prop_assert!(d <= tv(&p, &r).unwrap() + tv(&r, &q).unwrap() + EPS);
    }

    #[test]
    fn hockey_stick_at_one_is_tv((p, q) in pair(1..12)) {
        prop_assert!((e_gamma(&p, &q, 1.0).unwrap() - tv(&p, &q).unwrap()).abs() < EPS);
        prop_assert!((e_gamma(&p, &q, 0.0).unwrap() - 1.0).abs() < EPS);
    }

    #[test]
    fn hockey_stick_nonincreasing_in_gamma((p, q) in pair(1..12), g in 0.0f64..4.0, dg in 0.0f64..2.0) {
        prop_assert!(e_gamma(&p, &q, g + dg).unwrap() <= e_gamma(&p, &q, g).unwrap() + EPS);
    }

    #[test]
    fn hellinger_brackets_tv((p, q) in pair(1..12)) {
        let h2 = hellinger_sq(&p, &q).unwrap();
        let bc = 1.0 - h2 / 2.0;
        let d = tv(&p, &q).unwrap();
        prop_assert!((0.0..=2.0).contains(&h2));
        prop_assert!(1.0 - bc <= d + 1e-9);
        prop_assert!(d <= (1.0 - bc * bc).max(0.0).sqrt() + 1e-9);
    }

    #[test]
    fn g_is_twice_the_distance_from_uniform((q, b) in instance()) {
        let py = induced_partition_dist(&q, &b).unwrap();
        let g = g_statistic(&q, &b).unwrap();
        let d = tv(&py, &ProbVector::uniform(b.k())).unwrap();
        prop_assert!((g - 2.0 * d).abs() < EPS);
    }

    #[test]
    fn g_is_invariant_under_token_and_symbol_relabelling((q, b) in instance(), seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let mut tokens: Vec<usize> = (0..q.len()).collect();
        rng.shuffle(&mut tokens);
        let mut symbols: Vec<usize> = (0..b.k()).collect();
        rng.shuffle(&mut symbols);
        let q2 = ProbVector::new(tokens.iter().map(|&x| q.get(x)).collect()).unwrap();
        let b2 = PartitionSeq::new(tokens.iter().map(|&x| symbols[b.bin(x)]).collect(), b.k()).unwrap();
        let g1 = g_statistic(&q, &b).unwrap();
        let g2 = g_statistic(&q2, &b2).unwrap();
        prop_assert!((g1 - g2).abs() < 1e-12);
    }

    #[test]
    fn coupling_is_maximal_with_exact_marginals(py in (2usize..8).prop_flat_map(prob_vector)) {
        let k = py.len();
        let c = max_coupling(&py);
        for (y, r) in c.row_sums().iter().enumerate() {
            prop_assert!((r - py.get(y)).abs() < EPS);
        }
        for s in c.col_sums() {
            prop_assert!((s - 1.0 / k as f64).abs() < EPS);
        }
        for y in 0..k {
            for s in 0..k {
                prop_assert!(c.get(y, s) >= 0.0);
            }
        }
        let d = tv(&py, &ProbVector::uniform(k)).unwrap();
        prop_assert!((c.match_prob() - (1.0 - d)).abs() < EPS);
        let ch = c.channel();
        for y in 0..k {
            match ch.row(y) {
                Some(row) => prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12),
                None => prop_assert_eq!(py.get(y), 0.0),
            }
        }
    }

    #[test]
    fn perception_is_perfect((q, b) in instance()) {
        let cs = watermark_conditionals(&q, &b).unwrap();
        let k = b.k() as f64;
        for x in 0..q.len() {
            let mean: f64 = cs.iter().map(|c| c.get(x)).sum::<f64>() / k;
            prop_assert!((mean - q.get(x)).abs() < EPS);
        }
        for (s, c) in cs.iter().enumerate() {
            prop_assert_eq!(c, &watermark_conditional(&q, &b, s).unwrap());
            for x in 0..q.len() {
                prop_assert!(c.get(x) <= k * q.get(x) + EPS);
            }
        }
    }

    #[test]
    fn detection_rate_matches_closed_form((q, b) in instance()) {
        let k = b.k();
        let cs = watermark_conditionals(&q, &b).unwrap();
        let mut hit = 0.0;
        for (s, c) in cs.iter().enumerate() {
            for x in 0..q.len() {
                if detect(x, &b, s).unwrap().is_watermarked() {
                    hit += c.get(x) / k as f64;
                }
            }
        }
        let rd = 0.5 * hit + 0.5 * (1.0 - 1.0 / k as f64);
        let py = induced_partition_dist(&q, &b).unwrap();
        let closed = one_shot_rd(&py);
        prop_assert!((rd - closed).abs() < 1e-12);
        prop_assert!(closed >= 0.5 - EPS && closed <= 1.0 - 0.5 / k as f64 + EPS);
    }

    #[test]
    fn balanced_counts_differ_by_at_most_one(m in 2usize..60, k in 2usize..9, seed in any::<u64>()) {
        prop_assume!(k <= m);
        let b = sample(PartitionStrategy::Balanced, m, k, &mut RngStream::new(seed, 0)).unwrap();
        let c = b.counts();
        prop_assert_eq!(c.iter().sum::<usize>(), m);
        prop_assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
    }

    #[test]
    fn maxmin_is_nonincreasing_in_lambda(half in 2usize..40, k in 2usize..5, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let m = half * k;
        let lo = 1.0 / m as f64;
        let (l1, l2) = (lo + (1.0 - lo) * a.min(b), lo + (1.0 - lo) * a.max(b));
        let r1 = maxmin_rd(l1, m, k).unwrap();
        let r2 = maxmin_rd(l2, m, k).unwrap();
        prop_assert!(r2 <= r1 + 1e-12);
        prop_assert!(r2 >= 0.5 - 1e-12 && r1 <= 1.0 - 0.5 / k as f64 + 1e-12);
    }

    #[test]
    fn sequential_bounds_are_ordered(p in 0.0f64..=0.5, n in 1u32..200) {
        let (lo, hi) = sequential_rd_bounds(p, n).unwrap();
        let (lo2, hi2) = sequential_rd_bounds(p, n + 1).unwrap();
        prop_assert!(0.5 <= lo && lo <= hi + 1e-15 && hi <= 1.0);
        prop_assert!(lo2 >= lo - 1e-15 && hi2 >= hi - 1e-15);
    }

    #[test]
    fn red_green_rates_are_rates(q in (2usize..16).prop_flat_map(prob_vector), delta in 0.0f64..10.0, mask in any::<u16>()) {
        let green: Vec<usize> = (0..q.len()).filter(|&x| mask >> x & 1 == 1).collect();
        let (rd, rp) = red_green_rates(&q, delta, &green).unwrap();
        prop_assert!((0.5 - EPS..=1.0 + EPS).contains(&rd));
        prop_assert!((0.5 - EPS..=1.0 + EPS).contains(&rp));
        // The green-set test can never beat the best test between the two laws.
        let t = tilt(&q, &green, delta).unwrap();
        prop_assert!(rd <= rp + 1e-12);
        prop_assert!((2.0 * rp - 1.0 - tv(&t, &q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn prob_vector_serde_round_trip(q in (1usize..10).prop_flat_map(prob_vector)) {
        let json = serde_json::to_string(&q).unwrap();
        let back: ProbVector = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, q);
    }

    #[test]
    fn sampler_helpers(seed in any::<u64>(), n in 1u64..1000, w in prop::collection::vec(0.0f64..1.0, 1..12)) {
        let mut rng = RngStream::new(seed, 3);
        prop_assert!(rng.below(n) < n);
        let mut items: Vec<usize> = (0..20).collect();
        rng.shuffle(&mut items);
        let mut sorted = items.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..20).collect::<Vec<_>>());
        if w.iter().any(|&v| v > 0.0) {
            for _ in 0..20 {
                let i = rng.categorical(&w);
                prop_assert!(w[i] > 0.0);
            }
        }
    }
}

#[test]
fn malformed_vectors_are_rejected() {
    assert!(ProbVector::new(vec![]).is_err());
    assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
    assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
    assert!(ProbVector::new(vec![f64::NAN, 1.0]).is_err());
    assert!(serde_json::from_str::<ProbVector>("[0.2, 0.2]").is_err());
    // Drift below the renormalisation threshold is absorbed.
    let v = ProbVector::new(vec![0.5, 0.5 + 5e-10]).unwrap();
    assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
}
