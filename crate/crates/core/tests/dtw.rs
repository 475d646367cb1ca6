//! DTW against exhaustive enumeration of monotone warping paths.

use imfilm::imitation::dtw::{dtw_align, euclidean};
use imfilm_nn::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

/// Minimum over every path from (0,0) to (n-1,m-1) using unit steps, with the
/// cost summed in path order.
fn brute_force(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn walk(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + euclidean(&a[i], &b[j]);
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

fn random_seq<R: Rng>(rng: &mut R, len: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..len)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

fn check_path(a: &[Vec<f64>], b: &[Vec<f64>], pairs: &[(usize, usize)], cost: f64) {
    assert_eq!(pairs.first(), Some(&(0, 0)));
    assert_eq!(pairs.last(), Some(&(a.len() - 1, b.len() - 1)));
    for w in pairs.windows(2) {
        let (di, dj) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
        assert!(di <= 1 && dj <= 1 && di + dj >= 1, "bad step {w:?}");
    }
    let along: f64 = pairs.iter().fold(0.0, |s, &(i, j)| s + euclidean(&a[i], &b[j]));
    assert_eq!(along, cost);
}

#[test]
fn matches_exhaustive_enumeration() {
    for seed in 0..100 {
        let mut rng = seeded_rng(seed);
        let dim = rng.random_range(1..=4);
        for n in 1..=6 {
            for m in 1..=6 {
                let a = random_seq(&mut rng, n, dim);
                let b = random_seq(&mut rng, m, dim);
                let path = dtw_align(&a, &b).unwrap();
                assert_eq!(path.cost, brute_force(&a, &b), "seed {seed} lengths {n}x{m}");
                check_path(&a, &b, &path.pairs, path.cost);
            }
        }
    }
}

#[test]
fn integer_grid_values_tie_exactly() {
    // Repeated values create many optimal paths with identical cost.
    let mut rng = seeded_rng(9);
    for _ in 0..50 {
        let a: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random_range(0..3) as f64]).collect();
        let b: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(0..3) as f64]).collect();
        assert_eq!(dtw_align(&a, &b).unwrap().cost, brute_force(&a, &b));
    }
}

proptest! {
    #[test]
    fn cost_is_symmetric(
        a in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..8),
        b in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..8),
    ) {
        let ab = dtw_align(&a, &b).unwrap().cost;
        let ba = dtw_align(&b, &a).unwrap().cost;
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn self_distance_is_zero(a in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..10)) {
        prop_assert_eq!(dtw_align(&a, &a).unwrap().cost, 0.0);
    }
}
