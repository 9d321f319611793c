//! Seeded inputs shared by the benchmarks.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sklar_core::{CheckerboardCopula, ExtReal, Label, Marginal, TensorMeasure};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random copula over labels `0..d`.
pub fn copula(d: usize, n: usize, seed: u64) -> CheckerboardCopula {
    let labels: Vec<Label> = (0..d as Label).collect();
    CheckerboardCopula::random(&labels, n, &mut rng(seed)).expect("valid order")
}

/// Atomic marginal with `k` atoms on a 1/8 lattice.
pub fn atomic(k: usize, rng: &mut ChaCha8Rng) -> Marginal {
    let mut xs: Vec<i32> = (0..k).map(|_| rng.random_range(-400..400)).collect();
    xs.sort_unstable();
    xs.dedup();
    let w: Vec<f64> = xs.iter().map(|_| rng.random::<f64>() + 0.01).collect();
    let total: f64 = w.iter().sum();
    Marginal::atomic(
        xs.into_iter()
            .zip(w)
            .map(|(x, p)| (ExtReal::finite(x as f64 / 8.0), p / total))
            .collect(),
    )
    .expect("valid marginal")
}

pub fn atomic_marginals(d: usize, k: usize, seed: u64) -> BTreeMap<Label, Marginal> {
    let mut r = rng(seed);
    (0..d as Label).map(|l| (l, atomic(k, &mut r))).collect()
}

/// Two one-dimensional measures with about `k` atoms each.
pub fn measure_pair(k: usize, seed: u64) -> (TensorMeasure, TensorMeasure) {
    let mut r = rng(seed);
    let a = TensorMeasure::from_marginal(0, &atomic(k, &mut r)).expect("1-d");
    let b = TensorMeasure::from_marginal(0, &atomic(k, &mut r)).expect("1-d");
    (a, b)
}

/// Evenly spread points of `[0, 1]^d`.
pub fn unit_points(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..count).map(|_| (0..d).map(|_| r.random()).collect()).collect()
}
