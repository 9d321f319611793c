//! Extreme points of the two-dimensional checkerboard polytope.
//!
//! `n` times an order-`n` checkerboard mass matrix is doubly stochastic, so the
//! extreme copulas are the `n!` permutation copulas, every copula is a convex
//! combination of them, and a convex functional attains its maximum at one.

use std::cmp::Ordering;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::copulas::CheckerboardCopula;
use crate::error::{Error, Result};

/// Row/column sum tolerance for the doubly stochastic check.
pub const STOCHASTIC_TOL: f64 = 1e-10;
/// Entries at or below this are treated as outside the support.
pub const SUPPORT_TOL: f64 = 1e-13;
/// Largest order enumerated exhaustively.
pub const MAX_EXHAUSTIVE_ORDER: usize = 8;

/// One term `weight * P_perm / n` of a Birkhoff decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct BirkhoffTerm {
    pub weight: f64,
    pub permutation: Vec<usize>,
}

fn as_matrix(c: &CheckerboardCopula) -> Result<Array2<f64>> {
    if c.ndim() != 2 {
        return Err(Error::Dimension(format!(
            "Birkhoff decomposition needs a 2-d copula, got {} dimensions",
            c.ndim()
        )));
    }
    let n = c.order();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| n as f64 * c.mass()[[i, j].as_slice()]))
}

/// Write `c` as a convex combination of permutation copulas.
pub fn birkhoff_decompose(c: &CheckerboardCopula) -> Result<Vec<BirkhoffTerm>> {
    let mut p = as_matrix(c)?;
    let n = c.order();
    if p.iter().any(|&v| v < -STOCHASTIC_TOL) {
        return Err(Error::Validation("negative cell mass".into()));
    }
    for (axis, sums) in [("row", p.sum_axis(ndarray::Axis(1))), ("column", p.sum_axis(ndarray::Axis(0)))] {
        if let Some((k, s)) = sums.iter().enumerate().find(|(_, s)| (*s - 1.0).abs() > STOCHASTIC_TOL) {
            return Err(Error::Validation(format!(
                "n * mass is not doubly stochastic: {axis} {k} sums to {s}"
            )));
        }
    }
    let max_terms = n * n + 2 - 2 * n;
    let mut terms = Vec::new();
    while terms.len() < max_terms {
        let Some(perm) = support_matching(&p) else { break };
        let (arg, weight) = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| ((i, j), p[[i, j]]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        for (i, &j) in perm.iter().enumerate() {
            p[[i, j]] -= weight;
        }
        p[arg] = 0.0;
        terms.push(BirkhoffTerm {
            weight,
            permutation: perm,
        });
    }
    let total: f64 = terms.iter().map(|t| t.weight).sum();
    if total <= 0.0 {
        return Err(Error::Internal("empty Birkhoff decomposition".into()));
    }
    for t in &mut terms {
        t.weight /= total;
    }
    Ok(terms)
}

/// `sum_k w_k P_k / n` as a copula over `labels`.
pub fn recombine(
    labels: &[crate::Label],
    n: usize,
    terms: &[BirkhoffTerm],
) -> Result<CheckerboardCopula> {
    let mut mass = ndarray::ArrayD::zeros(ndarray::IxDyn(&[n, n]));
    for t in terms {
        if t.permutation.len() != n {
            return Err(Error::Dimension("permutation length differs from order".into()));
        }
        for (i, &j) in t.permutation.iter().enumerate() {
            mass[[i, j].as_slice()] += t.weight / n as f64;
        }
    }
    CheckerboardCopula::from_mass(labels.to_vec(), mass)
}

// Lexicographically smallest permutation inside {p > SUPPORT_TOL}: each row
// takes the lowest column that still leaves a perfect matching for the rest,
// checked by augmenting paths.
fn support_matching(p: &Array2<f64>) -> Option<Vec<usize>> {
    let n = p.nrows();
    let mut perm = Vec::with_capacity(n);
    let mut used = vec![false; n];
    for row in 0..n {
        let col = (0..n).find(|&col| {
            if used[col] || p[[row, col]] <= SUPPORT_TOL {
                return false;
            }
            used[col] = true;
            let ok = completes(p, row + 1, &used);
            used[col] = false;
            ok
        })?;
        used[col] = true;
        perm.push(col);
    }
    Some(perm)
}

// Can rows `from..n` be matched into the unused columns?
fn completes(p: &Array2<f64>, from: usize, used: &[bool]) -> bool {
    let n = p.nrows();
    let mut col_owner: Vec<Option<usize>> = vec![None; n];
    fn augment(
        p: &Array2<f64>,
        row: usize,
        used: &[bool],
        seen: &mut [bool],
        col_owner: &mut [Option<usize>],
    ) -> bool {
        for col in 0..p.ncols() {
            if !used[col] && !seen[col] && p[[row, col]] > SUPPORT_TOL {
                seen[col] = true;
                if col_owner[col].is_none_or(|r| augment(p, r, used, seen, col_owner)) {
                    col_owner[col] = Some(row);
                    return true;
                }
            }
        }
        false
    }
    (from..n).all(|row| augment(p, row, used, &mut vec![false; n], &mut col_owner))
}

/// Ready-made convex functionals on 2-d checkerboard copulas.
#[derive(Clone, Debug, PartialEq)]
pub enum Functional {
    /// `sum_kl c_kl * mass_kl`, coefficients row-major.
    Linear(Array2<f64>),
    /// `max_kl mass_kl`.
    MaxCell,
    /// `sum_kl mass_kl^2`.
    SumOfSquares,
    Constant(f64),
}

impl Functional {
    pub fn evaluate(&self, c: &CheckerboardCopula) -> f64 {
        let m = c.mass();
        match self {
            Functional::Linear(coef) => coef.iter().zip(m.iter()).map(|(a, b)| a * b).sum(),
            Functional::MaxCell => m.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Functional::SumOfSquares => m.iter().map(|v| v * v).sum(),
            Functional::Constant(v) => *v,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Functional::Linear(_) => "linear",
            Functional::MaxCell => "max_cell",
            Functional::SumOfSquares => "sum_of_squares",
            Functional::Constant(_) => "constant",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtremalConfig {
    /// Random interior copulas to evaluate.
    pub samples: usize,
    pub seed: u64,
    /// Random sample pairs on which midpoint convexity is spot-checked.
    pub midpoint_checks: usize,
}

impl Default for ExtremalConfig {
    fn default() -> Self {
        ExtremalConfig {
            samples: 1000,
            seed: 0,
            midpoint_checks: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalReport {
    pub order: usize,
    pub extremal_best: f64,
    /// Lexicographically smallest maximizer.
    pub best_permutation: Vec<usize>,
    pub permutations_evaluated: usize,
    /// Best value over the sampled interior copulas, if any were drawn.
    pub interior_best: Option<f64>,
    pub convexity_warnings: usize,
}

fn checked(v: f64, what: &dyn Fn() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("functional returned {v} on {}", what())))
    }
}

// (value, permutation) ordering: larger value first, then smaller permutation.
fn better(a: &(f64, Vec<usize>), b: &(f64, Vec<usize>)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.1 < b.1,
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Maximize `g` over all `n!` permutation copulas, and evaluate it on random
/// interior copulas for comparison. Convexity of `g` is the caller's claim;
/// violations of midpoint convexity seen on the samples are only counted.
pub fn maximize_convex<G>(g: &G, n: usize, cfg: ExtremalConfig) -> Result<ExtremalReport>
where
    G: Fn(&CheckerboardCopula) -> f64 + Sync + ?Sized,
{
    if n == 0 {
        return Err(Error::Domain("order must be at least 1".into()));
    }
    if n > MAX_EXHAUSTIVE_ORDER {
        return Err(Error::Unsupported(format!(
            "exhaustive enumeration is limited to order {MAX_EXHAUSTIVE_ORDER}, got {n}"
        )));
    }
    let labels = [0, 1];
    let blocks: Vec<(f64, Vec<usize>, usize)> = (0..n)
        .into_par_iter()
        .map(|first| -> Result<(f64, Vec<usize>, usize)> {
            let mut rest: Vec<usize> = (0..n).filter(|&k| k != first).collect();
            let mut best: Option<(f64, Vec<usize>)> = None;
            let mut count = 0;
            loop {
                let perm: Vec<usize> = std::iter::once(first).chain(rest.iter().copied()).collect();
                let c = CheckerboardCopula::from_permutation(&labels, &perm)?;
                let v = checked(g(&c), &|| format!("permutation {perm:?}"))?;
                count += 1;
                let cand = (v, perm);
                if best.as_ref().is_none_or(|b| better(&cand, b)) {
                    best = Some(cand);
                }
                if !next_permutation(&mut rest) {
                    break;
                }
            }
            let (v, p) = best.expect("at least one permutation");
            Ok((v, p, count))
        })
        .collect::<Result<_>>()?;
    let mut best = (blocks[0].0, blocks[0].1.clone());
    let mut evaluated = 0;
    for (v, p, count) in blocks {
        evaluated += count;
        let cand = (v, p);
        if better(&cand, &best) {
            best = cand;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut samples = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        samples.push(CheckerboardCopula::random(&labels, n, &mut rng)?);
    }
    let values: Vec<f64> = samples
        .par_iter()
        .enumerate()
        .map(|(i, c)| checked(g(c), &|| format!("interior sample {i}")))
        .collect::<Result<_>>()?;
    let interior_best = values.iter().copied().reduce(f64::max);

    let mut warnings = 0;
    if samples.len() >= 2 {
        use rand::Rng;
        for _ in 0..cfg.midpoint_checks {
            let a = rng.random_range(0..samples.len());
            let b = rng.random_range(0..samples.len());
            let mid = samples[a].mix(&samples[b], 0.5)?;
            let gm = checked(g(&mid), &|| format!("midpoint of samples {a} and {b}"))?;
            let bound = 0.5 * (values[a] + values[b]);
            if gm > bound + 1e-12 * (1.0 + bound.abs()) {
                warnings += 1;
            }
        }
    }

    Ok(ExtremalReport {
        order: n,
        extremal_best: best.0,
        best_permutation: best.1,
        permutations_evaluated: evaluated,
        interior_best,
        convexity_warnings: warnings,
    })
}
