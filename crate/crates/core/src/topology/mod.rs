//! A computable metric for convergence of finite-dimensional distributions.
//!
//! Points of `[-inf, +inf]` are mapped into `[0, 1]` by
//! `phi(x) = 1/2 + atan(x)/pi`. Finite-dimensional measures are compared by
//! the Wasserstein-1 distance under `d(x, y) = max_j |phi(x_j) - phi(y_j)|`,
//! which metrizes weak convergence on the compact space `[-inf, +inf]^J`.
//! Families are compared by `sum_k 2^-k min(1, W(f(J_k), g(J_k)))` over the
//! canonical enumeration of finite subsets.

pub mod probes;
pub mod transport;

use std::cmp::Ordering;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{ExtReal, Marginal, MarginalKind, TensorMeasure};
use crate::projective::{canonical_subsets, ProjectiveFamily};
use crate::Label;

pub use probes::{
    compactness_probe, continuity_probe, CompactnessProbe, ContinuityReport, ContinuityStep,
    PerturbationSchedule,
};
pub use transport::{certify, Certificate, TransportProblem, TransportSolution};

/// `phi(x) = 1/2 + atan(x)/pi`, with `phi(-inf) = 0` and `phi(+inf) = 1`.
pub fn compactify(x: ExtReal) -> f64 {
    let v = x.value();
    if v == f64::NEG_INFINITY {
        0.0
    } else if v == f64::INFINITY {
        1.0
    } else {
        0.5 + v.atan() / PI
    }
}

/// Depth of the family metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FddMetricConfig {
    /// Number of leading subsets of the canonical enumeration that contribute.
    pub depth: usize,
}

impl Default for FddMetricConfig {
    fn default() -> Self {
        FddMetricConfig { depth: 7 }
    }
}

/// The transport problem between the supports of two measures over the same labels.
pub fn transport_problem(a: &TensorMeasure, b: &TensorMeasure) -> Result<TransportProblem> {
    if a.labels() != b.labels() {
        return Err(Error::Index(format!(
            "cannot compare measures over {:?} and {:?}",
            a.labels(),
            b.labels()
        )));
    }
    let embed = |t: &TensorMeasure| -> (Vec<Vec<f64>>, Vec<f64>) {
        t.support()
            .into_iter()
            .map(|(p, m)| (p.into_iter().map(compactify).collect(), m))
            .unzip()
    };
    let (pa, supply) = embed(a);
    let (pb, demand) = embed(b);
    let mut cost = Vec::with_capacity(pa.len() * pb.len());
    for x in &pa {
        for y in &pb {
            cost.push(x.iter().zip(y).fold(0.0f64, |acc, (s, t)| acc.max((s - t).abs())));
        }
    }
    Ok(TransportProblem {
        supply,
        demand,
        cost,
    })
}

/// Solve and certify the transport problem between `a` and `b`.
pub fn transport_plan(
    a: &TensorMeasure,
    b: &TensorMeasure,
) -> Result<(TransportProblem, TransportSolution, Certificate)> {
    let problem = transport_problem(a, b)?;
    let sol = transport::solve(&problem)?;
    let cert = certify(&problem, &sol);
    if !cert.holds() {
        return Err(Error::Internal(format!(
            "transport solution failed its optimality certificate: {cert:?}"
        )));
    }
    Ok((problem, sol, cert))
}

/// Exact Wasserstein-1 distance between two discrete measures.
///
/// The problem is always solved in the same orientation for a given pair, so
/// the value is bitwise symmetric.
pub fn transport_distance(a: &TensorMeasure, b: &TensorMeasure) -> Result<f64> {
    let (a, b) = if support_order(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    Ok(transport_plan(a, b)?.1.cost)
}

fn support_order(a: &TensorMeasure, b: &TensorMeasure) -> Ordering {
    let (sa, sb) = (a.support(), b.support());
    for ((pa, ma), (pb, mb)) in sa.iter().zip(&sb) {
        let ord = pa.cmp(pb).then(ma.total_cmp(mb));
        if ord != Ordering::Equal {
            return ord;
        }
    }
    sa.len().cmp(&sb.len())
}

/// `∫_0^1 |F_a(phi^-1(t)) - F_b(phi^-1(t))| dt`, evaluated in closed form.
///
/// On every interval between consecutive atoms/knots both CDFs are affine in
/// `x`, so the integrand against `dphi = dx / (pi (1 + x^2))` integrates to
/// arctangent and logarithm terms.
pub fn w1_one_dim(a: &Marginal, b: &Marginal) -> f64 {
    let mut cuts: Vec<f64> = Vec::new();
    for m in [a, b] {
        match m.kind() {
            MarginalKind::Atomic => cuts.extend(
                m.atoms()
                    .expect("atomic")
                    .iter()
                    .map(|p| p.0.value())
                    .filter(|x| x.is_finite()),
            ),
            MarginalKind::Continuous => {
                cuts.extend(m.knots().expect("continuous").iter().map(|k| k.0))
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let diff = |x: ExtReal| a.cdf(x) - b.cdf(x);
    // left limit of F at a finite point
    let left = |m: &Marginal, x: f64| match m.kind() {
        MarginalKind::Continuous => m.cdf(ExtReal::finite(x)),
        MarginalKind::Atomic => m.cdf(ExtReal::finite(x.next_down())),
    };
    let Some((&first, &last)) = cuts.first().zip(cuts.last()) else {
        // only atoms at +-inf: the difference is constant on the whole line
        return diff(ExtReal::ZERO).abs();
    };
    let mut total = diff(ExtReal::NEG_INF).abs() * compactify(ExtReal::finite(first));
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let d0 = diff(ExtReal::finite(p));
        let d1 = left(a, q) - left(b, q);
        total += abs_affine_integral(p, q, d0, d1);
    }
    total += diff(ExtReal::finite(last)).abs() * (1.0 - compactify(ExtReal::finite(last)));
    total
}

// ∫_p^q |D(x)| / (pi (1 + x^2)) dx for D affine with D(p) = d0, D(q-) = d1.
fn abs_affine_integral(p: f64, q: f64, d0: f64, d1: f64) -> f64 {
    if d0 * d1 < 0.0 {
        let r = p + (q - p) * d0 / (d0 - d1);
        return affine_integral(p, r, d0, 0.0).abs() + affine_integral(r, q, 0.0, d1).abs();
    }
    affine_integral(p, q, d0, d1).abs()
}

fn affine_integral(p: f64, q: f64, d0: f64, d1: f64) -> f64 {
    if q <= p {
        return 0.0;
    }
    let slope = (d1 - d0) / (q - p);
    let intercept = d0 - slope * p;
    let atan_part = (q.atan() - p.atan()) / PI;
    let log_part = if slope == 0.0 {
        0.0
    } else {
        0.5 * ((1.0 + q * q) / (1.0 + p * p)).ln() / PI
    };
    intercept * atan_part + slope * log_part
}

/// Per-subset terms `(J_k, W(f(J_k), g(J_k)))` for the first `depth` subsets.
pub fn fdd_terms(
    f: &ProjectiveFamily,
    g: &ProjectiveFamily,
    cfg: FddMetricConfig,
) -> Result<Vec<(Vec<Label>, f64)>> {
    if cfg.depth == 0 {
        return Err(Error::Domain("metric depth must be at least 1".into()));
    }
    if f.universe() != g.universe() {
        return Err(Error::Index("families live on different universes".into()));
    }
    canonical_subsets(f.universe(), cfg.depth)
        .into_par_iter()
        .map(|j| {
            let a = f.member(&j)?.to_tensor_measure();
            let b = g.member(&j)?.to_tensor_measure();
            let d = transport_distance(&a, &b)?;
            Ok((j, d))
        })
        .collect()
}

/// `sum_k 2^-k min(1, W(f(J_k), g(J_k)))`.
pub fn fdd_distance(
    f: &ProjectiveFamily,
    g: &ProjectiveFamily,
    cfg: FddMetricConfig,
) -> Result<f64> {
    Ok(fdd_terms(f, g, cfg)?
        .iter()
        .enumerate()
        .map(|(k, (_, d))| 0.5f64.powi(k as i32 + 1) * d.min(1.0))
        .sum())
}
