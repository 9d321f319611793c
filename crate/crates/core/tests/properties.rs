use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sklar_core::sklar::{compose, decompose};
use sklar_core::topology::{transport_distance, transport_plan, w1_one_dim};
use sklar_core::{
    CheckerboardCopula, ExtReal, Grid, Label, Marginal, ProjectiveFamily, TensorMeasure,
};

fn atomic_marginal() -> impl Strategy<Value = Marginal> {
    (
        prop::collection::btree_set(-20i32..20, 1..7),
        any::<bool>(),
        any::<bool>(),
        prop::collection::vec(0.0f64..1.0, 9),
    )
        .prop_map(|(points, low_inf, high_inf, raw)| {
            let mut xs: Vec<ExtReal> = points.into_iter().map(|p| ExtReal::finite(p as f64 / 4.0)).collect();
            if low_inf {
                xs.insert(0, ExtReal::NEG_INF);
            }
            if high_inf {
                xs.push(ExtReal::POS_INF);
            }
            let w: Vec<f64> = xs.iter().zip(&raw).map(|(_, r)| r + 0.05).collect();
            let total: f64 = w.iter().sum();
            Marginal::atomic(xs.into_iter().zip(w.into_iter().map(|v| v / total)).collect()).unwrap()
        })
}

fn continuous_marginal() -> impl Strategy<Value = Marginal> {
    (-5.0f64..5.0, prop::collection::vec((0.01f64..3.0, 0.01f64..1.0), 1..6)).prop_map(|(start, steps)| {
        let total: f64 = steps.iter().map(|s| s.1).sum();
        let mut knots = vec![(start, 0.0)];
        let (mut x, mut f) = (start, 0.0);
        for (dx, df) in steps {
            x += dx;
            f += df / total;
            knots.push((x, f));
        }
        knots.last_mut().unwrap().1 = 1.0;
        Marginal::continuous(knots).unwrap()
    })
}

fn probes_for(m: &Marginal) -> Vec<ExtReal> {
    let mut xs = vec![ExtReal::NEG_INF, ExtReal::POS_INF, ExtReal::ZERO];
    let finite: Vec<f64> = match (m.atoms(), m.knots()) {
        (Some(a), _) => a.iter().map(|p| p.0.value()).filter(|v| v.is_finite()).collect(),
        (_, Some(k)) => k.iter().map(|p| p.0).collect(),
        _ => unreachable!(),
    };
    for v in finite {
        xs.extend([v, v.next_up(), v.next_down(), v + 0.1, v - 0.1].map(ExtReal::finite));
    }
    xs
}

fn levels_for(m: &Marginal, xs: &[ExtReal], extra: &[f64]) -> Vec<f64> {
    let mut us: Vec<f64> = extra.to_vec();
    for &x in xs {
        let f = m.cdf(x);
        us.extend([f, f.next_up().min(1.0), f.next_down()]);
    }
    us.into_iter().filter(|&u| u > 0.0 && u <= 1.0).collect()
}

fn copula(d: usize, n: usize, seed: u64) -> CheckerboardCopula {
    let labels: Vec<Label> = (0..d as Label).collect();
    CheckerboardCopula::random(&labels, n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn random_tensor(labels: Vec<Label>, sizes: &[usize], rng: &mut ChaCha8Rng) -> TensorMeasure {
    let axes = sizes
        .iter()
        .map(|&s| (0..s).map(|k| ExtReal::finite(k as f64 - 1.0)).collect())
        .collect();
    let raw = ArrayD::from_shape_simple_fn(IxDyn(sizes), || rng.random::<f64>());
    let total = raw.sum();
    TensorMeasure::new(labels, Grid::new(axes).unwrap(), raw / total).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn galois_adjunction_atomic(m in atomic_marginal(), extra in prop::collection::vec(0.0f64..=1.0, 8)) {
        let xs = probes_for(&m);
        for u in levels_for(&m, &xs, &extra) {
            let q = m.quantile(u).unwrap();
            for &x in &xs {
                prop_assert_eq!(q <= x, u <= m.cdf(x), "u = {}, x = {}", u, x);
            }
        }
    }

    #[test]
    fn galois_adjunction_continuous(m in continuous_marginal(), extra in prop::collection::vec(0.0f64..=1.0, 8)) {
        let xs = probes_for(&m);
        for u in levels_for(&m, &xs, &extra) {
            let q = m.quantile(u).unwrap();
            for &x in &xs {
                prop_assert_eq!(q <= x, u <= m.cdf(x), "u = {}, x = {}", u, x);
            }
        }
    }

    #[test]
    fn frechet_bounds_and_lipschitz(d in 2usize..4, n in 1usize..6, seed in any::<u64>(),
                                     pts in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 3), 2..10)) {
        let c = copula(d, n, seed);
        prop_assert!(c.validate().passed());
        for w in pts.windows(2) {
            let (u, v) = (&w[0][..d], &w[1][..d]);
            let cu = c.cdf(u).unwrap();
            let lower = (u.iter().sum::<f64>() - (d as f64 - 1.0)).max(0.0);
            let upper = u.iter().copied().fold(1.0, f64::min);
            prop_assert!(lower - 1e-12 <= cu && cu <= upper + 1e-12);
            let l1: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!((cu - c.cdf(v).unwrap()).abs() <= l1 + 1e-12);
        }
    }

    #[test]
    fn marginals_of_copulas_are_copulas(d in 2usize..5, n in 1usize..5, seed in any::<u64>(), pick in any::<u8>()) {
        let c = copula(d, n, seed);
        let subset: Vec<Label> = (0..d as Label).filter(|l| pick & (1 << l) != 0).collect();
        prop_assume!(!subset.is_empty());
        let m = c.marginalize(&subset).unwrap();
        prop_assert!(m.validate().passed());
        prop_assert_eq!(m.labels(), &subset[..]);
    }

    #[test]
    fn projections_compose(seed in any::<u64>(), sizes in prop::collection::vec(1usize..4, 4)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(vec![1, 3, 5, 8], &sizes, &mut rng);
        let direct = t.marginalize(&[3, 8]).unwrap();
        let two_step = t.marginalize(&[1, 3, 8]).unwrap().marginalize(&[3, 8]).unwrap();
        prop_assert!(direct.max_abs_diff(&two_step).unwrap() <= 1e-12);
        prop_assert!(t.marginalize(&[1, 3, 5, 8]).unwrap().max_abs_diff(&t).unwrap() == 0.0);
    }

    #[test]
    fn pushforward_preserves_mass(seed in any::<u64>(), sizes in prop::collection::vec(1usize..5, 2)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(vec![0, 1], &sizes, &mut rng);
        let maps: Vec<Vec<ExtReal>> = sizes
            .iter()
            .map(|&s| {
                let mut v = 0.0;
                (0..s).map(|_| { v += if rng.random::<bool>() { 1.0 } else { 0.0 }; ExtReal::finite(v) }).collect()
            })
            .collect();
        let p = t.pushforward(&maps).unwrap();
        prop_assert!((p.mass().sum() - t.mass().sum()).abs() <= 1e-12);
        for (axis, label) in [0u32, 1].into_iter().enumerate() {
            let direct = p.axis_marginal(label).unwrap();
            let one = TensorMeasure::from_marginal(label, &t.axis_marginal(label).unwrap()).unwrap();
            let via = one.pushforward(&[maps[axis].clone()]).unwrap();
            let via = via.axis_marginal(label).unwrap();
            for x in probes_for(&direct) {
                prop_assert!((direct.cdf(x) - via.cdf(x)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn transport_matches_one_dim_oracle(a in atomic_marginal(), b in atomic_marginal()) {
        let ta = TensorMeasure::from_marginal(0, &a).unwrap();
        let tb = TensorMeasure::from_marginal(0, &b).unwrap();
        let (_, sol, cert) = transport_plan(&ta, &tb).unwrap();
        prop_assert!(cert.holds());
        prop_assert!((sol.cost - w1_one_dim(&a, &b)).abs() <= 1e-9);
    }

    #[test]
    fn transport_metric_axioms(seed in any::<u64>(), sizes in prop::collection::vec(1usize..4, 6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_tensor(vec![0, 1], &sizes[0..2], &mut rng);
        let b = random_tensor(vec![0, 1], &sizes[2..4], &mut rng);
        let c = random_tensor(vec![0, 1], &sizes[4..6], &mut rng);
        let ab = transport_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, transport_distance(&b, &a).unwrap());
        prop_assert_eq!(transport_distance(&a, &a).unwrap(), 0.0);
        let ac = transport_distance(&a, &c).unwrap();
        let cb = transport_distance(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn sklar_identity_and_marginals(d in 1usize..4, n in 1usize..7, seed in any::<u64>(),
                                    ms in prop::collection::vec(atomic_marginal(), 3)) {
        let c = copula(d, n, seed);
        let labels: Vec<Label> = c.labels().to_vec();
        let marginals: BTreeMap<Label, Marginal> = labels.iter().copied().zip(ms).collect();
        let joint = compose(Arc::new(ProjectiveFamily::from_copula(c)), marginals.clone()).unwrap();
        let probes = joint.support_probes(&labels).unwrap();
        let report = joint.verify(&labels, &probes).unwrap();
        prop_assert!(report.max_deviation <= 1e-12);
        let t = joint.discretize(&labels).unwrap();
        for (l, m) in &marginals {
            let got = t.axis_marginal(*l).unwrap();
            for x in probes_for(m) {
                prop_assert!((got.cdf(x) - m.cdf(x)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn decompose_inverts_compose(n in 1usize..9, seed in any::<u64>(),
                                 ma in continuous_marginal(), mb in continuous_marginal()) {
        let c = copula(2, n, seed);
        let marginals: BTreeMap<Label, Marginal> = [(0, ma), (1, mb)].into_iter().collect();
        let joint = compose(Arc::new(ProjectiveFamily::from_copula(c.clone())), marginals.clone())
            .unwrap()
            .with_quantile_grids(n);
        let t = joint.discretize(&[0, 1]).unwrap();
        let back = decompose(&t, &marginals, n).unwrap();
        prop_assert!(back.max_norm_diff(&c).unwrap() <= 1e-9);
    }
}
