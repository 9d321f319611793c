//! Finite demonstrations of sequential compactness and of the continuity of
//! `(copula, marginals) -> joint`.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::ArrayD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fdd_terms, w1_one_dim, FddMetricConfig};
use crate::copulas::{ipf, CheckerboardCopula};
use crate::error::{Error, Result};
use crate::measures::{Marginal, MarginalKind};
use crate::projective::ProjectiveFamily;
use crate::sklar::compose;
use crate::Label;

/// Outcome of [`compactness_probe`].
#[derive(Clone, Debug)]
pub struct CompactnessProbe {
    /// Strictly increasing indices into the input sequence.
    pub indices: Vec<usize>,
    /// Cluster anchor, offered as the limit candidate.
    pub representative: CheckerboardCopula,
    /// Number of greedy clusters found.
    pub clusters: usize,
}

/// Greedy `eps`-clustering in max-norm, with the first uncovered element as
/// the next anchor. Returns the largest cluster (earliest anchor on ties).
///
/// Every returned element is within `eps` of the representative, hence
/// pairwise within `2 eps`.
pub fn compactness_probe(seq: &[CheckerboardCopula], eps: f64) -> Result<CompactnessProbe> {
    let first = seq
        .first()
        .ok_or_else(|| Error::Domain("compactness probe needs a nonempty sequence".into()))?;
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::Domain(format!("eps must be finite and nonnegative, got {eps}")));
    }
    let mut anchors: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, c) in seq.iter().enumerate() {
        if c.labels() != first.labels() || c.order() != first.order() {
            return Err(Error::Dimension(format!(
                "element {i} does not share labels and order with element 0"
            )));
        }
        let mut home = None;
        for (slot, &a) in anchors.iter().enumerate() {
            if c.max_norm_diff(&seq[a])? <= eps {
                home = Some(slot);
                break;
            }
        }
        match home {
            Some(slot) => members[slot].push(i),
            None => {
                anchors.push(i);
                members.push(vec![i]);
            }
        }
    }
    let mut best = 0;
    for (slot, m) in members.iter().enumerate() {
        if m.len() > members[best].len() {
            best = slot;
        }
    }
    Ok(CompactnessProbe {
        representative: seq[anchors[best]].clone(),
        clusters: anchors.len(),
        indices: std::mem::take(&mut members[best]),
    })
}

/// Shrinking perturbations for [`continuity_probe`].
#[derive(Clone, Debug)]
pub struct PerturbationSchedule {
    /// Nonincreasing, nonnegative sizes.
    pub epsilons: Vec<f64>,
    pub perturb_copula: bool,
    pub perturb_marginals: bool,
    /// Draw directions from `[-1, 1]` instead of `[0, 1]`.
    pub signed: bool,
    pub seed: u64,
}

impl PerturbationSchedule {
    /// `eps_k = 2^-k` for `k = 1..=steps`, perturbing the copula only.
    pub fn dyadic(steps: usize, seed: u64) -> Self {
        PerturbationSchedule {
            epsilons: (1..=steps).map(|k| 0.5f64.powi(k as i32)).collect(),
            perturb_copula: true,
            perturb_marginals: false,
            signed: false,
            seed,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ContinuityStep {
    pub epsilon: f64,
    /// Max of the copula max-norm change and the 1-d marginal distances.
    pub input_distance: f64,
    /// Family distance between perturbed and target joints.
    pub output_distance: f64,
    pub terms: Vec<(Vec<Label>, f64)>,
}

#[derive(Clone, Debug)]
pub struct ContinuityReport {
    pub steps: Vec<ContinuityStep>,
}

impl ContinuityReport {
    pub fn final_output(&self) -> Option<f64> {
        self.steps.last().map(|s| s.output_distance)
    }

    /// Output distances never increase from step `from` (0-based) on.
    pub fn nonincreasing_from(&self, from: usize) -> bool {
        self.steps
            .iter()
            .skip(from)
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[1].output_distance <= w[0].output_distance)
    }
}

/// Compose perturbed copula/marginal pairs and measure how far the joint
/// moves. The perturbation directions are drawn once from `schedule.seed`
/// and scaled by each `eps`.
pub fn continuity_probe(
    target: &CheckerboardCopula,
    marginals: &BTreeMap<Label, Marginal>,
    schedule: &PerturbationSchedule,
    cfg: FddMetricConfig,
) -> Result<ContinuityReport> {
    if schedule
        .epsilons
        .iter()
        .any(|e| !(e.is_finite() && (0.0..=1.0).contains(e)))
    {
        return Err(Error::Domain("perturbation sizes must lie in [0, 1]".into()));
    }
    if schedule.epsilons.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Domain("perturbation sizes must be nonincreasing".into()));
    }
    for (l, m) in marginals {
        if m.kind() != MarginalKind::Atomic {
            return Err(Error::Unsupported(format!(
                "continuity probe needs atomic marginals; label {l} is continuous"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let draw = |rng: &mut ChaCha8Rng| {
        if schedule.signed {
            rng.random_range(-1.0..=1.0)
        } else {
            rng.random::<f64>()
        }
    };
    let cells = target.mass().len() as f64;
    let copula_dir: ArrayD<f64> = target.mass().mapv(|_| draw(&mut rng) / cells);
    let marginal_dirs: BTreeMap<Label, Vec<f64>> = marginals
        .iter()
        .map(|(&l, m)| (l, m.atoms().expect("atomic").iter().map(|_| draw(&mut rng)).collect()))
        .collect();

    let reference = joint_family(target.clone(), marginals.clone())?;
    let mut steps = Vec::with_capacity(schedule.epsilons.len());
    for &eps in &schedule.epsilons {
        let c = if schedule.perturb_copula && eps > 0.0 {
            perturb_copula(target, &copula_dir, eps)?
        } else {
            target.clone()
        };
        let mut input_distance = c.max_norm_diff(target)?;
        let ms = if schedule.perturb_marginals && eps > 0.0 {
            let mut out = BTreeMap::new();
            for (l, m) in marginals {
                let p = perturb_marginal(m, &marginal_dirs[l], eps)?;
                input_distance = input_distance.max(w1_one_dim(&p, m));
                out.insert(*l, p);
            }
            out
        } else {
            marginals.clone()
        };
        let perturbed = joint_family(c, ms)?;
        let terms = fdd_terms(&perturbed, &reference, cfg)?;
        let output_distance = terms
            .iter()
            .enumerate()
            .map(|(k, (_, d))| 0.5f64.powi(k as i32 + 1) * d.min(1.0))
            .sum();
        steps.push(ContinuityStep {
            epsilon: eps,
            input_distance,
            output_distance,
            terms,
        });
    }
    Ok(ContinuityReport { steps })
}

fn joint_family(c: CheckerboardCopula, ms: BTreeMap<Label, Marginal>) -> Result<ProjectiveFamily> {
    let joint = compose(Arc::new(ProjectiveFamily::from_copula(c)), ms)?;
    Ok(Arc::new(joint).discretized_family())
}

fn perturb_copula(
    target: &CheckerboardCopula,
    dir: &ArrayD<f64>,
    eps: f64,
) -> Result<CheckerboardCopula> {
    let mut mass = target.mass() + &(dir * eps);
    if mass.iter().any(|&m| m < 0.0) {
        return Err(Error::Configuration(format!(
            "perturbation of size {eps} makes a cell mass negative"
        )));
    }
    ipf::fit_uniform_margins(&mut mass)?;
    CheckerboardCopula::new(target.labels().to_vec(), mass)
        .map_err(|e| Error::Configuration(format!("perturbed copula is invalid: {e}")))
}

fn perturb_marginal(m: &Marginal, dir: &[f64], eps: f64) -> Result<Marginal> {
    let atoms = m.atoms().expect("atomic");
    let weights: Vec<f64> = atoms
        .iter()
        .zip(dir)
        .map(|(&(_, p), d)| p * (1.0 + eps * d))
        .collect();
    let total: f64 = weights.iter().sum();
    Marginal::atomic(
        atoms
            .iter()
            .zip(weights)
            .map(|(&(x, _), w)| (x, w / total))
            .collect(),
    )
    .map_err(|e| Error::Configuration(format!("perturbed marginal is invalid: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coins(labels: &[Label]) -> BTreeMap<Label, Marginal> {
        labels
            .iter()
            .map(|&l| (l, Marginal::uniform_atoms(&[0.0, 1.0, 2.0]).unwrap()))
            .collect()
    }

    #[test]
    fn constant_sequence() {
        let c = CheckerboardCopula::independence(&[0, 1], 3).unwrap();
        let seq = vec![c.clone(); 9];
        let p = compactness_probe(&seq, 1e-12).unwrap();
        assert_eq!(p.indices, (0..9).collect::<Vec<_>>());
        assert_eq!(p.clusters, 1);
        assert_eq!(p.representative, c);
    }

    #[test]
    fn alternating_sequence() {
        let a = CheckerboardCopula::independence(&[0, 1], 3).unwrap();
        let b = CheckerboardCopula::comonotone(&[0, 1], 3).unwrap();
        let seq: Vec<_> = (0..10).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        let p = compactness_probe(&seq, 1e-3).unwrap();
        assert_eq!(p.indices, vec![0, 2, 4, 6, 8]);
        assert_eq!(p.clusters, 2);
        let p = compactness_probe(&seq[1..], 1e-3).unwrap();
        assert_eq!(p.indices, vec![0, 2, 4, 6, 8]);
        assert_eq!(p.representative, b);
        assert!(compactness_probe(&[], 0.1).is_err());
    }

    #[test]
    fn zero_perturbation() {
        let c = CheckerboardCopula::independence(&[0, 1], 4).unwrap();
        let mut s = PerturbationSchedule::dyadic(4, 1);
        s.epsilons = vec![0.0; 3];
        s.perturb_marginals = true;
        let r = continuity_probe(&c, &coins(&[0, 1]), &s, FddMetricConfig { depth: 3 }).unwrap();
        assert!(r.steps.iter().all(|st| st.output_distance == 0.0 && st.input_distance == 0.0));
    }

    #[test]
    fn copula_perturbations_shrink() {
        let c = CheckerboardCopula::independence(&[0, 1], 4).unwrap();
        let s = PerturbationSchedule::dyadic(12, 7);
        let r = continuity_probe(&c, &coins(&[0, 1]), &s, FddMetricConfig { depth: 3 }).unwrap();
        assert!(r.nonincreasing_from(0));
        assert!(r.final_output().unwrap() < 1e-3);
        for st in &r.steps {
            assert!(st.terms[0].1 < 1e-9 && st.terms[1].1 < 1e-9);
        }
    }

    #[test]
    fn marginal_perturbations_match_one_dim_oracle() {
        let c = CheckerboardCopula::independence(&[0, 1], 4).unwrap();
        let ms = coins(&[0, 1]);
        let s = PerturbationSchedule {
            epsilons: (1..=8).map(|k| 0.5f64.powi(k)).collect(),
            perturb_copula: false,
            perturb_marginals: true,
            signed: true,
            seed: 3,
        };
        let r = continuity_probe(&c, &ms, &s, FddMetricConfig { depth: 3 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dirs: BTreeMap<Label, Vec<f64>> = {
            // copula directions are drawn first
            for _ in 0..16 {
                rng.random_range(-1.0..=1.0);
            }
            ms.keys()
                .map(|&l| (l, (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect()))
                .collect()
        };
        for st in &r.steps {
            for (j, d) in &st.terms[..2] {
                let p = perturb_marginal(&ms[&j[0]], &dirs[&j[0]], st.epsilon).unwrap();
                assert!((d - w1_one_dim(&p, &ms[&j[0]])).abs() < 1e-9);
            }
        }
        assert!(r.nonincreasing_from(0));
        assert!(r.steps[0].terms[0].1 > r.steps[7].terms[0].1);
    }

    #[test]
    fn negative_cells_are_rejected() {
        let c = CheckerboardCopula::comonotone(&[0, 1], 3).unwrap();
        let mut s = PerturbationSchedule::dyadic(3, 5);
        s.signed = true;
        let r = continuity_probe(&c, &coins(&[0, 1]), &s, FddMetricConfig { depth: 3 });
        assert!(matches!(r, Err(Error::Configuration(_))));
        let mut bad = coins(&[0, 1]);
        bad.insert(0, Marginal::uniform(0.0, 1.0).unwrap());
        let r = continuity_probe(&c, &bad, &PerturbationSchedule::dyadic(2, 1), FddMetricConfig::default());
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
