//! Projective families: rules `J -> X_J` over the finite subsets of an index
//! set, together with the marginalization projections `X_J2 -> X_J1`.
//!
//! A family is a point of the inverse limit when every projection of a member
//! equals the member on the smaller subset. Over an infinite universe this can
//! only be spot-checked on an explicit finite collection of subsets.

mod subsets;

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use crate::copulas::CheckerboardCopula;
use crate::error::{Error, Result};
use crate::measures::{check_labels, TensorMeasure};
use crate::Label;

pub use subsets::{all_subsets, canonical_cmp, canonical_subsets};

/// The index set `I`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IndexUniverse {
    /// An explicit, strictly increasing list of labels.
    Finite(Vec<Label>),
    /// The labels `0, 1, 2, ...`.
    Countable,
}

impl IndexUniverse {
    pub fn finite(mut labels: Vec<Label>) -> Result<Self> {
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Index("universe labels must be unique".into()));
        }
        if labels.is_empty() {
            return Err(Error::Index("universe must not be empty".into()));
        }
        Ok(IndexUniverse::Finite(labels))
    }

    pub fn contains(&self, label: Label) -> bool {
        match self {
            IndexUniverse::Finite(l) => l.binary_search(&label).is_ok(),
            IndexUniverse::Countable => true,
        }
    }

    /// Label at a position of the canonical enumeration of `I`.
    pub fn label_at(&self, position: usize) -> Option<Label> {
        match self {
            IndexUniverse::Finite(l) => l.get(position).copied(),
            IndexUniverse::Countable => Label::try_from(position).ok(),
        }
    }

    /// The first `m` labels.
    pub fn prefix(&self, m: usize) -> Vec<Label> {
        (0..m).map_while(|p| self.label_at(p)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    /// Every member is a checkerboard copula with uniform margins.
    Copula,
    /// Members are arbitrary finite-dimensional measures.
    General,
}

/// A finite-dimensional member `X_J` of a family.
#[derive(Clone, Debug, PartialEq)]
pub enum Member {
    Tensor(TensorMeasure),
    Copula(CheckerboardCopula),
}

impl Member {
    pub fn labels(&self) -> &[Label] {
        match self {
            Member::Tensor(t) => t.labels(),
            Member::Copula(c) => c.labels(),
        }
    }

    /// The projection `P_{J1,J}`.
    pub fn marginalize(&self, subset: &[Label]) -> Result<Member> {
        Ok(match self {
            Member::Tensor(t) => Member::Tensor(t.marginalize(subset)?),
            Member::Copula(c) => Member::Copula(c.marginalize(subset)?),
        })
    }

    /// Largest entrywise mass difference; members of different kinds are incomparable.
    pub fn max_abs_diff(&self, other: &Member) -> Result<f64> {
        match (self, other) {
            (Member::Tensor(a), Member::Tensor(b)) => a.max_abs_diff(b),
            (Member::Copula(a), Member::Copula(b)) => a.max_norm_diff(b),
            _ => Err(Error::Configuration(
                "cannot compare a copula member with a tensor member".into(),
            )),
        }
    }

    /// Discrete measure view; copulas are represented by cell-centre atoms.
    pub fn to_tensor_measure(&self) -> TensorMeasure {
        match self {
            Member::Tensor(t) => t.clone(),
            Member::Copula(c) => c.to_tensor_measure(),
        }
    }

    pub fn as_copula(&self) -> Option<&CheckerboardCopula> {
        match self {
            Member::Copula(c) => Some(c),
            Member::Tensor(_) => None,
        }
    }

    pub fn as_tensor(&self) -> Option<&TensorMeasure> {
        match self {
            Member::Tensor(t) => Some(t),
            Member::Copula(_) => None,
        }
    }
}

/// The rule `J -> X_J`. It receives `J` sorted and deduplicated.
pub type Rule = dyn Fn(&[Label]) -> Result<Member> + Send + Sync;

type Slot = Arc<OnceLock<Result<Arc<Member>>>>;

/// A rule over the finite subsets of a universe with an evaluate-once cache.
pub struct ProjectiveFamily {
    universe: IndexUniverse,
    kind: FamilyKind,
    rule: Box<Rule>,
    cache: Mutex<HashMap<Vec<Label>, Slot>>,
}

impl std::fmt::Debug for ProjectiveFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectiveFamily")
            .field("universe", &self.universe)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl ProjectiveFamily {
    pub fn new<F>(universe: IndexUniverse, kind: FamilyKind, rule: F) -> Self
    where
        F: Fn(&[Label]) -> Result<Member> + Send + Sync + 'static,
    {
        ProjectiveFamily {
            universe,
            kind,
            rule: Box::new(rule),
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// `J -> independence copula of order n over J`.
    pub fn independence(universe: IndexUniverse, n: usize) -> Self {
        ProjectiveFamily::new(universe, FamilyKind::Copula, move |j| {
            Ok(Member::Copula(CheckerboardCopula::independence(j, n)?))
        })
    }

    /// `J -> comonotone copula of order n over J`.
    pub fn comonotone(universe: IndexUniverse, n: usize) -> Self {
        ProjectiveFamily::new(universe, FamilyKind::Copula, move |j| {
            Ok(Member::Copula(CheckerboardCopula::comonotone(j, n)?))
        })
    }

    /// Marginals of a single copula over its (finite) label set.
    pub fn from_copula(c: CheckerboardCopula) -> Self {
        let universe = IndexUniverse::Finite(c.labels().to_vec());
        ProjectiveFamily::new(universe, FamilyKind::Copula, move |j| {
            Ok(Member::Copula(c.marginalize(j)?))
        })
    }

    /// Marginals of a single joint measure: the family corresponding to `t`
    /// under the bijection between measures and consistent families.
    pub fn from_joint(t: TensorMeasure) -> Self {
        let universe = IndexUniverse::Finite(t.labels().to_vec());
        ProjectiveFamily::new(universe, FamilyKind::General, move |j| {
            Ok(Member::Tensor(t.marginalize(j)?))
        })
    }

    pub fn universe(&self) -> &IndexUniverse {
        &self.universe
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    fn canonical(&self, subset: &[Label]) -> Result<Vec<Label>> {
        let j: Vec<Label> = subset.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        check_labels(&j)?;
        if let Some(l) = j.iter().find(|&&l| !self.universe.contains(l)) {
            return Err(Error::Index(format!("label {l} is outside the universe")));
        }
        Ok(j)
    }

    fn evaluate(&self, j: &[Label]) -> Result<Member> {
        let m = (self.rule)(j)?;
        if m.labels() != j {
            return Err(Error::Validation(format!(
                "rule returned a member over {:?} for subset {j:?}",
                m.labels()
            )));
        }
        if self.kind == FamilyKind::Copula {
            let c = m.as_copula().ok_or_else(|| {
                Error::Validation(format!("copula family returned a tensor for {j:?}"))
            })?;
            let report = c.validate();
            if !report.passed() {
                return Err(Error::Validation(format!("member {j:?}: {report}")));
            }
        }
        Ok(m)
    }

    /// `X_J`, evaluated at most once per subset even under concurrent calls.
    pub fn member(&self, subset: &[Label]) -> Result<Arc<Member>> {
        let j = self.canonical(subset)?;
        let slot = {
            let mut cache = self.cache.lock().expect("cache lock poisoned");
            cache.entry(j.clone()).or_default().clone()
        };
        slot.get_or_init(|| self.evaluate(&j).map(Arc::new)).clone()
    }

    /// Re-run the rule on `J` and compare with the cached value.
    pub fn recheck(&self, subset: &[Label]) -> Result<()> {
        let cached = self.member(subset)?;
        let j = self.canonical(subset)?;
        let fresh = self.evaluate(&j)?;
        if *cached != fresh {
            return Err(Error::NonDeterministicRule(j));
        }
        Ok(())
    }

    /// Number of subsets evaluated so far.
    pub fn cached_len(&self) -> usize {
        self.cache.lock().expect("cache lock poisoned").len()
    }
}

/// One failed instance of `P_{J1,J2}(X_J2) = X_J1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyViolation {
    pub sub: Vec<Label>,
    pub sup: Vec<Label>,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    pub pairs_checked: usize,
    pub max_deviation: f64,
    pub violations: Vec<ConsistencyViolation>,
    pub member_errors: Vec<(Vec<Label>, Error)>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.member_errors.is_empty()
    }
}

/// Check every pair `J1 ⊊ J2` drawn from `subsets`.
pub fn check_consistency(
    family: &ProjectiveFamily,
    subsets: &[Vec<Label>],
    tol: f64,
) -> ConsistencyReport {
    let mut canon: Vec<Vec<Label>> = subsets
        .iter()
        .map(|s| s.iter().copied().collect::<BTreeSet<_>>().into_iter().collect())
        .collect();
    canon.sort_by(|a, b| canonical_cmp(a, b));
    canon.dedup();

    let mut report = ConsistencyReport {
        pairs_checked: 0,
        max_deviation: 0.0,
        violations: Vec::new(),
        member_errors: Vec::new(),
    };
    let mut members = Vec::with_capacity(canon.len());
    for j in &canon {
        match family.member(j) {
            Ok(m) => members.push(Some(m)),
            Err(e) => {
                report.member_errors.push((j.clone(), e));
                members.push(None);
            }
        }
    }
    for (i2, sup) in canon.iter().enumerate() {
        let Some(big) = &members[i2] else { continue };
        for (i1, sub) in canon.iter().enumerate() {
            let is_proper_subset = sub.len() < sup.len() && sub.iter().all(|l| sup.contains(l));
            if !is_proper_subset {
                continue;
            }
            let Some(small) = &members[i1] else { continue };
            report.pairs_checked += 1;
            let deviation = big
                .marginalize(sub)
                .and_then(|p| p.max_abs_diff(small))
                .unwrap_or(f64::INFINITY);
            report.max_deviation = report.max_deviation.max(deviation);
            if deviation > tol {
                report.violations.push(ConsistencyViolation {
                    sub: sub.clone(),
                    sup: sup.clone(),
                    deviation,
                });
            }
        }
    }
    report
}
