//! Composition of a copula family with one-dimensional marginals, and the
//! inverse decomposition when the marginals are continuous.
//!
//! A [`JointMeasure`] evaluates its finite-dimensional CDFs lazily as
//! `F_J(x) = F_{C_J}((F_j(x_j))_j)`. [`JointMeasure::discretize`] computes the
//! same measure eagerly as the pushforward of `C_J` under the coordinatewise
//! quantile maps; [`JointMeasure::verify`] compares the two routes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use ndarray::{ArrayD, Dimension, IxDyn};

use crate::copulas::{ipf, CheckerboardCopula};
use crate::error::{Error, Result};
use crate::measures::{check_labels, ExtReal, Grid, Marginal, MarginalKind, TensorMeasure};
use crate::projective::{FamilyKind, IndexUniverse, Member, ProjectiveFamily};
use crate::{Label, MASS_TOL};

/// Agreement required between a supplied marginal and the tensor it describes.
pub const MARGINAL_MATCH_TOL: f64 = 1e-9;

/// The measure `((F_i^{[-1]})_i)_* C` given by a copula family and marginals.
#[derive(Clone, Debug)]
pub struct JointMeasure {
    copula: Arc<ProjectiveFamily>,
    marginals: BTreeMap<Label, Marginal>,
    grids: BTreeMap<Label, Vec<ExtReal>>,
}

/// Result of comparing the lazy CDF with the discretized measure.
#[derive(Clone, Debug, PartialEq)]
pub struct SklarReport {
    pub probes: usize,
    pub max_deviation: f64,
    pub worst_probe: Option<Vec<ExtReal>>,
}

/// Compose a copula family with marginals.
pub fn compose(
    copula: Arc<ProjectiveFamily>,
    marginals: BTreeMap<Label, Marginal>,
) -> Result<JointMeasure> {
    if copula.kind() != FamilyKind::Copula {
        return Err(Error::Configuration("compose needs a copula family".into()));
    }
    if let IndexUniverse::Finite(labels) = copula.universe() {
        if let Some(l) = labels.iter().find(|l| !marginals.contains_key(l)) {
            return Err(Error::Configuration(format!("no marginal for label {l}")));
        }
    }
    Ok(JointMeasure {
        copula,
        marginals,
        grids: BTreeMap::new(),
    })
}

impl JointMeasure {
    /// Discretization grid for a continuous marginal.
    pub fn with_grid(mut self, label: Label, grid: Vec<ExtReal>) -> Result<Self> {
        let m = self.marginal(label)?;
        m.atomize(&grid)?;
        self.grids.insert(label, grid);
        Ok(self)
    }

    /// Use the quantiles at `k/n` as the grid of every continuous marginal.
    pub fn with_quantile_grids(mut self, n: usize) -> Self {
        for (l, m) in &self.marginals {
            if m.kind() == MarginalKind::Continuous {
                self.grids.insert(*l, m.quantile_grid(n));
            }
        }
        self
    }

    pub fn copula(&self) -> &Arc<ProjectiveFamily> {
        &self.copula
    }

    pub fn marginals(&self) -> &BTreeMap<Label, Marginal> {
        &self.marginals
    }

    pub fn marginal(&self, label: Label) -> Result<&Marginal> {
        self.marginals
            .get(&label)
            .ok_or_else(|| Error::Configuration(format!("no marginal for label {label}")))
    }

    fn copula_member(&self, j: &[Label]) -> Result<CheckerboardCopula> {
        check_labels(j)?;
        for &l in j {
            self.marginal(l)?;
        }
        let m = self.copula.member(j)?;
        m.as_copula()
            .cloned()
            .ok_or_else(|| Error::Configuration("copula family returned a tensor".into()))
    }

    /// Atomic version of the marginal used by the eager route.
    pub fn atomized_marginal(&self, label: Label) -> Result<Marginal> {
        let m = self.marginal(label)?;
        match m.kind() {
            MarginalKind::Atomic => Ok(m.clone()),
            MarginalKind::Continuous => {
                let grid = self.grids.get(&label).ok_or_else(|| {
                    Error::Configuration(format!(
                        "continuous marginal {label} needs a discretization grid"
                    ))
                })?;
                m.atomize(grid)
            }
        }
    }

    /// `F_J(x) = F_{C_J}((F_j(x_j))_{j in J})`; `J` strictly increasing, `x` in the same order.
    pub fn cdf(&self, j: &[Label], x: &[ExtReal]) -> Result<f64> {
        let c = self.copula_member(j)?;
        if x.len() != j.len() {
            return Err(Error::Index(format!(
                "point has {} coordinates for {} labels",
                x.len(),
                j.len()
            )));
        }
        let u = j
            .iter()
            .zip(x)
            .map(|(&l, &xl)| Ok(self.marginal(l)?.cdf(xl)))
            .collect::<Result<Vec<_>>>()?;
        c.cdf(&u)
    }

    /// Eager pushforward of `C_J` through the quantile maps.
    ///
    /// Each axis of `(0, 1]` is cut at the cell boundaries `k/n` and at the
    /// cumulative masses of the (atomized) marginal. Every piece then lies in a
    /// single copula cell and is sent by the quantile function to a single
    /// atom, so the pushforward is computed without sampling error.
    pub fn discretize(&self, j: &[Label]) -> Result<TensorMeasure> {
        let c = self.copula_member(j)?;
        let n = c.order();
        let mut mass = c.mass().clone();
        let mut axes = Vec::with_capacity(j.len());
        for (a, &l) in j.iter().enumerate() {
            let m = self.atomized_marginal(l)?;
            let transfer = quantile_transfer(&m, n)?;
            mass = mode_product(&mass, a, &transfer);
            axes.push(m.atoms().expect("atomized").iter().map(|p| p.0).collect());
        }
        TensorMeasure::new(j.to_vec(), Grid::new(axes)?, mass)
    }

    /// All nodes of the discretization grid over `J`.
    pub fn support_probes(&self, j: &[Label]) -> Result<Vec<Vec<ExtReal>>> {
        let axes = j
            .iter()
            .map(|&l| {
                let m = self.atomized_marginal(l)?;
                Ok(m.atoms().expect("atomized").iter().map(|p| p.0).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Grid::new(axes)?.nodes())
    }

    /// Max deviation between [`cdf`](Self::cdf) and the CDF of
    /// [`discretize`](Self::discretize) over the probes.
    pub fn verify(&self, j: &[Label], probes: &[Vec<ExtReal>]) -> Result<SklarReport> {
        let t = self.discretize(j)?;
        let mut report = SklarReport {
            probes: probes.len(),
            max_deviation: 0.0,
            worst_probe: None,
        };
        for p in probes {
            let dev = (self.cdf(j, p)? - t.cdf(p)?).abs();
            if dev > report.max_deviation || report.worst_probe.is_none() {
                report.max_deviation = report.max_deviation.max(dev);
                report.worst_probe = Some(p.clone());
            }
        }
        Ok(report)
    }

    /// The general family `J -> discretize(J)`.
    pub fn discretized_family(self: &Arc<Self>) -> ProjectiveFamily {
        let me = Arc::clone(self);
        ProjectiveFamily::new(self.copula.universe().clone(), FamilyKind::General, move |j| {
            Ok(Member::Tensor(me.discretize(j)?))
        })
    }
}

/// Row `k`, column `a`: `n` times the length of `(k/n, (k+1)/n] ∩ (F(x_{a-1}), F(x_a)]`.
fn quantile_transfer(m: &Marginal, n: usize) -> Result<Vec<Vec<f64>>> {
    let atoms = m.atoms().expect("atomic marginal");
    let cells: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
    let cum: Vec<f64> = atoms.iter().map(|a| m.cdf(a.0)).collect();
    let cuts: BTreeSet<u64> = cells
        .iter()
        .chain(cum.iter())
        .filter(|&&b| b > 0.0)
        .map(|b| b.to_bits())
        .collect();
    let mut transfer = vec![vec![0.0; atoms.len()]; n];
    let mut prev = 0.0;
    let mut cell = 0;
    for b in cuts.into_iter().map(f64::from_bits) {
        while cell + 1 < n && cells[cell] < b {
            cell += 1;
        }
        let q = m.quantile(b)?;
        let atom = atoms
            .binary_search_by(|p| p.0.cmp(&q))
            .map_err(|_| Error::Internal(format!("quantile {q} is not an atom")))?;
        transfer[cell][atom] += n as f64 * (b - prev);
        prev = b;
    }
    Ok(transfer)
}

/// Contract `axis` of `t` with the matrix `mat` (rows indexed by the old axis).
fn mode_product(t: &ArrayD<f64>, axis: usize, mat: &[Vec<f64>]) -> ArrayD<f64> {
    let cols = mat.first().map_or(0, Vec::len);
    let mut shape = t.shape().to_vec();
    shape[axis] = cols;
    let mut out = ArrayD::zeros(IxDyn(&shape));
    let mut target = vec![0usize; t.ndim()];
    for (idx, &v) in t.indexed_iter() {
        if v == 0.0 {
            continue;
        }
        target.copy_from_slice(idx.slice());
        for (c, &w) in mat[idx[axis]].iter().enumerate() {
            if w != 0.0 {
                target[axis] = c;
                out[IxDyn(&target)] += v * w;
            }
        }
    }
    out
}

/// Recover the checkerboard copula of order `n` of a discrete joint whose axis
/// marginals are the given continuous (strictly increasing) laws.
///
/// Every node is pushed through `x_j -> F_j(x_j)` and its mass assigned to the
/// cell whose upper corner covers the image. The order must divide the image:
/// each `k/n` has to be the CDF value of some grid point on every axis.
pub fn decompose(
    t: &TensorMeasure,
    marginals: &BTreeMap<Label, Marginal>,
    n: usize,
) -> Result<CheckerboardCopula> {
    if n == 0 {
        return Err(Error::Domain("checkerboard order must be at least 1".into()));
    }
    let mut images = Vec::with_capacity(t.ndim());
    for (a, &l) in t.labels().iter().enumerate() {
        let m = marginals
            .get(&l)
            .ok_or_else(|| Error::Configuration(format!("no marginal for label {l}")))?;
        if m.kind() != MarginalKind::Continuous {
            return Err(Error::Unsupported(format!(
                "marginal {l} is atomic: the copula is not unique when a marginal has atoms, \
                 so there is nothing canonical to recover"
            )));
        }
        let axis_marginal = t.axis_marginal(l)?;
        let mut img = Vec::with_capacity(t.grid().axis(a).len());
        for &g in t.grid().axis(a) {
            let f = m.cdf(g);
            let dev = (axis_marginal.cdf(g) - f).abs();
            if dev > MARGINAL_MATCH_TOL {
                return Err(Error::Consistency(format!(
                    "marginal {l} gives F({g}) = {f} but the joint has {}",
                    axis_marginal.cdf(g)
                )));
            }
            img.push(f);
        }
        images.push(img);
    }

    let compatible =
        |order: usize| images.iter().all(|img| boundaries_hit(img, order));
    if !compatible(n) {
        let max_order = images.iter().map(Vec::len).min().unwrap_or(1);
        let largest_compatible = (1..=max_order).rev().find(|&k| compatible(k)).unwrap_or(1);
        return Err(Error::IncompatibleOrder {
            requested: n,
            largest_compatible,
        });
    }

    let cell_of: Vec<Vec<usize>> = images
        .iter()
        .map(|img| img.iter().map(|&u| cell_index(u, n)).collect())
        .collect();
    let mut mass = ArrayD::zeros(IxDyn(&vec![n; t.ndim()]));
    let mut target = vec![0usize; t.ndim()];
    for (idx, &m) in t.mass().indexed_iter() {
        for a in 0..target.len() {
            target[a] = cell_of[a][idx[a]];
        }
        mass[IxDyn(&target)] += m;
    }
    if ipf::margin_deviation(&mass) > MASS_TOL {
        // marginals may match the joint only up to MARGINAL_MATCH_TOL
        ipf::fit_uniform_margins(&mut mass)?;
    }
    CheckerboardCopula::new(t.labels().to_vec(), mass)
}

fn near_integer(s: f64) -> Option<f64> {
    let r = s.round();
    ((s - r).abs() <= MARGINAL_MATCH_TOL * s.abs().max(1.0)).then_some(r)
}

fn cell_index(u: f64, n: usize) -> usize {
    let s = n as f64 * u;
    let s = near_integer(s).unwrap_or(s);
    (s.ceil() as usize).clamp(1, n) - 1
}

fn boundaries_hit(image: &[f64], n: usize) -> bool {
    (1..=n).all(|k| {
        let b = k as f64 / n as f64;
        image.iter().any(|&u| (u - b).abs() <= MARGINAL_MATCH_TOL)
    })
}
