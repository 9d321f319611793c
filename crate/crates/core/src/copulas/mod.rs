//! Checkerboard copulas: copula measures on `[0,1]^J` with constant density on
//! each cell of a uniform `n x ... x n` grid.
//!
//! Cell `(k_1, ..., k_d)` (zero-based here) is the box
//! `prod_j (k_j/n, (k_j+1)/n]`. A tensor is a copula when it is a probability
//! tensor whose every one-dimensional margin puts `1/n` on each cell.

pub mod ipf;

use std::fmt;

use ndarray::{ArrayD, Dimension, IxDyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::{check_labels, subset_axes, sum_out, ExtReal, Grid, TensorMeasure};
use crate::{Label, MASS_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckerboardCopula {
    labels: Vec<Label>,
    order: usize,
    mass: ArrayD<f64>,
}

/// Margin of one axis that is not uniform.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginViolation {
    pub axis: Label,
    pub margin: Vec<f64>,
    pub max_deviation: f64,
}

/// Outcome of [`CheckerboardCopula::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct CopulaReport {
    pub total_mass: f64,
    pub negative_cells: Vec<(Vec<usize>, f64)>,
    pub margin_violations: Vec<MarginViolation>,
}

impl CopulaReport {
    pub fn passed(&self) -> bool {
        self.negative_cells.is_empty()
            && self.margin_violations.is_empty()
            && (self.total_mass - 1.0).abs() <= MASS_TOL
    }
}

impl fmt::Display for CopulaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "pass");
        }
        write!(f, "fail:")?;
        if (self.total_mass - 1.0).abs() > MASS_TOL {
            write!(f, " total mass {} != 1;", self.total_mass)?;
        }
        for (cell, m) in &self.negative_cells {
            write!(f, " cell {cell:?} has mass {m};")?;
        }
        for v in &self.margin_violations {
            let n = v.margin.len();
            write!(
                f,
                " margin of axis {} is {:?}, expected {} per cell (deviation {:e});",
                v.axis,
                v.margin,
                1.0 / n as f64,
                v.max_deviation
            )?;
        }
        Ok(())
    }
}

impl CheckerboardCopula {
    /// Wrap a cubic mass tensor. Only shape and finiteness are checked here;
    /// use [`validate`](Self::validate) for the copula invariants.
    pub fn from_mass(labels: Vec<Label>, mass: ArrayD<f64>) -> Result<Self> {
        check_labels(&labels)?;
        if mass.ndim() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} labels for a {}-d tensor",
                labels.len(),
                mass.ndim()
            )));
        }
        let order = mass.shape()[0];
        if order == 0 || mass.shape().iter().any(|&s| s != order) {
            return Err(Error::Dimension(format!(
                "checkerboard tensor must be cubic, got shape {:?}",
                mass.shape()
            )));
        }
        if mass.iter().any(|m| !m.is_finite()) {
            return Err(Error::Validation("non-finite cell mass".into()));
        }
        Ok(CheckerboardCopula {
            labels,
            order,
            mass,
        })
    }

    /// [`from_mass`](Self::from_mass) followed by validation.
    pub fn new(labels: Vec<Label>, mass: ArrayD<f64>) -> Result<Self> {
        let c = CheckerboardCopula::from_mass(labels, mass)?;
        let report = c.validate();
        if !report.passed() {
            return Err(Error::Validation(report.to_string()));
        }
        Ok(c)
    }

    /// Product copula: every cell carries `n^-d`.
    pub fn independence(labels: &[Label], n: usize) -> Result<Self> {
        check_order(n)?;
        let d = labels.len();
        let w = (n as f64).powi(-(d as i32));
        CheckerboardCopula::from_mass(labels.to_vec(), ArrayD::from_elem(IxDyn(&vec![n; d]), w))
    }

    /// Upper Frechet bound: mass `1/n` on each diagonal cell.
    pub fn comonotone(labels: &[Label], n: usize) -> Result<Self> {
        check_order(n)?;
        let d = labels.len();
        let mut mass = ArrayD::zeros(IxDyn(&vec![n; d]));
        for k in 0..n {
            mass[IxDyn(&vec![k; d])] = 1.0 / n as f64;
        }
        CheckerboardCopula::from_mass(labels.to_vec(), mass)
    }

    /// Lower Frechet bound, which is a copula only in two dimensions.
    pub fn countermonotone(labels: &[Label], n: usize) -> Result<Self> {
        check_order(n)?;
        if labels.len() != 2 {
            return Err(Error::Dimension(format!(
                "countermonotone copula needs exactly 2 axes, got {}",
                labels.len()
            )));
        }
        let mut mass = ArrayD::zeros(IxDyn(&[n, n]));
        for k in 0..n {
            mass[[k, n - 1 - k].as_slice()] = 1.0 / n as f64;
        }
        CheckerboardCopula::from_mass(labels.to_vec(), mass)
    }

    /// Two-dimensional copula with mass `1/n` on cells `(k, perm[k])`.
    pub fn from_permutation(labels: &[Label], perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        check_order(n)?;
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Validation(format!("{perm:?} is not a permutation")));
            }
        }
        let mut mass = ArrayD::zeros(IxDyn(&[n, n]));
        for (k, &p) in perm.iter().enumerate() {
            mass[[k, p].as_slice()] = 1.0 / n as f64;
        }
        CheckerboardCopula::from_mass(labels.to_vec(), mass)
    }

    /// Generic copula: a positive random tensor fitted to uniform margins.
    pub fn random<R: Rng + ?Sized>(labels: &[Label], n: usize, rng: &mut R) -> Result<Self> {
        check_order(n)?;
        let mut mass = ipf::random_positive(labels.len(), n, rng);
        ipf::fit_uniform_margins(&mut mass)?;
        CheckerboardCopula::from_mass(labels.to_vec(), mass)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ndim(&self) -> usize {
        self.labels.len()
    }

    pub fn mass(&self) -> &ArrayD<f64> {
        &self.mass
    }

    pub fn into_mass(self) -> ArrayD<f64> {
        self.mass
    }

    /// Check nonnegativity, unit total mass and uniform margins (tolerance [`MASS_TOL`]).
    pub fn validate(&self) -> CopulaReport {
        let negative_cells = self
            .mass
            .indexed_iter()
            .filter(|(_, &m)| m < 0.0)
            .map(|(idx, &m)| (idx.slice().to_vec(), m))
            .collect();
        let target = 1.0 / self.order as f64;
        let margin_violations = (0..self.ndim())
            .filter_map(|a| {
                let margin: Vec<f64> = sum_out(&self.mass, &[a]).into_iter().collect();
                let max_deviation = margin
                    .iter()
                    .fold(0.0f64, |acc, m| acc.max((m - target).abs()));
                (max_deviation > MASS_TOL).then(|| MarginViolation {
                    axis: self.labels[a],
                    margin,
                    max_deviation,
                })
            })
            .collect();
        CopulaReport {
            total_mass: self.mass.sum(),
            negative_cells,
            margin_violations,
        }
    }

    /// Image under the projection onto `subset`.
    pub fn marginalize(&self, subset: &[Label]) -> Result<CheckerboardCopula> {
        let (labels, keep) = subset_axes(&self.labels, subset)?;
        Ok(CheckerboardCopula {
            labels,
            order: self.order,
            mass: sum_out(&self.mass, &keep),
        })
    }

    /// `F_C(u) = C(prod_j [0, u_j])`, with volume-proportional weights on
    /// partially covered cells. Exact at grid nodes `k/n`.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.ndim() {
            return Err(Error::Index(format!(
                "point has {} coordinates, copula has {} axes",
                u.len(),
                self.ndim()
            )));
        }
        let n = self.order as f64;
        let mut weights = Vec::with_capacity(u.len());
        for &uj in u {
            if !(0.0..=1.0).contains(&uj) {
                return Err(Error::Domain(format!("copula argument {uj} outside [0, 1]")));
            }
            let s = snap(n * uj);
            let w: Vec<f64> = (0..self.order)
                .map(|k| (s - k as f64).clamp(0.0, 1.0))
                .collect();
            if w[0] == 0.0 {
                return Ok(0.0);
            }
            weights.push(w);
        }
        let mut total = 0.0;
        for (idx, &m) in self.mass.indexed_iter() {
            let mut w = m;
            for (a, wa) in weights.iter().enumerate() {
                w *= wa[idx[a]];
                if w == 0.0 {
                    break;
                }
            }
            total += w;
        }
        Ok(total)
    }

    /// Discrete stand-in on `[0,1]^J`: each cell's mass sits at the cell centre.
    pub fn to_tensor_measure(&self) -> TensorMeasure {
        let n = self.order;
        let centres: Vec<ExtReal> = (0..n)
            .map(|k| ExtReal::finite((k as f64 + 0.5) / n as f64))
            .collect();
        let grid = Grid::new(vec![centres; self.ndim()]).expect("centres increase");
        let mut mass = self.mass.clone();
        // absorb rounding so the total-mass check sees exactly what validate saw
        let total = mass.sum();
        mass.mapv_inplace(|m| m.max(0.0) / total);
        TensorMeasure::new(self.labels.clone(), grid, mass).expect("valid copula gives a valid measure")
    }

    /// Max-norm distance between mass tensors of equal shape.
    pub fn max_norm_diff(&self, other: &CheckerboardCopula) -> Result<f64> {
        if self.labels != other.labels || self.order != other.order {
            return Err(Error::Index(format!(
                "cannot compare order-{} copula over {:?} with order-{} copula over {:?}",
                self.order, self.labels, other.order, other.labels
            )));
        }
        Ok(self
            .mass
            .iter()
            .zip(other.mass.iter())
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }

    /// Convex combination `(1 - t) * self + t * other`.
    pub fn mix(&self, other: &CheckerboardCopula, t: f64) -> Result<CheckerboardCopula> {
        self.max_norm_diff(other)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("mixing weight {t} outside [0, 1]")));
        }
        Ok(CheckerboardCopula {
            labels: self.labels.clone(),
            order: self.order,
            mass: &self.mass * (1.0 - t) + &other.mass * t,
        })
    }
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("checkerboard order must be at least 1".into()));
    }
    Ok(())
}

// n*u computed in floating point misses integers by an ulp or two (0.3 * 10).
fn snap(s: f64) -> f64 {
    let r = s.round();
    if (s - r).abs() <= 1e-12 * s.abs().max(1.0) {
        r
    } else {
        s
    }
}
