use std::collections::BTreeSet;

use ndarray::{ArrayD, Axis, Dimension, IxDyn, Slice};

use crate::error::{Error, Result};
use crate::measures::{ExtReal, Marginal};
use crate::{Label, MASS_TOL};

/// Per-axis cut points of a product grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<ExtReal>>,
}

impl Grid {
    pub fn new(axes: Vec<Vec<ExtReal>>) -> Result<Self> {
        for (a, pts) in axes.iter().enumerate() {
            if pts.is_empty() {
                return Err(Error::Validation(format!("grid axis {a} is empty")));
            }
            if pts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation(format!(
                    "grid axis {a} is not strictly increasing"
                )));
            }
        }
        Ok(Grid { axes })
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, a: usize) -> &[ExtReal] {
        &self.axes[a]
    }

    pub fn axes(&self) -> &[Vec<ExtReal>] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    /// All grid nodes in row-major order.
    pub fn nodes(&self) -> Vec<Vec<ExtReal>> {
        let shape = self.shape();
        let total: usize = shape.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..total {
            out.push(idx.iter().enumerate().map(|(a, &i)| self.axes[a][i]).collect());
            for a in (0..shape.len()).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }
}

/// A discrete probability measure on a finite product grid over the labels `J`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorMeasure {
    labels: Vec<Label>,
    grid: Grid,
    mass: ArrayD<f64>,
}

/// Sort, dedup and check that `subset` lies inside `labels`; returns the axis positions.
pub(crate) fn subset_axes(labels: &[Label], subset: &[Label]) -> Result<(Vec<Label>, Vec<usize>)> {
    let sub: Vec<Label> = subset.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if sub.is_empty() {
        return Err(Error::Index("empty index subset".into()));
    }
    let axes = sub
        .iter()
        .map(|l| {
            labels
                .binary_search(l)
                .map_err(|_| Error::Index(format!("label {l} not in {labels:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((sub, axes))
}

/// Sum out every axis not listed in `keep` (highest axis first).
pub(crate) fn sum_out(mass: &ArrayD<f64>, keep: &[usize]) -> ArrayD<f64> {
    let mut out = mass.clone();
    for a in (0..mass.ndim()).rev() {
        if !keep.contains(&a) {
            out = out.sum_axis(Axis(a));
        }
    }
    out
}

pub(crate) fn check_labels(labels: &[Label]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Index("index subset must be nonempty".into()));
    }
    if labels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Index(format!(
            "labels {labels:?} must be strictly increasing"
        )));
    }
    Ok(())
}

pub(crate) fn check_mass(mass: &ArrayD<f64>) -> Result<()> {
    let mut total = 0.0;
    for (idx, &m) in mass.indexed_iter() {
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::Validation(format!(
                "mass {m} at cell {:?} is not a nonnegative number",
                idx.slice()
            )));
        }
        total += m;
    }
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::Validation(format!("total mass {total} differs from 1")));
    }
    Ok(())
}

impl TensorMeasure {
    pub fn new(labels: Vec<Label>, grid: Grid, mass: ArrayD<f64>) -> Result<Self> {
        check_labels(&labels)?;
        if grid.ndim() != labels.len() || mass.ndim() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} labels, {}-d grid, {}-d mass",
                labels.len(),
                grid.ndim(),
                mass.ndim()
            )));
        }
        if mass.shape() != grid.shape().as_slice() {
            return Err(Error::Dimension(format!(
                "mass shape {:?} does not match grid shape {:?}",
                mass.shape(),
                grid.shape()
            )));
        }
        check_mass(&mass)?;
        Ok(TensorMeasure { labels, grid, mass })
    }

    /// One-dimensional measure of an atomic marginal.
    pub fn from_marginal(label: Label, m: &Marginal) -> Result<Self> {
        TensorMeasure::product(&[(label, m)])
    }

    /// Product measure of atomic marginals. Labels are sorted into canonical order.
    pub fn product(factors: &[(Label, &Marginal)]) -> Result<Self> {
        let mut factors = factors.to_vec();
        factors.sort_by_key(|f| f.0);
        let mut axes = Vec::new();
        let mut weights = Vec::new();
        for (l, m) in &factors {
            let atoms = m.atoms().ok_or_else(|| {
                Error::Configuration(format!("marginal for label {l} is not atomic"))
            })?;
            axes.push(atoms.iter().map(|a| a.0).collect::<Vec<_>>());
            weights.push(atoms.iter().map(|a| a.1).collect::<Vec<_>>());
        }
        let grid = Grid::new(axes)?;
        let mass = ArrayD::from_shape_fn(IxDyn(&grid.shape()), |idx| {
            (0..weights.len()).map(|a| weights[a][idx[a]]).product()
        });
        let labels = factors.iter().map(|f| f.0).collect();
        TensorMeasure::new(labels, grid, mass)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mass(&self) -> &ArrayD<f64> {
        &self.mass
    }

    pub fn ndim(&self) -> usize {
        self.labels.len()
    }

    /// Image under the coordinate projection onto `subset`.
    pub fn marginalize(&self, subset: &[Label]) -> Result<TensorMeasure> {
        let (labels, keep) = subset_axes(&self.labels, subset)?;
        let grid = Grid {
            axes: keep.iter().map(|&a| self.grid.axes[a].clone()).collect(),
        };
        Ok(TensorMeasure {
            labels,
            grid,
            mass: sum_out(&self.mass, &keep),
        })
    }

    /// The one-dimensional marginal on `label` as a [`Marginal`].
    pub fn axis_marginal(&self, label: Label) -> Result<Marginal> {
        let m = self.marginalize(&[label])?;
        Marginal::atomic(m.grid.axes[0].iter().copied().zip(m.mass.iter().copied()).collect())
    }

    /// Pushforward under a coordinatewise nondecreasing map, given per axis as
    /// the table of images of that axis's grid points.
    pub fn pushforward(&self, maps: &[Vec<ExtReal>]) -> Result<TensorMeasure> {
        if maps.len() != self.ndim() {
            return Err(Error::Domain(format!(
                "{} maps supplied for {} axes",
                maps.len(),
                self.ndim()
            )));
        }
        let mut new_axes = Vec::with_capacity(maps.len());
        let mut position = Vec::with_capacity(maps.len());
        for (a, map) in maps.iter().enumerate() {
            let pts = &self.grid.axes[a];
            if map.len() != pts.len() {
                return Err(Error::Domain(format!(
                    "map for axis {a} covers {} of {} grid points",
                    map.len(),
                    pts.len()
                )));
            }
            if map.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Domain(format!("map for axis {a} is not nondecreasing")));
            }
            let mut image = map.clone();
            image.dedup();
            position.push(
                map.iter()
                    .map(|y| image.binary_search(y).expect("image contains y"))
                    .collect::<Vec<_>>(),
            );
            new_axes.push(image);
        }
        let grid = Grid { axes: new_axes };
        let mut mass = ArrayD::zeros(IxDyn(&grid.shape()));
        let mut target = vec![0usize; self.ndim()];
        for (idx, &m) in self.mass.indexed_iter() {
            for a in 0..target.len() {
                target[a] = position[a][idx[a]];
            }
            mass[IxDyn(&target)] += m;
        }
        Ok(TensorMeasure {
            labels: self.labels.clone(),
            grid,
            mass,
        })
    }

    /// `mu(prod_j (-inf, x_j])`.
    pub fn cdf(&self, x: &[ExtReal]) -> Result<f64> {
        if x.len() != self.ndim() {
            return Err(Error::Index(format!(
                "point has {} coordinates, measure has {} axes",
                x.len(),
                self.ndim()
            )));
        }
        let counts: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(a, xa)| self.grid.axes[a].partition_point(|p| p <= xa))
            .collect();
        if counts.contains(&0) {
            return Ok(0.0);
        }
        let view = self
            .mass
            .slice_each_axis(|ax| Slice::from(0..counts[ax.axis.index()]));
        Ok(view.iter().sum())
    }

    /// Nodes with positive mass, in row-major order.
    pub fn support(&self) -> Vec<(Vec<ExtReal>, f64)> {
        self.mass
            .indexed_iter()
            .filter(|(_, &m)| m > 0.0)
            .map(|(idx, &m)| {
                let p = (0..self.ndim()).map(|a| self.grid.axes[a][idx[a]]).collect();
                (p, m)
            })
            .collect()
    }

    /// Largest absolute difference of node masses after aligning both measures
    /// on the union of their grids.
    pub fn max_abs_diff(&self, other: &TensorMeasure) -> Result<f64> {
        if self.labels != other.labels {
            return Err(Error::Index(format!(
                "cannot compare measures over {:?} and {:?}",
                self.labels, other.labels
            )));
        }
        if self.grid == other.grid {
            return Ok(self
                .mass
                .iter()
                .zip(other.mass.iter())
                .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())));
        }
        let union: Vec<Vec<ExtReal>> = (0..self.ndim())
            .map(|a| {
                let set: BTreeSet<ExtReal> = self.grid.axes[a]
                    .iter()
                    .chain(other.grid.axes[a].iter())
                    .copied()
                    .collect();
                set.into_iter().collect()
            })
            .collect();
        let shape: Vec<usize> = union.iter().map(Vec::len).collect();
        let mut diff = ArrayD::<f64>::zeros(IxDyn(&shape));
        for (t, sign) in [(self, 1.0), (other, -1.0)] {
            let pos: Vec<Vec<usize>> = (0..t.ndim())
                .map(|a| {
                    t.grid.axes[a]
                        .iter()
                        .map(|p| union[a].binary_search(p).expect("union contains p"))
                        .collect()
                })
                .collect();
            let mut target = vec![0usize; t.ndim()];
            for (idx, &m) in t.mass.indexed_iter() {
                for a in 0..target.len() {
                    target[a] = pos[a][idx[a]];
                }
                diff[IxDyn(&target)] += sign * m;
            }
        }
        Ok(diff.iter().fold(0.0, |acc, d| acc.max(d.abs())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(x: f64) -> ExtReal {
        ExtReal::finite(x)
    }

    fn coin() -> Marginal {
        Marginal::atomic(vec![(e(0.0), 0.5), (e(1.0), 0.5)]).unwrap()
    }

    fn three_axis() -> TensorMeasure {
        // dyadic masses so every summation order is exact
        let grid = Grid::new(vec![vec![e(0.0), e(1.0)], vec![e(0.0), e(2.0)], vec![e(-1.0), e(3.0)]]).unwrap();
        let vals = [1.0, 3.0, 0.0, 4.0, 2.0, 2.0, 1.0, 3.0].map(|v| v / 16.0);
        let mass = ArrayD::from_shape_vec(IxDyn(&[2, 2, 2]), vals.to_vec()).unwrap();
        TensorMeasure::new(vec![1, 2, 3], grid, mass).unwrap()
    }

    #[test]
    fn identity_projection() {
        let t = TensorMeasure::product(&[(1, &coin()), (2, &coin())]).unwrap();
        assert_eq!(t.marginalize(&[1, 2]).unwrap(), t);
        assert_eq!(t.marginalize(&[2, 1, 2]).unwrap(), t);
    }

    #[test]
    fn product_factorizes() {
        let m = Marginal::atomic(vec![(e(-1.0), 0.25), (e(4.0), 0.75)]).unwrap();
        let t = TensorMeasure::product(&[(2, &coin()), (1, &m)]).unwrap();
        assert_eq!(t.labels(), &[1, 2]);
        assert_eq!(t.marginalize(&[1]).unwrap(), TensorMeasure::from_marginal(1, &m).unwrap());
        assert_eq!(t.axis_marginal(2).unwrap(), coin());
    }

    #[test]
    fn two_step_projection_equals_one_step() {
        let t = three_axis();
        let direct = t.marginalize(&[1]).unwrap();
        // brute force
        let mut expect = [0.0; 2];
        for (idx, &m) in t.mass().indexed_iter() {
            expect[idx[0]] += m;
        }
        assert_eq!(direct.mass().as_slice().unwrap(), &expect);
        for mid in [vec![1, 2], vec![1, 3]] {
            let two = t.marginalize(&mid).unwrap().marginalize(&[1]).unwrap();
            assert_eq!(two, direct);
        }
    }

    #[test]
    fn marginalize_rejects_foreign_labels() {
        let t = three_axis();
        assert!(matches!(t.marginalize(&[4]), Err(Error::Index(_))));
        assert!(matches!(t.marginalize(&[]), Err(Error::Index(_))));
    }

    #[test]
    fn pushforward_examples() {
        let t = TensorMeasure::product(&[(1, &coin()), (2, &coin())]).unwrap();
        let ident: Vec<Vec<ExtReal>> = t.grid().axes().to_vec();
        assert_eq!(t.pushforward(&ident).unwrap(), t);

        let constant = vec![vec![e(9.0), e(9.0)], ident[1].clone()];
        let p = t.pushforward(&constant).unwrap();
        assert_eq!(p.axis_marginal(1).unwrap(), Marginal::dirac(e(9.0)));

        let m = Marginal::atomic(vec![(e(0.0), 0.3), (e(1.0), 0.7)]).unwrap();
        let one = TensorMeasure::from_marginal(1, &m).unwrap();
        let p = one.pushforward(&[vec![e(5.0), e(5.0)]]).unwrap();
        assert_eq!(p.grid().axis(0), &[e(5.0)]);
        assert_eq!(p.mass()[[0].as_slice()], 1.0);
    }

    #[test]
    fn pushforward_errors() {
        let t = TensorMeasure::from_marginal(1, &coin()).unwrap();
        assert!(matches!(t.pushforward(&[vec![e(1.0)]]), Err(Error::Domain(_))));
        assert!(matches!(t.pushforward(&[vec![e(1.0), e(0.0)]]), Err(Error::Domain(_))));
        assert!(matches!(t.pushforward(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn cdf_examples() {
        let t = TensorMeasure::product(&[(1, &coin()), (2, &coin())]).unwrap();
        assert_eq!(t.cdf(&[ExtReal::POS_INF, ExtReal::POS_INF]).unwrap(), 1.0);
        assert_eq!(t.cdf(&[ExtReal::NEG_INF, ExtReal::POS_INF]).unwrap(), 0.0);
        assert_eq!(t.cdf(&[e(0.0), e(0.0)]).unwrap(), 0.25);
        assert_eq!(t.cdf(&[e(0.0), e(5.0)]).unwrap(), 0.5);
        assert!(matches!(t.cdf(&[e(0.0)]), Err(Error::Index(_))));
    }

    #[test]
    fn construction_validates() {
        let grid = Grid::new(vec![vec![e(0.0), e(1.0)]]).unwrap();
        let bad = ArrayD::from_shape_vec(IxDyn(&[2]), vec![0.7, 0.7]).unwrap();
        assert!(TensorMeasure::new(vec![1], grid.clone(), bad).is_err());
        let neg = ArrayD::from_shape_vec(IxDyn(&[2]), vec![1.5, -0.5]).unwrap();
        assert!(TensorMeasure::new(vec![1], grid.clone(), neg).is_err());
        let shape = ArrayD::from_shape_vec(IxDyn(&[1]), vec![1.0]).unwrap();
        assert!(matches!(TensorMeasure::new(vec![1], grid, shape), Err(Error::Dimension(_))));
        assert!(Grid::new(vec![vec![e(1.0), e(1.0)]]).is_err());
    }

    #[test]
    fn max_abs_diff_aligns_grids() {
        let a = TensorMeasure::from_marginal(1, &coin()).unwrap();
        let b = TensorMeasure::from_marginal(
            1,
            &Marginal::atomic(vec![(e(0.0), 0.5), (e(0.5), 0.0), (e(1.0), 0.5)]).unwrap(),
        )
        .unwrap();
        assert_eq!(a.max_abs_diff(&b).unwrap(), 0.0);
        let c = TensorMeasure::from_marginal(1, &Marginal::dirac(e(0.5))).unwrap();
        assert_eq!(a.max_abs_diff(&c).unwrap(), 1.0);
    }
}
