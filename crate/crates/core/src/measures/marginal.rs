use crate::error::{Error, Result};
use crate::measures::ExtReal;
use crate::MASS_TOL;

/// Which representation a [`Marginal`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginalKind {
    /// Finitely many atoms on the extended real line.
    Atomic,
    /// Strictly increasing piecewise-linear CDF on a finite interval.
    Continuous,
}

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    Atomic {
        atoms: Vec<(ExtReal, f64)>,
        // cumulative masses; the last entry is exactly 1
        cum: Vec<f64>,
    },
    Continuous {
        knots: Vec<(f64, f64)>,
    },
}

/// A one-dimensional probability law on the extended real line.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginal {
    repr: Repr,
}

impl Marginal {
    /// Atoms `(position, mass)` with strictly increasing positions and masses summing to one.
    pub fn atomic(atoms: Vec<(ExtReal, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Validation("atomic marginal needs at least one atom".into()));
        }
        for w in atoms.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Validation(format!(
                    "atom positions must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        let mut total = 0.0;
        let mut cum = Vec::with_capacity(atoms.len());
        for &(x, w) in &atoms {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Validation(format!("atom at {x} has invalid mass {w}")));
            }
            total += w;
            cum.push(total.min(1.0));
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Validation(format!("atom masses sum to {total}, not 1")));
        }
        *cum.last_mut().unwrap() = 1.0;
        Ok(Marginal {
            repr: Repr::Atomic { atoms, cum },
        })
    }

    /// Single atom of mass one.
    pub fn dirac(x: ExtReal) -> Self {
        Marginal::atomic(vec![(x, 1.0)]).expect("a Dirac mass is valid")
    }

    /// Equal mass on each of the given (strictly increasing) points.
    pub fn uniform_atoms(points: &[f64]) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        let atoms = points
            .iter()
            .map(|&x| Ok((ExtReal::new(x)?, w)))
            .collect::<Result<Vec<_>>>()?;
        Marginal::atomic(atoms)
    }

    /// Knots `(x, F(x))` of a strictly increasing piecewise-linear CDF running from 0 to 1.
    pub fn continuous(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Validation("continuous marginal needs at least two knots".into()));
        }
        for &(x, f) in &knots {
            if !x.is_finite() || !f.is_finite() {
                return Err(Error::Validation(format!("non-finite knot ({x}, {f})")));
            }
        }
        for w in knots.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Validation("knot positions must be strictly increasing".into()));
            }
            if w[0].1 >= w[1].1 {
                return Err(Error::Validation("knot CDF values must be strictly increasing".into()));
            }
        }
        let last = knots.len() - 1;
        if knots[0].1.abs() > MASS_TOL || (knots[last].1 - 1.0).abs() > MASS_TOL {
            return Err(Error::Validation("CDF must start at 0 and end at 1".into()));
        }
        knots[0].1 = 0.0;
        knots[last].1 = 1.0;
        Ok(Marginal {
            repr: Repr::Continuous { knots },
        })
    }

    /// Uniform law on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Marginal::continuous(vec![(lo, 0.0), (hi, 1.0)])
    }

    pub fn kind(&self) -> MarginalKind {
        match self.repr {
            Repr::Atomic { .. } => MarginalKind::Atomic,
            Repr::Continuous { .. } => MarginalKind::Continuous,
        }
    }

    pub fn atoms(&self) -> Option<&[(ExtReal, f64)]> {
        match &self.repr {
            Repr::Atomic { atoms, .. } => Some(atoms),
            Repr::Continuous { .. } => None,
        }
    }

    pub fn knots(&self) -> Option<&[(f64, f64)]> {
        match &self.repr {
            Repr::Continuous { knots } => Some(knots),
            Repr::Atomic { .. } => None,
        }
    }

    /// `F(x) = mu((-inf, x])`.
    pub fn cdf(&self, x: ExtReal) -> f64 {
        match &self.repr {
            Repr::Atomic { atoms, cum } => {
                let count = atoms.partition_point(|&(a, _)| a <= x);
                if count == 0 {
                    0.0
                } else {
                    cum[count - 1]
                }
            }
            Repr::Continuous { knots } => continuous_cdf(knots, x.value()),
        }
    }

    /// Generalized inverse `inf { x : F(x) >= u }`.
    ///
    /// At `u = 0` this returns the smallest support point (first knot for
    /// continuous laws) rather than `-inf`.
    pub fn quantile(&self, u: f64) -> Result<ExtReal> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("quantile level {u} outside [0, 1]")));
        }
        Ok(match &self.repr {
            Repr::Atomic { atoms, cum } => {
                if u == 0.0 {
                    atoms
                        .iter()
                        .find(|&&(_, w)| w > 0.0)
                        .map(|&(x, _)| x)
                        .unwrap_or(atoms[0].0)
                } else {
                    atoms[cum.partition_point(|&c| c < u)].0
                }
            }
            Repr::Continuous { knots } => ExtReal::finite(continuous_quantile(knots, u)),
        })
    }

    /// Replace a continuous law by atoms on `grid`: each grid point carries the
    /// mass of the interval since the previous grid point, so the atomized CDF
    /// equals the original at every grid point. Mass above the last grid point
    /// goes to `+inf`. Atomic marginals are returned unchanged.
    pub fn atomize(&self, grid: &[ExtReal]) -> Result<Marginal> {
        if self.kind() == MarginalKind::Atomic {
            return Ok(self.clone());
        }
        if grid.is_empty() {
            return Err(Error::Configuration("empty discretization grid".into()));
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Configuration(
                "discretization grid must be strictly increasing".into(),
            ));
        }
        let mut atoms = Vec::with_capacity(grid.len() + 1);
        let mut prev = 0.0;
        for &g in grid {
            let f = self.cdf(g);
            atoms.push((g, (f - prev).max(0.0)));
            prev = f;
        }
        if prev < 1.0 {
            atoms.push((ExtReal::POS_INF, 1.0 - prev));
        }
        Marginal::atomic(atoms)
    }

    /// Quantiles at `k/n`, `k = 1..=n`, deduplicated. For a continuous law this
    /// is a grid whose CDF image is exactly `{1/n, ..., 1}`.
    pub fn quantile_grid(&self, n: usize) -> Vec<ExtReal> {
        let mut grid: Vec<ExtReal> = (1..=n)
            .map(|k| self.quantile(k as f64 / n as f64).expect("level in [0, 1]"))
            .collect();
        grid.dedup();
        grid
    }

    /// Smallest and largest point carrying mass.
    pub fn support_bounds(&self) -> (ExtReal, ExtReal) {
        match &self.repr {
            Repr::Atomic { atoms, .. } => {
                let mut pos = atoms.iter().filter(|a| a.1 > 0.0).map(|a| a.0);
                let lo = pos.next().unwrap_or(atoms[0].0);
                let hi = pos.last().unwrap_or(lo);
                (lo, hi)
            }
            Repr::Continuous { knots } => (
                ExtReal::finite(knots[0].0),
                ExtReal::finite(knots[knots.len() - 1].0),
            ),
        }
    }
}

fn segment_value(knots: &[(f64, f64)], i: usize, x: f64) -> f64 {
    let (x0, f0) = knots[i - 1];
    let (x1, f1) = knots[i];
    let t = (x - x0) / (x1 - x0);
    (f0 + t * (f1 - f0)).clamp(f0, f1)
}

fn continuous_cdf(knots: &[(f64, f64)], x: f64) -> f64 {
    let last = knots.len() - 1;
    if x <= knots[0].0 {
        return 0.0;
    }
    if x >= knots[last].0 {
        return 1.0;
    }
    // first knot strictly above x
    let i = knots.partition_point(|&(k, _)| k <= x);
    segment_value(knots, i, x)
}

// Returns the smallest float x with continuous_cdf(x) >= u, so that the
// adjunction quantile(u) <= x <=> u <= F(x) holds exactly in floating point.
// The interpolated guess is refined by bisection over the ordered bit patterns.
fn continuous_quantile(knots: &[(f64, f64)], u: f64) -> f64 {
    if u == 0.0 {
        return knots[0].0;
    }
    let i = knots.partition_point(|&(_, f)| f < u).max(1);
    let (x0, f0) = knots[i - 1];
    let (x1, f1) = knots[i];
    // invariant: cdf(lo) < u <= cdf(hi)
    let (mut lo, mut hi) = (ordered_key(x0), ordered_key(x1));
    let guess = (x0 + (u - f0) / (f1 - f0) * (x1 - x0)).clamp(x0, x1);
    if continuous_cdf(knots, guess) >= u {
        hi = hi.min(ordered_key(guess));
    } else {
        lo = lo.max(ordered_key(guess));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if continuous_cdf(knots, from_ordered_key(mid)) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    from_ordered_key(hi)
}

// Monotone map from finite floats to integers.
fn ordered_key(x: f64) -> i64 {
    let b = x.to_bits() as i64;
    if b < 0 {
        i64::MIN - b
    } else {
        b
    }
}

fn from_ordered_key(k: i64) -> f64 {
    if k < 0 {
        f64::from_bits((i64::MIN - k) as u64)
    } else {
        f64::from_bits(k as u64)
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

    #[test]
    fn cdf_examples() {
        assert_eq!(Marginal::dirac(e(0.0)).cdf(e(-1.0)), 0.0);
        assert_eq!(coin().cdf(e(0.0)), 0.5);
        assert_eq!(Marginal::uniform(0.0, 1.0).unwrap().cdf(e(0.25)), 0.25);
        assert_eq!(coin().cdf(ExtReal::POS_INF), 1.0);
        assert_eq!(coin().cdf(ExtReal::NEG_INF), 0.0);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(Marginal::uniform(0.0, 1.0).unwrap().quantile(0.7).unwrap(), e(0.7));
        assert_eq!(coin().quantile(0.5).unwrap(), e(0.0));
        assert_eq!(Marginal::dirac(e(0.0)).quantile(1.0).unwrap(), e(0.0));
        assert_eq!(coin().quantile(0.50001).unwrap(), e(1.0));
    }

    #[test]
    fn quantile_boundary_convention() {
        let m = Marginal::atomic(vec![(e(-3.0), 0.0), (e(2.0), 0.25), (e(5.0), 0.75)]).unwrap();
        assert_eq!(m.quantile(0.0).unwrap(), e(2.0));
        let c = Marginal::continuous(vec![(-1.0, 0.0), (4.0, 1.0)]).unwrap();
        assert_eq!(c.quantile(0.0).unwrap(), e(-1.0));
    }

    #[test]
    fn quantile_domain_error() {
        assert!(matches!(coin().quantile(1.5), Err(Error::Domain(_))));
        assert!(matches!(coin().quantile(-0.1), Err(Error::Domain(_))));
        assert!(coin().quantile(f64::NAN).is_err());
    }

    #[test]
    fn infinite_atoms() {
        let m = Marginal::atomic(vec![
            (ExtReal::NEG_INF, 0.25),
            (e(0.0), 0.5),
            (ExtReal::POS_INF, 0.25),
        ])
        .unwrap();
        assert_eq!(m.quantile(0.1).unwrap(), ExtReal::NEG_INF);
        assert_eq!(m.quantile(0.9).unwrap(), ExtReal::POS_INF);
        assert_eq!(m.cdf(ExtReal::NEG_INF), 0.25);
        assert_eq!(m.cdf(e(1e300)), 0.75);
    }

    #[test]
    fn degenerate_marginal_has_constant_quantile() {
        let m = Marginal::dirac(e(7.0));
        for u in [0.0, 0.1, 0.5, 1.0] {
            assert_eq!(m.quantile(u).unwrap(), e(7.0));
        }
    }

    #[test]
    fn invalid_marginals_rejected() {
        assert!(Marginal::atomic(vec![(e(0.0), 0.5), (e(0.0), 0.5)]).is_err());
        assert!(Marginal::atomic(vec![(e(0.0), 0.6), (e(1.0), 0.5)]).is_err());
        assert!(Marginal::atomic(vec![(e(0.0), -0.1), (e(1.0), 1.1)]).is_err());
        assert!(Marginal::continuous(vec![(0.0, 0.0), (1.0, 0.5), (2.0, 0.5), (3.0, 1.0)]).is_err());
        assert!(Marginal::continuous(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
        assert!(Marginal::continuous(vec![(0.0, 0.0)]).is_err());
    }

    #[test]
    fn continuous_inverse_at_knots_and_midpoints() {
        let m = Marginal::continuous(vec![(-2.0, 0.0), (0.0, 0.3), (0.5, 0.35), (3.0, 1.0)]).unwrap();
        let knots = m.knots().unwrap().to_vec();
        for w in knots.windows(2) {
            for x in [w[0].0, 0.5 * (w[0].0 + w[1].0), w[1].0] {
                let q = m.quantile(m.cdf(e(x))).unwrap().value();
                assert!((q - x).abs() < 1e-12, "{x} -> {q}");
            }
            for u in [w[0].1, 0.5 * (w[0].1 + w[1].1), w[1].1] {
                let f = m.cdf(m.quantile(u).unwrap());
                assert!((f - u).abs() < 1e-12, "{u} -> {f}");
            }
        }
    }

    #[test]
    fn atomize_matches_cdf_on_grid() {
        let m = Marginal::continuous(vec![(0.0, 0.0), (1.0, 0.5), (4.0, 1.0)]).unwrap();
        let grid = [e(-1.0), e(0.5), e(1.0), e(2.0)];
        let a = m.atomize(&grid).unwrap();
        for g in grid {
            assert!((a.cdf(g) - m.cdf(g)).abs() < 1e-15);
        }
        assert_eq!(a.atoms().unwrap().last().unwrap().0, ExtReal::POS_INF);
        assert!(m.atomize(&[]).is_err());
    }

    #[test]
    fn quantile_grid_has_exact_cdf_image() {
        let m = Marginal::continuous(vec![(0.0, 0.0), (1.0, 0.2), (2.0, 1.0)]).unwrap();
        let grid = m.quantile_grid(5);
        assert_eq!(grid.len(), 5);
        for (k, g) in grid.iter().enumerate() {
            assert!((m.cdf(*g) - (k + 1) as f64 / 5.0).abs() < 1e-15);
        }
    }
}
