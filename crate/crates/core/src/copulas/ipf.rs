//! Iterative proportional fitting onto uniform margins.

use ndarray::{ArrayD, Axis, IxDyn};
use rand::Rng;

use crate::error::{Error, Result};

/// Margin deviation at which fitting stops; tighter than the validation tolerance.
pub const FIT_TOL: f64 = 1e-13;

const MAX_SWEEPS: usize = 100_000;

/// Largest deviation of any axis margin from `1/n`.
pub fn margin_deviation(mass: &ArrayD<f64>) -> f64 {
    let n = mass.shape()[0];
    let target = 1.0 / n as f64;
    let mut worst = 0.0f64;
    for a in 0..mass.ndim() {
        for k in 0..n {
            worst = worst.max((mass.index_axis(Axis(a), k).sum() - target).abs());
        }
    }
    worst
}

/// Rescale axis slices of a cubic tensor in turn until every margin is `1/n`
/// within [`FIT_TOL`]. Returns the number of sweeps used.
pub fn fit_uniform_margins(mass: &mut ArrayD<f64>) -> Result<usize> {
    let n = mass.shape()[0];
    let target = 1.0 / n as f64;
    if mass.iter().any(|&m| !(m.is_finite() && m >= 0.0)) {
        return Err(Error::Configuration(
            "proportional fitting needs a nonnegative tensor".into(),
        ));
    }
    for sweep in 1..=MAX_SWEEPS {
        for a in 0..mass.ndim() {
            for k in 0..n {
                let m = mass.index_axis(Axis(a), k).sum();
                if m <= 0.0 {
                    return Err(Error::Configuration(format!(
                        "slice {k} of axis {a} has no mass; margins cannot be made uniform"
                    )));
                }
                let scale = target / m;
                mass.index_axis_mut(Axis(a), k).mapv_inplace(|v| v * scale);
            }
        }
        if margin_deviation(mass) < FIT_TOL {
            return Ok(sweep);
        }
    }
    Err(Error::Configuration(format!(
        "proportional fitting did not reach {FIT_TOL} in {MAX_SWEEPS} sweeps"
    )))
}

/// Positive random tensor of shape `n^d` with exponential-like entries.
pub fn random_positive<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> ArrayD<f64> {
    ArrayD::from_shape_simple_fn(IxDyn(&vec![n; d]), || {
        1e-3 - (1.0 - rng.random::<f64>()).ln()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fitting_reaches_uniform_margins() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..=3 {
            let mut t = random_positive(d, 5, &mut rng);
            fit_uniform_margins(&mut t).unwrap();
            assert!(margin_deviation(&t) < FIT_TOL);
        }
    }

    #[test]
    fn empty_slice_is_rejected() {
        let mut t = ArrayD::from_shape_vec(IxDyn(&[2, 2]), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(fit_uniform_margins(&mut t), Err(Error::Configuration(_))));
    }
}
