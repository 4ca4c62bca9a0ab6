//! Seeded synthetic datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Uniform point in the `d`-dimensional unit ball.
fn ball_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&dir);
        if n > 1e-12 {
            let r = rng.random::<f64>().powf(1.0 / d as f64);
            return dir.into_iter().map(|v| v * r / n).collect();
        }
    }
}

/// `x` uniform in the unit ball, `y = <theta_star, x> + N(0, noise_sigma^2)`.
pub fn gen_synthetic_regression(
    n: usize,
    d: usize,
    theta_star: &[f64],
    noise_sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidInput("need n >= 1 and d >= 1".into()));
    }
    if theta_star.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: theta_star.len(),
        });
    }
    let noise = Normal::new(0.0, noise_sigma)
        .map_err(|e| Error::InvalidInput(format!("noise sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n * d);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x = ball_point(&mut rng, d);
        let eps = if noise_sigma > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        targets.push(dot(&x, theta_star) + eps);
        features.extend(x);
    }
    Dataset::new(Task::Regression, d, features, targets)
}

/// Two unit-variance 2D Gaussian blobs whose centers are `separation` apart,
/// labelled `+1` and `-1` alternately. The blob midpoint is offset from the
/// origin so the separator needs a bias term.
pub fn gen_synthetic_classification(n: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least two examples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let axis = [angle.cos(), angle.sin()];
    let midpoint = [1.5, -1.0];
    let mut features = Vec::with_capacity(2 * n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        for (m, a) in midpoint.iter().zip(axis) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            features.push(m + label * 0.5 * separation * a + noise);
        }
        targets.push(label);
    }
    Dataset::new(Task::Classification, 2, features, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::ols_solve;

    #[test]
    fn noiseless_regression_is_recovered() {
        let theta = [0.4, -1.2, 0.7];
        let ds = gen_synthetic_regression(200, 3, &theta, 0.0, 1).unwrap();
        let fit = ols_solve(&ds).unwrap();
        for (a, b) in fit.theta.iter().zip(theta) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((0..ds.len()).all(|i| norm(ds.x(i)) <= 1.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_synthetic_regression(50, 2, &[1.0, 2.0], 0.3, 9).unwrap();
        let b = gen_synthetic_regression(50, 2, &[1.0, 2.0], 0.3, 9).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = gen_synthetic_regression(50, 2, &[1.0, 2.0], 0.3, 10).unwrap();
        assert_ne!(a.digest(), c.digest());
        assert_eq!(
            gen_synthetic_classification(30, 2.0, 4).unwrap(),
            gen_synthetic_classification(30, 2.0, 4).unwrap()
        );
    }

    #[test]
    fn residual_variance_matches_noise() {
        let theta = [0.5, 0.5];
        let ds = gen_synthetic_regression(10_000, 2, &theta, 0.2, 3).unwrap();
        let var = ds.mse(&theta);
        assert!((var / 0.04 - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn classes_are_balanced() {
        for n in [2, 7, 100, 101] {
            let ds = gen_synthetic_classification(n, 3.0, 1).unwrap();
            let pos = ds.targets().iter().filter(|&&y| y > 0.0).count() as i64;
            assert!((pos - n as i64 / 2).abs() <= 1);
        }
        assert!(gen_synthetic_classification(1, 3.0, 1).is_err());
    }

    #[test]
    fn well_separated_blobs_are_linearly_separable() {
        let ds = gen_synthetic_classification(400, 12.0, 5).unwrap();
        // least-squares fit of the label on [x, 1]
        let rows: Vec<(Vec<f64>, f64)> =
            ds.rows().map(|(x, y)| (vec![x[0], x[1], 1.0], y)).collect();
        let aug = Dataset::from_rows(Task::Regression, &rows).unwrap();
        let w = ols_solve(&aug).unwrap().theta;
        let correct = aug.rows().filter(|(x, y)| y * dot(&w, x) > 0.0).count();
        assert_eq!(correct, 400);
    }
}
