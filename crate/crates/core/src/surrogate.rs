//! Closed-form surrogate losses the sketches estimate, with derivatives.
//!
//! All losses are functions of a normalized margin `t` in `[-1, 1]`:
//!
//! * regression: `t = <[theta, -1], [x, y]> / |[theta, -1]|`, the signed
//!   orthogonal distance of the point to the model hyperplane;
//! * classification: `t = y <theta, [x, -1]> / |theta|`.
//!
//! Dividing by the query norm matches what the sign-based hash actually
//! measures, so these functions are exactly the expectations of the sketch
//! estimates.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::harness::dataset::{Dataset, Task};
use crate::linalg::{dot, norm};

/// Margins closer to `+-1` than this are treated as singular.
pub const SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurrogateParams {
    /// Hyperplanes per hash.
    pub p: u32,
    pub task: Task,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            p: 4,
            task: Task::Regression,
        }
    }
}

impl SurrogateParams {
    pub fn regression(p: u32) -> Self {
        SurrogateParams {
            p,
            task: Task::Regression,
        }
    }

    pub fn classification(p: u32) -> Self {
        SurrogateParams {
            p,
            task: Task::Classification,
        }
    }
}

/// Single-hyperplane collision probability `1 - acos(t) / pi`.
pub fn f_half(t: f64) -> f64 {
    1.0 - t.clamp(-1.0, 1.0).acos() / PI
}

/// Collision probability of a `p`-bit code, `f_half(t)^p`.
pub fn srp_power(t: f64, p: u32) -> f64 {
    f_half(t).powi(p as i32)
}

/// Paired-projection regression surrogate `(f(t)^p + f(-t)^p) / 2`.
pub fn prp_loss(t: f64, p: u32) -> f64 {
    0.5 * (srp_power(t, p) + srp_power(-t, p))
}

fn check_open(t: f64) -> Result<()> {
    if t.is_nan() || t.abs() >= 1.0 - SINGULAR_EPS {
        return Err(Error::Domain { t });
    }
    Ok(())
}

/// `d/dt prp_loss(t, p)`.
pub fn prp_loss_slope(t: f64, p: u32) -> Result<f64> {
    check_open(t)?;
    if p == 0 {
        return Ok(0.0);
    }
    let e = p as i32 - 1;
    Ok(p as f64 * (f_half(t).powi(e) - f_half(-t).powi(e)) / (2.0 * PI * (1.0 - t * t).sqrt()))
}

/// `d^2/dt^2 prp_loss(t, p)`; the Hessian of the loss in the unnormalized
/// inner product is this coefficient times `b b^T`.
pub fn hessian_coefficient(t: f64, p: u32) -> Result<f64> {
    check_open(t)?;
    if p < 2 {
        return Err(Error::InvalidInput(format!(
            "curvature is only defined for p >= 2, got {p}"
        )));
    }
    let pf = p as f64;
    let one_minus = 1.0 - t * t;
    let (fp, fm) = (f_half(t), f_half(-t));
    let curvature = pf * (pf - 1.0) * (fp.powi(p as i32 - 2) + fm.powi(p as i32 - 2))
        / (2.0 * PI * PI * one_minus);
    let stretch =
        pf * t * (fp.powi(p as i32 - 1) - fm.powi(p as i32 - 1)) / (2.0 * PI * one_minus.powf(1.5));
    Ok(curvature + stretch)
}

/// Classification margin loss `2^p f(-t)^p`.
pub fn classification_loss(t: f64, p: u32) -> f64 {
    (2.0 * f_half(-t)).powi(p as i32)
}

/// `d/dt classification_loss(t, p)`; equals `-2p / pi` at `t = 0`.
pub fn classification_loss_slope(t: f64, p: u32) -> Result<f64> {
    check_open(t)?;
    if p == 0 {
        return Ok(0.0);
    }
    let pf = p as f64;
    Ok(-(2f64).powi(p as i32) * pf * f_half(-t).powi(p as i32 - 1) / (PI * (1.0 - t * t).sqrt()))
}

/// Normalized margin `<query, b> / |query|` and its gradient in `query`.
fn margin_and_gradient(query: &[f64], b: &[f64]) -> Result<(f64, Vec<f64>)> {
    if query.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: query.len(),
            found: b.len(),
        });
    }
    let qn = norm(query);
    if qn == 0.0 {
        return Err(Error::ZeroVector);
    }
    let ip = dot(query, b);
    let t = ip / qn;
    let q3 = qn * qn * qn;
    let grad = query
        .iter()
        .zip(b)
        .map(|(&q, &bi)| bi / qn - ip * q / q3)
        .collect();
    Ok((t, grad))
}

/// Gradient of `prp_loss(<q, b> / |q|, p)` with respect to the query `q = [theta, -1]`.
pub fn prp_gradient(query: &[f64], b: &[f64], p: u32) -> Result<Vec<f64>> {
    let (t, grad) = margin_and_gradient(query, b)?;
    let slope = prp_loss_slope(t, p)?;
    Ok(grad.into_iter().map(|g| slope * g).collect())
}

/// Gradient of `classification_loss(<q, b> / |q|, p)` where `b = y [x, -1]`.
pub fn classification_gradient(query: &[f64], b: &[f64], p: u32) -> Result<Vec<f64>> {
    let (t, grad) = margin_and_gradient(query, b)?;
    let slope = classification_loss_slope(t, p)?;
    Ok(grad.into_iter().map(|g| slope * g).collect())
}

/// `[theta, -1]`.
pub fn regression_query(theta: &[f64]) -> Vec<f64> {
    let mut q = Vec::with_capacity(theta.len() + 1);
    q.extend_from_slice(theta);
    q.push(-1.0);
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub mean_surrogate: f64,
    /// Least-squares error of the model's raw score against the target.
    pub mean_squared_error: f64,
    /// Fraction of sign errors; classification only.
    pub error_rate: Option<f64>,
    pub margins: Vec<f64>,
}

/// Exact mean surrogate loss of `theta` over a normalized dataset.
///
/// Regression models have `dim` coefficients and are queried as
/// `[theta, -1]`. Classification models have `dim` coefficients including the
/// bias weight (the normalized features already carry the bias column).
pub fn exact_empirical_risk(
    theta: &[f64],
    dataset: &Dataset,
    params: &SurrogateParams,
) -> Result<RiskReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    if theta.len() != dataset.dim() {
        return Err(Error::DimensionMismatch {
            expected: dataset.dim(),
            found: theta.len(),
        });
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite model parameter".into()));
    }
    let n = dataset.len() as f64;
    match params.task {
        Task::Regression => {
            let query = regression_query(theta);
            let qn = norm(&query);
            let margins: Vec<f64> = (0..dataset.len())
                .map(|i| dot(&query, &dataset.joint(i)) / qn)
                .collect();
            let mean_surrogate = margins.iter().map(|&t| prp_loss(t, params.p)).sum::<f64>() / n;
            Ok(RiskReport {
                mean_surrogate,
                mean_squared_error: dataset.mse(theta),
                error_rate: None,
                margins,
            })
        }
        Task::Classification => {
            let tn = norm(theta);
            if tn == 0.0 {
                return Err(Error::ZeroVector);
            }
            let margins: Vec<f64> = dataset
                .rows()
                .map(|(x, y)| (y * dot(theta, x) / tn).clamp(-1.0, 1.0))
                .collect();
            let mean_surrogate = margins
                .iter()
                .map(|&t| classification_loss(t, params.p))
                .sum::<f64>()
                / n;
            let mse = dataset
                .rows()
                .map(|(x, y)| (y - dot(theta, x)).powi(2))
                .sum::<f64>()
                / n;
            let errors = margins.iter().filter(|&&t| t <= 0.0).count();
            Ok(RiskReport {
                mean_surrogate,
                mean_squared_error: mse,
                error_rate: Some(errors as f64 / n),
                margins,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn f_half_values() {
        assert_eq!(f_half(0.0), 0.5);
        assert_eq!(f_half(1.0), 1.0);
        assert_eq!(f_half(-1.0), 0.0);
        assert_eq!(f_half(2.0), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let t: f64 = rng.random_range(-1.0..=1.0);
            assert!((f_half(t) + f_half(-t) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn prp_loss_values() {
        assert_eq!(prp_loss(0.0, 4), 0.0625);
        for p in [1, 2, 4, 8] {
            assert!((prp_loss(1.0, p) - 0.5).abs() < 1e-15);
            assert!((prp_loss(-1.0, p) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn prp_loss_grid_minimum_at_zero() {
        for p in [2, 4, 8, 16] {
            let (best, _) = (-10_000..=10_000)
                .map(|i| {
                    let t = i as f64 * 1e-4;
                    (t, prp_loss(t, p))
                })
                .fold((f64::NAN, f64::INFINITY), |acc, cur| {
                    if cur.1 < acc.1 {
                        cur
                    } else {
                        acc
                    }
                });
            assert!(best.abs() < 1e-9, "p={p}: argmin {best}");
        }
    }

    #[test]
    fn slope_values() {
        for p in [1, 2, 4, 8] {
            assert_eq!(prp_loss_slope(0.0, p).unwrap(), 0.0);
        }
        let s: Vec<f64> = [2, 4, 8, 16]
            .iter()
            .map(|&p| prp_loss_slope(0.1, p).unwrap())
            .collect();
        // closed form: 0.020400, 0.030642, 0.009107, 0.000168
        assert!((s[0] - 0.0204).abs() < 1e-4);
        assert!((s[1] - 0.0307).abs() < 1e-4);
        assert!((s[2] - 0.0091).abs() < 1e-4);
        assert!((s[1] - 0.030642).abs() < 1e-6);
        assert!(s[1] > s[0] && s[1] > s[2] && s[1] > s[3]);
        assert!(
            (prp_loss_slope(-0.37, 4).unwrap() + prp_loss_slope(0.37, 4).unwrap()).abs() < 1e-15
        );
        assert!(matches!(prp_loss_slope(1.0, 4), Err(Error::Domain { .. })));
    }

    #[test]
    fn slope_matches_central_difference() {
        let h = 1e-6;
        for p in [2, 4, 8] {
            for t in [-0.8, -0.3, 0.05, 0.6] {
                let fd = (prp_loss(t + h, p) - prp_loss(t - h, p)) / (2.0 * h);
                assert!((prp_loss_slope(t, p).unwrap() - fd).abs() < 1e-8);
                let fd =
                    (classification_loss(t + h, p) - classification_loss(t - h, p)) / (2.0 * h);
                assert!((classification_loss_slope(t, p).unwrap() - fd).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn hessian_coefficient_positive_and_matches_second_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let t: f64 = rng.random_range(-0.999..0.999);
            let p = [2, 4, 8][rng.random_range(0..3)];
            assert!(hessian_coefficient(t, p).unwrap() > 0.0);
        }
        let h = 1e-4;
        let fd = (prp_loss(h, 2) - 2.0 * prp_loss(0.0, 2) + prp_loss(-h, 2)) / (h * h);
        assert!((hessian_coefficient(0.0, 2).unwrap() - fd).abs() < 1e-4);
        for p in [2, 4, 8] {
            for t in [-0.7, -0.2, 0.3, 0.9] {
                let fd = (prp_loss(t + h, p) - 2.0 * prp_loss(t, p) + prp_loss(t - h, p)) / (h * h);
                let rho = hessian_coefficient(t, p).unwrap();
                assert!((rho - fd).abs() < 1e-4 * rho.max(1.0), "p={p} t={t}");
            }
        }
        assert!(hessian_coefficient(0.1, 1).is_err());
        assert!(hessian_coefficient(-1.0, 2).is_err());
    }

    #[test]
    fn classification_loss_shape() {
        for p in [1, 2, 4, 8] {
            assert!((classification_loss(0.0, p) - 1.0).abs() < 1e-15);
            assert_eq!(classification_loss(1.0, p), 0.0);
            let slope = classification_loss_slope(0.0, p).unwrap();
            assert!(slope < 0.0);
            assert!((slope + 2.0 * p as f64 / PI).abs() < 1e-12);
        }
        let mut prev = f64::INFINITY;
        for i in -100..=100 {
            let v = classification_loss(i as f64 / 100.0, 4);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn gradient_zero_at_zero_margin() {
        let g = prp_gradient(&[0.5, -1.0], &[0.4, 0.2], 4).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
        assert!(prp_gradient(&[0.0, 0.0], &[0.4, 0.2], 4).is_err());
        assert!(prp_gradient(&[1.0, 0.0], &[0.4, 0.2, 0.0], 4).is_err());
    }

    #[test]
    fn noiseless_risk_at_truth() {
        let theta = [0.3, -0.2];
        let rows: Vec<(Vec<f64>, f64)> = (0..20)
            .map(|i| {
                let x = vec![(i as f64 * 0.07).sin() * 0.5, (i as f64 * 0.13).cos() * 0.5];
                let y = dot(&x, &theta);
                (x, y)
            })
            .collect();
        let ds = Dataset::from_rows(Task::Regression, &rows).unwrap();
        let report = exact_empirical_risk(&theta, &ds, &SurrogateParams::default()).unwrap();
        assert!((report.mean_surrogate - 0.0625).abs() < 1e-15);
        assert!(report.mean_squared_error < 1e-30);
        assert!(report.margins.iter().all(|t| t.abs() < 1e-15));
        assert!(exact_empirical_risk(&[0.1], &ds, &SurrogateParams::default()).is_err());
    }
}
