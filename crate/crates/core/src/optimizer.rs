//! Model fitting: derivative-free descent on a sketch, gradient descent on the
//! exact surrogate, and the closed-form least-squares reference.

use std::io::Write;
use std::time::Instant;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::dataset::{Dataset, Task};
use crate::linalg::{dot, norm};
use crate::lsh::{augment_query, mix_seed, HashFamily};
use crate::sketch::Sketch;
use crate::surrogate::{
    classification_gradient, exact_empirical_risk, prp_gradient, SurrogateParams,
};

/// Parameter norm beyond which training aborts.
pub const DIVERGENCE_NORM: f64 = 1e6;
/// Ridge added to singular normal equations.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaDecay {
    #[default]
    None,
    /// `eta / sqrt(n)` at iteration `n` (1-based).
    InverseSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Sphere queries per step.
    pub k: usize,
    /// Sphere radius.
    pub sigma: f64,
    /// Step size.
    pub eta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub eta_decay: EtaDecay,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            k: 8,
            sigma: 0.5,
            eta: 0.1,
            iterations: 100,
            seed: 0,
            eta_decay: EtaDecay::None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidInput(format!(
                "k must be >= 2, got {}",
                self.k
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        Ok(())
    }

    fn step_size(&self, iteration: usize) -> f64 {
        match self.eta_decay {
            EtaDecay::None => self.eta,
            EtaDecay::InverseSqrt => self.eta / (iteration as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    /// Loss at `theta_tilde` (sketch estimate or exact surrogate).
    pub loss: f64,
    /// Full query vector after the step: `[theta, -1]` for regression.
    pub theta_tilde: Vec<f64>,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub steps: Vec<TraceStep>,
    /// Fitted model: regression coefficients, or the unit-norm classifier
    /// (including its bias weight).
    pub theta: Vec<f64>,
}

impl TrainTrace {
    /// One JSON object per line: `{"iteration", "loss", "theta_tilde", "elapsed_secs"}`.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut writer, step).map_err(std::io::Error::from)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.steps.last().map(|s| s.loss)
    }
}

/// Sets the last coordinate to `-1`.
pub fn project_constraint(theta_tilde: &[f64]) -> Vec<f64> {
    let mut out = theta_tilde.to_vec();
    if let Some(last) = out.last_mut() {
        *last = -1.0;
    }
    out
}

/// How the parameter vector is kept identifiable between steps.
#[derive(Debug, Clone, Copy)]
enum Constraint {
    /// Regression: last coordinate pinned to `-1`.
    PinnedLast,
    /// Classification: the loss only sees the direction, so stay on the unit sphere.
    UnitSphere,
}

impl Constraint {
    fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => Constraint::PinnedLast,
            Task::Classification => Constraint::UnitSphere,
        }
    }

    fn initial(self, dim: usize, seed: u64) -> Vec<f64> {
        match self {
            Constraint::PinnedLast => project_constraint(&vec![0.0; dim]),
            Constraint::UnitSphere => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::MAX));
                random_unit(&mut rng, dim)
            }
        }
    }

    fn apply(self, v: &mut Vec<f64>) {
        match self {
            Constraint::PinnedLast => *v = project_constraint(v),
            Constraint::UnitSphere => {
                let n = norm(v);
                if n > 0.0 {
                    v.iter_mut().for_each(|x| *x /= n);
                }
            }
        }
    }

    fn model(self, v: &[f64]) -> Vec<f64> {
        match self {
            Constraint::PinnedLast => v[..v.len() - 1].to_vec(),
            Constraint::UnitSphere => v.to_vec(),
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn check_divergence(iteration: usize, v: &[f64]) -> Result<()> {
    let n = norm(v);
    if n.is_nan() || n > DIVERGENCE_NORM {
        return Err(Error::Divergence { iteration, norm: n });
    }
    Ok(())
}

fn sketch_loss(sketch: &Sketch, query: &[f64]) -> Result<f64> {
    Ok(sketch.estimate(&augment_query(query)?)?.value)
}

/// Derivative-free training against a sketch.
///
/// Each step draws `k` points uniformly on the radius-`sigma` sphere around
/// the current iterate, queries the sketch there and at the iterate, and
/// descends along the sphere-smoothing gradient estimate
/// `dim / (k sigma^2) * sum_j (loss_j - loss_0) (v_j - theta)`.
pub fn dfo_train(sketch: &Sketch, cfg: &OptimizerConfig) -> Result<TrainTrace> {
    cfg.validate()?;
    if sketch.inserted() == 0 {
        return Err(Error::EmptySketch);
    }
    let task = match sketch.family() {
        HashFamily::PrpRegression => Task::Regression,
        HashFamily::Classification => Task::Classification,
        HashFamily::Composed => {
            return Err(Error::InvalidInput(
                "composed sketches do not define a trainable model".into(),
            ))
        }
    };
    let constraint = Constraint::for_task(task);
    let dim = sketch.dim() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta = constraint.initial(dim, cfg.seed);
    let mut loss = sketch_loss(sketch, &theta)?;
    let start = Instant::now();
    let mut steps = Vec::with_capacity(cfg.iterations);

    for iteration in 1..=cfg.iterations {
        let mut grad = vec![0.0; dim];
        for _ in 0..cfg.k {
            let u = random_unit(&mut rng, dim);
            let probe: Vec<f64> = theta
                .iter()
                .zip(&u)
                .map(|(t, d)| t + cfg.sigma * d)
                .collect();
            let delta = match sketch_loss(sketch, &probe) {
                Ok(v) => v,
                Err(Error::ZeroVector) => loss,
                Err(e) => return Err(e),
            };
            let w = (delta - loss) * cfg.sigma;
            grad.iter_mut().zip(&u).for_each(|(g, d)| *g += w * d);
        }
        let factor = dim as f64 / (cfg.k as f64 * cfg.sigma * cfg.sigma);
        let eta = cfg.step_size(iteration);
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= eta * factor * g;
        }
        constraint.apply(&mut theta);
        check_divergence(iteration, &theta)?;
        loss = sketch_loss(sketch, &theta)?;
        steps.push(TraceStep {
            iteration,
            loss,
            theta_tilde: theta.clone(),
            elapsed_secs: start.elapsed().as_secs_f64(),
        });
    }
    debug!(
        "dfo_train finished: loss {loss:.6} after {} steps",
        cfg.iterations
    );
    Ok(TrainTrace {
        theta: constraint.model(&theta),
        steps,
    })
}

/// Full-batch gradient descent on the exact surrogate risk. Same constraint
/// handling as [`dfo_train`], without sketch noise.
pub fn exact_surrogate_train(
    dataset: &Dataset,
    params: &SurrogateParams,
    cfg: &OptimizerConfig,
) -> Result<TrainTrace> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    if params.task != dataset.task() {
        return Err(Error::InvalidInput(format!(
            "surrogate task {:?} does not match dataset task {:?}",
            params.task,
            dataset.task()
        )));
    }
    let constraint = Constraint::for_task(params.task);
    let dim = match params.task {
        Task::Regression => dataset.dim() + 1,
        Task::Classification => dataset.dim(),
    };
    let points: Vec<Vec<f64>> = match params.task {
        Task::Regression => (0..dataset.len()).map(|i| dataset.joint(i)).collect(),
        Task::Classification => dataset
            .rows()
            .map(|(x, y)| x.iter().map(|v| y * v).collect())
            .collect(),
    };
    let n = points.len() as f64;
    let mut theta = constraint.initial(dim, cfg.seed);
    let start = Instant::now();
    let mut steps = Vec::with_capacity(cfg.iterations);

    for iteration in 1..=cfg.iterations {
        let mut grad = vec![0.0; dim];
        for b in &points {
            let g = match params.task {
                Task::Regression => prp_gradient(&theta, b, params.p)?,
                Task::Classification => classification_gradient(&theta, b, params.p)?,
            };
            grad.iter_mut().zip(&g).for_each(|(acc, v)| *acc += v);
        }
        let eta = cfg.step_size(iteration);
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= eta * g / n;
        }
        constraint.apply(&mut theta);
        check_divergence(iteration, &theta)?;
        let loss = exact_empirical_risk(&constraint.model(&theta), dataset, params)?.mean_surrogate;
        steps.push(TraceStep {
            iteration,
            loss,
            theta_tilde: theta.clone(),
            elapsed_secs: start.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainTrace {
        theta: constraint.model(&theta),
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsSolution {
    pub theta: Vec<f64>,
    /// Whether the ridge term was needed to make the system solvable.
    pub ridge_applied: bool,
}

/// Accumulated normal equations `X^T X theta = X^T y`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalEquations {
    dim: usize,
    rows: usize,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
}

impl NormalEquations {
    pub fn new(dim: usize) -> Self {
        NormalEquations {
            dim,
            rows: 0,
            xtx: DMatrix::zeros(dim, dim),
            xty: DVector::zeros(dim),
        }
    }

    pub fn add_row(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            self.xty[i] += x[i] * y;
            for j in 0..=i {
                self.xtx[(i, j)] += x[i] * x[j];
            }
        }
        self.rows += 1;
    }

    /// Solves by Cholesky; falls back to `X^T X + 1e-8 I` when the system has
    /// fewer rows than unknowns or is numerically singular.
    pub fn solve(&self) -> Result<OlsSolution> {
        let mut xtx = self.xtx.clone();
        for i in 0..self.dim {
            for j in 0..i {
                xtx[(j, i)] = xtx[(i, j)];
            }
        }
        if self.rows >= self.dim {
            if let Some(theta) = cholesky_solve(&xtx, &self.xty) {
                return Ok(OlsSolution {
                    theta,
                    ridge_applied: false,
                });
            }
        }
        for i in 0..self.dim {
            xtx[(i, i)] += RIDGE;
        }
        cholesky_solve(&xtx, &self.xty)
            .map(|theta| OlsSolution {
                theta,
                ridge_applied: true,
            })
            .ok_or(Error::Singular)
    }
}

fn cholesky_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<Vec<f64>> {
    let chol = a.clone().cholesky()?;
    let l = chol.l();
    let diag = l.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    // reciprocal condition estimate of a = l l^T
    if lo.is_nan() || lo <= 0.0 || (lo / hi).powi(2) < 1e-15 {
        return None;
    }
    let x = chol.solve(b);
    x.iter()
        .all(|v| v.is_finite())
        .then(|| x.iter().copied().collect())
}

/// Least-squares fit of a through-origin linear model.
pub fn ols_solve(dataset: &Dataset) -> Result<OlsSolution> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let mut eq = NormalEquations::new(dataset.dim());
    for (x, y) in dataset.rows() {
        eq.add_row(x, y);
    }
    eq.solve()
}

/// Relative parameter error `|a - b| / |b|`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(b)
}

/// Fraction of rows whose label sign matches `sign(<theta, x>)`.
pub fn accuracy(theta: &[f64], dataset: &Dataset) -> f64 {
    let correct = dataset
        .rows()
        .filter(|(x, y)| y * dot(theta, x) > 0.0)
        .count();
    correct as f64 / dataset.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection() {
        assert_eq!(project_constraint(&[0.2, 0.3, -0.7]), vec![0.2, 0.3, -1.0]);
        let once = project_constraint(&[1.5, 2.0]);
        assert_eq!(project_constraint(&once), once);
    }

    #[test]
    fn ols_hand_computed() {
        let ds =
            Dataset::from_rows(Task::Regression, &[(vec![1.0], 2.0), (vec![2.0], 4.0)]).unwrap();
        let sol = ols_solve(&ds).unwrap();
        assert!((sol.theta[0] - 2.0).abs() < 1e-12);
        assert!(!sol.ridge_applied);
        assert!(ds.mse(&sol.theta) < 1e-20);
    }

    #[test]
    fn ols_ridge_on_rank_deficiency() {
        let ds = Dataset::from_rows(
            Task::Regression,
            &[(vec![1.0, 2.0], 1.0), (vec![2.0, 4.0], 2.0)],
        )
        .unwrap();
        let sol = ols_solve(&ds).unwrap();
        assert!(sol.ridge_applied);
        assert!(ds.mse(&sol.theta) < 1e-6);

        let under = Dataset::from_rows(Task::Regression, &[(vec![1.0, 0.5, 0.2], 1.0)]).unwrap();
        assert!(ols_solve(&under).unwrap().ridge_applied);
    }

    #[test]
    fn ols_singular_beyond_rescue() {
        let ds = Dataset::from_rows(Task::Regression, &[(vec![f64::NAN], 1.0)]).unwrap();
        assert!(matches!(ols_solve(&ds), Err(Error::Singular)));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        for bad in [
            OptimizerConfig {
                k: 1,
                ..Default::default()
            },
            OptimizerConfig {
                sigma: 0.0,
                ..Default::default()
            },
            OptimizerConfig {
                eta: -1.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
        let decay = OptimizerConfig {
            eta: 1.0,
            eta_decay: EtaDecay::InverseSqrt,
            ..Default::default()
        };
        assert_eq!(decay.step_size(4), 0.5);
    }

    #[test]
    fn trace_jsonl() {
        let trace = TrainTrace {
            steps: vec![TraceStep {
                iteration: 1,
                loss: 0.25,
                theta_tilde: vec![0.5, -1.0],
                elapsed_secs: 0.0,
            }],
            theta: vec![0.5],
        };
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(line.lines().count(), 1);
        let parsed: TraceStep = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(parsed, trace.steps[0]);
    }
}
