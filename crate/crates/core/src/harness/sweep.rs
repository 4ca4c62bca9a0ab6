//! Memory-budget sweeps comparing sketch training with the baselines.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::build_sketch;
use super::dataset::{Dataset, Task};
use crate::baselines::{cw_sketch_train, reservoir_sample_train, MemoryBudget};
use crate::error::{Error, Result};
use crate::lsh::mix_seed;
use crate::optimizer::{dfo_train, ols_solve, relative_error, OptimizerConfig};
use crate::sketch::Sketch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Storm,
    Reservoir,
    Cw,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Storm => "storm",
            Method::Reservoir => "reservoir",
            Method::Cw => "cw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StormSettings {
    pub bits: u8,
    /// The per-cell optimizer seed is derived from the cell seed; `optimizer.seed` is ignored.
    pub optimizer: OptimizerConfig,
}

impl Default for StormSettings {
    fn default() -> Self {
        StormSettings {
            bits: 4,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub method: Method,
    pub budget_bytes: usize,
    pub seed: u64,
    /// `ok`, `skipped` or `failed`.
    pub status: String,
    pub note: String,
    /// Sketch rows `R`, reservoir capacity, or CW output rows.
    pub structure_size: usize,
    pub memory_bytes: usize,
    /// Training MSE in the units of the un-normalized data.
    pub mse: Option<f64>,
    pub ols_mse: f64,
    /// `|theta - theta_ols| / |theta_ols|`.
    pub param_error: Option<f64>,
    pub elapsed_secs: f64,
}

impl ExperimentResult {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

struct Cell {
    method: Method,
    budget: MemoryBudget,
    seed: u64,
}

struct Reference {
    theta: Vec<f64>,
    mse: f64,
    unit: f64,
}

fn skipped(cell: &Cell, reference: &Reference, note: String) -> ExperimentResult {
    ExperimentResult {
        method: cell.method,
        budget_bytes: cell.budget.bytes,
        seed: cell.seed,
        status: "skipped".into(),
        note,
        structure_size: 0,
        memory_bytes: 0,
        mse: None,
        ols_mse: reference.mse,
        param_error: None,
        elapsed_secs: 0.0,
    }
}

fn run_cell(
    dataset: &Dataset,
    cell: &Cell,
    storm: &StormSettings,
    reference: &Reference,
) -> ExperimentResult {
    let dim = dataset.dim();
    let start = Instant::now();
    let outcome: Result<(Vec<f64>, usize, usize)> = match cell.method {
        Method::Storm => {
            let buckets = 1usize << storm.bits;
            let rows = cell.budget.sketch_rows(buckets);
            if rows == 0 {
                return skipped(
                    cell,
                    reference,
                    format!("budget below one {buckets}-bucket row"),
                );
            }
            build_sketch(dataset, storm.bits, rows, cell.seed).and_then(|sketch: Sketch| {
                let cfg = OptimizerConfig {
                    seed: mix_seed(cell.seed, 1),
                    ..storm.optimizer
                };
                let trace = dfo_train(&sketch, &cfg)?;
                Ok((trace.theta, rows, sketch.memory_bytes()))
            })
        }
        Method::Reservoir => {
            let cap = cell.budget.sample_capacity(dim);
            if cap == 0 {
                return skipped(cell, reference, "budget below one example".into());
            }
            reservoir_sample_train(dataset.rows(), dim, cell.budget, cell.seed)
                .map(|fit| (fit.theta, cap, fit.memory_bytes))
        }
        Method::Cw => {
            let rows = cell.budget.cw_rows(dim);
            if rows < dim + 1 {
                return skipped(
                    cell,
                    reference,
                    format!("needs at least {} CW rows", dim + 1),
                );
            }
            cw_sketch_train(dataset.rows(), dim, rows, cell.seed)
                .map(|fit| (fit.theta, rows, fit.memory_bytes))
        }
    };
    let elapsed_secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok((theta, size, memory_bytes)) => ExperimentResult {
            method: cell.method,
            budget_bytes: cell.budget.bytes,
            seed: cell.seed,
            status: "ok".into(),
            note: String::new(),
            structure_size: size,
            memory_bytes,
            mse: Some(dataset.mse(&theta) / reference.unit),
            ols_mse: reference.mse,
            param_error: Some(relative_error(&theta, &reference.theta)),
            elapsed_secs,
        },
        Err(e) => ExperimentResult {
            status: "failed".into(),
            note: e.to_string(),
            elapsed_secs,
            ..skipped(cell, reference, String::new())
        },
    }
}

/// Runs every `(method, budget, seed)` cell on a normalized regression
/// dataset. Cells run in parallel; results are sorted by method, budget, seed.
pub fn run_sweep(
    dataset: &Dataset,
    budgets: &[MemoryBudget],
    methods: &[Method],
    seeds: &[u64],
    storm: &StormSettings,
) -> Result<Vec<ExperimentResult>> {
    if dataset.task() != Task::Regression {
        return Err(Error::InvalidInput("sweeps run on regression data".into()));
    }
    let Some(norm) = dataset.normalization() else {
        return Err(Error::InvalidInput(
            "sweep requires a normalized dataset".into(),
        ));
    };
    storm.optimizer.validate()?;
    let ols = ols_solve(dataset)?;
    let unit = norm.scale * norm.scale;
    let reference = Reference {
        mse: dataset.mse(&ols.theta) / unit,
        theta: ols.theta,
        unit,
    };
    let cells: Vec<Cell> = methods
        .iter()
        .flat_map(|&method| {
            budgets.iter().flat_map(move |&budget| {
                seeds.iter().map(move |&seed| Cell {
                    method,
                    budget,
                    seed,
                })
            })
        })
        .collect();
    let mut results: Vec<ExperimentResult> = cells
        .par_iter()
        .map(|cell| run_cell(dataset, cell, storm, &reference))
        .collect();
    results.sort_by(|a, b| {
        (a.method, a.budget_bytes, a.seed).cmp(&(b.method, b.budget_bytes, b.seed))
    });
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub budget_bytes: usize,
    pub runs: usize,
    pub mean_mse: f64,
    pub median_mse: f64,
    pub mean_param_error: f64,
    pub ols_mse: f64,
}

/// Per `(method, budget)` aggregates over successful runs.
pub fn summarize(results: &[ExperimentResult]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Method, usize), Vec<&ExperimentResult>> = BTreeMap::new();
    for r in results.iter().filter(|r| r.is_ok()) {
        groups
            .entry((r.method, r.budget_bytes))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((method, budget_bytes), rows)| {
            let mut mses: Vec<f64> = rows.iter().filter_map(|r| r.mse).collect();
            mses.sort_by(|a, b| a.total_cmp(b));
            let n = mses.len();
            let median_mse = if n % 2 == 1 {
                mses[n / 2]
            } else {
                0.5 * (mses[n / 2 - 1] + mses[n / 2])
            };
            SummaryRow {
                method,
                budget_bytes,
                runs: n,
                mean_mse: mses.iter().sum::<f64>() / n as f64,
                median_mse,
                mean_param_error: rows.iter().filter_map(|r| r.param_error).sum::<f64>() / n as f64,
                ols_mse: rows[0].ols_mse,
            }
        })
        .collect()
}

pub fn write_results_csv<W: Write>(results: &[ExperimentResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in results {
        w.serialize(r).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results_json<W: Write>(results: &[ExperimentResult], writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, results).map_err(std::io::Error::from)?;
    Ok(())
}
