//! Memory-budget sweep: sketch training against reservoir sampling and a
//! count-sketch least-squares baseline at matched byte budgets.
//!
//! Pass a TOML config path to run your own sweep, e.g.
//! `cargo run --release --example memory_sweep -- crates/core/examples/sweep.toml`.

use std::path::Path;

use storm::baselines::MemoryBudget;
use storm::harness::config::default_theta;
use storm::harness::{
    gen_synthetic_regression, normalize, run_sweep, summarize, Method, StormSettings, SweepConfig,
};
use storm::optimizer::{EtaDecay, OptimizerConfig};

fn main() -> storm::Result<()> {
    let (data, budgets, methods, seeds, storm) = match std::env::args().nth(1) {
        Some(path) => {
            let cfg = SweepConfig::load(&path)?;
            let base = Path::new(&path).parent().unwrap_or(Path::new("."));
            (
                cfg.load_dataset(base)?,
                cfg.budgets(),
                cfg.sweep.methods.clone(),
                cfg.sweep.seeds.clone(),
                cfg.storm_settings(),
            )
        }
        None => {
            let d = 9;
            let theta: Vec<f64> = default_theta(d, 7);
            let scale = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            let theta: Vec<f64> = theta.iter().map(|v| v / scale).collect();
            let data = normalize(&gen_synthetic_regression(2_000, d, &theta, 0.1, 7)?, 0.99)?;
            let budgets = [5, 9, 12, 50, 500, 5_000]
                .iter()
                .map(|&rows| MemoryBudget::for_rows(rows, d))
                .collect();
            let storm = StormSettings {
                bits: 4,
                optimizer: OptimizerConfig {
                    eta: 5.0,
                    iterations: 300,
                    eta_decay: EtaDecay::InverseSqrt,
                    ..OptimizerConfig::default()
                },
            };
            (
                data,
                budgets,
                vec![Method::Storm, Method::Reservoir, Method::Cw],
                (0..5).collect(),
                storm,
            )
        }
    };

    let results = run_sweep(&data, &budgets, &methods, &seeds, &storm)?;
    println!(
        "{:<10} {:>10} {:>5} {:>12} {:>12}",
        "method", "bytes", "runs", "mean mse", "ols mse"
    );
    for row in summarize(&results) {
        println!(
            "{:<10} {:>10} {:>5} {:>12.5} {:>12.5}",
            row.method.name(),
            row.budget_bytes,
            row.runs,
            row.mean_mse,
            row.ols_mse
        );
    }
    Ok(())
}
