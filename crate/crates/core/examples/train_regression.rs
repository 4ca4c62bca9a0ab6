//! Fit `y = 0.7 x` from sketches of growing size, printing the loss trace of
//! the largest one.

use storm::harness::{build_sketch, gen_synthetic_regression, normalize};
use storm::optimizer::{dfo_train, OptimizerConfig};

fn main() -> storm::Result<()> {
    let data = normalize(&gen_synthetic_regression(1_000, 1, &[0.7], 0.0, 3)?, 0.99)?;
    let cfg = OptimizerConfig {
        eta: 0.5,
        ..OptimizerConfig::default()
    };
    let mut trace = None;
    for rows in [100, 400, 1_600] {
        let slopes = (0..5)
            .map(|seed| {
                let sketch = build_sketch(&data, 4, rows, seed)?;
                Ok(dfo_train(&sketch, &OptimizerConfig { seed, ..cfg })?.theta[0])
            })
            .collect::<storm::Result<Vec<f64>>>()?;
        println!("R = {rows:>5}: slopes over 5 sketch seeds {slopes:.3?}");
        trace = Some(dfo_train(&build_sketch(&data, 4, rows, 0)?, &cfg)?);
    }

    let trace = trace.expect("at least one size");
    for step in trace.steps.iter().step_by(10) {
        println!(
            "iter {:>3}  loss {:.5}  slope {:.4}",
            step.iteration, step.loss, step.theta_tilde[0]
        );
    }
    println!("recovered slope {:.4} (true 0.7)", trace.theta[0]);
    Ok(())
}
