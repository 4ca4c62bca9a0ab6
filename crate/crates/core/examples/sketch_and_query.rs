//! Sketch a small regression dataset and compare sketch estimates of the
//! surrogate risk with the exact value at a few candidate models.

use storm::harness::{build_sketch, gen_synthetic_regression, normalize};
use storm::lsh::augment_query;
use storm::optimizer::ols_solve;
use storm::surrogate::{exact_empirical_risk, regression_query, SurrogateParams};

fn main() -> storm::Result<()> {
    let raw = gen_synthetic_regression(2_000, 3, &[1.0, -0.5, 0.25], 0.1, 42)?;
    let data = normalize(&raw, 0.99)?;
    let ols = ols_solve(&data)?.theta;

    let params = SurrogateParams::regression(4);
    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "rows", "model", "sketch", "exact"
    );
    for rows in [50, 500, 5_000] {
        let sketch = build_sketch(&data, params.p as u8, rows, 7)?;
        for (name, theta) in [
            ("ols", ols.clone()),
            ("zero", vec![0.0; 3]),
            ("flipped", ols.iter().map(|v| -v).collect()),
        ] {
            let estimate = sketch.estimate(&augment_query(&regression_query(&theta))?)?;
            let exact = exact_empirical_risk(&theta, &data, &params)?.mean_surrogate;
            println!(
                "{rows:>6} {name:>10} {:>10.5} {exact:>10.5}",
                estimate.value
            );
        }
    }
    Ok(())
}
