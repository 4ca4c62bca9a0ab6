use storm::harness::{build_sketch, gen_synthetic_classification, normalize};
use storm::optimizer::{accuracy, dfo_train, OptimizerConfig};

fn main() -> storm::Result<()> {
    for separation in [2.0, 4.0, 6.0] {
        let data = normalize(&gen_synthetic_classification(1_000, separation, 5)?, 0.99)?;
        // one hyperplane per hash, as for the margin loss
        let sketch = build_sketch(&data, 1, 100, 9)?;
        let trace = dfo_train(
            &sketch,
            &OptimizerConfig {
                eta: 1.0,
                ..OptimizerConfig::default()
            },
        )?;
        println!(
            "separation {separation}: weights {:.3?}, training accuracy {:.3}",
            trace.theta,
            accuracy(&trace.theta, &data)
        );
    }
    Ok(())
}
