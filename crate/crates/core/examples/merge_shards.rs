//! Several devices sketch their own slice of a stream with a shared seed and
//! forward the sketches along a random tree. The merged sketch is identical to
//! one built centrally, so the trained model is too.

use storm::harness::{gen_synthetic_regression, normalize, simulate_edge_merge};
use storm::optimizer::{ols_solve, EtaDecay, OptimizerConfig};

fn main() -> storm::Result<()> {
    let raw = gen_synthetic_regression(200_000, 2, &[0.8, -0.3], 0.05, 1)?;
    let data = normalize(&raw, 0.99)?;
    let cfg = OptimizerConfig {
        eta: 5.0,
        iterations: 500,
        eta_decay: EtaDecay::InverseSqrt,
        ..OptimizerConfig::default()
    };
    let report = simulate_edge_merge(&data, 8, 4, 2_000, 2024, &cfg)?;

    println!("shard sizes: {:?}", report.shard_sizes);
    println!("merge edges (sender -> receiver): {:?}", report.edges);
    println!("merged == single pass: {}", report.merged_equals_single);
    println!(
        "bytes sent: {} ({} per sketch) vs {} to ship raw rows",
        report.bytes_transmitted, report.sketch_bytes, report.raw_bytes
    );
    println!("theta from merged sketch: {:.4?}", report.theta_merged);
    println!("least squares:            {:.4?}", ols_solve(&data)?.theta);
    Ok(())
}
