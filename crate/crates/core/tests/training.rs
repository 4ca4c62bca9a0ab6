use storm::harness::{build_sketch, gen_synthetic_regression, normalize, simulate_edge_merge};
use storm::optimizer::{
    dfo_train, exact_surrogate_train, ols_solve, relative_error, EtaDecay, OptimizerConfig,
};
use storm::surrogate::SurrogateParams;

fn line_data(seed: u64) -> storm::harness::Dataset {
    normalize(
        &gen_synthetic_regression(1000, 1, &[0.7], 0.0, seed).unwrap(),
        0.99,
    )
    .unwrap()
}

#[test]
fn large_sketch_tracks_exact_training() {
    let data = line_data(40);
    let cfg = OptimizerConfig {
        eta: 0.5,
        iterations: 200,
        seed: 9,
        ..OptimizerConfig::default()
    };
    let exact = exact_surrogate_train(
        &data,
        &SurrogateParams::regression(4),
        &OptimizerConfig { eta: 20.0, ..cfg },
    )
    .unwrap();
    let sketched = dfo_train(&build_sketch(&data, 4, 2000, 1).unwrap(), &cfg).unwrap();
    let err = relative_error(&sketched.theta, &exact.theta);
    assert!(
        err < 0.1,
        "sketch {:?} exact {:?}",
        sketched.theta,
        exact.theta
    );
}

#[test]
fn zero_iterations_return_the_initial_point() {
    let sketch = build_sketch(&line_data(1), 4, 10, 0).unwrap();
    let trace = dfo_train(
        &sketch,
        &OptimizerConfig {
            iterations: 0,
            ..OptimizerConfig::default()
        },
    )
    .unwrap();
    assert_eq!(trace.theta, vec![0.0]);
    assert!(trace.steps.is_empty());
}

#[test]
fn training_is_deterministic_per_seed() {
    let sketch = build_sketch(&line_data(2), 4, 50, 0).unwrap();
    let cfg = OptimizerConfig {
        eta: 0.5,
        eta_decay: EtaDecay::InverseSqrt,
        seed: 4,
        ..OptimizerConfig::default()
    };
    let (a, b) = (
        dfo_train(&sketch, &cfg).unwrap(),
        dfo_train(&sketch, &cfg).unwrap(),
    );
    assert_eq!(a.theta, b.theta);
    let losses =
        |t: &storm::optimizer::TrainTrace| t.steps.iter().map(|s| s.loss).collect::<Vec<_>>();
    assert_eq!(losses(&a), losses(&b));
}

#[test]
fn edge_merge_matches_central_sketch() {
    let raw = gen_synthetic_regression(600, 2, &[0.5, -0.8], 0.05, 3).unwrap();
    let data = normalize(&raw, 0.99).unwrap();
    let cfg = OptimizerConfig {
        eta: 0.5,
        ..OptimizerConfig::default()
    };
    let report = simulate_edge_merge(&data, 6, 4, 80, 11, &cfg).unwrap();
    assert!(report.merged_equals_single);
    assert_eq!(report.edges.len(), 5);
    assert_eq!(report.shard_sizes.iter().sum::<usize>(), 600);
    assert_eq!(report.theta_merged, report.theta_single);
    assert!(report.sketch_bytes < report.raw_bytes);
    let ols = ols_solve(&data).unwrap().theta;
    assert!(relative_error(&report.theta_merged, &ols) < 0.5);
}
