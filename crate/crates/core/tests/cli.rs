use std::fs;
use std::path::Path;

use clap::Parser;
use tempfile::TempDir;

use storm::cli::{main_with_args, run, Cli, EvalReport, ModelFile};
use storm::Sketch;

fn storm(args: &[&str]) -> String {
    let cli = Cli::try_parse_from(std::iter::once("storm").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    run(cli, &mut out).unwrap();
    String::from_utf8(out).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

#[test]
fn regression_pipeline() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    storm(&[
        "gen", "--n", "400", "--d", "1", "--theta", "0.7", "--seed", "1", "-o", &a,
    ]);
    storm(&[
        "gen", "--n", "400", "--d", "1", "--theta", "0.7", "--seed", "2", "-o", &b,
    ]);
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 400);

    // a shared norm bound keeps both shards on the same scale
    let (sa, sb, merged) = (
        path(&dir, "a.strm"),
        path(&dir, "b.strm"),
        path(&dir, "m.strm"),
    );
    for (input, output) in [(&a, &sa), (&b, &sb)] {
        let msg = storm(&[
            "sketch",
            input,
            "--rows",
            "100",
            "--seed",
            "5",
            "--norm-bound",
            "1.5",
            "-o",
            output,
        ]);
        assert!(msg.contains("100x16"), "{msg}");
    }
    storm(&["merge", &sa, &sb, "-o", &merged]);
    let sketch = Sketch::read_from(fs::File::open(&merged).unwrap()).unwrap();
    assert_eq!(sketch.inserted(), 800);

    let (model, trace) = (path(&dir, "model.json"), path(&dir, "trace.jsonl"));
    storm(&[
        "train", &merged, "--eta", "0.5", "--seed", "3", "-o", &model, "--trace", &trace,
    ]);
    let fitted: ModelFile = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert!((fitted.theta[0] - 0.7).abs() < 0.2, "{:?}", fitted.theta);
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 100);

    let report: EvalReport =
        serde_json::from_str(&storm(&["eval", "--model", &model, &a])).unwrap();
    assert_eq!(report.rows, 400);
    assert!(report.accuracy.is_none());
}

#[test]
fn classification_pipeline() {
    let dir = TempDir::new().unwrap();
    let (data, sketch, model) = (
        path(&dir, "c.csv"),
        path(&dir, "c.strm"),
        path(&dir, "c.json"),
    );
    storm(&[
        "gen",
        "--task",
        "classification",
        "--n",
        "400",
        "--separation",
        "6",
        "--seed",
        "3",
        "-o",
        &data,
    ]);
    storm(&[
        "sketch",
        &data,
        "--task",
        "classification",
        "--rows",
        "100",
        "-o",
        &sketch,
    ]);
    storm(&["train", &sketch, "--eta", "1.0", "-o", &model]);
    let report: EvalReport =
        serde_json::from_str(&storm(&["eval", "--model", &model, &data])).unwrap();
    assert!(report.accuracy.unwrap() > 0.9, "{report:?}");
}

#[test]
fn sweep_writes_results() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(
        &config,
        r#"
[data.synthetic]
n = 200
d = 3
noise = 0.1
seed = 1

[sweep]
methods = ["storm", "reservoir", "cw"]
budgets = [400, 4000]
seeds = [0, 1]

[storm]
iterations = 20
"#,
    )
    .unwrap();
    let (csv, json) = (path(&dir, "r.csv"), path(&dir, "r.json"));
    let summary = storm(&[
        "sweep",
        config.to_str().unwrap(),
        "--out-csv",
        &csv,
        "--out-json",
        &json,
    ]);
    assert_eq!(summary.lines().count(), 1 + 3 * 2);
    assert_eq!(
        fs::read_to_string(&csv).unwrap().lines().count(),
        1 + 3 * 2 * 2
    );
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 12);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "missing.csv");
    let out = path(&dir, "x.strm");
    assert_eq!(main_with_args(["storm", "sketch", &missing, "-o", &out]), 1);
    assert_eq!(main_with_args(["storm", "bogus"]), 1);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1.0,2.0\n3.0,oops\n").unwrap();
    assert_eq!(
        main_with_args(["storm", "sketch", bad.to_str().unwrap(), "-o", &out]),
        1
    );
    assert!(!Path::new(&out).exists());

    let data = path(&dir, "d.csv");
    storm(&["gen", "--n", "50", "--d", "2", "-o", &data]);
    let sketch = path(&dir, "d.strm");
    storm(&["sketch", &data, "--rows", "10", "-o", &sketch]);
    let model = path(&dir, "m.json");
    assert_eq!(
        main_with_args(["storm", "train", &sketch, "--eta", "1e9", "-o", &model]),
        2
    );
}
