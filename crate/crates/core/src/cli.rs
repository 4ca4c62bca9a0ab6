//! Command-line front end: `gen`, `sketch`, `merge`, `train`, `eval`, `sweep`.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical failure.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{default_theta, SweepConfig};
use crate::harness::dataset::{read_csv, write_csv, CsvOptions, DEFAULT_C_MAX};
use crate::harness::sweep::{summarize, write_results_csv, write_results_json};
use crate::harness::{
    build_sketch, gen_synthetic_classification, gen_synthetic_regression, load_csv, normalize,
    normalize_bounded, run_sweep, Dataset, Task,
};
use crate::lsh::HashFamily;
use crate::optimizer::{accuracy, dfo_train, EtaDecay, OptimizerConfig};
use crate::sketch::Sketch;

#[derive(Debug, Parser)]
#[command(
    name = "storm",
    version,
    about = "Train linear models on mergeable LSH count sketches"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Regression,
    Classification,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Regression => Task::Regression,
            TaskArg::Classification => Task::Classification,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DecayArg {
    None,
    InverseSqrt,
}

#[derive(Debug, clap::Args)]
pub struct CsvArgs {
    #[arg(long, value_enum, default_value = "regression")]
    pub task: TaskArg,
    /// First line is a header.
    #[arg(long)]
    pub header: bool,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Zero-based target column (default: last).
    #[arg(long)]
    pub target_column: Option<usize>,
}

impl CsvArgs {
    fn options(&self) -> CsvOptions {
        CsvOptions {
            delimiter: self.delimiter as u8,
            has_header: self.header,
            target_column: self.target_column,
            task: self.task.into(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as CSV (features then target).
    Gen {
        #[arg(long, value_enum, default_value = "regression")]
        task: TaskArg,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Feature dimension (regression only; classification is 2D).
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Distance between blob centers (classification).
        #[arg(long, default_value_t = 6.0)]
        separation: f64,
        /// Comma-separated true coefficients (default: seeded normal draw).
        #[arg(long, value_delimiter = ',')]
        theta: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sketch a CSV into a .strm file.
    Sketch {
        input: PathBuf,
        #[command(flatten)]
        csv: CsvArgs,
        /// Hyperplanes per hash (default 4 for regression, 1 for classification).
        #[arg(long)]
        bits: Option<u8>,
        #[arg(long, default_value_t = 100)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_C_MAX)]
        c_max: f64,
        /// A-priori bound on raw row norms; enables one-pass normalization with clipping.
        #[arg(long)]
        norm_bound: Option<f64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Merge sketches built with identical configuration and seed.
    Merge {
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Fit a model on a sketch by derivative-free descent.
    Train {
        sketch: PathBuf,
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "none")]
        eta_decay: DecayArg,
        /// Model JSON output.
        #[arg(short, long)]
        output: PathBuf,
        /// Optional JSON-lines trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score a model against a CSV.
    Eval {
        #[arg(long)]
        model: PathBuf,
        data: PathBuf,
        #[arg(long)]
        header: bool,
        #[arg(long, default_value_t = ',')]
        delimiter: char,
        #[arg(long)]
        target_column: Option<usize>,
    },
    /// Run a memory-budget sweep from a TOML config.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
    },
}

/// Model file written by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub task: Task,
    /// Regression: coefficients of `x`. Classification: weights of `[x, -1]`.
    pub theta: Vec<f64>,
    pub bits: u8,
    pub rows: usize,
    pub inserted: u64,
    pub final_loss: Option<f64>,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: usize,
    pub mse: f64,
    pub accuracy: Option<f64>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_sketch(path: &Path) -> Result<Sketch> {
    Sketch::read_from(BufReader::new(File::open(path)?))
}

/// Executes one parsed command, writing human-readable output to `out`.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<()> {
    match cli.command {
        Command::Gen {
            task,
            n,
            d,
            noise,
            separation,
            theta,
            seed,
            output,
        } => {
            let data = match task {
                TaskArg::Regression => {
                    let theta = theta.unwrap_or_else(|| default_theta(d, seed));
                    gen_synthetic_regression(n, d, &theta, noise, seed)?
                }
                TaskArg::Classification => gen_synthetic_classification(n, separation, seed)?,
            };
            match output {
                Some(path) => write_csv(&data, create(&path)?)?,
                None => write_csv(&data, &mut *out)?,
            }
        }
        Command::Sketch {
            input,
            csv,
            bits,
            rows,
            seed,
            c_max,
            norm_bound,
            output,
        } => {
            let raw = load_csv(&input, &csv.options())?;
            let data = match norm_bound {
                Some(bound) => normalize_bounded(&raw, bound, c_max)?,
                None => normalize(&raw, c_max)?,
            };
            let bits = bits.unwrap_or(match data.task() {
                Task::Regression => 4,
                Task::Classification => 1,
            });
            let sketch = build_sketch(&data, bits, rows, seed)?;
            sketch.write_to(create(&output)?)?;
            let record = data.normalization().expect("normalized");
            writeln!(
                out,
                "sketched {} rows ({} clipped) into {}x{} counters, {} bytes, scale {:.6e}",
                data.len(),
                record.clipped,
                sketch.rows(),
                sketch.buckets(),
                sketch.memory_bytes(),
                record.scale
            )?;
        }
        Command::Merge { inputs, output } => {
            let mut merged = read_sketch(&inputs[0])?;
            for path in &inputs[1..] {
                merged.merge_from(&read_sketch(path)?)?;
            }
            merged.write_to(create(&output)?)?;
            writeln!(
                out,
                "merged {} sketches: N = {}",
                inputs.len(),
                merged.inserted()
            )?;
        }
        Command::Train {
            sketch,
            k,
            sigma,
            eta,
            iterations,
            seed,
            eta_decay,
            output,
            trace,
        } => {
            let sketch = read_sketch(&sketch)?;
            let cfg = OptimizerConfig {
                k,
                sigma,
                eta,
                iterations,
                seed,
                eta_decay: match eta_decay {
                    DecayArg::None => EtaDecay::None,
                    DecayArg::InverseSqrt => EtaDecay::InverseSqrt,
                },
            };
            let result = dfo_train(&sketch, &cfg)?;
            let task = match sketch.family() {
                HashFamily::Classification => Task::Classification,
                _ => Task::Regression,
            };
            let model = ModelFile {
                task,
                theta: result.theta.clone(),
                bits: sketch.config().bits,
                rows: sketch.rows(),
                inserted: sketch.inserted(),
                final_loss: result.final_loss(),
                optimizer: cfg,
            };
            let mut w = create(&output)?;
            serde_json::to_writer_pretty(&mut w, &model).map_err(std::io::Error::from)?;
            w.flush()?;
            if let Some(path) = trace {
                let mut w = create(&path)?;
                result.write_jsonl(&mut w)?;
                w.flush()?;
            }
            writeln!(out, "theta = {:?}", model.theta)?;
        }
        Command::Eval {
            model,
            data,
            header,
            delimiter,
            target_column,
        } => {
            let model: ModelFile = serde_json::from_reader(BufReader::new(File::open(&model)?))
                .map_err(|e| Error::InvalidInput(format!("model file: {e}")))?;
            let options = CsvOptions {
                delimiter: delimiter as u8,
                has_header: header,
                target_column,
                task: model.task,
            };
            let data = read_csv(BufReader::new(File::open(&data)?), &options)?;
            let report = evaluate(&model, &data)?;
            serde_json::to_writer_pretty(&mut *out, &report).map_err(std::io::Error::from)?;
            writeln!(out)?;
        }
        Command::Sweep {
            config,
            out_csv,
            out_json,
        } => {
            let cfg = SweepConfig::load(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let data = cfg.load_dataset(base)?;
            let results = run_sweep(
                &data,
                &cfg.budgets(),
                &cfg.sweep.methods,
                &cfg.sweep.seeds,
                &cfg.storm_settings(),
            )?;
            if let Some(path) = out_csv {
                write_results_csv(&results, create(&path)?)?;
            }
            if let Some(path) = out_json {
                write_results_json(&results, create(&path)?)?;
            }
            writeln!(
                out,
                "method,budget_bytes,runs,mean_mse,median_mse,mean_param_error,ols_mse"
            )?;
            for row in summarize(&results) {
                writeln!(
                    out,
                    "{},{},{},{:.6e},{:.6e},{:.4},{:.6e}",
                    row.method.name(),
                    row.budget_bytes,
                    row.runs,
                    row.mean_mse,
                    row.median_mse,
                    row.mean_param_error,
                    row.ols_mse
                )?;
            }
        }
    }
    Ok(())
}

/// MSE (and accuracy for classifiers) of a model on raw, un-normalized data.
pub fn evaluate(model: &ModelFile, data: &Dataset) -> Result<EvalReport> {
    let expected = match model.task {
        Task::Regression => data.dim(),
        Task::Classification => data.dim() + 1,
    };
    if model.theta.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: model.theta.len(),
        });
    }
    Ok(match model.task {
        Task::Regression => EvalReport {
            rows: data.len(),
            mse: data.mse(&model.theta),
            accuracy: None,
        },
        Task::Classification => {
            let rows: Vec<(Vec<f64>, f64)> = data
                .rows()
                .map(|(x, y)| {
                    let mut v = x.to_vec();
                    v.push(-1.0);
                    (v, y)
                })
                .collect();
            let biased = Dataset::from_rows(Task::Classification, &rows)?;
            EvalReport {
                rows: data.len(),
                mse: biased.mse(&model.theta),
                accuracy: Some(accuracy(&model.theta, &biased)),
            }
        }
    })
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
