//! Experiment plumbing: datasets, synthetic generators, memory sweeps and the
//! multi-device merge simulation.

pub mod config;
pub mod dataset;
pub mod edge;
pub mod sweep;
pub mod synth;

pub use config::SweepConfig;
pub use dataset::{
    load_csv, normalize, normalize_bounded, CsvOptions, Dataset, Normalization, Task,
};
pub use edge::{simulate_edge_merge, EdgeReport};
pub use sweep::{run_sweep, summarize, ExperimentResult, Method, StormSettings, SummaryRow};
pub use synth::{gen_synthetic_classification, gen_synthetic_regression};

use crate::error::Result;
use crate::sketch::Sketch;

/// Sketches every row of a normalized dataset with the family matching its task.
pub fn build_sketch(dataset: &Dataset, bits: u8, rows: usize, seed: u64) -> Result<Sketch> {
    let mut sketch = Sketch::new(dataset.hash_config(bits, seed)?, rows)?;
    for i in 0..dataset.len() {
        sketch.insert(&dataset.sketch_item(i)?)?;
    }
    Ok(sketch)
}
