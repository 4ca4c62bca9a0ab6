//! TOML sweep configuration.
//!
//! ```toml
//! [data]
//! c_max = 0.99
//!
//! [data.synthetic]
//! n = 2000
//! d = 9
//! noise = 0.1
//! seed = 7
//!
//! [sweep]
//! methods = ["storm", "reservoir", "cw"]
//! budgets = [400, 2000, 10000]
//! seeds = [0, 1, 2]
//!
//! [storm]
//! bits = 4
//! k = 8
//! sigma = 0.5
//! eta = 0.1
//! iterations = 100
//! ```
//!
//! `[data]` takes either a `csv` path (with optional `header`, `delimiter`
//! and `target_column`) or a `[data.synthetic]` table, never both.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use super::dataset::{load_csv, normalize, CsvOptions, Dataset, DEFAULT_C_MAX};
use super::sweep::{Method, StormSettings};
use super::synth::gen_synthetic_regression;
use crate::baselines::MemoryBudget;
use crate::error::{Error, Result};
use crate::optimizer::{EtaDecay, OptimizerConfig};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticData {
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub noise: f64,
    pub seed: u64,
    /// Defaults to a standard normal draw seeded by `seed`.
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub header: bool,
    pub delimiter: Option<char>,
    pub target_column: Option<usize>,
    pub synthetic: Option<SyntheticData>,
    #[serde(default = "default_c_max")]
    pub c_max: f64,
}

fn default_c_max() -> f64 {
    DEFAULT_C_MAX
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StormSection {
    pub bits: u8,
    pub k: usize,
    pub sigma: f64,
    pub eta: f64,
    pub iterations: usize,
    pub eta_decay: EtaDecay,
}

impl Default for StormSection {
    fn default() -> Self {
        let opt = OptimizerConfig::default();
        StormSection {
            bits: 4,
            k: opt.k,
            sigma: opt.sigma,
            eta: opt.eta,
            iterations: opt.iterations,
            eta_decay: opt.eta_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub data: DataSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub storm: StormSection,
}

/// Standard normal coefficient vector seeded by `seed`.
pub fn default_theta(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0074_6865_7461);
    (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        match (&self.data.csv, &self.data.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "data: give either csv or synthetic, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "data: missing csv or synthetic source".into(),
                ))
            }
            _ => {}
        }
        if self.sweep.seeds.is_empty()
            || self.sweep.budgets.is_empty()
            || self.sweep.methods.is_empty()
        {
            return Err(Error::Config(
                "sweep: methods, budgets and seeds must be non-empty".into(),
            ));
        }
        self.storm_settings().optimizer.validate()
    }

    pub fn storm_settings(&self) -> StormSettings {
        let s = &self.storm;
        StormSettings {
            bits: s.bits,
            optimizer: OptimizerConfig {
                k: s.k,
                sigma: s.sigma,
                eta: s.eta,
                iterations: s.iterations,
                seed: 0,
                eta_decay: s.eta_decay,
            },
        }
    }

    pub fn budgets(&self) -> Vec<MemoryBudget> {
        self.sweep
            .budgets
            .iter()
            .map(|&b| MemoryBudget::new(b))
            .collect()
    }

    /// Loads (relative CSV paths resolve against `base_dir`) and normalizes the dataset.
    pub fn load_dataset(&self, base_dir: &Path) -> Result<Dataset> {
        let raw = if let Some(path) = &self.data.csv {
            let options = CsvOptions {
                delimiter: self.data.delimiter.map(|c| c as u8).unwrap_or(b','),
                has_header: self.data.header,
                target_column: self.data.target_column,
                ..Default::default()
            };
            load_csv(base_dir.join(path), &options)?
        } else {
            let syn = self.data.synthetic.as_ref().expect("validated");
            let theta = syn
                .theta
                .clone()
                .unwrap_or_else(|| default_theta(syn.d, syn.seed));
            gen_synthetic_regression(syn.n, syn.d, &theta, syn.noise, syn.seed)?
        };
        normalize(&raw, self.data.c_max)
    }
}
