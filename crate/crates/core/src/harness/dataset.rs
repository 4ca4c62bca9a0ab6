//! In-memory labeled datasets, CSV ingestion and unit-ball normalization.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::lsh::{augment_data, classification_transform, HashConfig, HashFamily};

/// Default bound on the norm of every normalized row.
pub const DEFAULT_C_MAX: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    /// Targets are `+1` / `-1` labels.
    Classification,
}

/// How a dataset was mapped into the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Uniform factor applied to every row.
    pub scale: f64,
    pub c_max: f64,
    /// Feature dimension before a bias column was appended.
    pub raw_dim: usize,
    /// Value of the appended bias column after scaling (classification only).
    pub bias: Option<f64>,
    /// Rows pulled back onto the `c_max` sphere in bounded (streaming) mode.
    pub clipped: usize,
    /// SHA-256 of the raw rows, hex encoded.
    pub source_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    task: Task,
    dim: usize,
    features: Vec<f64>,
    targets: Vec<f64>,
    normalization: Option<Normalization>,
}

/// Options for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Zero-based target column; `None` means the last column.
    pub target_column: Option<usize>,
    pub task: Task,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            delimiter: b',',
            has_header: false,
            target_column: None,
            task: Task::Regression,
        }
    }
}

impl Dataset {
    pub fn new(task: Task, dim: usize, features: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput(
                "feature dimension must be positive".into(),
            ));
        }
        if features.len() != dim * targets.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * targets.len(),
                found: features.len(),
            });
        }
        if task == Task::Classification {
            if let Some(bad) = targets.iter().find(|&&y| y != 1.0 && y != -1.0) {
                return Err(Error::InvalidInput(format!(
                    "classification labels must be +1 or -1, got {bad}"
                )));
            }
        }
        Ok(Dataset {
            task,
            dim,
            features,
            targets,
            normalization: None,
        })
    }

    pub fn from_rows(task: Task, rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        let dim = rows.first().map(|r| r.0.len()).unwrap_or(0);
        let mut features = Vec::with_capacity(rows.len() * dim);
        for (x, _) in rows {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
            features.extend_from_slice(x);
        }
        Self::new(task, dim, features, rows.iter().map(|r| r.1).collect())
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Feature dimension, including the bias column once a classification set is normalized.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.targets[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.features
            .chunks_exact(self.dim)
            .zip(self.targets.iter().copied())
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    /// Rows `indices` as a new dataset with the same task and normalization.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.x(i));
            targets.push(self.y(i));
        }
        Dataset {
            task: self.task,
            dim: self.dim,
            features,
            targets,
            normalization: self.normalization.clone(),
        }
    }

    /// The joint vector `[x, y]` seen by the regression hash.
    pub fn joint(&self, i: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim + 1);
        v.extend_from_slice(self.x(i));
        v.push(self.y(i));
        v
    }

    /// Sketch family matching the task.
    pub fn family(&self) -> HashFamily {
        match self.task {
            Task::Regression => HashFamily::PrpRegression,
            Task::Classification => HashFamily::Classification,
        }
    }

    /// Dimension of the augmented vectors this dataset inserts.
    pub fn sketch_dim(&self) -> usize {
        match self.task {
            Task::Regression => self.dim + 2,
            Task::Classification => self.dim + 1,
        }
    }

    pub fn hash_config(&self, bits: u8, seed: u64) -> Result<HashConfig> {
        HashConfig::new(self.family(), bits, self.sketch_dim() as u32, seed)
    }

    /// Augmented vector for row `i`. Requires a normalized dataset.
    pub fn sketch_item(&self, i: usize) -> Result<Vec<f64>> {
        match self.task {
            Task::Regression => augment_data(&self.joint(i)),
            Task::Classification => {
                if self.normalization.is_none() {
                    return Err(Error::InvalidInput(
                        "classification data must be normalized (bias column appended) before sketching"
                            .into(),
                    ));
                }
                classification_transform(self.x(i), self.y(i))
            }
        }
    }

    /// Vector whose norm the normalizer bounds: `[x, y]` or the bias-augmented `x`.
    fn bounded_vector(&self, i: usize) -> Vec<f64> {
        match self.task {
            Task::Regression => self.joint(i),
            Task::Classification => self.x(i).to_vec(),
        }
    }

    /// SHA-256 over the little-endian bytes of every feature and target.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (x, y) in self.rows() {
            for v in x {
                hasher.update(v.to_le_bytes());
            }
            hasher.update(y.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Mean squared error of the through-origin model `theta` on this dataset.
    pub fn mse(&self, theta: &[f64]) -> f64 {
        let sum: f64 = self
            .rows()
            .map(|(x, y)| {
                let r = y - crate::linalg::dot(x, theta);
                r * r
            })
            .sum();
        sum / self.len() as f64
    }
}

/// Reads a numeric CSV. Every cell must parse as `f64`.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, options)
}

pub fn read_csv<R: std::io::Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header_offset = usize::from(options.has_header);
    let mut width = None;
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1 + header_offset;
        let record = record.map_err(|e| Error::Csv {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let cols = record.len();
        let expected = *width.get_or_insert(cols);
        if cols != expected {
            return Err(Error::Csv {
                row,
                column: cols,
                message: format!("expected {expected} columns, found {cols}"),
            });
        }
        let target = options.target_column.unwrap_or(cols.saturating_sub(1));
        if cols < 2 || target >= cols {
            return Err(Error::Csv {
                row,
                column: target + 1,
                message: format!("target column {target} unavailable in a {cols}-column row"),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Csv {
                row,
                column: j + 1,
                message: format!("non-numeric cell {cell:?}"),
            })?;
            if j == target {
                targets.push(value);
            } else {
                features.push(value);
            }
        }
    }
    let Some(width) = width else {
        return Err(Error::InvalidInput("csv contains no data rows".into()));
    };
    Dataset::new(options.task, width - 1, features, targets)
}

/// Writes `x_1..x_d, y` rows without a header.
pub fn write_csv<W: std::io::Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for (x, y) in dataset.rows() {
        let mut record: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
        record.push(format!("{y:?}"));
        w.write_record(&record).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

fn with_bias(dataset: &Dataset) -> Dataset {
    let d = dataset.dim;
    let mut features = Vec::with_capacity(dataset.len() * (d + 1));
    for x in dataset.features.chunks_exact(d) {
        features.extend_from_slice(x);
        features.push(-1.0);
    }
    Dataset {
        task: dataset.task,
        dim: d + 1,
        features,
        targets: dataset.targets.clone(),
        normalization: None,
    }
}

fn apply_scale(dataset: &mut Dataset, scale: f64) {
    for v in &mut dataset.features {
        *v *= scale;
    }
    if dataset.task == Task::Regression {
        for y in &mut dataset.targets {
            *y *= scale;
        }
    }
}

/// Two-pass normalization: scales every row by `c_max / max_i |row_i|`.
///
/// Regression rows are `[x, y]`, so a through-origin model fitted on the
/// scaled data is also the model for the raw data. Classification rows get a
/// `-1` bias column appended before scaling.
pub fn normalize(dataset: &Dataset, c_max: f64) -> Result<Dataset> {
    check_c_max(c_max)?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput(
            "cannot normalize an empty dataset".into(),
        ));
    }
    if dataset.normalization.is_some() {
        return Err(Error::InvalidInput("dataset is already normalized".into()));
    }
    let source_digest = dataset.digest();
    let raw_dim = dataset.dim;
    let mut out = match dataset.task {
        Task::Regression => dataset.clone(),
        Task::Classification => with_bias(dataset),
    };
    let max_norm = (0..out.len())
        .map(|i| norm(&out.bounded_vector(i)))
        .fold(0.0, f64::max);
    if max_norm == 0.0 || !max_norm.is_finite() {
        return Err(Error::DegenerateData(format!(
            "maximum row norm is {max_norm}"
        )));
    }
    let scale = c_max / max_norm;
    apply_scale(&mut out, scale);
    out.normalization = Some(Normalization {
        scale,
        c_max,
        raw_dim,
        bias: (dataset.task == Task::Classification).then_some(-scale),
        clipped: 0,
        source_digest,
    });
    Ok(out)
}

/// One-pass normalization against an a-priori norm bound.
///
/// Rows are scaled by `c_max / bound`; rows that still land outside the
/// `c_max` ball are pulled back onto it and counted in [`Normalization::clipped`].
pub fn normalize_bounded(dataset: &Dataset, bound: f64, c_max: f64) -> Result<Dataset> {
    check_c_max(c_max)?;
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "norm bound must be positive, got {bound}"
        )));
    }
    if dataset.normalization.is_some() {
        return Err(Error::InvalidInput("dataset is already normalized".into()));
    }
    let source_digest = dataset.digest();
    let raw_dim = dataset.dim;
    let mut out = match dataset.task {
        Task::Regression => dataset.clone(),
        Task::Classification => with_bias(dataset),
    };
    let scale = c_max / bound;
    apply_scale(&mut out, scale);
    let mut clipped = 0;
    for i in 0..out.len() {
        let n = norm(&out.bounded_vector(i));
        if n > c_max {
            clipped += 1;
            let shrink = c_max / n;
            let d = out.dim;
            for v in &mut out.features[i * d..(i + 1) * d] {
                *v *= shrink;
            }
            if out.task == Task::Regression {
                out.targets[i] *= shrink;
            }
        }
    }
    out.normalization = Some(Normalization {
        scale,
        c_max,
        raw_dim,
        bias: (dataset.task == Task::Classification).then_some(-scale),
        clipped,
        source_digest,
    });
    Ok(out)
}

fn check_c_max(c_max: f64) -> Result<()> {
    if !(c_max > 0.0 && c_max < 1.0) {
        return Err(Error::InvalidInput(format!(
            "c_max must lie in (0, 1), got {c_max}"
        )));
    }
    Ok(())
}
