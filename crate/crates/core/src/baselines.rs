//! Memory-matched comparators: uniform reservoir sampling followed by least
//! squares, and Clarkson-Woodruff count-sketch-and-solve.
//!
//! Both account 4 bytes per stored value, the same width as a sketch counter.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsh::mix_seed;
use crate::optimizer::NormalEquations;
use crate::sketch::{Sketch, HEADER_BYTES};

pub const BYTES_PER_VALUE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MemoryBudget {
    pub bytes: usize,
}

impl MemoryBudget {
    pub fn new(bytes: usize) -> Self {
        MemoryBudget { bytes }
    }

    /// Budget that holds exactly `rows` examples of `dim` features plus target.
    pub fn for_rows(rows: usize, dim: usize) -> Self {
        MemoryBudget::new(rows * BYTES_PER_VALUE * (dim + 1))
    }

    /// Examples a reservoir can retain.
    pub fn sample_capacity(&self, dim: usize) -> usize {
        self.bytes / (BYTES_PER_VALUE * (dim + 1))
    }

    /// Rows of a Clarkson-Woodruff sketch over `[X | y]`.
    pub fn cw_rows(&self, dim: usize) -> usize {
        self.sample_capacity(dim)
    }

    /// Sketch rows that fit after the serialized header.
    pub fn sketch_rows(&self, buckets: usize) -> usize {
        self.bytes.saturating_sub(HEADER_BYTES) / (BYTES_PER_VALUE * buckets)
    }

    pub fn fits_sketch(&self, sketch: &Sketch) -> bool {
        sketch.memory_bytes() <= self.bytes
    }
}

/// Single-pass uniform sample of fixed capacity (Algorithm R).
#[derive(Debug, Clone)]
pub struct Reservoir<T> {
    capacity: usize,
    seen: u64,
    items: Vec<T>,
    rng: ChaCha8Rng,
}

impl<T> Reservoir<T> {
    pub fn new(capacity: usize, seed: u64) -> Self {
        Reservoir {
            capacity,
            seen: 0,
            items: Vec::with_capacity(capacity),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn offer(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else if self.capacity > 0 {
            let j = self.rng.random_range(0..=self.seen);
            if (j as usize) < self.capacity {
                self.items[j as usize] = item;
            }
        }
        self.seen += 1;
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn into_items(self) -> Vec<T> {
        self.items
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    pub theta: Vec<f64>,
    /// Rows held in memory when solving.
    pub rows_used: usize,
    pub ridge_applied: bool,
    /// Accounted storage at 4 bytes per value.
    pub memory_bytes: usize,
}

/// Keeps a uniform sample within `budget`, then solves least squares on it.
pub fn reservoir_sample_train<'a, I>(
    stream: I,
    dim: usize,
    budget: MemoryBudget,
    seed: u64,
) -> Result<BaselineFit>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let capacity = budget.sample_capacity(dim);
    if capacity == 0 {
        return Err(Error::InvalidInput(format!(
            "budget of {} bytes cannot hold a single {dim}-feature example",
            budget.bytes
        )));
    }
    let mut reservoir = Reservoir::new(capacity, seed);
    for (x, y) in stream {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        reservoir.offer((x.to_vec(), y));
    }
    if reservoir.seen() == 0 {
        return Err(Error::InvalidInput("empty stream".into()));
    }
    let rows = reservoir.into_items();
    if rows.len() <= dim {
        warn!(
            "reservoir holds {} rows for {dim} unknowns; the fit interpolates the sample",
            rows.len()
        );
    }
    let mut eq = NormalEquations::new(dim);
    for (x, y) in &rows {
        eq.add_row(x, *y);
    }
    let sol = eq.solve()?;
    Ok(BaselineFit {
        theta: sol.theta,
        rows_used: rows.len(),
        ridge_applied: sol.ridge_applied,
        memory_bytes: rows.len() * BYTES_PER_VALUE * (dim + 1),
    })
}

/// Count-sketch embedding `S [X | y]`: every input row is added, with a
/// random sign, to one uniformly chosen output row. The row and sign depend
/// only on `(seed, stream index)`, so sketches of disjoint stream segments
/// merge by addition.
#[derive(Debug, Clone, PartialEq)]
pub struct CwSketch {
    rows: usize,
    dim: usize,
    seed: u64,
    inserted: u64,
    // rows x (dim + 1), last column is the target
    data: Vec<f64>,
}

impl CwSketch {
    pub fn new(rows: usize, dim: usize, seed: u64) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::InvalidInput(
                "CW sketch needs positive rows and dim".into(),
            ));
        }
        Ok(CwSketch {
            rows,
            dim,
            seed,
            inserted: 0,
            data: vec![0.0; rows * (dim + 1)],
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn memory_bytes(&self) -> usize {
        self.data.len() * BYTES_PER_VALUE
    }

    /// Output row and sign for stream position `index`.
    pub fn bucket(&self, index: u64) -> (usize, f64) {
        let h = mix_seed(self.seed, index);
        let row = ((h as u128 * self.rows as u128) >> 64) as usize;
        let sign = if mix_seed(h, 1) & 1 == 1 { 1.0 } else { -1.0 };
        (row, sign)
    }

    pub fn insert(&mut self, index: u64, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let (row, sign) = self.bucket(index);
        let w = self.dim + 1;
        let target = &mut self.data[row * w..(row + 1) * w];
        for (t, v) in target.iter_mut().zip(x) {
            *t += sign * v;
        }
        target[self.dim] += sign * y;
        self.inserted += 1;
        Ok(())
    }

    pub fn merge_from(&mut self, other: &CwSketch) -> Result<()> {
        if (self.rows, self.dim, self.seed) != (other.rows, other.dim, other.seed) {
            return Err(Error::InvalidInput(
                "CW sketches differ in rows, dim or seed".into(),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        self.inserted += other.inserted;
        Ok(())
    }

    /// Least squares on the sketched system.
    pub fn solve(&self) -> Result<BaselineFit> {
        let w = self.dim + 1;
        let mut eq = NormalEquations::new(self.dim);
        for row in self.data.chunks_exact(w) {
            eq.add_row(&row[..self.dim], row[self.dim]);
        }
        let sol = eq.solve()?;
        if sol.ridge_applied {
            warn!("CW sketched system is rank deficient; ridge-regularized solve");
        }
        Ok(BaselineFit {
            theta: sol.theta,
            rows_used: self.rows,
            ridge_applied: sol.ridge_applied,
            memory_bytes: self.memory_bytes(),
        })
    }
}

/// Sketches the stream with `rows` output rows and solves.
pub fn cw_sketch_train<'a, I>(stream: I, dim: usize, rows: usize, seed: u64) -> Result<BaselineFit>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    if rows < dim + 1 {
        return Err(Error::InvalidInput(format!(
            "CW sketch needs at least {} rows for {dim} features, got {rows}",
            dim + 1
        )));
    }
    let mut sketch = CwSketch::new(rows, dim, seed)?;
    for (i, (x, y)) in stream.into_iter().enumerate() {
        sketch.insert(i as u64, x, y)?;
    }
    if sketch.inserted() == 0 {
        return Err(Error::InvalidInput("empty stream".into()));
    }
    sketch.solve()
}
