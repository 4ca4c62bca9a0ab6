//! Seeded signed-random-projection hashing.
//!
//! Every hash function is a `p x d` matrix of standard normal hyperplane
//! normals. A vector hashes to the `p`-bit sign pattern of its projections,
//! with bit `i` set iff the projection onto hyperplane `i` is strictly
//! positive. Two vectors collide on one hyperplane with probability
//! `1 - angle / pi`, so a `p`-bit code collides with probability
//! `(1 - angle / pi)^p`.
//!
//! Data and queries are mapped asymmetrically before hashing:
//! data `b` (inside the unit ball) becomes `[b, sqrt(1 - |b|^2)]` and a query
//! `q` becomes `[q, 0]`. The augmented inner product equals `<q, b>` and the
//! augmented data has unit norm, so the collision probability is a monotone
//! function of `<q, b> / |q|`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Largest code width supported for a single hash function.
pub const MAX_BITS: u8 = 30;

/// Insertion/query scheme a sketch uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashFamily {
    /// Paired random projections: data is inserted at `l(b)` and `l(-b)`,
    /// queries read a single bucket. Estimates the regression surrogate.
    PrpRegression,
    /// Asymmetric inner-product hash over label-flipped data. Estimates the
    /// classification margin loss.
    Classification,
    /// Product of two independent `p`-bit hashes joined by an injective
    /// pairing. Estimates the product of their collision probabilities.
    Composed,
}

impl HashFamily {
    pub fn code(self) -> u8 {
        match self {
            HashFamily::PrpRegression => 0,
            HashFamily::Classification => 1,
            HashFamily::Composed => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(HashFamily::PrpRegression),
            1 => Some(HashFamily::Classification),
            2 => Some(HashFamily::Composed),
            _ => None,
        }
    }

    /// Bucket increments per row for one inserted example.
    pub fn increments_per_insert(self) -> u64 {
        match self {
            HashFamily::PrpRegression => 2,
            _ => 1,
        }
    }
}

/// Everything needed to regenerate a hash ensemble bit-for-bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashConfig {
    pub family: HashFamily,
    /// Hyperplanes per hash function.
    pub bits: u8,
    /// Dimension of the augmented vectors being hashed.
    pub dim: u32,
    pub seed: u64,
}

impl HashConfig {
    pub fn new(family: HashFamily, bits: u8, dim: u32, seed: u64) -> Result<Self> {
        let config = HashConfig {
            family,
            bits,
            dim,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let max_bits = match self.family {
            HashFamily::Composed => MAX_BITS / 2,
            _ => MAX_BITS,
        };
        if self.bits == 0 || self.bits > max_bits {
            return Err(Error::InvalidInput(format!(
                "bits per hash must be in [1, {max_bits}] for {:?}, got {}",
                self.family, self.bits
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidInput(
                "hash dimension must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Buckets per row: `2^p`, or `2^p * 2^p` for the composed family.
    pub fn buckets(&self) -> usize {
        let single = 1usize << self.bits;
        match self.family {
            HashFamily::Composed => single * single,
            _ => single,
        }
    }
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `index` from a master seed.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// One signed random projection hash with `bits` hyperplanes.
#[derive(Debug, Clone, PartialEq)]
pub struct SrpHash {
    bits: u8,
    dim: usize,
    // row-major bits x dim
    normals: Vec<f64>,
}

impl SrpHash {
    /// Draws hyperplane normals from a ChaCha8 stream seeded with `seed`.
    pub fn from_seed(bits: u8, dim: usize, seed: u64) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS {
            return Err(Error::InvalidInput(format!(
                "bits per hash must be in [1, {MAX_BITS}], got {bits}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidInput(
                "hash dimension must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normals = (0..bits as usize * dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(SrpHash { bits, dim, normals })
    }

    /// Builds a hash from explicit hyperplane normals, one per row.
    pub fn from_normals(rows: &[Vec<f64>]) -> Result<Self> {
        let bits = rows.len();
        if bits == 0 || bits > MAX_BITS as usize {
            return Err(Error::InvalidInput(format!(
                "need between 1 and {MAX_BITS} hyperplanes, got {bits}"
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::InvalidInput(
                "hash dimension must be positive".into(),
            ));
        }
        let mut normals = Vec::with_capacity(bits * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            normals.extend_from_slice(row);
        }
        Ok(SrpHash {
            bits: bits as u8,
            dim,
            normals,
        })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn buckets(&self) -> usize {
        1 << self.bits
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        &self.normals[i * self.dim..(i + 1) * self.dim]
    }

    fn mask(&self) -> u32 {
        ((1u64 << self.bits) - 1) as u32
    }

    /// Sign pattern of `v`'s projections. A projection of exactly zero maps to bit 0.
    pub fn hash(&self, v: &[f64]) -> Result<u32> {
        self.check_dim(v)?;
        Ok(self.hash_unchecked(v))
    }

    pub(crate) fn hash_unchecked(&self, v: &[f64]) -> u32 {
        self.normals
            .chunks_exact(self.dim)
            .enumerate()
            .fold(0u32, |code, (i, w)| {
                if dot(w, v) > 0.0 {
                    code | (1 << i)
                } else {
                    code
                }
            })
    }

    /// Codes of `v` and `-v`. The negative code is the bitwise complement of
    /// the positive one, so the pair is always distinct.
    pub fn prp_codes(&self, v: &[f64]) -> Result<(u32, u32)> {
        let pos = self.hash(v)?;
        Ok((pos, self.complement(pos)))
    }

    pub(crate) fn complement(&self, code: u32) -> u32 {
        !code & self.mask()
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }
}

/// Hash functions for one sketch row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowHash {
    pub primary: SrpHash,
    /// Present only for the composed family.
    pub secondary: Option<SrpHash>,
}

impl RowHash {
    /// Bucket a query (or single-hash datum) falls into.
    pub(crate) fn code_unchecked(&self, v: &[f64]) -> u32 {
        let first = self.primary.hash_unchecked(v);
        match &self.secondary {
            None => first,
            Some(second) => {
                let b2 = second.buckets() as u64;
                (first as u64 * b2 + second.hash_unchecked(v) as u64) as u32
            }
        }
    }
}

/// The `R` independently seeded row hashes of a sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct HashEnsemble {
    config: HashConfig,
    rows: Vec<RowHash>,
}

impl HashEnsemble {
    /// Row `r` uses seed `mix_seed(config.seed, r)`; the composed family's
    /// two functions use `mix_seed(row_seed, 0)` and `mix_seed(row_seed, 1)`.
    pub fn new(config: HashConfig, rows: usize) -> Result<Self> {
        config.validate()?;
        if rows == 0 {
            return Err(Error::InvalidInput("sketch needs at least one row".into()));
        }
        let dim = config.dim as usize;
        let rows = (0..rows as u64)
            .map(|r| {
                let row_seed = mix_seed(config.seed, r);
                match config.family {
                    HashFamily::Composed => Ok(RowHash {
                        primary: SrpHash::from_seed(config.bits, dim, mix_seed(row_seed, 0))?,
                        secondary: Some(SrpHash::from_seed(
                            config.bits,
                            dim,
                            mix_seed(row_seed, 1),
                        )?),
                    }),
                    _ => Ok(RowHash {
                        primary: SrpHash::from_seed(config.bits, dim, row_seed)?,
                        secondary: None,
                    }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HashEnsemble { config, rows })
    }

    pub fn config(&self) -> &HashConfig {
        &self.config
    }

    pub fn rows(&self) -> &[RowHash] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Per-hyperplane SRP collision probability `1 - acos(cos angle) / pi`.
pub fn collision_probability_srp(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let (nx, ny) = (norm(x), norm(y));
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    // angle between unit vectors as 2 atan2(|u - v|, |u + v|), stable near 0 and pi
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (u, v) = (a / nx, b / ny);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    let angle = 2.0 * diff.sqrt().atan2(sum.sqrt());
    Ok(1.0 - angle.clamp(0.0, PI) / PI)
}

/// Data-side augmentation `[b, sqrt(1 - |b|^2)]`.
pub fn augment_data(b: &[f64]) -> Result<Vec<f64>> {
    let sq: f64 = b.iter().map(|v| v * v).sum();
    if sq > 1.0 + 1e-12 || !sq.is_finite() {
        return Err(Error::NormViolation { norm: sq.sqrt() });
    }
    let mut out = Vec::with_capacity(b.len() + 1);
    out.extend_from_slice(b);
    out.push((1.0 - sq).max(0.0).sqrt());
    Ok(out)
}

/// Query-side augmentation `[q, 0]`.
pub fn augment_query(q: &[f64]) -> Result<Vec<f64>> {
    if q.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVector);
    }
    let mut out = Vec::with_capacity(q.len() + 1);
    out.extend_from_slice(q);
    out.push(0.0);
    Ok(out)
}

/// Maps a bias-augmented, normalized feature vector and its `+1`/`-1` label
/// to the vector inserted into a classification sketch: `augment_data(-label * x)`.
pub fn classification_transform(x: &[f64], label: f64) -> Result<Vec<f64>> {
    if label != 1.0 && label != -1.0 {
        return Err(Error::InvalidInput(format!(
            "classification labels must be +1 or -1, got {label}"
        )));
    }
    let flipped: Vec<f64> = x.iter().map(|v| -label * v).collect();
    augment_data(&flipped)
}

/// Injective mixed-radix pairing `code1 * buckets2 + code2`.
pub fn compose_product(code1: u64, buckets1: u64, code2: u64, buckets2: u64) -> Result<u64> {
    if code1 >= buckets1 {
        return Err(Error::CodeOutOfRange {
            code: code1,
            range: buckets1,
        });
    }
    if code2 >= buckets2 {
        return Err(Error::CodeOutOfRange {
            code: code2,
            range: buckets2,
        });
    }
    buckets1
        .checked_mul(buckets2)
        .ok_or_else(|| Error::InvalidInput("composed bucket count overflows u64".into()))?;
    Ok(code1 * buckets2 + code2)
}
