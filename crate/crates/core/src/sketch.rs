//! The count sketch: an `R x B` array of `u32` counters indexed by `R`
//! independently seeded hash functions.
//!
//! Inserting an example increments one bucket per row (two for the paired
//! family). Querying with a vector returns the mean count at the buckets the
//! query hashes to, which estimates the sum over the dataset of the
//! query/data collision probabilities.
//!
//! Sketches built from the same [`HashConfig`] and row count share their hash
//! functions, so they can be merged by adding counters. Merging per-shard
//! sketches gives exactly the sketch of the concatenated stream.
//!
//! # Binary format
//!
//! Little-endian, 36-byte header followed by `R * B` row-major `u32` counts:
//!
//! | offset | size | field        |
//! |--------|------|--------------|
//! | 0      | 4    | magic `STRM` |
//! | 4      | 2    | version (1)  |
//! | 6      | 1    | family       |
//! | 7      | 1    | bits `p`     |
//! | 8      | 4    | `d_aug`      |
//! | 12     | 4    | rows `R`     |
//! | 16     | 4    | buckets `B`  |
//! | 20     | 8    | master seed  |
//! | 28     | 8    | inserts `N`  |

use std::io::{Read, Write};

use log::warn;

use crate::error::{Error, FieldList, ParseError, Result};
use crate::lsh::{HashConfig, HashEnsemble, HashFamily};

pub const MAGIC: [u8; 4] = *b"STRM";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 36;
/// Default cap on counter storage for [`Sketch::new`].
pub const DEFAULT_MEMORY_CAP: u64 = 1 << 30;

/// How the per-row counts at the query buckets are reduced to one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// Plain mean over rows.
    #[default]
    Mean,
    /// Median of the means of `groups` contiguous row groups.
    MedianOfMeans { groups: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEstimate {
    /// Estimated mean loss over the inserted examples.
    pub value: f64,
    pub raw_mean_count: f64,
    pub rows_used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sketch {
    ensemble: HashEnsemble,
    buckets: usize,
    counts: Vec<u32>,
    inserted: u64,
    saturated: bool,
}

impl Sketch {
    pub fn new(config: HashConfig, rows: usize) -> Result<Self> {
        Self::with_memory_cap(config, rows, DEFAULT_MEMORY_CAP)
    }

    /// Fails with [`Error::Capacity`] when `rows * buckets * 4` exceeds `cap_bytes`.
    pub fn with_memory_cap(config: HashConfig, rows: usize, cap_bytes: u64) -> Result<Self> {
        config.validate()?;
        let buckets = config.buckets();
        let requested = (rows as u64)
            .checked_mul(buckets as u64)
            .and_then(|c| c.checked_mul(4))
            .unwrap_or(u64::MAX);
        if requested > cap_bytes {
            return Err(Error::Capacity {
                requested,
                limit: cap_bytes,
            });
        }
        let ensemble = HashEnsemble::new(config, rows)?;
        Ok(Sketch {
            ensemble,
            buckets,
            counts: vec![0; rows * buckets],
            inserted: 0,
            saturated: false,
        })
    }

    /// Rebuilds a sketch from raw counters, regenerating its hash functions.
    pub fn from_parts(
        config: HashConfig,
        rows: usize,
        counts: Vec<u32>,
        inserted: u64,
    ) -> Result<Self> {
        let mut sketch = Self::new(config, rows)?;
        if counts.len() != sketch.counts.len() {
            return Err(Error::DimensionMismatch {
                expected: sketch.counts.len(),
                found: counts.len(),
            });
        }
        sketch.counts = counts;
        sketch.inserted = inserted;
        Ok(sketch)
    }

    pub fn config(&self) -> &HashConfig {
        self.ensemble.config()
    }

    pub fn family(&self) -> HashFamily {
        self.config().family
    }

    pub fn master_seed(&self) -> u64 {
        self.config().seed
    }

    pub fn dim(&self) -> usize {
        self.config().dim as usize
    }

    pub fn rows(&self) -> usize {
        self.ensemble.len()
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn ensemble(&self) -> &HashEnsemble {
        &self.ensemble
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.counts[r * self.buckets..(r + 1) * self.buckets]
    }

    /// Serialized size: header plus 4 bytes per counter.
    pub fn memory_bytes(&self) -> usize {
        Self::footprint(self.rows(), self.buckets)
    }

    pub fn footprint(rows: usize, buckets: usize) -> usize {
        HEADER_BYTES + 4 * rows * buckets
    }

    pub fn is_saturated(&self) -> bool {
        self.saturated
    }

    /// True when every row sums to `N` times the family's increments per insert.
    /// Always holds unless a counter saturated.
    pub fn row_sums_consistent(&self) -> bool {
        let expected = self.inserted * self.family().increments_per_insert();
        (0..self.rows()).all(|r| self.row(r).iter().map(|&c| c as u64).sum::<u64>() == expected)
    }

    /// Inserts one example, already normalized and augmented for this sketch's family.
    pub fn insert(&mut self, item: &[f64]) -> Result<()> {
        if item.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: item.len(),
            });
        }
        let buckets = self.buckets;
        let paired = self.family() == HashFamily::PrpRegression;
        let mut overflow = false;
        for (r, row_hash) in self.ensemble.rows().iter().enumerate() {
            let row = &mut self.counts[r * buckets..(r + 1) * buckets];
            if paired {
                let pos = row_hash.primary.hash_unchecked(item);
                let neg = row_hash.primary.complement(pos);
                overflow |= bump(&mut row[pos as usize]);
                overflow |= bump(&mut row[neg as usize]);
            } else {
                let code = row_hash.code_unchecked(item);
                overflow |= bump(&mut row[code as usize]);
            }
        }
        if overflow && !self.saturated {
            warn!("sketch counter saturated at u32::MAX; estimates are now biased low");
            self.saturated = true;
        }
        self.inserted += 1;
        Ok(())
    }

    /// Bucket index the query vector selects in each row.
    pub fn query_codes(&self, q: &[f64]) -> Result<Vec<u32>> {
        self.check_query(q)?;
        Ok(self
            .ensemble
            .rows()
            .iter()
            .map(|h| h.code_unchecked(q))
            .collect())
    }

    /// Mean count at the query's buckets.
    pub fn query(&self, q: &[f64]) -> Result<f64> {
        self.query_with(q, Estimator::Mean)
    }

    pub fn query_with(&self, q: &[f64], estimator: Estimator) -> Result<f64> {
        if self.inserted == 0 {
            return Err(Error::EmptySketch);
        }
        let codes = self.query_codes(q)?;
        let values: Vec<f64> = codes
            .iter()
            .enumerate()
            .map(|(r, &c)| self.counts[r * self.buckets + c as usize] as f64)
            .collect();
        Ok(match estimator {
            Estimator::Mean => mean(&values),
            Estimator::MedianOfMeans { groups } => median_of_means(&values, groups)?,
        })
    }

    /// Estimated mean loss over the inserted examples.
    ///
    /// Paired sketches divide by `2N`, giving the regression surrogate.
    /// Classification sketches scale by `2^p / N`, giving the margin loss.
    /// Composed sketches divide by `N`, giving the mean product of the two
    /// component collision probabilities.
    pub fn estimate(&self, q: &[f64]) -> Result<LossEstimate> {
        self.estimate_with(q, Estimator::Mean)
    }

    pub fn estimate_with(&self, q: &[f64], estimator: Estimator) -> Result<LossEstimate> {
        let raw = self.query_with(q, estimator)?;
        let n = self.inserted as f64;
        let value = match self.family() {
            HashFamily::PrpRegression => raw / (2.0 * n),
            HashFamily::Classification => raw * (1u64 << self.config().bits) as f64 / n,
            HashFamily::Composed => raw / n,
        };
        Ok(LossEstimate {
            value,
            raw_mean_count: raw,
            rows_used: self.rows(),
        })
    }

    /// Header fields that prevent `self` and `other` from being merged.
    pub fn incompatibilities(&self, other: &Sketch) -> Vec<&'static str> {
        let (a, b) = (self.config(), other.config());
        let mut fields = Vec::new();
        if a.family != b.family {
            fields.push("family");
        }
        if a.bits != b.bits {
            fields.push("bits");
        }
        if a.dim != b.dim {
            fields.push("d_aug");
        }
        if self.rows() != other.rows() {
            fields.push("rows");
        }
        if self.buckets != other.buckets {
            fields.push("buckets");
        }
        if a.seed != b.seed {
            fields.push("master_seed");
        }
        fields
    }

    /// Adds `other`'s counters into `self`.
    pub fn merge_from(&mut self, other: &Sketch) -> Result<()> {
        let diff = self.incompatibilities(other);
        if !diff.is_empty() {
            return Err(Error::Incompatible(FieldList(diff)));
        }
        let mut overflow = false;
        for (c, &o) in self.counts.iter_mut().zip(&other.counts) {
            let (sum, over) = c.overflowing_add(o);
            *c = if over { u32::MAX } else { sum };
            overflow |= over;
        }
        if overflow && !self.saturated {
            warn!("sketch counter saturated while merging");
        }
        self.saturated |= overflow || other.saturated;
        self.inserted += other.inserted;
        Ok(())
    }

    pub fn merge(&self, other: &Sketch) -> Result<Sketch> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.memory_bytes());
        let config = self.config();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(config.family.code());
        out.push(config.bits);
        out.extend_from_slice(&config.dim.to_le_bytes());
        out.extend_from_slice(&(self.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(self.buckets as u32).to_le_bytes());
        out.extend_from_slice(&config.seed.to_le_bytes());
        out.extend_from_slice(&self.inserted.to_le_bytes());
        for c in &self.counts {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(ParseError::Truncated {
                expected: HEADER_BYTES,
                found: bytes.len(),
            }
            .into());
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());

        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(ParseError::BadMagic(magic).into());
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(ParseError::UnsupportedVersion(version).into());
        }
        let family = HashFamily::from_code(bytes[6]).ok_or(ParseError::UnknownFamily(bytes[6]))?;
        let config = HashConfig {
            family,
            bits: bytes[7],
            dim: u32_at(8),
            seed: u64_at(20),
        };
        config
            .validate()
            .map_err(|e| ParseError::InvalidHeader(e.to_string()))?;
        let rows = u32_at(12) as usize;
        let buckets = u32_at(16) as usize;
        if rows == 0 {
            return Err(ParseError::InvalidHeader("zero rows".into()).into());
        }
        if buckets != config.buckets() {
            return Err(ParseError::InvalidHeader(format!(
                "bucket count {buckets} does not match family/bits ({})",
                config.buckets()
            ))
            .into());
        }
        let inserted = u64_at(28);
        let expected = Self::footprint(rows, buckets);
        if bytes.len() < expected {
            return Err(ParseError::Truncated {
                expected,
                found: bytes.len(),
            }
            .into());
        }
        if bytes.len() > expected {
            return Err(ParseError::InvalidHeader(format!(
                "{} trailing bytes after counters",
                bytes.len() - expected
            ))
            .into());
        }
        let counts = bytes[HEADER_BYTES..]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_parts(config, rows, counts, inserted)
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut reader: R) -> Result<Self> {
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.len(),
            });
        }
        Ok(())
    }
}

/// `w1 * estimate(s1, q) + w2 * estimate(s2, q)`: a linear combination of the
/// losses the two sketches estimate.
pub fn combine_weighted(s1: &Sketch, w1: f64, s2: &Sketch, w2: f64, q: &[f64]) -> Result<f64> {
    Ok(w1 * s1.estimate(q)?.value + w2 * s2.estimate(q)?.value)
}

fn bump(counter: &mut u32) -> bool {
    match counter.checked_add(1) {
        Some(v) => {
            *counter = v;
            false
        }
        None => true,
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median_of_means(values: &[f64], groups: usize) -> Result<f64> {
    if groups == 0 || groups > values.len() {
        return Err(Error::InvalidInput(format!(
            "median-of-means needs between 1 and {} groups, got {groups}",
            values.len()
        )));
    }
    let size = values.len() / groups;
    let mut means: Vec<f64> = (0..groups)
        .map(|g| {
            let end = if g + 1 == groups {
                values.len()
            } else {
                (g + 1) * size
            };
            mean(&values[g * size..end])
        })
        .collect();
    means.sort_by(|a, b| a.total_cmp(b));
    let mid = means.len() / 2;
    Ok(if means.len() % 2 == 1 {
        means[mid]
    } else {
        0.5 * (means[mid - 1] + means[mid])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsh::{augment_data, augment_query, classification_transform};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prp_config(bits: u8, dim: u32, seed: u64) -> HashConfig {
        HashConfig::new(HashFamily::PrpRegression, bits, dim, seed).unwrap()
    }

    fn random_ball_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() < 0.98 {
                return v;
            }
        }
    }

    #[test]
    fn new_sketch_is_zeroed() {
        let s = Sketch::new(prp_config(4, 3, 1), 10).unwrap();
        assert_eq!((s.rows(), s.buckets(), s.inserted()), (10, 16, 0));
        assert!(s.counts().iter().all(|&c| c == 0));
        let s = Sketch::new(prp_config(4, 3, 1), 100).unwrap();
        assert_eq!(s.memory_bytes(), 6400 + HEADER_BYTES);
    }

    #[test]
    fn memory_cap_is_enforced() {
        assert!(matches!(
            Sketch::with_memory_cap(prp_config(4, 3, 1), 100, 6399),
            Err(Error::Capacity {
                requested: 6400,
                limit: 6399
            })
        ));
        assert!(Sketch::with_memory_cap(prp_config(4, 3, 1), 100, 6400).is_ok());
        assert!(Sketch::new(prp_config(4, 3, 1), 0).is_err());
    }

    #[test]
    fn prp_insert_touches_two_buckets_per_row() {
        let mut s = Sketch::new(prp_config(4, 3, 9), 20).unwrap();
        s.insert(&augment_data(&[0.3, -0.4]).unwrap()).unwrap();
        assert_eq!(s.inserted(), 1);
        for r in 0..s.rows() {
            let row = s.row(r);
            assert_eq!(row.iter().filter(|&&c| c == 1).count(), 2);
            assert_eq!(row.iter().sum::<u32>(), 2);
        }
        assert!(s.insert(&[0.1, 0.2]).is_err());
    }

    #[test]
    fn classification_insert_touches_one_bucket_per_row() {
        let config = HashConfig::new(HashFamily::Classification, 3, 4, 2).unwrap();
        let mut s = Sketch::new(config, 15).unwrap();
        s.insert(&classification_transform(&[0.2, 0.1, -0.3], -1.0).unwrap())
            .unwrap();
        for r in 0..s.rows() {
            assert_eq!(s.row(r).iter().sum::<u32>(), 1);
            assert_eq!(s.row(r).iter().filter(|&&c| c == 1).count(), 1);
        }
    }

    #[test]
    fn row_sums_after_many_inserts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = Sketch::new(prp_config(4, 4, 3), 30).unwrap();
        for _ in 0..1000 {
            s.insert(&augment_data(&random_ball_point(&mut rng, 3)).unwrap())
                .unwrap();
        }
        for r in 0..s.rows() {
            assert_eq!(s.row(r).iter().sum::<u32>(), 2000);
        }
        assert!(s.row_sums_consistent());
    }

    #[test]
    fn query_errors_and_bounds() {
        let mut s = Sketch::new(prp_config(4, 3, 5), 25).unwrap();
        let q = augment_query(&[0.5, -1.0]).unwrap();
        assert!(matches!(s.query(&q), Err(Error::EmptySketch)));

        let forced = Sketch::from_parts(*s.config(), 25, vec![0; 25 * 16], 1).unwrap();
        assert_eq!(forced.query(&q).unwrap(), 0.0);

        s.insert(&augment_data(&[0.2, 0.7]).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let q: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v = s.query(&q).unwrap();
            assert!((0.0..=2.0).contains(&v));
        }
        assert!(s.query(&[1.0]).is_err());
    }

    #[test]
    fn median_of_means_option() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut s = Sketch::new(prp_config(4, 3, 6), 40).unwrap();
        for _ in 0..50 {
            s.insert(&augment_data(&random_ball_point(&mut rng, 2)).unwrap())
                .unwrap();
        }
        let q = augment_query(&[0.4, -1.0]).unwrap();
        assert_eq!(
            s.query_with(&q, Estimator::MedianOfMeans { groups: 1 })
                .unwrap(),
            s.query(&q).unwrap()
        );
        let mom = s
            .query_with(&q, Estimator::MedianOfMeans { groups: 5 })
            .unwrap();
        assert!((0.0..=100.0).contains(&mom));
        assert!(s
            .query_with(&q, Estimator::MedianOfMeans { groups: 0 })
            .is_err());
        assert!(s
            .query_with(&q, Estimator::MedianOfMeans { groups: 41 })
            .is_err());
        assert_eq!(median_of_means(&[1.0, 2.0, 3.0, 10.0], 4).unwrap(), 2.5);
    }

    #[test]
    fn merge_identity_doubling_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = Sketch::new(prp_config(3, 4, 77), 12).unwrap();
        for _ in 0..40 {
            s.insert(&augment_data(&random_ball_point(&mut rng, 3)).unwrap())
                .unwrap();
        }
        let empty = Sketch::new(prp_config(3, 4, 77), 12).unwrap();
        assert_eq!(s.merge(&empty).unwrap(), s);

        let doubled = s.merge(&s).unwrap();
        assert_eq!(doubled.inserted(), 80);
        assert!(doubled
            .counts()
            .iter()
            .zip(s.counts())
            .all(|(&d, &c)| d == 2 * c));

        let other = Sketch::new(prp_config(4, 4, 78), 12).unwrap();
        match s.merge(&other) {
            Err(Error::Incompatible(fields)) => {
                assert_eq!(fields.0, vec!["bits", "buckets", "master_seed"])
            }
            other => panic!("expected incompatibility, got {other:?}"),
        }
    }

    #[test]
    fn merge_saturates_instead_of_wrapping() {
        let config = prp_config(1, 2, 0);
        let a = Sketch::from_parts(config, 1, vec![u32::MAX - 1, 3], 5).unwrap();
        let b = Sketch::from_parts(config, 1, vec![5, 1], 2).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.counts(), &[u32::MAX, 4]);
        assert!(m.is_saturated());
    }

    #[test]
    fn weighted_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = Sketch::new(prp_config(4, 3, 1), 50).unwrap();
        for _ in 0..30 {
            s.insert(&augment_data(&random_ball_point(&mut rng, 2)).unwrap())
                .unwrap();
        }
        let q = augment_query(&[0.3, -1.0]).unwrap();
        let single = s.estimate(&q).unwrap().value;
        assert_eq!(combine_weighted(&s, 1.0, &s, 0.0, &q).unwrap(), single);
        assert_eq!(combine_weighted(&s, 1.0, &s, -1.0, &q).unwrap(), 0.0);
    }

    #[test]
    fn serialization_layout() {
        let s = Sketch::new(prp_config(1, 2, 0xABCD), 1).unwrap();
        let bytes = s.to_bytes();
        assert_eq!(bytes.len(), HEADER_BYTES + 8);
        assert_eq!(&bytes[0..4], b"STRM");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(bytes[6], 0);
        assert_eq!(bytes[7], 1);
        assert_eq!(&bytes[20..28], &0xABCDu64.to_le_bytes());
        assert!(bytes[HEADER_BYTES..].iter().all(|&b| b == 0));
        assert_eq!(Sketch::from_bytes(&bytes).unwrap(), s);
    }

    #[test]
    fn deserialization_errors() {
        let mut s = Sketch::new(prp_config(2, 3, 4), 3).unwrap();
        s.insert(&augment_data(&[0.1, 0.2]).unwrap()).unwrap();
        let good = s.to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            Sketch::from_bytes(&bad),
            Err(Error::Parse(ParseError::BadMagic(_)))
        ));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            Sketch::from_bytes(&bad),
            Err(Error::Parse(ParseError::UnsupportedVersion(2)))
        ));
        assert!(matches!(
            Sketch::from_bytes(&good[..good.len() - 1]),
            Err(Error::Parse(ParseError::Truncated { .. }))
        ));
        assert!(matches!(
            Sketch::from_bytes(&good[..10]),
            Err(Error::Parse(ParseError::Truncated { .. }))
        ));
        let mut bad = good.clone();
        bad[6] = 9;
        assert!(matches!(
            Sketch::from_bytes(&bad),
            Err(Error::Parse(ParseError::UnknownFamily(9)))
        ));
        let mut bad = good.clone();
        bad[16] = 5;
        assert!(matches!(
            Sketch::from_bytes(&bad),
            Err(Error::Parse(ParseError::InvalidHeader(_)))
        ));
    }
}
