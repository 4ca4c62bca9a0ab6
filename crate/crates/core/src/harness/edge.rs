//! In-process simulation of devices that sketch their own streams and forward
//! sketches along a random merge tree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::build_sketch;
use super::dataset::Dataset;
use crate::baselines::BYTES_PER_VALUE;
use crate::error::{Error, Result};
use crate::lsh::mix_seed;
use crate::optimizer::{dfo_train, OptimizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeReport {
    pub shards: usize,
    pub shard_sizes: Vec<usize>,
    /// `(sender, receiver)` device pairs in merge order.
    pub edges: Vec<(usize, usize)>,
    pub merged_equals_single: bool,
    pub sketch_bytes: usize,
    pub bytes_transmitted: usize,
    /// What shipping the raw rows would have cost at 4 bytes per value.
    pub raw_bytes: usize,
    pub theta_merged: Vec<f64>,
    pub theta_single: Vec<f64>,
}

/// Splits a normalized dataset across `shards` devices, sketches each shard
/// with the shared `seed`, merges along a random tree and trains on the result.
pub fn simulate_edge_merge(
    dataset: &Dataset,
    shards: usize,
    bits: u8,
    rows: usize,
    seed: u64,
    optimizer: &OptimizerConfig,
) -> Result<EdgeReport> {
    if shards < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 shards, got {shards}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); shards];
    for i in 0..dataset.len() {
        members[rng.random_range(0..shards)].push(i);
    }
    let shard_sizes = members.iter().map(Vec::len).collect();

    let mut pool = members
        .iter()
        .enumerate()
        .map(|(id, idx)| Ok((id, build_sketch(&dataset.subset(idx), bits, rows, seed)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut edges = Vec::with_capacity(shards - 1);
    while pool.len() > 1 {
        let from = rng.random_range(0..pool.len());
        let (sender, sketch) = pool.swap_remove(from);
        let to = rng.random_range(0..pool.len());
        pool[to].1.merge_from(&sketch)?;
        edges.push((sender, pool[to].0));
    }
    let (_, merged) = pool.pop().expect("one sketch remains");

    let single = build_sketch(dataset, bits, rows, seed)?;
    let sketch_bytes = single.memory_bytes();
    let values_per_row = dataset.dim() + 1;
    Ok(EdgeReport {
        shards,
        shard_sizes,
        bytes_transmitted: edges.len() * sketch_bytes,
        edges,
        merged_equals_single: merged == single,
        sketch_bytes,
        raw_bytes: dataset.len() * values_per_row * BYTES_PER_VALUE,
        theta_merged: dfo_train(&merged, optimizer)?.theta,
        theta_single: dfo_train(&single, optimizer)?.theta,
    })
}
