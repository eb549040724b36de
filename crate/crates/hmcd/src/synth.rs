//! Synthetic multilayer benchmarks with planted communities.
//!
//! Layers share a node index space; labels are planted layer by layer with a
//! tunable copy probability, edges come from a degree-corrected block model,
//! and the three-layer carving turns index-aligned layers into a partially
//! aligned dataset in which some node copies become independent users.

use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    overlap_submatrix, AttributeKind, MultiNetworkDataset, Partition, SocialNetwork,
};
use crate::derive_seed;
use crate::error::{HmcdError, Result};
use crate::exec::{self, Execution};

/// Benchmark shape and noise knobs.
///
/// `mu` mixes within-community and community-independent edge mass (small
/// values give clean communities, 1 ignores communities entirely); `p` is
/// the probability that a node keeps its previous layer's label; expected
/// degrees are drawn from a truncated power law on `[k_min, k_max]` with
/// exponent `t_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub layers: usize,
    pub nodes_per_layer: usize,
    pub k_planted: usize,
    pub mu: f64,
    pub p: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub t_k: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Degree and mixing defaults: μ = 0.1, p = 0.7, degrees on [5, 70]
    /// with exponent −2.
    pub fn new(layers: usize, nodes_per_layer: usize, k_planted: usize) -> Self {
        SynthConfig {
            layers,
            nodes_per_layer,
            k_planted,
            mu: 0.1,
            p: 0.7,
            k_min: 5.0,
            k_max: 70.0,
            t_k: -2.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(HmcdError::input("layers must be at least 1"));
        }
        if self.nodes_per_layer == 0 {
            return Err(HmcdError::input("nodes_per_layer must be at least 1"));
        }
        if self.k_planted == 0 {
            return Err(HmcdError::input("k_planted must be at least 1"));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(HmcdError::input(format!(
                "mu must be in (0, 1], got {}",
                self.mu
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(HmcdError::input(format!("p must be in [0, 1], got {}", self.p)));
        }
        if !(self.k_min > 0.0 && self.k_min <= self.k_max) {
            return Err(HmcdError::input(format!(
                "need 0 < k_min <= k_max, got k_min={} k_max={}",
                self.k_min, self.k_max
            )));
        }
        if self.k_max >= self.nodes_per_layer as f64 {
            return Err(HmcdError::input(format!(
                "k_max={} must be below nodes_per_layer={}",
                self.k_max, self.nodes_per_layer
            )));
        }
        if !(self.t_k < 0.0) {
            return Err(HmcdError::input(format!(
                "t_k must be negative, got {}",
                self.t_k
            )));
        }
        Ok(())
    }
}

/// The planted community labels, one partition per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub layers: Vec<Partition>,
}

impl PlantedTruth {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        serde_json::to_writer_pretty(file, self).map_err(|source| HmcdError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        serde_json::from_reader(file).map_err(|source| HmcdError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Plants one partition per layer: the first layer is uniform over the
/// communities, and each later layer keeps a node's previous label with
/// probability `p` or resamples it uniformly.
pub fn plant_partitions(cfg: &SynthConfig) -> Result<PlantedTruth> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "plant/labels"));
    let mut layers: Vec<Partition> = Vec::with_capacity(cfg.layers);
    for layer in 0..cfg.layers {
        let labels = if layer == 0 {
            (0..cfg.nodes_per_layer)
                .map(|_| rng.gen_range(0..cfg.k_planted))
                .collect()
        } else {
            layers[layer - 1]
                .labels
                .iter()
                .map(|&label| {
                    if rng.gen_range(0.0..1.0) < cfg.p {
                        label
                    } else {
                        rng.gen_range(0..cfg.k_planted)
                    }
                })
                .collect()
        };
        layers.push(Partition::new(labels, cfg.k_planted)?);
    }
    Ok(PlantedTruth { layers })
}

/// Inverse CDF of the truncated power law `x^t` on `[k_min, k_max]`.
fn power_law_degree(u: f64, k_min: f64, k_max: f64, t_k: f64) -> f64 {
    let e = t_k + 1.0;
    if e.abs() < 1e-12 {
        k_min * (k_max / k_min).powf(u)
    } else {
        (k_min.powf(e) + u * (k_max.powf(e) - k_min.powf(e))).powf(1.0 / e)
    }
}

/// Samples one layer's adjacency with the default execution mode.
pub fn layer_adjacency(truth: &Partition, cfg: &SynthConfig, layer: usize) -> Result<Array2<f64>> {
    layer_adjacency_with(truth, cfg, layer, Execution::default())
}

/// Samples one layer of the degree-corrected block model.
///
/// Each node draws an expected degree from the truncated power law; the pair
/// (i, j) gets an edge with probability d_i·d_j times a rate that splits
/// `1 − mu` of the mass within the planted community (normalized by its
/// degree mass) and `mu` across the whole layer. The result is symmetric 0/1
/// with a zero diagonal, and identical in both execution modes because each
/// row samples from its own derived stream.
pub fn layer_adjacency_with(
    truth: &Partition,
    cfg: &SynthConfig,
    layer: usize,
    mode: Execution,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    let n = truth.labels.len();
    if n != cfg.nodes_per_layer {
        return Err(HmcdError::input(format!(
            "partition covers {n} nodes but the config declares {}",
            cfg.nodes_per_layer
        )));
    }
    if truth.k != cfg.k_planted {
        return Err(HmcdError::input(format!(
            "partition has k={} but the config plants {}",
            truth.k, cfg.k_planted
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("degrees/{layer}")));
    let degrees: Vec<f64> = (0..n)
        .map(|_| power_law_degree(rng.gen_range(0.0..1.0), cfg.k_min, cfg.k_max, cfg.t_k))
        .collect();
    let total_mass: f64 = degrees.iter().sum();

    let mut community_mass = vec![0.0; cfg.k_planted];
    for (&label, degree) in truth.labels.iter().zip(&degrees) {
        community_mass[label] += degree;
    }
    let empty = community_mass.iter().filter(|mass| **mass == 0.0).count();
    if empty > 0 {
        log::warn!("{empty} planted communities have no members in this layer");
    }

    let neighbors = exec::map_indexed(mode, n, |i| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("edges/{layer}/row/{i}")));
        let label = truth.labels[i];
        let mut hits = Vec::new();
        for j in (i + 1)..n {
            let mut rate = cfg.mu / total_mass;
            if truth.labels[j] == label && community_mass[label] > 0.0 {
                rate += (1.0 - cfg.mu) / community_mass[label];
            }
            let probability = (degrees[i] * degrees[j] * rate).min(1.0);
            if rng.gen_range(0.0..1.0) < probability {
                hits.push(j);
            }
        }
        hits
    });

    let mut adjacency = Array2::zeros((n, n));
    for (i, hits) in neighbors.iter().enumerate() {
        for &j in hits {
            adjacency[[i, j]] = 1.0;
            adjacency[[j, i]] = 1.0;
        }
    }
    Ok(adjacency)
}

/// How each shared node index ends up distributed over the three networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AlignmentClass {
    /// Accounts in all three networks.
    All,
    /// Accounts in networks 1 and 3; the copy in network 2 is independent.
    FirstThird,
    /// Accounts in networks 1 and 2; the copy in network 3 is independent.
    FirstSecond,
    /// Accounts in networks 2 and 3; the copy in network 1 is independent.
    SecondThird,
}

impl AlignmentClass {
    /// The network (by position) whose copy of this node is de-aligned, if
    /// any.
    fn detached_network(self) -> Option<usize> {
        match self {
            AlignmentClass::All => None,
            AlignmentClass::FirstThird => Some(1),
            AlignmentClass::FirstSecond => Some(2),
            AlignmentClass::SecondThird => Some(0),
        }
    }
}

/// Turns three index-aligned layers into a partially aligned dataset.
///
/// A quarter of the node indices stay aligned across all three networks and
/// a quarter goes to each pairwise combination; the copy left out of a pair
/// becomes an independent single-network user, so each network ends up with
/// a quarter of its users unaligned. Shared users are named `u{index}`,
/// detached copies `{network}:{index}`.
pub fn carve_partial_alignment(
    layers: &[Array2<f64>],
    truth: &PlantedTruth,
    seed: u64,
) -> Result<MultiNetworkDataset> {
    if layers.len() != 3 {
        return Err(HmcdError::input(format!(
            "carving needs exactly 3 layers, got {}",
            layers.len()
        )));
    }
    let n = layers[0].nrows();
    for (index, layer) in layers.iter().enumerate() {
        if layer.dim() != (n, n) {
            return Err(HmcdError::input(format!(
                "layer {index} has shape {:?}, expected ({n}, {n})",
                layer.dim()
            )));
        }
    }
    if n % 4 != 0 {
        return Err(HmcdError::input(format!(
            "carving needs a node count divisible by 4, got {n}"
        )));
    }
    if truth.layers.len() != layers.len()
        || truth.layers.iter().any(|p| p.labels.len() != n)
    {
        return Err(HmcdError::input(
            "planted truth does not match the layers being carved",
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "carve/classes"));
    order.shuffle(&mut rng);
    let quarter = n / 4;
    let mut classes = vec![AlignmentClass::All; n];
    for (position, &node) in order.iter().enumerate() {
        classes[node] = match position / quarter {
            0 => AlignmentClass::All,
            1 => AlignmentClass::FirstThird,
            2 => AlignmentClass::FirstSecond,
            _ => AlignmentClass::SecondThird,
        };
    }

    let network_ids = ["g1", "g2", "g3"];
    let mut networks = Vec::with_capacity(3);
    for (net_index, (id, layer)) in network_ids.iter().zip(layers).enumerate() {
        let users: Vec<String> = (0..n)
            .map(|node| {
                if classes[node].detached_network() == Some(net_index) {
                    format!("{id}:{node}")
                } else {
                    format!("u{node}")
                }
            })
            .collect();
        let overlap_positions: Vec<usize> = (0..n)
            .filter(|&node| classes[node].detached_network() != Some(net_index))
            .collect();
        let overlapping_users = overlap_positions
            .iter()
            .map(|&node| users[node].clone())
            .collect();
        networks.push(SocialNetwork {
            id: (*id).to_string(),
            users,
            overlapping_users,
            adjacency: [(AttributeKind::Topology, layer.clone())].into(),
            overlap_adjacency: [(
                AttributeKind::Topology,
                overlap_submatrix(layer, &overlap_positions),
            )]
            .into(),
        });
    }

    let mut global_users: Vec<String> = (0..n).map(|node| format!("u{node}")).collect();
    for (net_index, id) in network_ids.iter().enumerate() {
        global_users.extend(
            (0..n)
                .filter(|&node| classes[node].detached_network() == Some(net_index))
                .map(|node| format!("{id}:{node}")),
        );
    }

    let dataset = MultiNetworkDataset {
        global_users,
        networks,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Builds a fully aligned dataset from index-aligned layers: every node is
/// the same user in every network, so all users are overlapping everywhere.
pub fn aligned_dataset(layers: &[Array2<f64>]) -> Result<MultiNetworkDataset> {
    if layers.is_empty() {
        return Err(HmcdError::input("need at least one layer"));
    }
    let n = layers[0].nrows();
    for (index, layer) in layers.iter().enumerate() {
        if layer.dim() != (n, n) {
            return Err(HmcdError::input(format!(
                "layer {index} has shape {:?}, expected ({n}, {n})",
                layer.dim()
            )));
        }
    }
    let users: Vec<String> = (0..n).map(|node| format!("u{node}")).collect();
    let networks = layers
        .iter()
        .enumerate()
        .map(|(index, layer)| SocialNetwork {
            id: format!("g{}", index + 1),
            users: users.clone(),
            overlapping_users: users.clone(),
            adjacency: [(AttributeKind::Topology, layer.clone())].into(),
            overlap_adjacency: [(AttributeKind::Topology, layer.clone())].into(),
        })
        .collect();
    let dataset = MultiNetworkDataset {
        global_users: users,
        networks,
    };
    dataset.validate()?;
    Ok(dataset)
}
