//! Community quality and agreement metrics.
//!
//! Modularity scores a partition against an adjacency matrix, the overlap
//! variant restricts it to the overlapping users, compactness and density
//! score how well communities carry information and content through their
//! overlapping members, and the normalized mutual information compares two
//! partitions.

use std::collections::VecDeque;
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::align::AlignmentT;
use crate::dataset::{AttributeKind, Partition};
use crate::error::{HmcdError, Result};

fn check_square(matrix: &Array2<f64>, what: &str) -> Result<usize> {
    let (rows, cols) = matrix.dim();
    if rows != cols {
        return Err(HmcdError::input(format!(
            "{what} must be square, got {rows}×{cols}"
        )));
    }
    Ok(rows)
}

fn check_partition(part: &Partition, n: usize) -> Result<()> {
    if part.labels.len() != n {
        return Err(HmcdError::input(format!(
            "partition covers {} nodes but the matrix has {n}",
            part.labels.len()
        )));
    }
    Ok(())
}

fn overlap_flags(n: usize, overlap_indices: &[usize]) -> Result<Vec<bool>> {
    let mut flags = vec![false; n];
    for &index in overlap_indices {
        if index >= n {
            return Err(HmcdError::input(format!(
                "overlap index {index} out of range for {n} nodes"
            )));
        }
        flags[index] = true;
    }
    Ok(flags)
}

fn community_members(part: &Partition) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); part.k];
    for (node, &label) in part.labels.iter().enumerate() {
        members[label].push(node);
    }
    members
}

/// Weighted directed modularity of a partition: the within-community excess
/// of edge weight over the out-mass × in-mass expectation.
pub fn modularity(adjacency: &Array2<f64>, part: &Partition) -> Result<f64> {
    let n = check_square(adjacency, "adjacency")?;
    check_partition(part, n)?;
    let total: f64 = adjacency.sum();
    if total <= 0.0 {
        return Err(HmcdError::UndefinedMetric(
            "modularity needs a nonzero total edge weight".into(),
        ));
    }
    let out_mass = adjacency.sum_axis(ndarray::Axis(1));
    let in_mass = adjacency.sum_axis(ndarray::Axis(0));
    let mut value = 0.0;
    for community in community_members(part) {
        let mut internal = 0.0;
        let mut out_total = 0.0;
        let mut in_total = 0.0;
        for &i in &community {
            out_total += out_mass[i];
            in_total += in_mass[i];
            for &j in &community {
                internal += adjacency[[i, j]];
            }
        }
        value += internal / total - out_total * in_total / (total * total);
    }
    Ok(value)
}

/// Modularity restricted to the overlapping users: the induced submatrix is
/// scored with the labels those users carry in the full partition.
pub fn modularity_overlap(
    adjacency: &Array2<f64>,
    part: &Partition,
    overlap_indices: &[usize],
) -> Result<f64> {
    let n = check_square(adjacency, "adjacency")?;
    check_partition(part, n)?;
    overlap_flags(n, overlap_indices)?;
    if overlap_indices.is_empty() {
        return Err(HmcdError::UndefinedMetric(
            "overlap modularity needs at least one overlapping user".into(),
        ));
    }
    let sub = Array2::from_shape_fn((overlap_indices.len(), overlap_indices.len()), |(a, b)| {
        adjacency[[overlap_indices[a], overlap_indices[b]]]
    });
    let labels = overlap_indices.iter().map(|&i| part.labels[i]).collect();
    modularity(&sub, &Partition::new(labels, part.k)?)
}

/// Projects the consensus membership onto one network's users: global hard
/// labels gathered through the network's alignment.
pub fn global_partition_for_network(
    consensus: &Array2<f64>,
    alignment: &AlignmentT,
) -> Result<Partition> {
    if consensus.nrows() != alignment.n_global() {
        return Err(HmcdError::input(format!(
            "consensus has {} rows but the alignment spans {} global users",
            consensus.nrows(),
            alignment.n_global()
        )));
    }
    let global = Partition::from_membership(consensus);
    Partition::new(alignment.gather_labels(&global.labels), global.k)
}

/// Longest finite shortest-path length between community members, through
/// edges whose both endpoints are in the community. Unreachable pairs are
/// ignored; an edgeless community has diameter 0.
fn community_diameter(neighbors: &[Vec<usize>], community: &[usize], in_community: &[bool]) -> usize {
    let mut position = vec![usize::MAX; in_community.len()];
    for (local, &node) in community.iter().enumerate() {
        position[node] = local;
    }
    let mut diameter = 0;
    let mut distance = vec![usize::MAX; community.len()];
    for (start_local, &start) in community.iter().enumerate() {
        distance.fill(usize::MAX);
        distance[start_local] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            let here = distance[position[node]];
            for &next in &neighbors[node] {
                if in_community[next] && distance[position[next]] == usize::MAX {
                    distance[position[next]] = here + 1;
                    diameter = diameter.max(here + 1);
                    queue.push_back(next);
                }
            }
        }
    }
    diameter
}

/// Compactness of a partition on a topology matrix: per community, the
/// number of distinct undirected edges touching at least one overlapping
/// user, divided by the community's diameter; communities without internal
/// paths contribute 0. Directed topology is symmetrized.
pub fn compactness(
    adjacency: &Array2<f64>,
    part: &Partition,
    overlap_indices: &[usize],
) -> Result<f64> {
    let n = check_square(adjacency, "adjacency")?;
    check_partition(part, n)?;
    let overlapping = overlap_flags(n, overlap_indices)?;

    let mut neighbors = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && (adjacency[[i, j]] > 0.0 || adjacency[[j, i]] > 0.0) {
                neighbors[i].push(j);
            }
        }
    }

    let mut in_community = vec![false; n];
    let mut total = 0.0;
    for community in community_members(part) {
        if community.len() < 2 {
            continue;
        }
        in_community.fill(false);
        for &node in &community {
            in_community[node] = true;
        }
        let mut edges = 0usize;
        for &i in &community {
            for &j in &neighbors[i] {
                if j > i && in_community[j] && (overlapping[i] || overlapping[j]) {
                    edges += 1;
                }
            }
        }
        let diameter = community_diameter(&neighbors, &community, &in_community);
        if diameter > 0 {
            total += edges as f64 / diameter as f64;
        }
    }
    Ok(total)
}

/// Content density of a partition: per community, the mean similarity over
/// user pairs that include at least one overlapping user, averaged over the
/// configured community count. Asymmetric similarity entries are averaged
/// per pair.
pub fn density(
    similarity: &Array2<f64>,
    part: &Partition,
    overlap_indices: &[usize],
) -> Result<f64> {
    let n = check_square(similarity, "similarity")?;
    check_partition(part, n)?;
    let overlapping = overlap_flags(n, overlap_indices)?;
    if let Some(bad) = similarity.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(HmcdError::input(format!(
            "similarity entries must lie in [0, 1], found {bad}"
        )));
    }
    let mut total = 0.0;
    for community in community_members(part) {
        let mut pairs = 0usize;
        let mut sum = 0.0;
        for (position, &i) in community.iter().enumerate() {
            for &j in &community[position + 1..] {
                if overlapping[i] || overlapping[j] {
                    pairs += 1;
                    sum += (similarity[[i, j]] + similarity[[j, i]]) / 2.0;
                }
            }
        }
        if pairs > 0 {
            total += sum / pairs as f64;
        }
    }
    Ok(total / part.k as f64)
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information between two partitions of the same nodes:
/// plug-in mutual information over their contingency table, normalized by
/// the geometric mean of the two entropies and clamped to [0, 1].
///
/// Two single-cluster partitions agree perfectly and score 1; a single
/// cluster on only one side leaves the ratio undefined.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    if a.labels.len() != b.labels.len() {
        return Err(HmcdError::input(format!(
            "partitions cover {} and {} nodes",
            a.labels.len(),
            b.labels.len()
        )));
    }
    let n = a.labels.len();
    if n == 0 {
        return Err(HmcdError::input("cannot compare empty partitions"));
    }
    let mut joint = vec![0usize; a.k * b.k];
    let mut counts_a = vec![0usize; a.k];
    let mut counts_b = vec![0usize; b.k];
    for (&la, &lb) in a.labels.iter().zip(&b.labels) {
        joint[la * b.k + lb] += 1;
        counts_a[la] += 1;
        counts_b[lb] += 1;
    }
    let total = n as f64;
    let h_a = entropy(&counts_a, total);
    let h_b = entropy(&counts_b, total);
    if h_a == 0.0 || h_b == 0.0 {
        if h_a == 0.0 && h_b == 0.0 {
            return Ok(1.0);
        }
        return Err(HmcdError::UndefinedMetric(
            "normalized mutual information is undefined when only one side is a single cluster"
                .into(),
        ));
    }
    let mut information = 0.0;
    for la in 0..a.k {
        for lb in 0..b.k {
            let count = joint[la * b.k + lb];
            if count == 0 {
                continue;
            }
            let p = count as f64 / total;
            let pa = counts_a[la] as f64 / total;
            let pb = counts_b[lb] as f64 / total;
            information += p * (p / (pa * pb)).ln();
        }
    }
    Ok((information / (h_a * h_b).sqrt()).clamp(0.0, 1.0))
}

/// Metric values for one (network, attribute) pair. `None` marks a metric
/// that is undefined on this input (for example modularity of an empty
/// matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub network: String,
    pub attribute: AttributeKind,
    pub mod_local: Option<f64>,
    pub mod_global: Option<f64>,
    pub mod_overlap_local: Option<f64>,
    pub mod_overlap_global: Option<f64>,
    pub nmi: Option<f64>,
}

/// Network-level metric values. `nmi_planted` compares the projected global
/// partition against generated ground-truth labels and stays `None` when no
/// ground truth is available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetrics {
    pub network: String,
    pub compactness: Option<f64>,
    pub density: Option<f64>,
    #[serde(default)]
    pub nmi_planted: Option<f64>,
}

/// All metric values of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_pair: Vec<PairMetrics>,
    pub per_network: Vec<NetworkMetrics>,
}

fn push_cell(row: &mut String, value: Option<f64>) {
    match value {
        Some(v) => {
            let _ = write!(row, ",{v}");
        }
        None => row.push(','),
    }
}

impl MetricReport {
    /// Flat CSV with one row per (network, attribute); network-level values
    /// repeat on each of that network's rows and undefined metrics leave
    /// empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "network,attribute,mod_local,mod_global,mod_overlap_local,mod_overlap_global,nmi,compactness,density,nmi_planted\n",
        );
        for pair in &self.per_pair {
            let network = self
                .per_network
                .iter()
                .find(|network| network.network == pair.network);
            let mut row = format!("{},{}", pair.network, pair.attribute);
            push_cell(&mut row, pair.mod_local);
            push_cell(&mut row, pair.mod_global);
            push_cell(&mut row, pair.mod_overlap_local);
            push_cell(&mut row, pair.mod_overlap_global);
            push_cell(&mut row, pair.nmi);
            push_cell(&mut row, network.and_then(|n| n.compactness));
            push_cell(&mut row, network.and_then(|n| n.density));
            push_cell(&mut row, network.and_then(|n| n.nmi_planted));
            row.push('\n');
            out.push_str(&row);
        }
        out
    }
}
