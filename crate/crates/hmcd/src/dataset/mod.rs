//! Data model for multiple partially aligned social networks.
//!
//! A dataset is a list of networks plus one global user registry. Each
//! network carries per-attribute adjacency matrices over its own users and
//! over the subset of users it shares with other networks. Row and column
//! indices of every matrix follow the order of the corresponding user list.

mod adjacency;
pub mod io;

pub use adjacency::{content_adjacency, js_divergence, overlap_submatrix, topology_adjacency};

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{HmcdError, Result};

/// The two kinds of relation a network records between its users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    /// Follower/followee structure, 0/1 entries.
    Topology,
    /// Content similarity, entries in [0, 1].
    Content,
}

impl AttributeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttributeKind::Topology => "topology",
            AttributeKind::Content => "content",
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One social network: its users, the users it shares with other networks,
/// and one adjacency matrix per attribute at both scopes.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialNetwork {
    pub id: String,
    /// Global-user identifiers; position defines matrix row/column indexing.
    pub users: Vec<String>,
    /// Users also present in at least one other network, in matrix order
    /// for the overlap-scoped matrices.
    pub overlapping_users: Vec<String>,
    pub adjacency: BTreeMap<AttributeKind, Array2<f64>>,
    pub overlap_adjacency: BTreeMap<AttributeKind, Array2<f64>>,
}

impl SocialNetwork {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_overlap(&self) -> usize {
        self.overlapping_users.len()
    }

    /// Position of each overlapping user within `users`.
    pub fn overlap_indices(&self) -> Result<Vec<usize>> {
        let by_id: HashMap<&str, usize> = self
            .users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i))
            .collect();
        self.overlapping_users
            .iter()
            .map(|u| {
                by_id.get(u.as_str()).copied().ok_or_else(|| {
                    HmcdError::input(format!(
                        "network {}: overlapping user {u:?} is not in the user list",
                        self.id
                    ))
                })
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for user in &self.users {
            if seen.insert(user.as_str(), ()).is_some() {
                return Err(HmcdError::input(format!(
                    "network {}: user {user:?} listed more than once",
                    self.id
                )));
            }
        }
        let mut seen_overlap = HashMap::new();
        for user in &self.overlapping_users {
            if seen_overlap.insert(user.as_str(), ()).is_some() {
                return Err(HmcdError::input(format!(
                    "network {}: overlapping user {user:?} listed more than once",
                    self.id
                )));
            }
        }
        self.overlap_indices()?;
        if self.adjacency.keys().ne(self.overlap_adjacency.keys()) {
            return Err(HmcdError::input(format!(
                "network {}: adjacency and overlap adjacency cover different attributes",
                self.id
            )));
        }
        let (n, n_o) = (self.n_users(), self.n_overlap());
        for (scope, expect, matrices) in [
            ("adjacency", n, &self.adjacency),
            ("overlap adjacency", n_o, &self.overlap_adjacency),
        ] {
            for (kind, m) in matrices {
                if m.nrows() != expect || m.ncols() != expect {
                    return Err(HmcdError::input(format!(
                        "network {}: {kind} {scope} is {}x{}, expected {expect}x{expect}",
                        self.id,
                        m.nrows(),
                        m.ncols()
                    )));
                }
                if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(HmcdError::input(format!(
                        "network {}: {kind} {scope} has a negative or non-finite entry",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The full multi-network dataset handed to the solver.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiNetworkDataset {
    /// Distinct user identifiers across all networks; position defines the
    /// row indexing of the global consensus matrix.
    pub global_users: Vec<String>,
    pub networks: Vec<SocialNetwork>,
}

impl MultiNetworkDataset {
    pub fn n_global(&self) -> usize {
        self.global_users.len()
    }

    /// Map from global-user identifier to its row index.
    pub fn global_index(&self) -> HashMap<&str, usize> {
        self.global_users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for user in &self.global_users {
            if seen.insert(user.as_str(), ()).is_some() {
                return Err(HmcdError::input(format!(
                    "global user {user:?} listed more than once"
                )));
            }
        }
        let mut network_ids = HashMap::new();
        for network in &self.networks {
            if network_ids.insert(network.id.as_str(), ()).is_some() {
                return Err(HmcdError::input(format!(
                    "network id {:?} used more than once",
                    network.id
                )));
            }
            network.validate()?;
            for user in &network.users {
                if !seen.contains_key(user.as_str()) {
                    return Err(HmcdError::input(format!(
                        "network {}: user {user:?} is not in global_users",
                        network.id
                    )));
                }
            }
        }
        let mut membership: HashMap<&str, usize> = HashMap::new();
        for network in &self.networks {
            for user in &network.users {
                *membership.entry(user.as_str()).or_insert(0) += 1;
            }
        }
        for network in &self.networks {
            let overlapping: HashMap<&str, ()> = network
                .overlapping_users
                .iter()
                .map(|u| (u.as_str(), ()))
                .collect();
            for user in &network.users {
                if membership[user.as_str()] >= 2 && !overlapping.contains_key(user.as_str()) {
                    return Err(HmcdError::input(format!(
                        "network {}: user {user:?} is shared with another network \
                         but missing from overlapping_users",
                        network.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Hard community labels over some ordered set of entities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// Community index per entity, each in `[0, k)`.
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|l| **l >= k) {
            return Err(HmcdError::input(format!(
                "partition label {bad} out of range for k={k}"
            )));
        }
        Ok(Partition { labels, k })
    }

    /// Hard labels from a nonnegative membership matrix: each row gets the
    /// index of its largest entry, ties broken toward the lowest index.
    /// All-zero rows land in community 0 and are reported via a warning.
    pub fn from_membership(membership: &Array2<f64>) -> Self {
        let k = membership.ncols().max(1);
        let mut zero_rows = 0usize;
        let labels = membership
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0usize;
                let mut best_value = f64::NEG_INFINITY;
                for (j, v) in row.iter().enumerate() {
                    if *v > best_value {
                        best = j;
                        best_value = *v;
                    }
                }
                if best_value <= 0.0 {
                    zero_rows += 1;
                }
                best
            })
            .collect();
        if zero_rows > 0 {
            log::warn!("{zero_rows} all-zero membership rows assigned to community 0");
        }
        Partition { labels, k }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}
