//! Alignment selectors linking overlap rows to network rows and network rows
//! to global rows.
//!
//! Both alignments are 0/1 matrices with exactly one 1 per row and at most
//! one 1 per column, so they are stored as index vectors and every product
//! with them is a row gather or scatter instead of a dense multiply.

use std::collections::HashMap;

use ndarray::Array2;

use crate::dataset::SocialNetwork;
use crate::error::{HmcdError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Selector {
    /// Column selected by each row.
    targets: Vec<usize>,
    /// Column count of the equivalent dense matrix.
    width: usize,
}

impl Selector {
    fn new(targets: Vec<usize>, width: usize, what: &str) -> Result<Self> {
        let mut used = vec![false; width];
        for target in &targets {
            if *target >= width {
                return Err(HmcdError::input(format!(
                    "{what}: selected column {target} out of range for width {width}"
                )));
            }
            if std::mem::replace(&mut used[*target], true) {
                return Err(HmcdError::input(format!(
                    "{what}: column {target} selected by more than one row"
                )));
            }
        }
        Ok(Selector { targets, width })
    }

    /// Rows of `m` at the selected positions, in row order.
    fn gather(&self, m: &Array2<f64>) -> Array2<f64> {
        debug_assert_eq!(m.nrows(), self.width);
        Array2::from_shape_fn((self.targets.len(), m.ncols()), |(i, j)| {
            m[[self.targets[i], j]]
        })
    }

    /// Transpose product: scatters the rows of `m` back to their selected
    /// positions, leaving unselected rows zero.
    fn scatter_transpose(&self, m: &Array2<f64>) -> Array2<f64> {
        debug_assert_eq!(m.nrows(), self.targets.len());
        let mut out = Array2::zeros((self.width, m.ncols()));
        for (i, target) in self.targets.iter().enumerate() {
            out.row_mut(*target).assign(&m.row(i));
        }
        out
    }

    fn dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.targets.len(), self.width));
        for (i, target) in self.targets.iter().enumerate() {
            out[[i, *target]] = 1.0;
        }
        out
    }
}

/// Selector from overlap-scoped rows to network rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentH(Selector);

impl AlignmentH {
    /// Builds the selector mapping each overlapping user to its position in
    /// the network's user list.
    pub fn build(network: &SocialNetwork) -> Result<Self> {
        let targets = network.overlap_indices()?;
        Ok(AlignmentH(Selector::new(
            targets,
            network.n_users(),
            &format!("alignment H for network {}", network.id),
        )?))
    }

    pub fn n_overlap(&self) -> usize {
        self.0.targets.len()
    }

    pub fn n_users(&self) -> usize {
        self.0.width
    }

    /// `H · m`: overlap-row view of a network-row matrix.
    pub fn gather(&self, m: &Array2<f64>) -> Array2<f64> {
        self.0.gather(m)
    }

    /// `Hᵀ · m`: network-row matrix with overlap rows filled in.
    pub fn scatter_transpose(&self, m: &Array2<f64>) -> Array2<f64> {
        self.0.scatter_transpose(m)
    }

    pub fn dense(&self) -> Array2<f64> {
        self.0.dense()
    }
}

/// Selector from network rows to global rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentT(Selector);

impl AlignmentT {
    /// Builds the selector mapping each network user to its global row.
    pub fn build(network: &SocialNetwork, global_users: &[String]) -> Result<Self> {
        let global_index: HashMap<&str, usize> = global_users
            .iter()
            .enumerate()
            .map(|(i, u)| (u.as_str(), i))
            .collect();
        let targets = network
            .users
            .iter()
            .map(|u| {
                global_index.get(u.as_str()).copied().ok_or_else(|| {
                    HmcdError::input(format!(
                        "network {}: user {u:?} is not in global_users",
                        network.id
                    ))
                })
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(AlignmentT(Selector::new(
            targets,
            global_users.len(),
            &format!("alignment T for network {}", network.id),
        )?))
    }

    pub fn n_users(&self) -> usize {
        self.0.targets.len()
    }

    pub fn n_global(&self) -> usize {
        self.0.width
    }

    /// `T · m`: network-row view of a global-row matrix.
    pub fn gather(&self, m: &Array2<f64>) -> Array2<f64> {
        self.0.gather(m)
    }

    /// `Tᵀ · m`: global-row matrix with this network's rows filled in.
    pub fn scatter_transpose(&self, m: &Array2<f64>) -> Array2<f64> {
        self.0.scatter_transpose(m)
    }

    /// Diagonal of `Tᵀ·T`: whether each global user has an account here.
    pub fn covers(&self) -> Vec<bool> {
        let mut covered = vec![false; self.0.width];
        for target in &self.0.targets {
            covered[*target] = true;
        }
        covered
    }

    /// Labels for network users read off a global labelling.
    pub fn gather_labels(&self, global_labels: &[usize]) -> Vec<usize> {
        debug_assert_eq!(global_labels.len(), self.0.width);
        self.0.targets.iter().map(|t| global_labels[*t]).collect()
    }

    pub fn dense(&self) -> Array2<f64> {
        self.0.dense()
    }
}
