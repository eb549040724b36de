//! The factorization engine: each network attribute matrix is approximated
//! by a nonnegative product membership · relation · membershipᵀ, the overlap
//! factors are tied to the full factors through the alignment selectors, and
//! a global consensus membership fuses every network's view of its users.

mod normalize;
mod objective;
mod solver;
mod updates;

pub use normalize::{column_scales, normalize_adjacency, rescale};
pub use objective::{objective, pair_objective};
pub use solver::{run_hmcd, run_hmcd_with};
pub use updates::{
    update_consensus, update_membership, update_overlap_membership, update_overlap_relation,
    update_relation, ConsensusTerm, PairOperands, PairWeights,
};

use std::collections::BTreeMap;
use std::time::Duration;

use ndarray::Array2;

use crate::dataset::AttributeKind;
use crate::error::{HmcdError, Result};

/// Weight of one objective term, uniform by default with optional
/// per-(network, attribute) overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct TermWeights {
    uniform: f64,
    overrides: BTreeMap<(String, AttributeKind), f64>,
}

impl TermWeights {
    pub fn uniform(value: f64) -> Self {
        TermWeights {
            uniform: value,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, network: &str, kind: AttributeKind, value: f64) -> Self {
        self.overrides.insert((network.to_string(), kind), value);
        self
    }

    pub fn get(&self, network: &str, kind: AttributeKind) -> f64 {
        self.overrides
            .get(&(network.to_string(), kind))
            .copied()
            .unwrap_or(self.uniform)
    }

    fn min_value(&self) -> f64 {
        self.overrides
            .values()
            .copied()
            .fold(self.uniform, f64::min)
    }
}

/// Community count, objective weights, and solver controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    /// Number of communities K.
    pub k: usize,
    /// Weight of the full-network reconstruction term.
    pub alpha: TermWeights,
    /// Weight of the overlap reconstruction term.
    pub beta: TermWeights,
    /// Weight of the overlap-consistency coupling term.
    pub gamma: TermWeights,
    /// Weight of the global consensus term.
    pub theta: TermWeights,
    pub inner_max_iters: usize,
    pub outer_max_iters: usize,
    /// Relative objective change below which a loop stops.
    pub rel_tol: f64,
    /// Floor applied to update denominators and degenerate scales.
    pub guard_eps: f64,
    /// Independent seeded starts of the whole solve; the run ending at the
    /// lowest objective is the one returned.
    pub restarts: usize,
    pub seed: u64,
}

impl Hyperparameters {
    /// Defaults everything but K: α = β = 1, γ = 0.01, θ = 0.1, 100 inner
    /// and 50 outer iterations, tolerance 1e-6, guard 1e-12, 5 restarts,
    /// seed 0.
    pub fn new(k: usize) -> Self {
        Hyperparameters {
            k,
            alpha: TermWeights::uniform(1.0),
            beta: TermWeights::uniform(1.0),
            gamma: TermWeights::uniform(0.01),
            theta: TermWeights::uniform(0.1),
            inner_max_iters: 100,
            outer_max_iters: 50,
            rel_tol: 1e-6,
            guard_eps: 1e-12,
            restarts: 5,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(HmcdError::input(format!("k must be at least 2, got {}", self.k)));
        }
        for (name, weights) in [
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("theta", &self.theta),
        ] {
            if weights.min_value() < 0.0 {
                return Err(HmcdError::input(format!("{name} weights must be nonnegative")));
            }
        }
        if !(self.rel_tol > 0.0) {
            return Err(HmcdError::input("rel_tol must be positive"));
        }
        if !(self.guard_eps > 0.0) {
            return Err(HmcdError::input("guard_eps must be positive"));
        }
        if self.restarts == 0 {
            return Err(HmcdError::input("restarts must be at least 1"));
        }
        Ok(())
    }
}

/// Factor block for one (network, attribute) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFactors {
    /// n_s×K community membership of the network's users.
    pub membership: Array2<f64>,
    /// n_{s,o}×K membership of the overlapping users.
    pub overlap_membership: Array2<f64>,
    /// K×K community relation matrix.
    pub relation: Array2<f64>,
    /// K×K relation matrix at overlap scope.
    pub overlap_relation: Array2<f64>,
}

/// All factor matrices of a run: one block per (network, attribute) plus the
/// global consensus membership.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationState {
    /// Blocks in dataset order: networks outermost, attributes innermost.
    pub keys: Vec<(String, AttributeKind)>,
    pub factors: Vec<PairFactors>,
    /// n×K membership of global users.
    pub consensus: Array2<f64>,
}

impl FactorizationState {
    /// Factor block for a (network, attribute) pair.
    pub fn pair(&self, network: &str, kind: AttributeKind) -> Option<&PairFactors> {
        self.keys
            .iter()
            .position(|(id, k)| id == network && *k == kind)
            .map(|i| &self.factors[i])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(String, AttributeKind), &PairFactors)> {
        self.keys.iter().zip(&self.factors)
    }
}

/// Objective values and timings recorded while the solver runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    /// Full objective after each outer iteration.
    pub outer_objectives: Vec<f64>,
    /// Per-pair sub-objective after each inner iteration, keyed like
    /// [`FactorizationState::keys`], one list per outer iteration flattened
    /// in order.
    pub inner_objectives: Vec<((String, AttributeKind), Vec<f64>)>,
    /// Wall time of each outer iteration.
    pub wall_times: Vec<Duration>,
}

impl ConvergenceTrace {
    /// Largest relative increase between consecutive outer objectives;
    /// 0 for traces shorter than 2.
    pub fn max_relative_increase(&self) -> f64 {
        self.outer_objectives
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(1e-30))
            .fold(0.0, f64::max)
    }
}
