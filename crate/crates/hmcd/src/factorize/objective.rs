//! Objective evaluation: the weighted sum of reconstruction, coupling, and
//! consensus residuals over every (network, attribute) pair.

use ndarray::Array2;

use super::normalize::column_scales;
use super::updates::{scale_columns, PairOperands, PairWeights};
use super::{FactorizationState, Hyperparameters, PairFactors};
use crate::align::{AlignmentH, AlignmentT};
use crate::dataset::{AttributeKind, MultiNetworkDataset};
use crate::error::{HmcdError, Result};

fn squared_frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Objective contribution of one (network, attribute) pair: the two
/// reconstruction terms plus the coupling and consensus terms, with column
/// scales recomputed from the current factors.
pub fn pair_objective(
    factors: &PairFactors,
    operands: &PairOperands<'_>,
    consensus: &Array2<f64>,
) -> f64 {
    let w = operands.weights;
    let eps = operands.guard_eps;

    let full_residual = operands.adjacency
        - &factors
            .membership
            .dot(&factors.relation)
            .dot(&factors.membership.t());
    let overlap_residual = operands.overlap_adjacency
        - &factors
            .overlap_membership
            .dot(&factors.overlap_relation)
            .dot(&factors.overlap_membership.t());

    let scales = column_scales(&factors.membership, &factors.relation, eps);
    let overlap_scales = column_scales(&factors.overlap_membership, &factors.overlap_relation, eps);
    let scaled_full = scale_columns(&factors.membership, &scales);
    let scaled_overlap = scale_columns(&factors.overlap_membership, &overlap_scales);
    let coupling_residual = operands.h.gather(&scaled_full) - &scaled_overlap;
    let consensus_residual = &scaled_full - &operands.t.gather(consensus);

    w.alpha * squared_frobenius(&full_residual)
        + w.beta * squared_frobenius(&overlap_residual)
        + w.gamma * squared_frobenius(&coupling_residual)
        + w.theta * squared_frobenius(&consensus_residual)
}

fn check_pair_shapes(
    factors: &PairFactors,
    n_users: usize,
    n_overlap: usize,
    k: usize,
    network: &str,
    kind: AttributeKind,
) -> Result<()> {
    let checks = [
        ("membership", factors.membership.dim(), (n_users, k)),
        (
            "overlap membership",
            factors.overlap_membership.dim(),
            (n_overlap, k),
        ),
        ("relation", factors.relation.dim(), (k, k)),
        ("overlap relation", factors.overlap_relation.dim(), (k, k)),
    ];
    for (name, actual, expected) in checks {
        if actual != expected {
            return Err(HmcdError::input(format!(
                "network {network} attribute {kind}: {name} has shape {actual:?}, expected {expected:?}"
            )));
        }
    }
    Ok(())
}

/// Full model objective of a state against a dataset: the sum of
/// [`pair_objective`] over every (network, attribute) pair, weighted per
/// the hyperparameters.
pub fn objective(
    state: &FactorizationState,
    dataset: &MultiNetworkDataset,
    hyper: &Hyperparameters,
) -> Result<f64> {
    let k = hyper.k;
    let n_global = dataset.n_global();
    if state.consensus.dim() != (n_global, k) {
        return Err(HmcdError::input(format!(
            "consensus has shape {:?}, expected ({n_global}, {k})",
            state.consensus.dim()
        )));
    }
    let mut pair_count = 0;
    let mut total = 0.0;
    for network in &dataset.networks {
        let h = AlignmentH::build(network)?;
        let t = AlignmentT::build(network, &dataset.global_users)?;
        for (kind, adjacency) in &network.adjacency {
            let factors = state.pair(&network.id, *kind).ok_or_else(|| {
                HmcdError::input(format!(
                    "state has no factors for network {} attribute {kind}",
                    network.id
                ))
            })?;
            check_pair_shapes(
                factors,
                network.n_users(),
                network.n_overlap(),
                k,
                &network.id,
                *kind,
            )?;
            let overlap_adjacency = network.overlap_adjacency.get(kind).ok_or_else(|| {
                HmcdError::input(format!(
                    "network {} has no overlap matrix for attribute {kind}",
                    network.id
                ))
            })?;
            let operands = PairOperands {
                adjacency,
                overlap_adjacency,
                h: &h,
                t: &t,
                weights: PairWeights {
                    alpha: hyper.alpha.get(&network.id, *kind),
                    beta: hyper.beta.get(&network.id, *kind),
                    gamma: hyper.gamma.get(&network.id, *kind),
                    theta: hyper.theta.get(&network.id, *kind),
                },
                guard_eps: hyper.guard_eps,
            };
            total += pair_objective(factors, &operands, &state.consensus);
            pair_count += 1;
        }
    }
    if state.keys.len() != pair_count {
        return Err(HmcdError::input(format!(
            "state holds {} factor blocks but the dataset defines {pair_count} pairs",
            state.keys.len()
        )));
    }
    Ok(total)
}
