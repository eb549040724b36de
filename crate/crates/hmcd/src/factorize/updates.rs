//! Multiplicative update rules for the factor matrices and the closed-form
//! consensus update.
//!
//! Every rule multiplies the current factor elementwise by a root of a
//! nonnegative numerator/denominator ratio, so nonnegativity and exact zeros
//! are preserved by construction. Denominators are floored at the guard
//! epsilon before dividing.

use ndarray::{Array1, Array2, Axis, Zip};

use super::normalize::column_scales;
use super::PairFactors;
use crate::align::{AlignmentH, AlignmentT};
use crate::error::{HmcdError, Result};

/// Objective-term weights for one (network, attribute) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Everything an update rule reads besides the factors themselves: the
/// normalized adjacency at both scopes, the alignment selectors, the term
/// weights, and the denominator guard.
#[derive(Debug, Clone, Copy)]
pub struct PairOperands<'a> {
    pub adjacency: &'a Array2<f64>,
    pub overlap_adjacency: &'a Array2<f64>,
    pub h: &'a AlignmentH,
    pub t: &'a AlignmentT,
    pub weights: PairWeights,
    pub guard_eps: f64,
}

/// `base ← base · (numer / max(denom, eps))^root`, elementwise.
fn ratio_update(base: &mut Array2<f64>, numer: &Array2<f64>, denom: &Array2<f64>, eps: f64, root: f64) {
    Zip::from(base)
        .and(numer)
        .and(denom)
        .for_each(|b, &n, &d| {
            *b *= (n / d.max(eps)).powf(root);
        });
}

fn ensure_finite(matrix: Array2<f64>, what: &str) -> Result<Array2<f64>> {
    if matrix.iter().all(|v| v.is_finite()) {
        Ok(matrix)
    } else {
        Err(HmcdError::Solver {
            iteration: 0,
            message: format!("non-finite values in {what} update"),
        })
    }
}

/// Column scale of each membership column times the relation, as a row
/// broadcastable over an n×K matrix.
pub(super) fn scale_columns(m: &Array2<f64>, scales: &Array1<f64>) -> Array2<f64> {
    m * &scales.view().insert_axis(Axis(0))
}

fn outer(col: &Array1<f64>, row: &Array1<f64>) -> Array2<f64> {
    let col = col.view().insert_axis(Axis(1));
    let row = row.view().insert_axis(Axis(0));
    &col * &row
}

/// Updates the full-network membership matrix (fourth-root rule).
pub fn update_membership(
    factors: &PairFactors,
    operands: &PairOperands<'_>,
    consensus: &Array2<f64>,
) -> Result<Array2<f64>> {
    let PairWeights { alpha, gamma, theta, .. } = operands.weights;
    let (m, h, t, eps) = (
        operands.adjacency,
        operands.h,
        operands.t,
        operands.guard_eps,
    );
    let x = &factors.membership;
    let d = &factors.relation;

    let xd = x.dot(d);
    let xdt = x.dot(&d.t());
    let overlap_scales = column_scales(&factors.overlap_membership, &factors.overlap_relation, eps);
    let overlap_scaled = scale_columns(&factors.overlap_membership, &overlap_scales);
    let numer = alpha * (m.t().dot(&xd) + m.dot(&xdt))
        + gamma * h.scatter_transpose(&overlap_scaled)
        + theta * t.gather(consensus);

    let gram = x.t().dot(x);
    let denom = alpha * (x.dot(&d.t().dot(&gram).dot(d)) + x.dot(&d.dot(&gram).dot(&d.t())))
        + gamma * h.scatter_transpose(&h.gather(x))
        + theta * x;

    let mut next = x.clone();
    ratio_update(&mut next, &numer, &denom, eps, 0.25);
    ensure_finite(next, "membership")
}

/// Updates the overlap membership matrix (fourth-root rule).
pub fn update_overlap_membership(
    factors: &PairFactors,
    operands: &PairOperands<'_>,
) -> Result<Array2<f64>> {
    let PairWeights { beta, gamma, .. } = operands.weights;
    let (m_o, h, eps) = (operands.overlap_adjacency, operands.h, operands.guard_eps);
    let x_o = &factors.overlap_membership;
    let d_o = &factors.overlap_relation;

    let xd = x_o.dot(d_o);
    let xdt = x_o.dot(&d_o.t());
    let scales = column_scales(&factors.membership, &factors.relation, eps);
    let full_scaled = scale_columns(&h.gather(&factors.membership), &scales);
    let numer = beta * (m_o.t().dot(&xd) + m_o.dot(&xdt)) + gamma * &full_scaled;

    let gram = x_o.t().dot(x_o);
    let denom = beta
        * (x_o.dot(&d_o.t().dot(&gram).dot(d_o)) + x_o.dot(&d_o.dot(&gram).dot(&d_o.t())))
        + gamma * x_o;

    let mut next = x_o.clone();
    ratio_update(&mut next, &numer, &denom, eps, 0.25);
    ensure_finite(next, "overlap membership")
}

/// Updates the community relation matrix (square-root rule).
///
/// The coupling and consensus contributions enter through the column sums of
/// the membership factors, weighted by the current column scales.
pub fn update_relation(
    factors: &PairFactors,
    operands: &PairOperands<'_>,
    consensus: &Array2<f64>,
) -> Result<Array2<f64>> {
    let PairWeights { alpha, gamma, theta, .. } = operands.weights;
    let (m, h, t, eps) = (
        operands.adjacency,
        operands.h,
        operands.t,
        operands.guard_eps,
    );
    let x = &factors.membership;
    let d = &factors.relation;
    let x_o = &factors.overlap_membership;

    let scales = column_scales(x, d, eps);
    let overlap_scales = column_scales(x_o, &factors.overlap_relation, eps);
    let x_colsum = x.sum_axis(Axis(0));
    let hx = h.gather(x);

    let coupling_numer = (&hx * x_o).sum_axis(Axis(0)) * &overlap_scales;
    let consensus_numer = (x * &t.gather(consensus)).sum_axis(Axis(0));
    let numer = alpha * x.t().dot(m).dot(x)
        + gamma * outer(&x_colsum, &coupling_numer)
        + theta * outer(&x_colsum, &consensus_numer);

    let gram = x.t().dot(x);
    let coupling_denom = hx.mapv(|v| v * v).sum_axis(Axis(0)) * &scales;
    let consensus_denom = x.mapv(|v| v * v).sum_axis(Axis(0)) * &scales;
    let denom = alpha * gram.dot(d).dot(&gram)
        + gamma * outer(&x_colsum, &coupling_denom)
        + theta * outer(&x_colsum, &consensus_denom);

    let mut next = d.clone();
    ratio_update(&mut next, &numer, &denom, eps, 0.5);
    ensure_finite(next, "relation")
}

/// Updates the overlap relation matrix (square-root rule).
pub fn update_overlap_relation(
    factors: &PairFactors,
    operands: &PairOperands<'_>,
) -> Result<Array2<f64>> {
    let PairWeights { beta, gamma, .. } = operands.weights;
    let (m_o, h, eps) = (operands.overlap_adjacency, operands.h, operands.guard_eps);
    let x_o = &factors.overlap_membership;
    let d_o = &factors.overlap_relation;

    let scales = column_scales(&factors.membership, &factors.relation, eps);
    let overlap_scales = column_scales(x_o, d_o, eps);
    let colsum = x_o.sum_axis(Axis(0));
    let hx = h.gather(&factors.membership);

    let coupling_numer = (&hx * x_o).sum_axis(Axis(0)) * &scales;
    let numer = beta * x_o.t().dot(m_o).dot(x_o) + gamma * outer(&colsum, &coupling_numer);

    let gram = x_o.t().dot(x_o);
    let coupling_denom = x_o.mapv(|v| v * v).sum_axis(Axis(0)) * &overlap_scales;
    let denom = beta * gram.dot(d_o).dot(&gram) + gamma * outer(&colsum, &coupling_denom);

    let mut next = d_o.clone();
    ratio_update(&mut next, &numer, &denom, eps, 0.5);
    ensure_finite(next, "overlap relation")
}

/// One network's contribution to the consensus update.
pub struct ConsensusTerm<'a> {
    pub membership: &'a Array2<f64>,
    pub relation: &'a Array2<f64>,
    pub t: &'a AlignmentT,
    pub theta: f64,
}

/// Closed-form consensus update: each global user's row is the θ-weighted
/// mean of the scaled membership rows of that user's accounts.
///
/// Rows of users covered by no term keep an all-zero row; their count is
/// reported through a warning.
pub fn update_consensus(
    terms: &[ConsensusTerm<'_>],
    n_global: usize,
    k: usize,
    guard_eps: f64,
) -> Array2<f64> {
    let mut numer = Array2::zeros((n_global, k));
    let mut denom = vec![0.0; n_global];
    for term in terms {
        let scales = column_scales(term.membership, term.relation, guard_eps);
        let scaled = scale_columns(term.membership, &scales);
        numer += &(term.theta * term.t.scatter_transpose(&scaled));
        for (covered, total) in term.t.covers().iter().zip(&mut denom) {
            if *covered {
                *total += term.theta;
            }
        }
    }
    let mut uncovered = 0usize;
    for (mut row, total) in numer.rows_mut().into_iter().zip(&denom) {
        if *total > 0.0 {
            row.mapv_inplace(|v| v / total);
        } else {
            row.fill(0.0);
            uncovered += 1;
        }
    }
    if uncovered > 0 {
        log::warn!("{uncovered} global users appear in no weighted network; consensus rows zeroed");
    }
    numer
}
