//! Adjacency and factor normalization.

use ndarray::{Array1, Array2};

/// Normalizes an adjacency matrix for factorization: each nonzero row is
/// scaled to sum 1, then the whole matrix is scaled to total sum 1.
///
/// An all-zero matrix is returned unchanged; the second value reports that
/// case so callers can warn.
pub fn normalize_adjacency(m: &Array2<f64>) -> (Array2<f64>, bool) {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let sum = row.sum();
        if sum > 0.0 {
            row.mapv_inplace(|v| v / sum);
        }
    }
    let total = out.sum();
    if total == 0.0 {
        return (out, true);
    }
    out.mapv_inplace(|v| v / total);
    (out, false)
}

/// Column sums of `membership · relation`, the diagonal that rescales
/// membership columns to unit mass. A column whose mass is at or below
/// `guard_eps` gets scale 1 and is left untouched; inverting a microscopic
/// mass would blow the relation matrix up instead of normalizing anything.
pub fn column_scales(
    membership: &Array2<f64>,
    relation: &Array2<f64>,
    guard_eps: f64,
) -> Array1<f64> {
    let product = membership.dot(relation);
    let mut scales = product.sum_axis(ndarray::Axis(0));
    scales.mapv_inplace(|v| if v > guard_eps { v } else { 1.0 });
    scales
}

/// Rescales a factor pair in place: membership columns are multiplied by the
/// column scales and the relation matrix absorbs the inverse on both sides,
/// leaving membership · relation · membershipᵀ unchanged.
pub fn rescale(membership: &mut Array2<f64>, relation: &mut Array2<f64>, guard_eps: f64) {
    let scales = column_scales(membership, relation, guard_eps);
    for (mut column, scale) in membership.columns_mut().into_iter().zip(&scales) {
        column.mapv_inplace(|v| v * scale);
    }
    for ((row, col), value) in relation.indexed_iter_mut() {
        *value /= scales[row] * scales[col];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const GUARD: f64 = 1e-12;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(0.0..1.0))
    }

    #[test]
    fn uniform_matrix_normalizes_to_uniform() {
        let (out, zero) = normalize_adjacency(&array![[1.0, 1.0], [1.0, 1.0]]);
        assert!(!zero);
        assert_eq!(out, array![[0.25, 0.25], [0.25, 0.25]]);
    }

    #[test]
    fn single_entry_normalizes_to_one() {
        let (out, zero) = normalize_adjacency(&array![[2.0, 0.0], [0.0, 0.0]]);
        assert!(!zero);
        assert_eq!(out, array![[1.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn zero_rows_stay_zero() {
        let (out, zero) = normalize_adjacency(&array![[1.0, 3.0], [0.0, 0.0]]);
        assert!(!zero);
        assert_eq!(out, array![[0.25, 0.75], [0.0, 0.0]]);
    }

    #[test]
    fn all_zero_matrix_is_flagged() {
        let m = Array2::zeros((3, 3));
        let (out, zero) = normalize_adjacency(&m);
        assert!(zero);
        assert_eq!(out, m);
    }

    #[test]
    fn normalized_total_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (out, _) = normalize_adjacency(&random_matrix(&mut rng, 6, 6));
        assert_abs_diff_eq!(out.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_membership_reads_scales_off_relation() {
        let scales = column_scales(
            &Array2::from_diag_elem(2, 1.0),
            &Array2::from_diag(&array![2.0, 3.0]),
            GUARD,
        );
        assert_eq!(scales, array![2.0, 3.0]);
    }

    #[test]
    fn massless_columns_are_left_unscaled() {
        let scales = column_scales(&Array2::from_diag_elem(2, 1.0), &Array2::zeros((2, 2)), GUARD);
        assert_eq!(scales, array![1.0, 1.0]);
        let mut membership = Array2::from_diag_elem(2, 1.0);
        let mut relation = Array2::<f64>::zeros((2, 2));
        rescale(&mut membership, &mut relation, GUARD);
        assert_eq!(membership, Array2::from_diag_elem(2, 1.0));
        assert_eq!(relation, Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn scales_match_dense_column_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let membership = random_matrix(&mut rng, 3, 2);
        let relation = random_matrix(&mut rng, 2, 2);
        let scales = column_scales(&membership, &relation, GUARD);
        for l in 0..2 {
            let mut expected = 0.0;
            for i in 0..3 {
                for j in 0..2 {
                    expected += membership[[i, j]] * relation[[j, l]];
                }
            }
            assert_abs_diff_eq!(scales[l], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn scaled_columns_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut membership = random_matrix(&mut rng, 5, 3);
        let mut relation = random_matrix(&mut rng, 3, 3);
        rescale(&mut membership, &mut relation, GUARD);
        let sums = membership.dot(&relation).sum_axis(ndarray::Axis(0));
        for sum in sums {
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn diagonal_example() {
        let mut membership = Array2::from_diag_elem(2, 1.0);
        let mut relation = Array2::from_diag(&array![2.0, 3.0]);
        rescale(&mut membership, &mut relation, GUARD);
        assert_abs_diff_eq!(membership[[0, 0]], 2.0);
        assert_abs_diff_eq!(membership[[1, 1]], 3.0);
        assert_abs_diff_eq!(relation[[0, 0]], 0.5);
        assert_abs_diff_eq!(relation[[1, 1]], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rescale_preserves_the_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let membership = random_matrix(&mut rng, 5, 3);
        let relation = random_matrix(&mut rng, 3, 3);
        let before = membership.dot(&relation).dot(&membership.t());
        let (mut m2, mut r2) = (membership, relation);
        rescale(&mut m2, &mut r2, GUARD);
        let after = m2.dot(&r2).dot(&m2.t());
        let diff = (&after - &before).mapv(f64::abs).sum();
        let scale = before.mapv(f64::abs).sum().max(1e-30);
        assert!(diff / scale < 1e-10, "relative drift {}", diff / scale);
    }

    #[test]
    fn rescaling_twice_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut membership = random_matrix(&mut rng, 5, 3);
        let mut relation = random_matrix(&mut rng, 3, 3);
        rescale(&mut membership, &mut relation, GUARD);
        let (m_once, r_once) = (membership.clone(), relation.clone());
        rescale(&mut membership, &mut relation, GUARD);
        let drift = (&membership - &m_once).mapv(f64::abs).sum()
            + (&relation - &r_once).mapv(f64::abs).sum();
        assert!(drift < 1e-10, "second application moved factors by {drift}");
    }
}
