//! Adjacency construction from raw edges and content feature vectors.

use ndarray::Array2;

use crate::error::{HmcdError, Result};

/// Builds a 0/1 topology adjacency from an edge list.
///
/// Self-loop edges are dropped; with `directed = false` every edge is
/// mirrored so the result is symmetric.
pub fn topology_adjacency(
    edges: &[(usize, usize)],
    n_users: usize,
    directed: bool,
) -> Result<Array2<f64>> {
    let mut adjacency = Array2::zeros((n_users, n_users));
    for (source, target) in edges {
        if *source >= n_users || *target >= n_users {
            return Err(HmcdError::input(format!(
                "edge ({source}, {target}) out of range for {n_users} users"
            )));
        }
        if source == target {
            continue;
        }
        adjacency[[*source, *target]] = 1.0;
        if !directed {
            adjacency[[*target, *source]] = 1.0;
        }
    }
    Ok(adjacency)
}

/// Jensen-Shannon divergence between two probability vectors, base-2 logs,
/// so the result lies in [0, 1]. Zero-probability terms contribute 0.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut div = 0.0;
    for (a, b) in p.iter().zip(q) {
        let mid = 0.5 * (a + b);
        if *a > 0.0 {
            div += 0.5 * a * (a / mid).log2();
        }
        if *b > 0.0 {
            div += 0.5 * b * (b / mid).log2();
        }
    }
    div.clamp(0.0, 1.0)
}

/// Builds a content-similarity adjacency from per-user feature distributions.
///
/// Similarity is `10^(-JS)`, which maps divergence in [0, 1] onto [0.1, 1].
/// A pair with no topology edge keeps its similarity only when it reaches
/// `threshold`; weaker similarities without an edge are cut to 0. The
/// diagonal is always 0.
pub fn content_adjacency(
    features: &[Vec<f64>],
    topology: &Array2<f64>,
    threshold: f64,
) -> Result<Array2<f64>> {
    let n_users = features.len();
    if topology.nrows() != n_users || topology.ncols() != n_users {
        return Err(HmcdError::input(format!(
            "topology is {}x{} but {n_users} feature vectors were given",
            topology.nrows(),
            topology.ncols()
        )));
    }
    let width = features.first().map_or(0, Vec::len);
    for (i, vector) in features.iter().enumerate() {
        if vector.len() != width {
            return Err(HmcdError::input(format!(
                "feature vector {i} has length {}, expected {width}",
                vector.len()
            )));
        }
        if vector.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(HmcdError::input(format!(
                "feature vector {i} has a negative or non-finite component"
            )));
        }
        let total: f64 = vector.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(HmcdError::input(format!(
                "feature vector {i} sums to {total}, expected 1"
            )));
        }
    }

    let mut out = Array2::zeros((n_users, n_users));
    for i in 0..n_users {
        for j in (i + 1)..n_users {
            let sim = 10f64.powf(-js_divergence(&features[i], &features[j]));
            for (row, col) in [(i, j), (j, i)] {
                if topology[[row, col]] != 0.0 || sim >= threshold {
                    out[[row, col]] = sim;
                }
            }
        }
    }
    Ok(out)
}

/// Principal submatrix of `m` at `indices`, in the order given.
pub fn overlap_submatrix(m: &Array2<f64>, indices: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((indices.len(), indices.len()), |(a, b)| {
        m[[indices[a], indices[b]]]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn single_directed_edge() {
        let m = topology_adjacency(&[(0, 1)], 2, true).unwrap();
        assert_eq!(m, array![[0.0, 1.0], [0.0, 0.0]]);
    }

    #[test]
    fn undirected_edge_is_mirrored() {
        let m = topology_adjacency(&[(0, 1)], 2, false).unwrap();
        assert_eq!(m, array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn empty_edge_list_gives_zero_matrix() {
        let m = topology_adjacency(&[], 3, true).unwrap();
        assert_eq!(m, Array2::<f64>::zeros((3, 3)));
    }

    #[test]
    fn out_of_range_edge_is_rejected() {
        assert!(topology_adjacency(&[(0, 2)], 2, true).is_err());
    }

    #[test]
    fn js_of_identical_distributions_is_zero() {
        assert_abs_diff_eq!(js_divergence(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
    }

    #[test]
    fn js_of_disjoint_distributions_is_one() {
        assert_abs_diff_eq!(js_divergence(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
    }

    // Independent route: JS(p, q) = H((p+q)/2) - (H(p) + H(q)) / 2 with
    // base-2 entropies.
    fn js_via_entropy(p: &[f64], q: &[f64]) -> f64 {
        fn entropy(v: &[f64]) -> f64 {
            v.iter()
                .filter(|x| **x > 0.0)
                .map(|x| -x * x.log2())
                .sum()
        }
        let mid: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
        entropy(&mid) - 0.5 * (entropy(p) + entropy(q))
    }

    #[test]
    fn js_matches_entropy_formulation() {
        let p = [0.5, 0.5, 0.0];
        let q = [1.0, 0.0, 0.0];
        assert_abs_diff_eq!(js_divergence(&p, &q), js_via_entropy(&p, &q), epsilon = 1e-12);
        let p = [0.2, 0.3, 0.5];
        let q = [0.1, 0.6, 0.3];
        assert_abs_diff_eq!(js_divergence(&p, &q), js_via_entropy(&p, &q), epsilon = 1e-12);
    }

    #[test]
    fn identical_features_stay_connected_without_edge() {
        let features = vec![vec![0.3, 0.7], vec![0.3, 0.7]];
        let topology = Array2::zeros((2, 2));
        let out = content_adjacency(&features, &topology, 0.7).unwrap();
        assert_abs_diff_eq!(out[[0, 1]], 1.0);
        assert_abs_diff_eq!(out[[1, 0]], 1.0);
    }

    #[test]
    fn weak_similarity_without_edge_is_cut() {
        let features = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let topology = Array2::zeros((2, 2));
        let out = content_adjacency(&features, &topology, 0.7).unwrap();
        assert_eq!(out[[0, 1]], 0.0);
        assert_eq!(out[[1, 0]], 0.0);
    }

    #[test]
    fn edge_keeps_weak_similarity() {
        let features = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
        let topology = array![[0.0, 1.0], [1.0, 0.0]];
        let out = content_adjacency(&features, &topology, 0.7).unwrap();
        let expected = 10f64.powf(-js_via_entropy(&features[0], &features[1]));
        assert!(expected < 0.7, "example must sit below the threshold");
        assert_abs_diff_eq!(out[[0, 1]], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(out[[1, 0]], expected, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_is_forced_to_zero() {
        let features = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let topology = array![[1.0, 1.0], [1.0, 1.0]];
        let out = content_adjacency(&features, &topology, 0.7).unwrap();
        assert_eq!(out[[0, 0]], 0.0);
        assert_eq!(out[[1, 1]], 0.0);
    }

    #[test]
    fn unnormalized_features_are_rejected() {
        let features = vec![vec![0.5, 0.6], vec![0.5, 0.5]];
        assert!(content_adjacency(&features, &Array2::zeros((2, 2)), 0.7).is_err());
    }

    #[test]
    fn submatrix_selects_rows_and_columns() {
        let m = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];
        assert_eq!(
            overlap_submatrix(&m, &[0, 2]),
            array![[1.0, 3.0], [7.0, 9.0]]
        );
        assert_eq!(overlap_submatrix(&m, &[0, 1, 2]), m);
        assert_eq!(overlap_submatrix(&m, &[]).dim(), (0, 0));
    }
}
