//! The alternating solver: seeded restarts, per-pair inner sweeps, and the
//! shared consensus refresh, keeping the restart that ends at the lowest
//! objective.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::normalize::{normalize_adjacency, rescale};
use super::objective::pair_objective;
use super::updates::{
    update_consensus, update_membership, update_overlap_membership, update_overlap_relation,
    update_relation, ConsensusTerm, PairOperands, PairWeights,
};
use super::{ConvergenceTrace, FactorizationState, Hyperparameters, PairFactors};
use crate::align::{AlignmentH, AlignmentT};
use crate::dataset::{AttributeKind, MultiNetworkDataset};
use crate::derive_seed;
use crate::error::{HmcdError, Result};
use crate::exec::{self, Execution};

/// Read-only problem data for one (network, attribute) pair, shared by every
/// restart.
struct PairSetup {
    net_index: usize,
    key: (String, AttributeKind),
    adjacency: Array2<f64>,
    overlap_adjacency: Array2<f64>,
    weights: PairWeights,
}

/// One restart's result, kept until the lowest-objective run is chosen.
struct RestartOutcome {
    factors: Vec<PairFactors>,
    consensus: Array2<f64>,
    trace: ConvergenceTrace,
    objective: f64,
}

fn init_matrix(seed: u64, purpose: &str, rows: usize, cols: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose));
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(1e-6..1.0))
}

fn frobenius(matrix: &Array2<f64>) -> f64 {
    matrix.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scales `relation` so membership · relation · membershipᵀ has the same
/// Frobenius mass as `target`; a zero mass on either side leaves it alone.
fn match_scale(membership: &Array2<f64>, relation: &mut Array2<f64>, target: &Array2<f64>) {
    let product = membership.dot(relation).dot(&membership.t());
    let mass = frobenius(&product);
    let target_mass = frobenius(target);
    if mass > 0.0 && target_mass > 0.0 {
        relation.mapv_inplace(|v| v * target_mass / mass);
    }
}

/// Draws one pair's factors for one restart: entries uniform in [1e-6, 1),
/// then each relation block rescaled to put the initial product on the same
/// scale as the matrix it approximates.
fn init_factors(restart_seed: u64, setup: &PairSetup, k: usize) -> PairFactors {
    let prefix = format!("init/{}/{}", setup.key.0, setup.key.1);
    let n = setup.adjacency.nrows();
    let n_o = setup.overlap_adjacency.nrows();
    let mut factors = PairFactors {
        membership: init_matrix(restart_seed, &format!("{prefix}/membership"), n, k),
        overlap_membership: init_matrix(
            restart_seed,
            &format!("{prefix}/overlap_membership"),
            n_o,
            k,
        ),
        relation: init_matrix(restart_seed, &format!("{prefix}/relation"), k, k),
        overlap_relation: init_matrix(restart_seed, &format!("{prefix}/overlap_relation"), k, k),
    };
    match_scale(&factors.membership, &mut factors.relation, &setup.adjacency);
    match_scale(
        &factors.overlap_membership,
        &mut factors.overlap_relation,
        &setup.overlap_adjacency,
    );
    factors
}

/// Relative objective change, infinite when there is no finite previous
/// value to compare against.
fn relative_change(current: f64, previous: f64) -> f64 {
    if !previous.is_finite() {
        return f64::INFINITY;
    }
    (current - previous).abs() / previous.abs().max(1e-30)
}

fn stamp_iteration(err: HmcdError, outer: usize) -> HmcdError {
    match err {
        HmcdError::Solver { message, .. } => HmcdError::Solver {
            iteration: outer,
            message,
        },
        other => other,
    }
}

/// Rescales and updates the full factors, reporting the pair sub-objective
/// afterwards.
fn full_stage(
    factors: &mut PairFactors,
    operands: &PairOperands<'_>,
    consensus: &Array2<f64>,
    guard_eps: f64,
) -> Result<f64> {
    rescale(&mut factors.membership, &mut factors.relation, guard_eps);
    factors.membership = update_membership(factors, operands, consensus)?;
    factors.relation = update_relation(factors, operands, consensus)?;
    Ok(pair_objective(factors, operands, consensus))
}

/// Rescales and updates the overlap factors, reporting the pair
/// sub-objective afterwards.
fn overlap_stage(
    factors: &mut PairFactors,
    operands: &PairOperands<'_>,
    consensus: &Array2<f64>,
    guard_eps: f64,
) -> Result<f64> {
    rescale(
        &mut factors.overlap_membership,
        &mut factors.overlap_relation,
        guard_eps,
    );
    factors.overlap_membership = update_overlap_membership(factors, operands)?;
    factors.overlap_relation = update_overlap_relation(factors, operands)?;
    Ok(pair_objective(factors, operands, consensus))
}

fn ensure_finite(value: f64, key: &(String, AttributeKind)) -> Result<()> {
    if value.is_finite() {
        return Ok(());
    }
    Err(HmcdError::Solver {
        iteration: 0,
        message: format!(
            "sub-objective for network {} attribute {} became non-finite",
            key.0, key.1
        ),
    })
}

/// Runs one pair's inner loop to convergence, appending each accepted
/// sub-objective to the pair's history.
///
/// The multiplicative rules can overshoot on the coupling terms because the
/// column scales they treat as constant move with the factors. Each sweep
/// therefore tries two stages, full factors then overlap factors, and rolls
/// back any stage that raises the pair sub-objective; a rejected stage is
/// retried on the next sweep from wherever the accepted stage moved, and the
/// loop ends once a whole sweep accepts nothing. The pair's factors touch no
/// other term of the total objective, so the outer objective is
/// non-increasing by construction.
fn run_pair_inner(
    factors: &mut PairFactors,
    history: &mut Vec<f64>,
    setup: &PairSetup,
    h: &AlignmentH,
    t: &AlignmentT,
    consensus: &Array2<f64>,
    hyper: &Hyperparameters,
) -> Result<()> {
    let operands = PairOperands {
        adjacency: &setup.adjacency,
        overlap_adjacency: &setup.overlap_adjacency,
        h,
        t,
        weights: setup.weights,
        guard_eps: hyper.guard_eps,
    };
    let mut previous = pair_objective(factors, &operands, consensus);
    for _ in 0..hyper.inner_max_iters {
        let mut value = previous;

        let full_snapshot = (factors.membership.clone(), factors.relation.clone());
        let full_value = full_stage(factors, &operands, consensus, hyper.guard_eps)?;
        ensure_finite(full_value, &setup.key)?;
        if full_value > value {
            factors.membership = full_snapshot.0;
            factors.relation = full_snapshot.1;
        } else {
            value = full_value;
        }

        let overlap_snapshot = (
            factors.overlap_membership.clone(),
            factors.overlap_relation.clone(),
        );
        let overlap_value = overlap_stage(factors, &operands, consensus, hyper.guard_eps)?;
        ensure_finite(overlap_value, &setup.key)?;
        if overlap_value > value {
            factors.overlap_membership = overlap_snapshot.0;
            factors.overlap_relation = overlap_snapshot.1;
        } else {
            value = overlap_value;
        }

        if value >= previous {
            break;
        }
        history.push(value);
        let change = relative_change(value, previous);
        previous = value;
        if change < hyper.rel_tol {
            break;
        }
    }
    Ok(())
}

/// Rebuilds the consensus matrix from every pair's current factors.
fn refresh_consensus(
    blocks: &[PairFactors],
    setups: &[PairSetup],
    alignments: &[(AlignmentH, AlignmentT)],
    n_global: usize,
    k: usize,
    guard_eps: f64,
) -> Array2<f64> {
    let terms: Vec<ConsensusTerm<'_>> = blocks
        .iter()
        .zip(setups)
        .map(|(factors, setup)| ConsensusTerm {
            membership: &factors.membership,
            relation: &factors.relation,
            t: &alignments[setup.net_index].1,
            theta: setup.weights.theta,
        })
        .collect();
    update_consensus(&terms, n_global, k, guard_eps)
}

/// Runs the alternating solve once from one restart's initialization.
fn solve_single(
    restart_seed: u64,
    setups: &[PairSetup],
    alignments: &[(AlignmentH, AlignmentT)],
    hyper: &Hyperparameters,
    n_global: usize,
) -> Result<RestartOutcome> {
    let k = hyper.k;
    let mut blocks: Vec<PairFactors> = setups
        .iter()
        .map(|setup| init_factors(restart_seed, setup, k))
        .collect();
    let mut histories: Vec<Vec<f64>> = vec![Vec::new(); setups.len()];

    let mut consensus = Array2::zeros((n_global, k));
    let mut outer_objectives = Vec::new();
    let mut wall_times = Vec::new();
    let mut previous_total = f64::INFINITY;

    for outer in 0..hyper.outer_max_iters {
        let start = Instant::now();

        for idx in 0..setups.len() {
            let setup = &setups[idx];
            let (h, t) = &alignments[setup.net_index];
            run_pair_inner(
                &mut blocks[idx],
                &mut histories[idx],
                setup,
                h,
                t,
                &consensus,
                hyper,
            )
            .map_err(|err| stamp_iteration(err, outer))?;
            consensus = refresh_consensus(
                &blocks,
                setups,
                alignments,
                n_global,
                k,
                hyper.guard_eps,
            );
        }

        let mut total = 0.0;
        for (factors, setup) in blocks.iter().zip(setups) {
            let (h, t) = &alignments[setup.net_index];
            let operands = PairOperands {
                adjacency: &setup.adjacency,
                overlap_adjacency: &setup.overlap_adjacency,
                h,
                t,
                weights: setup.weights,
                guard_eps: hyper.guard_eps,
            };
            total += pair_objective(factors, &operands, &consensus);
        }
        if !total.is_finite() {
            return Err(HmcdError::Solver {
                iteration: outer,
                message: format!("objective became non-finite ({total})"),
            });
        }
        outer_objectives.push(total);
        wall_times.push(start.elapsed());

        let change = relative_change(total, previous_total);
        previous_total = total;
        if change < hyper.rel_tol {
            break;
        }
    }

    let objective = outer_objectives.last().copied().unwrap_or(f64::INFINITY);
    let trace = ConvergenceTrace {
        outer_objectives,
        inner_objectives: setups
            .iter()
            .map(|setup| setup.key.clone())
            .zip(histories)
            .collect(),
        wall_times,
    };
    Ok(RestartOutcome {
        factors: blocks,
        consensus,
        trace,
        objective,
    })
}

/// Runs the full alternating solve with the default execution mode.
pub fn run_hmcd(
    dataset: &MultiNetworkDataset,
    hyper: &Hyperparameters,
) -> Result<(FactorizationState, ConvergenceTrace)> {
    run_hmcd_with(dataset, hyper, Execution::default())
}

/// Runs the full alternating solve.
///
/// Adjacency matrices are normalized once up front. The solve then runs
/// `restarts` times (concurrently when requested), each restart drawing its
/// factors from an independent seeded stream with every relation block
/// rescaled so the initial products sit on the same scale as the matrices
/// they approximate; the consensus matrix starts at zero, so its first
/// refresh is built entirely from the factor projections. Within a restart,
/// each outer iteration walks the (network, attribute) pairs in order: a
/// pair runs its inner loop to convergence, then the consensus matrix is
/// rebuilt from all pairs' current factors, so later pairs align against an
/// estimate that already reflects earlier ones. The restart whose final
/// objective is lowest wins and its factors and trace are returned. Both
/// execution modes produce bit-identical results.
pub fn run_hmcd_with(
    dataset: &MultiNetworkDataset,
    hyper: &Hyperparameters,
    mode: Execution,
) -> Result<(FactorizationState, ConvergenceTrace)> {
    dataset.validate()?;
    hyper.validate()?;
    if dataset.networks.is_empty() {
        return Err(HmcdError::input("dataset has no networks"));
    }
    let n_global = dataset.n_global();

    let alignments = dataset
        .networks
        .iter()
        .map(|network| {
            Ok((
                AlignmentH::build(network)?,
                AlignmentT::build(network, &dataset.global_users)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut setups = Vec::new();
    let mut zero_matrices = 0usize;
    for (net_index, network) in dataset.networks.iter().enumerate() {
        for (kind, adjacency) in &network.adjacency {
            let (adjacency, zero_full) = normalize_adjacency(adjacency);
            let (overlap_adjacency, zero_overlap) =
                normalize_adjacency(&network.overlap_adjacency[kind]);
            zero_matrices += usize::from(zero_full) + usize::from(zero_overlap);
            setups.push(PairSetup {
                net_index,
                key: (network.id.clone(), *kind),
                adjacency,
                overlap_adjacency,
                weights: PairWeights {
                    alpha: hyper.alpha.get(&network.id, *kind),
                    beta: hyper.beta.get(&network.id, *kind),
                    gamma: hyper.gamma.get(&network.id, *kind),
                    theta: hyper.theta.get(&network.id, *kind),
                },
            });
        }
    }
    if setups.is_empty() {
        return Err(HmcdError::input("dataset has no attribute matrices"));
    }
    if zero_matrices > 0 {
        log::warn!("{zero_matrices} adjacency matrices are all-zero and were left unnormalized");
    }

    let restart_seeds: Vec<u64> = (0..hyper.restarts)
        .map(|r| derive_seed(hyper.seed, &format!("restart/{r}")))
        .collect();
    let outcomes = exec::map_indexed(mode, restart_seeds.len(), |r| {
        solve_single(restart_seeds[r], &setups, &alignments, hyper, n_global)
    });

    let mut best: Option<RestartOutcome> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        if best
            .as_ref()
            .map_or(true, |b| outcome.objective < b.objective)
        {
            best = Some(outcome);
        }
    }
    let best = best.expect("restart count is validated to be at least one");

    Ok((
        FactorizationState {
            keys: setups.into_iter().map(|setup| setup.key).collect(),
            factors: best.factors,
            consensus: best.consensus,
        },
        best.trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SocialNetwork;
    use ndarray::Array2;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn symmetric_random(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Array2<f64> {
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_range(0.0..1.0) < density {
                    m[[i, j]] = 1.0;
                    m[[j, i]] = 1.0;
                }
            }
        }
        m
    }

    fn overlap_block(full: &Array2<f64>, indices: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((indices.len(), indices.len()), |(i, j)| {
            full[[indices[i], indices[j]]]
        })
    }

    /// Two six-user networks sharing three users, topology only.
    fn small_dataset(seed: u64) -> MultiNetworkDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g1_users: Vec<String> = ["a", "b", "c", "d", "e", "f"]
            .iter()
            .map(|u| u.to_string())
            .collect();
        let g2_users: Vec<String> = ["d", "e", "f", "g", "h", "i"]
            .iter()
            .map(|u| u.to_string())
            .collect();
        let shared: Vec<String> = ["d", "e", "f"].iter().map(|u| u.to_string()).collect();
        let networks = [(&g1_users, [3, 4, 5]), (&g2_users, [0, 1, 2])]
            .into_iter()
            .enumerate()
            .map(|(idx, (users, overlap_positions))| {
                let adjacency = symmetric_random(&mut rng, 6, 0.5);
                let overlap = overlap_block(&adjacency, &overlap_positions);
                SocialNetwork {
                    id: format!("g{}", idx + 1),
                    users: users.clone(),
                    overlapping_users: shared.clone(),
                    adjacency: BTreeMap::from([(AttributeKind::Topology, adjacency)]),
                    overlap_adjacency: BTreeMap::from([(AttributeKind::Topology, overlap)]),
                }
            })
            .collect();
        MultiNetworkDataset {
            global_users: ["a", "b", "c", "d", "e", "f", "g", "h", "i"]
                .iter()
                .map(|u| u.to_string())
                .collect(),
            networks,
        }
    }

    fn quick_hyper(seed: u64) -> Hyperparameters {
        let mut hyper = Hyperparameters::new(2).with_seed(seed);
        hyper.inner_max_iters = 15;
        hyper.outer_max_iters = 10;
        hyper.restarts = 2;
        hyper
    }

    #[test]
    fn identical_seeds_give_identical_runs() {
        let dataset = small_dataset(1);
        let hyper = quick_hyper(7);
        let (state_a, trace_a) = run_hmcd(&dataset, &hyper).unwrap();
        let (state_b, trace_b) = run_hmcd(&dataset, &hyper).unwrap();
        assert_eq!(state_a, state_b);
        assert_eq!(trace_a.outer_objectives, trace_b.outer_objectives);
        assert_eq!(trace_a.inner_objectives, trace_b.inner_objectives);
    }

    #[test]
    fn different_seeds_give_different_factors() {
        let dataset = small_dataset(1);
        let (state_a, _) = run_hmcd(&dataset, &quick_hyper(7)).unwrap();
        let (state_b, _) = run_hmcd(&dataset, &quick_hyper(8)).unwrap();
        assert_ne!(state_a.factors[0].membership, state_b.factors[0].membership);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let dataset = small_dataset(2);
        let hyper = quick_hyper(11);
        let (state_seq, trace_seq) =
            run_hmcd_with(&dataset, &hyper, Execution::Sequential).unwrap();
        let (state_par, trace_par) = run_hmcd_with(&dataset, &hyper, Execution::Parallel).unwrap();
        assert_eq!(state_seq, state_par);
        assert_eq!(trace_seq.outer_objectives, trace_par.outer_objectives);
        assert_eq!(trace_seq.inner_objectives, trace_par.inner_objectives);
    }

    #[test]
    fn outer_objective_descends() {
        for seed in 0..3 {
            let dataset = small_dataset(seed);
            let mut hyper = Hyperparameters::new(2).with_seed(seed);
            hyper.inner_max_iters = 20;
            hyper.outer_max_iters = 15;
            hyper.restarts = 2;
            let (state, trace) = run_hmcd(&dataset, &hyper).unwrap();
            assert!(trace.outer_objectives.len() >= 2);
            let worst = trace.max_relative_increase();
            assert!(worst <= 1e-9, "seed {seed}: worst relative increase {worst}");
            let first = trace.outer_objectives[0];
            let last = *trace.outer_objectives.last().unwrap();
            assert!(last <= first, "seed {seed}: {first} -> {last}");
            for factors in &state.factors {
                for m in [
                    &factors.membership,
                    &factors.overlap_membership,
                    &factors.relation,
                    &factors.overlap_relation,
                ] {
                    assert!(m.iter().all(|v| v.is_finite() && *v >= 0.0));
                }
            }
        }
    }

    #[test]
    fn extra_restarts_never_worsen_the_selected_objective() {
        let dataset = small_dataset(6);
        let mut single = quick_hyper(13);
        single.restarts = 1;
        let mut several = quick_hyper(13);
        several.restarts = 4;
        let (_, trace_single) = run_hmcd(&dataset, &single).unwrap();
        let (_, trace_several) = run_hmcd(&dataset, &several).unwrap();
        let last_single = *trace_single.outer_objectives.last().unwrap();
        let last_several = *trace_several.outer_objectives.last().unwrap();
        assert!(
            last_several <= last_single,
            "{last_several} > {last_single}"
        );
    }

    #[test]
    fn zero_adjacency_dataset_completes() {
        let mut dataset = small_dataset(3);
        for network in &mut dataset.networks {
            for matrix in network.adjacency.values_mut() {
                matrix.fill(0.0);
            }
            for matrix in network.overlap_adjacency.values_mut() {
                matrix.fill(0.0);
            }
        }
        let (state, trace) = run_hmcd(&dataset, &quick_hyper(5)).unwrap();
        assert!(trace.max_relative_increase() <= 1e-9);
        assert!(state.consensus.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let dataset = MultiNetworkDataset {
            global_users: Vec::new(),
            networks: Vec::new(),
        };
        let err = run_hmcd(&dataset, &Hyperparameters::new(2)).unwrap_err();
        assert!(matches!(err, HmcdError::Input(_)), "{err}");
    }

    #[test]
    fn trace_and_state_line_up_with_the_dataset() {
        let dataset = small_dataset(4);
        let (state, trace) = run_hmcd(&dataset, &quick_hyper(9)).unwrap();
        let expected_keys = vec![
            ("g1".to_string(), AttributeKind::Topology),
            ("g2".to_string(), AttributeKind::Topology),
        ];
        assert_eq!(state.keys, expected_keys);
        assert_eq!(state.factors.len(), 2);
        assert_eq!(state.consensus.dim(), (9, 2));
        let trace_keys: Vec<_> = trace.inner_objectives.iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(trace_keys, expected_keys);
        assert_eq!(trace.outer_objectives.len(), trace.wall_times.len());
        assert!(trace
            .inner_objectives
            .iter()
            .all(|(_, history)| !history.is_empty()));
    }

    #[test]
    fn initial_products_match_the_data_scale() {
        let dataset = small_dataset(8);
        let network = &dataset.networks[0];
        let (normalized, _) = normalize_adjacency(&network.adjacency[&AttributeKind::Topology]);
        let (overlap, _) =
            normalize_adjacency(&network.overlap_adjacency[&AttributeKind::Topology]);
        let setup = PairSetup {
            net_index: 0,
            key: (network.id.clone(), AttributeKind::Topology),
            adjacency: normalized.clone(),
            overlap_adjacency: overlap.clone(),
            weights: PairWeights {
                alpha: 1.0,
                beta: 1.0,
                gamma: 0.01,
                theta: 0.1,
            },
        };
        let factors = init_factors(derive_seed(3, "restart/0"), &setup, 2);
        let product = factors
            .membership
            .dot(&factors.relation)
            .dot(&factors.membership.t());
        assert!((frobenius(&product) - frobenius(&normalized)).abs() < 1e-12);
        let overlap_product = factors
            .overlap_membership
            .dot(&factors.overlap_relation)
            .dot(&factors.overlap_membership.t());
        assert!((frobenius(&overlap_product) - frobenius(&overlap)).abs() < 1e-12);
    }
}
