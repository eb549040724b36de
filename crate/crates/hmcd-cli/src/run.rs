//! The generate, detect, and evaluate commands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use log::{info, warn};

use hmcd::dataset::io::{load_dataset, save_dataset};
use hmcd::dataset::{AttributeKind, Partition, SocialNetwork};
use hmcd::factorize::{run_hmcd, ConvergenceTrace};
use hmcd::metrics::{self, MetricReport, NetworkMetrics, PairMetrics};
use hmcd::synth::{
    aligned_dataset, carve_partial_alignment, layer_adjacency, plant_partitions, PlantedTruth,
};
use hmcd::{HmcdError, Result as HmcdResult};

use crate::config::{AlignmentMode, MetricFlags, RunConfig};
use crate::CliError;

pub fn generate(cfg: RunConfig) -> Result<(), CliError> {
    let out = cfg.require_output()?;
    let synth = cfg.synth_config();
    synth.validate()?;
    let truth = plant_partitions(&synth)?;
    let layers = truth
        .layers
        .iter()
        .enumerate()
        .map(|(layer, planted)| layer_adjacency(planted, &synth, layer))
        .collect::<HmcdResult<Vec<_>>>()?;
    let dataset = match cfg.synth.alignment {
        AlignmentMode::Carved => carve_partial_alignment(&layers, &truth, synth.seed)?,
        AlignmentMode::Full => aligned_dataset(&layers)?,
    };
    save_dataset(&dataset, out)?;
    truth.save(&out.join("truth.json"))?;
    info!(
        "wrote {} networks over {} global users to {}",
        dataset.networks.len(),
        dataset.global_users.len(),
        out.display()
    );
    Ok(())
}

pub fn detect(cfg: RunConfig) -> Result<(), CliError> {
    let dataset = load_dataset(cfg.require_dataset()?)?;
    let out = cfg.require_output()?;
    let hyper = cfg.hyperparameters()?;
    let (state, trace) = run_hmcd(&dataset, &hyper)?;
    fs::create_dir_all(out).map_err(HmcdError::from)?;
    write_trace(&out.join("trace.csv"), &trace)?;
    let global = Partition::from_membership(&state.consensus);
    write_partition(out, "global_partition", &dataset.global_users, &global.labels)?;
    for ((net_id, kind), factors) in state.keys.iter().zip(&state.factors) {
        let network = dataset
            .networks
            .iter()
            .find(|network| network.id == *net_id)
            .ok_or_else(|| HmcdError::input(format!("no network named {net_id}")))?;
        let local = Partition::from_membership(&factors.membership);
        write_partition(
            out,
            &format!("local_{net_id}_{kind}"),
            &network.users,
            &local.labels,
        )?;
        let overlap = Partition::from_membership(&factors.overlap_membership);
        write_partition(
            out,
            &format!("overlap_{net_id}_{kind}"),
            &network.overlapping_users,
            &overlap.labels,
        )?;
    }
    info!(
        "detected communities for {} network-attribute pairs in {} outer iterations",
        state.keys.len(),
        trace.outer_objectives.len()
    );
    Ok(())
}

pub fn evaluate(cfg: RunConfig) -> Result<(), CliError> {
    let dataset_dir = cfg.require_dataset()?;
    let dataset = load_dataset(dataset_dir)?;
    let out = cfg.require_output()?;
    let k = cfg.hyperparameters()?.k;
    let flags = cfg.metrics;
    let truth = resolve_truth(&cfg, dataset_dir)?;
    let global_map = read_partition_map(&out.join("global_partition.json"))?;

    let mut report = MetricReport {
        per_pair: Vec::new(),
        per_network: Vec::new(),
    };
    for (index, network) in dataset.networks.iter().enumerate() {
        let overlap = network.overlap_indices()?;
        let projected = partition_for(&global_map, &network.users, k, "global partition")?;
        for (kind, adjacency) in &network.adjacency {
            let local_map =
                read_partition_map(&out.join(format!("local_{}_{kind}.json", network.id)))?;
            let local = partition_for(&local_map, &network.users, k, "local partition")?;
            report.per_pair.push(PairMetrics {
                network: network.id.clone(),
                attribute: *kind,
                mod_local: gate(flags.modularity, || metrics::modularity(adjacency, &local))?,
                mod_global: gate(flags.modularity, || {
                    metrics::modularity(adjacency, &projected)
                })?,
                mod_overlap_local: gate(flags.modularity, || {
                    metrics::modularity_overlap(adjacency, &local, &overlap)
                })?,
                mod_overlap_global: gate(flags.modularity, || {
                    metrics::modularity_overlap(adjacency, &projected, &overlap)
                })?,
                nmi: gate(flags.nmi, || metrics::nmi(&local, &projected))?,
            });
        }
        report.per_network.push(NetworkMetrics {
            network: network.id.clone(),
            compactness: match network.adjacency.get(&AttributeKind::Topology) {
                Some(adjacency) if flags.compactness => {
                    Some(metrics::compactness(adjacency, &projected, &overlap)?)
                }
                _ => None,
            },
            density: match network.adjacency.get(&AttributeKind::Content) {
                Some(similarity) if flags.density => {
                    Some(metrics::density(similarity, &projected, &overlap)?)
                }
                _ => None,
            },
            nmi_planted: planted_score(&truth, index, network, &projected, flags)?,
        });
    }

    let json_path = out.join("report.json");
    let file = BufWriter::new(File::create(&json_path).map_err(HmcdError::from)?);
    serde_json::to_writer_pretty(file, &report).map_err(|source| HmcdError::Json {
        path: json_path.clone(),
        source,
    })?;
    fs::write(out.join("report.csv"), report.to_csv()).map_err(HmcdError::from)?;
    info!("wrote metric report to {}", out.display());
    Ok(())
}

fn planted_score(
    truth: &Option<PlantedTruth>,
    index: usize,
    network: &SocialNetwork,
    projected: &Partition,
    flags: MetricFlags,
) -> Result<Option<f64>, CliError> {
    let Some(truth) = truth else {
        return Ok(None);
    };
    if !flags.nmi {
        return Ok(None);
    }
    let layer = truth.layers.get(index).ok_or_else(|| {
        HmcdError::input(format!(
            "ground truth has {} layers, none for network {}",
            truth.layers.len(),
            network.id
        ))
    })?;
    if layer.labels.len() != network.n_users() {
        return Err(HmcdError::input(format!(
            "ground-truth layer {index} labels {} nodes but network {} has {}",
            layer.labels.len(),
            network.id,
            network.n_users()
        ))
        .into());
    }
    gate(true, || metrics::nmi(projected, layer))
}

/// Runs a metric when its flag is on; an undefined metric becomes an empty
/// slot instead of a failure.
fn gate(
    enabled: bool,
    metric: impl FnOnce() -> HmcdResult<f64>,
) -> Result<Option<f64>, CliError> {
    if !enabled {
        return Ok(None);
    }
    match metric() {
        Ok(value) => Ok(Some(value)),
        Err(HmcdError::UndefinedMetric(message)) => {
            warn!("skipping undefined metric: {message}");
            Ok(None)
        }
        Err(err) => Err(err.into()),
    }
}

fn resolve_truth(cfg: &RunConfig, dataset_dir: &Path) -> Result<Option<PlantedTruth>, CliError> {
    if let Some(path) = &cfg.truth {
        return Ok(Some(PlantedTruth::load(path)?));
    }
    let fallback = dataset_dir.join("truth.json");
    if fallback.exists() {
        return Ok(Some(PlantedTruth::load(&fallback)?));
    }
    warn!(
        "no ground truth at {}; skipping planted-label scores",
        fallback.display()
    );
    Ok(None)
}

fn read_partition_map(path: &Path) -> Result<BTreeMap<String, usize>, CliError> {
    let text = fs::read_to_string(path).map_err(|err| {
        HmcdError::input(format!("cannot read partition {}: {err}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|source| HmcdError::Json {
            path: path.to_path_buf(),
            source,
        })
        .map_err(CliError::from)
}

fn partition_for(
    map: &BTreeMap<String, usize>,
    users: &[String],
    k: usize,
    what: &str,
) -> Result<Partition, CliError> {
    let mut labels = Vec::with_capacity(users.len());
    for user in users {
        let label = map
            .get(user)
            .ok_or_else(|| HmcdError::input(format!("{what} has no entry for user {user}")))?;
        labels.push(*label);
    }
    Partition::new(labels, k).map_err(CliError::from)
}

fn write_partition(
    dir: &Path,
    stem: &str,
    users: &[String],
    labels: &[usize],
) -> Result<(), CliError> {
    let map: BTreeMap<&str, usize> = users
        .iter()
        .map(String::as_str)
        .zip(labels.iter().copied())
        .collect();
    let json_path = dir.join(format!("{stem}.json"));
    let file = BufWriter::new(File::create(&json_path).map_err(HmcdError::from)?);
    serde_json::to_writer_pretty(file, &map).map_err(|source| HmcdError::Json {
        path: json_path.clone(),
        source,
    })?;
    let mut csv = String::from("user,community\n");
    for (user, label) in users.iter().zip(labels) {
        let _ = writeln!(csv, "{user},{label}");
    }
    fs::write(dir.join(format!("{stem}.csv")), csv).map_err(HmcdError::from)?;
    Ok(())
}

fn write_trace(path: &Path, trace: &ConvergenceTrace) -> Result<(), CliError> {
    let mut text = String::from("iter,objective,seconds\n");
    for (iter, (objective, wall)) in trace
        .outer_objectives
        .iter()
        .zip(&trace.wall_times)
        .enumerate()
    {
        let _ = writeln!(text, "{iter},{objective},{:.6}", wall.as_secs_f64());
    }
    fs::write(path, text).map_err(HmcdError::from)?;
    Ok(())
}
