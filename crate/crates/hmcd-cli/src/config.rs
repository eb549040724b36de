//! Run configuration: one TOML file plus dotted-key overrides.
//!
//! Every command takes the same file; each reads only the sections it needs.
//! A single top-level `seed` feeds both the solver and the generator so one
//! value pins a whole run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hmcd::factorize::{Hyperparameters, TermWeights};
use hmcd::synth::SynthConfig;

use crate::CliError;

/// How generated layers are assembled into a dataset: `carved` de-aligns
/// node copies into the partial-overlap design, `full` keeps every user
/// shared by all networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentMode {
    Carved,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Dataset directory for `detect` and `evaluate`.
    pub dataset: Option<PathBuf>,
    /// Output directory: datasets for `generate`, partitions for `detect`,
    /// reports for `evaluate` (which also reads partitions from it).
    pub output: Option<PathBuf>,
    /// Ground-truth file for `evaluate`; defaults to truth.json next to the
    /// dataset when present.
    pub truth: Option<PathBuf>,
    pub seed: u64,
    pub hyper: HyperSection,
    pub synth: SynthSection,
    pub metrics: MetricFlags,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            output: None,
            truth: None,
            seed: 0,
            hyper: HyperSection::default(),
            synth: SynthSection::default(),
            metrics: MetricFlags::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperSection {
    pub k: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub inner_max_iters: usize,
    pub outer_max_iters: usize,
    pub rel_tol: f64,
    pub guard_eps: f64,
    pub restarts: usize,
}

impl Default for HyperSection {
    fn default() -> Self {
        HyperSection {
            k: None,
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.01,
            theta: 0.1,
            inner_max_iters: 100,
            outer_max_iters: 50,
            rel_tol: 1e-6,
            guard_eps: 1e-12,
            restarts: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub layers: usize,
    pub nodes_per_layer: usize,
    pub k_planted: usize,
    pub mu: f64,
    pub p: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub t_k: f64,
    pub alignment: AlignmentMode,
}

impl Default for SynthSection {
    fn default() -> Self {
        let base = SynthConfig::new(3, 400, 20);
        SynthSection {
            layers: base.layers,
            nodes_per_layer: base.nodes_per_layer,
            k_planted: base.k_planted,
            mu: base.mu,
            p: base.p,
            k_min: base.k_min,
            k_max: base.k_max,
            t_k: base.t_k,
            alignment: AlignmentMode::Carved,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricFlags {
    pub modularity: bool,
    pub compactness: bool,
    pub density: bool,
    pub nmi: bool,
}

impl Default for MetricFlags {
    fn default() -> Self {
        MetricFlags {
            modularity: true,
            compactness: true,
            density: true,
            nmi: true,
        }
    }
}

impl RunConfig {
    pub fn hyperparameters(&self) -> Result<Hyperparameters, CliError> {
        let k = self
            .hyper
            .k
            .ok_or_else(|| CliError::Usage("config must set hyper.k".into()))?;
        let mut hyper = Hyperparameters::new(k).with_seed(self.seed);
        hyper.alpha = TermWeights::uniform(self.hyper.alpha);
        hyper.beta = TermWeights::uniform(self.hyper.beta);
        hyper.gamma = TermWeights::uniform(self.hyper.gamma);
        hyper.theta = TermWeights::uniform(self.hyper.theta);
        hyper.inner_max_iters = self.hyper.inner_max_iters;
        hyper.outer_max_iters = self.hyper.outer_max_iters;
        hyper.rel_tol = self.hyper.rel_tol;
        hyper.guard_eps = self.hyper.guard_eps;
        hyper.restarts = self.hyper.restarts;
        Ok(hyper)
    }

    pub fn synth_config(&self) -> SynthConfig {
        let section = &self.synth;
        let mut cfg = SynthConfig::new(section.layers, section.nodes_per_layer, section.k_planted)
            .with_seed(self.seed);
        cfg.mu = section.mu;
        cfg.p = section.p;
        cfg.k_min = section.k_min;
        cfg.k_max = section.k_max;
        cfg.t_k = section.t_k;
        cfg
    }

    pub fn require_dataset(&self) -> Result<&Path, CliError> {
        self.dataset
            .as_deref()
            .ok_or_else(|| CliError::Usage("config must set dataset".into()))
    }

    pub fn require_output(&self) -> Result<&Path, CliError> {
        self.output
            .as_deref()
            .ok_or_else(|| CliError::Usage("config must set output".into()))
    }
}

/// Reads a config file and applies `--set key=value` overrides on top.
pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|err| CliError::Usage(format!("cannot read config {}: {err}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|err| CliError::Usage(format!("invalid config {}: {err}", path.display())))?;
    for raw in overrides {
        apply_override(&mut table, raw)?;
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|err| CliError::Usage(format!("invalid config {}: {err}", path.display())))
}

fn apply_override(table: &mut toml::Table, raw: &str) -> Result<(), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override '{raw}' is not KEY=VALUE")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|part| part.is_empty()) {
        return Err(CliError::Usage(format!("override key '{key}' is malformed")));
    }
    let mut current = table;
    for part in &parts[..parts.len() - 1] {
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::Usage(format!("override key '{key}' descends into a scalar"))
            })?;
    }
    current.insert(parts[parts.len() - 1].to_string(), parse_value(value));
    Ok(())
}

/// Interprets an override value as TOML when possible; anything that fails
/// to parse (a bare path, say) becomes a string.
fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut parsed| parsed.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(text: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(text.as_bytes()).unwrap();
        file
    }

    #[test]
    fn empty_config_uses_the_library_defaults() {
        let file = write_config("");
        let cfg = load(file.path(), &[]).unwrap();
        assert_eq!(cfg.seed, 0);
        let with_k = load(file.path(), &["hyper.k=3".into()]).unwrap();
        assert_eq!(
            with_k.hyperparameters().unwrap(),
            Hyperparameters::new(3)
        );
        assert_eq!(cfg.synth_config(), SynthConfig::new(3, 400, 20));
    }

    #[test]
    fn sections_round_trip() {
        let file = write_config(
            "seed = 7\ndataset = \"data\"\n\n[hyper]\nk = 4\ngamma = 0.5\n\n[synth]\nnodes_per_layer = 40\nalignment = \"full\"\n\n[metrics]\ndensity = false\n",
        );
        let cfg = load(file.path(), &[]).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.dataset.as_deref(), Some(Path::new("data")));
        let hyper = cfg.hyperparameters().unwrap();
        assert_eq!(hyper.k, 4);
        assert_eq!(hyper.gamma, TermWeights::uniform(0.5));
        assert_eq!(hyper.seed, 7);
        assert_eq!(cfg.synth_config().nodes_per_layer, 40);
        assert_eq!(cfg.synth_config().seed, 7);
        assert_eq!(cfg.synth.alignment, AlignmentMode::Full);
        assert!(!cfg.metrics.density);
        assert!(cfg.metrics.modularity);
    }

    #[test]
    fn overrides_replace_and_create_keys() {
        let file = write_config("[hyper]\nk = 4\n");
        let cfg = load(
            file.path(),
            &[
                "hyper.k=8".into(),
                "seed=99".into(),
                "output=runs/a".into(),
                "metrics.nmi=false".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.hyper.k, Some(8));
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.output.as_deref(), Some(Path::new("runs/a")));
        assert!(!cfg.metrics.nmi);
    }

    #[test]
    fn bad_overrides_are_usage_errors() {
        let file = write_config("");
        for bad in ["novalue", "=5", "a..b=1", "unknown_key=1", "hyper.nope=1"] {
            let err = load(file.path(), &[bad.to_string()]).unwrap_err();
            assert!(matches!(err, CliError::Usage(_)), "{bad}: {err}");
        }
    }

    #[test]
    fn scalar_cannot_become_a_table() {
        let file = write_config("seed = 1\n");
        let err = load(file.path(), &["seed.sub=2".into()]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn missing_file_and_bad_toml_are_usage_errors() {
        let err = load(Path::new("/nonexistent/config.toml"), &[]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        let file = write_config("not [valid toml");
        let err = load(file.path(), &[]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn missing_required_keys_are_usage_errors() {
        let file = write_config("");
        let cfg = load(file.path(), &[]).unwrap();
        assert!(matches!(cfg.hyperparameters(), Err(CliError::Usage(_))));
        assert!(matches!(cfg.require_dataset(), Err(CliError::Usage(_))));
        assert!(matches!(cfg.require_output(), Err(CliError::Usage(_))));
    }

    #[test]
    fn override_values_keep_their_types() {
        assert_eq!(parse_value("8"), toml::Value::Integer(8));
        assert_eq!(parse_value("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_value("false"), toml::Value::Boolean(false));
        assert_eq!(
            parse_value("runs/a"),
            toml::Value::String("runs/a".into())
        );
        assert_eq!(
            parse_value("\"quoted\""),
            toml::Value::String("quoted".into())
        );
    }
}
