//! Experiment configuration: the TOML file schema, cross-field
//! validation, and dotted-path overrides.
//!
//! The file is flat key-value text with one section per subsystem
//! (`[experiment]`, `[data]`, `[partition]`, `[model]`, `[federation]`,
//! `[local]`, `[metrics]`). Unknown keys are hard errors so typos cannot
//! silently change an experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::FederationConfig;
use crate::selection::FractionSchedule;
use crate::strategies::{LocalTrainConfig, Strategy};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentSection,
    pub data: DataSection,
    pub partition: PartitionSection,
    pub model: ModelSection,
    pub federation: FederationSection,
    pub local: LocalSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Experiment name; also the default output directory stem.
    pub name: String,
    pub seed: u64,
    /// Where `run` writes trace.csv and summary.json (default
    /// `runs/<name>`; the CLI `--out` flag overrides both).
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Seeded Gaussian-cluster generator (self-contained).
    Synthetic,
    /// MNIST-style IDX image/label files on disk.
    Idx,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    // synthetic
    #[serde(default)]
    pub train_samples: Option<usize>,
    #[serde(default)]
    pub test_samples: Option<usize>,
    #[serde(default)]
    pub features: Option<usize>,
    #[serde(default)]
    pub classes: Option<usize>,
    #[serde(default)]
    pub cluster_spread: Option<f64>,
    // idx
    #[serde(default)]
    pub train_images: Option<PathBuf>,
    #[serde(default)]
    pub train_labels: Option<PathBuf>,
    #[serde(default)]
    pub test_images: Option<PathBuf>,
    #[serde(default)]
    pub test_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    /// Label-sorted contiguous shards dealt to clients (non-IID).
    Shards,
    /// Seeded shuffle and equal split (IID).
    Iid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSection {
    pub kind: PartitionKind,
    #[serde(default = "default_shards_per_client")]
    pub shards_per_client: usize,
}

fn default_shards_per_client() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Hidden layer widths; input and output come from the data.
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FederationSection {
    pub clients: usize,
    pub rounds: usize,
    pub alpha: f64,
    /// When false the selection distribution stays frozen at its initial
    /// value (constant-distribution baselines).
    pub attention: bool,
    pub gamma_start: f64,
    pub gamma_end: f64,
    pub fractions: usize,
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
}

fn default_lr_decay() -> f64 {
    1.0
}

fn default_eval_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Fedavg,
    Fedprox,
    Scaffold,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSection {
    pub strategy: StrategyKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Proximal coefficient; only meaningful for `strategy = "fedprox"`.
    #[serde(default)]
    pub prox_mu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    /// Target accuracies the summary reports a stopping round and cost for.
    pub targets: Vec<f64>,
    /// Window of the trailing average accuracy metric.
    pub average_window: usize,
    /// Window of the stopping criterion.
    pub stopping_window: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            targets: Vec::new(),
            average_window: 10,
            stopping_window: 5,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with_overrides(path, &[])
    }

    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parse TOML text, then apply `section.key=value` overrides before
    /// deserializing. Override values parse as TOML (so integers, floats,
    /// booleans, and arrays behave like the file); anything unparseable is
    /// a string. Overriding an unknown key fails like writing it in the
    /// file would.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
        for spec in overrides {
            apply_override(&mut table, spec)?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))
    }

    /// Cross-field validation beyond what deserialization enforces.
    pub fn validate(&self) -> Result<()> {
        if self.experiment.name.is_empty() {
            return Err(Error::InvalidConfig("experiment.name must be nonempty".into()));
        }
        self.validate_data()?;
        if self.partition.shards_per_client == 0 {
            return Err(Error::InvalidConfig(
                "partition.shards_per_client must be >= 1".into(),
            ));
        }
        if let Some(&width) = self.model.hidden.iter().find(|&&w| w == 0) {
            return Err(Error::InvalidConfig(format!(
                "model.hidden widths must be >= 1, got {width}"
            )));
        }
        // surfaces federation/schedule/local errors with config wording
        self.federation_config().validate()?;
        if !self.local.learning_rate.is_finite() || self.local.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(
                "local.learning_rate must be > 0".into(),
            ));
        }
        if self.local.strategy != StrategyKind::Fedprox && self.local.prox_mu != 0.0 {
            return Err(Error::InvalidConfig(
                "local.prox_mu only applies to strategy = \"fedprox\"".into(),
            ));
        }
        if self.metrics.average_window == 0 || self.metrics.stopping_window == 0 {
            return Err(Error::InvalidConfig("metric windows must be >= 1".into()));
        }
        if self.federation.rounds < self.metrics.average_window {
            return Err(Error::InvalidConfig(format!(
                "federation.rounds ({}) must cover metrics.average_window ({})",
                self.federation.rounds, self.metrics.average_window
            )));
        }
        for &t in &self.metrics.targets {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "metrics.targets entries must lie in (0, 1), got {t}"
                )));
            }
        }
        if !self.metrics.targets.is_empty() && self.federation.eval_every != 1 {
            return Err(Error::InvalidConfig(
                "stopping-round targets need a dense accuracy trace; set federation.eval_every = 1"
                    .into(),
            ));
        }
        Ok(())
    }

    fn validate_data(&self) -> Result<()> {
        let d = &self.data;
        match d.source {
            DataSource::Synthetic => {
                let required: [(&str, bool); 5] = [
                    ("data.train_samples", d.train_samples.is_some()),
                    ("data.test_samples", d.test_samples.is_some()),
                    ("data.features", d.features.is_some()),
                    ("data.classes", d.classes.is_some()),
                    ("data.cluster_spread", d.cluster_spread.is_some()),
                ];
                for (name, present) in required {
                    if !present {
                        return Err(Error::InvalidConfig(format!(
                            "{name} is required for source = \"synthetic\""
                        )));
                    }
                }
                let stray: [(&str, bool); 4] = [
                    ("data.train_images", d.train_images.is_some()),
                    ("data.train_labels", d.train_labels.is_some()),
                    ("data.test_images", d.test_images.is_some()),
                    ("data.test_labels", d.test_labels.is_some()),
                ];
                for (name, present) in stray {
                    if present {
                        return Err(Error::InvalidConfig(format!(
                            "{name} does not apply to source = \"synthetic\""
                        )));
                    }
                }
                let classes = d.classes.unwrap();
                let train = d.train_samples.unwrap();
                let test = d.test_samples.unwrap();
                if classes < 2 {
                    return Err(Error::InvalidConfig("data.classes must be >= 2".into()));
                }
                if d.features.unwrap() == 0 {
                    return Err(Error::InvalidConfig("data.features must be >= 1".into()));
                }
                let spread = d.cluster_spread.unwrap();
                if !spread.is_finite() || spread <= 0.0 {
                    return Err(Error::InvalidConfig(
                        "data.cluster_spread must be > 0".into(),
                    ));
                }
                // per-class splitting keeps both sets exactly balanced
                for (name, n) in [("train_samples", train), ("test_samples", test)] {
                    if n == 0 || n % classes != 0 {
                        return Err(Error::InvalidConfig(format!(
                            "data.{name} ({n}) must be a positive multiple of data.classes ({classes})"
                        )));
                    }
                }
                // catch partition divisibility before running
                let per_shard = self.federation.clients * self.partition.shards_per_client;
                match self.partition.kind {
                    PartitionKind::Shards if !train.is_multiple_of(per_shard) => {
                        return Err(Error::InvalidConfig(format!(
                            "data.train_samples ({train}) must be divisible by clients x shards_per_client ({per_shard})"
                        )));
                    }
                    PartitionKind::Iid if !train.is_multiple_of(self.federation.clients) => {
                        return Err(Error::InvalidConfig(format!(
                            "data.train_samples ({train}) must be divisible by federation.clients ({})",
                            self.federation.clients
                        )));
                    }
                    _ => {}
                }
            }
            DataSource::Idx => {
                let required: [(&str, bool); 4] = [
                    ("data.train_images", d.train_images.is_some()),
                    ("data.train_labels", d.train_labels.is_some()),
                    ("data.test_images", d.test_images.is_some()),
                    ("data.test_labels", d.test_labels.is_some()),
                ];
                for (name, present) in required {
                    if !present {
                        return Err(Error::InvalidConfig(format!(
                            "{name} is required for source = \"idx\""
                        )));
                    }
                }
                let stray: [(&str, bool); 5] = [
                    ("data.train_samples", d.train_samples.is_some()),
                    ("data.test_samples", d.test_samples.is_some()),
                    ("data.features", d.features.is_some()),
                    ("data.classes", d.classes.is_some()),
                    ("data.cluster_spread", d.cluster_spread.is_some()),
                ];
                for (name, present) in stray {
                    if present {
                        return Err(Error::InvalidConfig(format!(
                            "{name} does not apply to source = \"idx\""
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        match self.local.strategy {
            StrategyKind::Fedavg => Strategy::FedAvg,
            StrategyKind::Fedprox => Strategy::FedProx {
                prox_mu: self.local.prox_mu,
            },
            StrategyKind::Scaffold => Strategy::Scaffold,
        }
    }

    pub fn federation_config(&self) -> FederationConfig {
        FederationConfig {
            num_clients: self.federation.clients,
            total_rounds: self.federation.rounds,
            gamma_start: self.federation.gamma_start,
            gamma_end: self.federation.gamma_end,
            num_fractions: self.federation.fractions,
            alpha: self.federation.alpha,
            attention_enabled: self.federation.attention,
            strategy: self.strategy(),
            local: LocalTrainConfig {
                epochs: self.local.epochs,
                batch_size: self.local.batch_size,
                learning_rate: self.local.learning_rate,
                momentum: self.local.momentum,
            },
            lr_decay: self.federation.lr_decay,
            eval_every: self.federation.eval_every,
            seed: self.experiment.seed,
        }
    }

    /// The schedule this config describes.
    pub fn schedule(&self) -> Result<FractionSchedule> {
        FractionSchedule::new(
            self.federation.gamma_start,
            self.federation.gamma_end,
            self.federation.fractions,
            self.federation.rounds,
        )
    }

    /// Output directory: the config's `output_dir`, or `runs/<name>`.
    pub fn output_dir(&self) -> PathBuf {
        self.experiment
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.experiment.name))
    }
}

fn apply_override(root: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        Error::InvalidConfig(format!(
            "override '{spec}' must look like section.key=value"
        ))
    })?;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!(
            "override path '{path}' has an empty segment"
        )));
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        table = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "override path '{path}' crosses a non-table value"
                ))
            })?;
    }
    table.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw));
    Ok(())
}

/// Parse an override value as TOML; fall back to a plain string (so
/// `strategy=fedprox` works without quotes).
fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    if let Ok(table) = doc.parse::<toml::Table>() {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(raw.to_string())
}
