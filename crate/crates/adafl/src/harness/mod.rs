//! Experiment front end: config files, dataset assembly, the run
//! pipeline, metric protocols, trace output, and the CLI.

pub mod cli;
pub mod config;
pub mod metrics;
pub mod trace;

use serde::Serialize;

use crate::data::{self, ClientPartition, Dataset};
use crate::error::{Error, Result};
use crate::federation::{Federation, RoundRecord};
use crate::model::MlpModel;
use crate::seeding;

use config::{DataSource, PartitionKind, RunConfig};
use metrics::{stopping_round, summary_metrics};

/// Stopping result for one target accuracy. `stopping_round` and `cost`
/// are absent when the target was never reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetSummary {
    pub target: f64,
    pub stopping_round: Option<usize>,
    pub cost: Option<u64>,
}

/// Summary metrics of a finished run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub rounds: usize,
    pub metric_window: usize,
    pub average_last_window: f64,
    pub best_accuracy: f64,
    pub stopping_window: usize,
    pub total_cost: u64,
    pub targets: Vec<TargetSummary>,
}

/// Full per-round trace plus the summary metrics.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<RoundRecord>,
    pub summary: ExperimentSummary,
}

impl ExperimentResult {
    /// Accuracies of the evaluated rounds, in round order.
    pub fn accuracies(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| r.test_accuracy)
            .collect()
    }
}

/// Build the train/test datasets a config describes.
///
/// Synthetic data draws one pool of `train + test` samples, then splits
/// per class (the generator emits class-major blocks) so both sets stay
/// exactly balanced and come from the same class means.
pub fn build_datasets(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    match cfg.data.source {
        DataSource::Synthetic => {
            let train_n = cfg.data.train_samples.unwrap();
            let test_n = cfg.data.test_samples.unwrap();
            let classes = cfg.data.classes.unwrap();
            let features = cfg.data.features.unwrap();
            let spread = cfg.data.cluster_spread.unwrap();
            let pool = data::generate_synthetic(
                train_n + test_n,
                features,
                classes,
                spread,
                seeding::mix(cfg.experiment.seed, seeding::stream::DATA),
            )?;
            let per_class = (train_n + test_n) / classes;
            let train_per_class = train_n / classes;
            let mut train_idx = Vec::with_capacity(train_n);
            let mut test_idx = Vec::with_capacity(test_n);
            for class in 0..classes {
                let start = class * per_class;
                train_idx.extend(start..start + train_per_class);
                test_idx.extend(start + train_per_class..start + per_class);
            }
            Ok((pool.subset(&train_idx), pool.subset(&test_idx)))
        }
        DataSource::Idx => {
            let train = data::load_idx(
                cfg.data.train_images.as_ref().unwrap(),
                cfg.data.train_labels.as_ref().unwrap(),
            )?;
            let test = data::load_idx(
                cfg.data.test_images.as_ref().unwrap(),
                cfg.data.test_labels.as_ref().unwrap(),
            )?;
            if train.n_features() != test.n_features() {
                return Err(Error::DimensionMismatch(format!(
                    "train images have {} pixels, test images {}",
                    train.n_features(),
                    test.n_features()
                )));
            }
            let classes = train.n_classes().max(test.n_classes());
            Ok((train.with_class_count(classes)?, test.with_class_count(classes)?))
        }
    }
}

/// Partition the training set across clients as configured.
pub fn build_partition(train: &Dataset, cfg: &RunConfig) -> Result<ClientPartition> {
    let seed = seeding::mix(cfg.experiment.seed, seeding::stream::PARTITION);
    match cfg.partition.kind {
        PartitionKind::Shards => data::partition_noniid_shards(
            train,
            cfg.federation.clients,
            cfg.partition.shards_per_client,
            seed,
        ),
        PartitionKind::Iid => data::partition_iid(train, cfg.federation.clients, seed),
    }
}

/// Run the experiment a config describes: build data, partition, init the
/// model, drive every round, and compute the summary. Stopping rounds are
/// evaluated post hoc from the trace, so one run serves all targets.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (train, test) = build_datasets(cfg)?;
    let partition = build_partition(&train, cfg)?;

    let mut arch = Vec::with_capacity(cfg.model.hidden.len() + 2);
    arch.push(train.n_features());
    arch.extend_from_slice(&cfg.model.hidden);
    arch.push(train.n_classes());
    let model = MlpModel::from_seed(
        &arch,
        seeding::mix(cfg.experiment.seed, seeding::stream::MODEL_INIT),
    )?;

    let mut federation = Federation::new(cfg.federation_config(), partition, test, model)?;
    let records = federation.run()?;
    let summary = summarize(&records, cfg)?;
    Ok(ExperimentResult { records, summary })
}

/// Compute the summary metrics for a finished trace.
pub fn summarize(records: &[RoundRecord], cfg: &RunConfig) -> Result<ExperimentSummary> {
    let accuracies: Vec<f64> = records.iter().filter_map(|r| r.test_accuracy).collect();
    let m = summary_metrics(&accuracies, cfg.metrics.average_window)?;
    let targets = cfg
        .metrics
        .targets
        .iter()
        .map(|&target| {
            let stop = stopping_round(&accuracies, target, cfg.metrics.stopping_window);
            TargetSummary {
                target,
                stopping_round: stop,
                cost: stop.map(|t| records[t - 1].cost_cumulative),
            }
        })
        .collect();
    Ok(ExperimentSummary {
        rounds: records.len(),
        metric_window: cfg.metrics.average_window,
        average_last_window: m.average_last_window,
        best_accuracy: m.best_accuracy,
        stopping_window: cfg.metrics.stopping_window,
        total_cost: records.last().map_or(0, |r| r.cost_cumulative),
        targets,
    })
}
