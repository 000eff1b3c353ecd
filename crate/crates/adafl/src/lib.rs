//! Deterministic, seedable federated-learning simulation engine.
//!
//! The crate simulates synchronous federated training at desk scale:
//! a server holds a global MLP, selects a cohort of clients each
//! communication round, dispatches local SGD to them, and aggregates the
//! uploads by a size-weighted mean. On top of the plain FedAvg loop it
//! implements the AdaFL components — attention-based client selection
//! (selection probabilities updated from each local model's divergence to
//! the new global model) and a dynamic client-fraction schedule — plus
//! FedProx and SCAFFOLD local-update baselines, communication-cost
//! accounting in relative units, and the trailing-window accuracy and
//! stopping-round metric protocols.
//!
//! Everything is driven by a single experiment seed: data generation,
//! partitioning, weight init, selection draws, and per-client batch
//! shuffles each use a stream derived from it (see [`seeding`]), so runs
//! are bit-reproducible.
//!
//! # Modules
//!
//! - [`model`] — MLP forward/backward, SGD with momentum, parameter
//!   flattening, parameter-space distance
//! - [`data`] — synthetic generator, IID and shard non-IID partitioners,
//!   IDX loader
//! - [`selection`] — attention scores, weighted sampling without
//!   replacement, the fraction schedule
//! - [`strategies`] — FedAvg / FedProx / SCAFFOLD local updates
//! - [`federation`] — the round orchestrator
//! - [`harness`] — config files, metrics, trace output, CLI
//!
//! # Examples
//!
//! Each major capability has a runnable example:
//!
//! ```bash
//! cargo run --release --example train_mlp            # model core on its own
//! cargo run --release --example partition_data       # IID vs shard non-IID splits
//! cargo run --release --example attention_selection  # score updates and sampling
//! cargo run --release --example fraction_schedule    # schedule blocks and costs
//! cargo run --release --example local_strategies     # the three local updates
//! cargo run --release --example run_federation       # a full experiment, in memory
//! cargo run --release --example baseline_comparison  # adaptive vs fixed-fraction
//! cargo run --release --example mnist_federation     # IDX files (set MNIST_DATA_DIR)
//! ```
//!
//! The same pipeline is scriptable through the thin `adafl` binary:
//!
//! ```bash
//! cargo run --release --bin adafl -- run configs/synthetic_small.toml --seed 7
//! cargo run --release --bin adafl -- schedule configs/synthetic_adafl.toml
//! cargo run --release --bin adafl -- validate configs/synthetic_adafl.toml
//! ```

pub mod data;
pub mod error;
pub mod federation;
pub mod harness;
pub mod model;
pub mod seeding;
pub mod selection;
pub mod strategies;

pub use data::{
    generate_synthetic, load_idx, partition_iid, partition_noniid_shards, ClientPartition,
    Dataset,
};
pub use error::{Error, Result};
pub use federation::{aggregate, Federation, FederationConfig, GlobalState, RoundRecord};
pub use harness::config::RunConfig;
pub use harness::metrics::{communication_cost, stopping_round, summary_metrics};
pub use harness::{run_experiment, ExperimentResult, ExperimentSummary, TargetSummary};
pub use model::{euclidean_distance, sgd_step, MlpModel, OptimizerState, ParamVector};
pub use selection::{cohort_size, AttentionState, FractionSchedule, SelectionOutcome};
pub use strategies::{
    local_update_fedavg, local_update_fedprox, local_update_scaffold, ControlVariates,
    LocalTrainConfig, ScaffoldOutcome, Strategy,
};
