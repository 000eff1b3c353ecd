//! Round orchestration: per-round client selection, local-training
//! dispatch, size-weighted aggregation, attention updates, and
//! experiment-level looping.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{ClientPartition, Dataset};
use crate::error::{Error, Result};
use crate::model::{euclidean_distance, MlpModel, ParamVector};
use crate::seeding;
use crate::selection::{cohort_size, AttentionState, FractionSchedule};
use crate::strategies::{
    local_update_fedavg, local_update_fedprox, local_update_scaffold, ControlVariates,
    LocalTrainConfig, Strategy,
};

/// Experiment-level settings for the orchestrator.
#[derive(Debug, Clone)]
pub struct FederationConfig {
    pub num_clients: usize,
    pub total_rounds: usize,
    pub gamma_start: f64,
    pub gamma_end: f64,
    pub num_fractions: usize,
    /// Decay rate of previous attention scores in the update.
    pub alpha: f64,
    /// When false the selection distribution stays frozen at its initial
    /// value (the plain-FedAvg baseline behaviour).
    pub attention_enabled: bool,
    pub strategy: Strategy,
    pub local: LocalTrainConfig,
    /// Per-round multiplicative learning-rate decay in (0, 1]; round `t`
    /// trains with `learning_rate · lr_decay^(t−1)`.
    pub lr_decay: f64,
    /// Evaluate on the test set every `eval_every` rounds (the final round
    /// is always evaluated).
    pub eval_every: usize,
    pub seed: u64,
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::InvalidConfig("num_clients must be >= 1".into()));
        }
        if self.total_rounds == 0 {
            return Err(Error::InvalidConfig("total_rounds must be >= 1".into()));
        }
        if !self.alpha.is_finite() || !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if !self.lr_decay.is_finite() || self.lr_decay <= 0.0 || self.lr_decay > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "lr_decay must lie in (0, 1], got {}",
                self.lr_decay
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidConfig("eval_every must be >= 1".into()));
        }
        if let Strategy::FedProx { prox_mu } = self.strategy {
            if !prox_mu.is_finite() || prox_mu < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "prox_mu must be finite and >= 0, got {prox_mu}"
                )));
            }
        }
        self.local.validate()?;
        // surfaces schedule parameter errors at config time
        FractionSchedule::new(
            self.gamma_start,
            self.gamma_end,
            self.num_fractions,
            self.total_rounds,
        )?;
        Ok(())
    }
}

/// One round's log entry.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    /// 1-based communication round.
    pub round: usize,
    /// Fraction used this round.
    pub gamma: f64,
    /// Cohort size `K`.
    pub cohort: usize,
    /// Selected client indices, ascending.
    pub selected: Vec<usize>,
    /// Distance of each selected local model to the new global model,
    /// aligned with `selected`.
    pub distances: Vec<f64>,
    /// Upload cost of this round in relative units (= `cohort`).
    pub cost_round: u64,
    /// Running total of `cost_round`.
    pub cost_cumulative: u64,
    /// Test accuracy, when this round was evaluated.
    pub test_accuracy: Option<f64>,
    pub attention_min: f64,
    pub attention_max: f64,
    pub attention_entropy: f64,
    pub wall_time_secs: f64,
}

/// Mutable cross-round state owned by the orchestrator.
#[derive(Debug, Clone)]
pub struct GlobalState {
    pub model: MlpModel,
    pub attention: AttentionState,
    pub variates: Option<ControlVariates>,
    /// Next round to run, 1-based.
    pub round: usize,
    /// Learning rate the next round will train with.
    pub learning_rate: f64,
}

/// The orchestrator: owns the global state and drives rounds.
pub struct Federation {
    config: FederationConfig,
    schedule: FractionSchedule,
    clients: ClientPartition,
    client_sizes: Vec<usize>,
    test_set: Dataset,
    state: GlobalState,
    selection_rng: ChaCha8Rng,
    cumulative_cost: u64,
}

struct LocalOutcome {
    client: usize,
    model: MlpModel,
    variate: Option<(ParamVector, ParamVector)>, // (new c_k, delta)
}

impl Federation {
    pub fn new(
        config: FederationConfig,
        clients: ClientPartition,
        test_set: Dataset,
        initial_model: MlpModel,
    ) -> Result<Self> {
        config.validate()?;
        if clients.num_clients() != config.num_clients {
            return Err(Error::DimensionMismatch(format!(
                "config expects {} clients, partition has {}",
                config.num_clients,
                clients.num_clients()
            )));
        }
        if test_set.is_empty() {
            return Err(Error::InvalidData("test set is empty".into()));
        }
        if test_set.n_features() != initial_model.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "test set has {} features, model expects {}",
                test_set.n_features(),
                initial_model.input_dim()
            )));
        }
        let schedule = FractionSchedule::new(
            config.gamma_start,
            config.gamma_end,
            config.num_fractions,
            config.total_rounds,
        )?;
        let client_sizes = clients.sizes();
        let attention = AttentionState::from_sizes(&client_sizes)?;
        let variates = matches!(config.strategy, Strategy::Scaffold)
            .then(|| ControlVariates::zeros(config.num_clients, initial_model.num_params()));
        let selection_rng =
            ChaCha8Rng::seed_from_u64(seeding::mix(config.seed, seeding::stream::SELECTION));
        let learning_rate = config.local.learning_rate;
        Ok(Self {
            config,
            schedule,
            clients,
            client_sizes,
            test_set,
            state: GlobalState {
                model: initial_model,
                attention,
                variates,
                round: 1,
                learning_rate,
            },
            selection_rng,
            cumulative_cost: 0,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    pub fn schedule(&self) -> &FractionSchedule {
        &self.schedule
    }

    pub fn state(&self) -> &GlobalState {
        &self.state
    }

    /// Run the next communication round and return its record.
    ///
    /// In order: take the attention scores as the selection distribution,
    /// size the cohort from the schedule, sample the cohort, run local
    /// updates on the current global model, aggregate, measure each local
    /// model's distance to the **new** global model, update the attention
    /// scores, evaluate, and advance the round counter and learning rate.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let t = self.state.round;
        if t > self.config.total_rounds {
            return Err(Error::InvalidConfig(format!(
                "all {} rounds have already run",
                self.config.total_rounds
            )));
        }
        let started = Instant::now();

        let gamma = self.schedule.fraction_at(t)?;
        let k = cohort_size(gamma, self.config.num_clients);
        let outcome = self.state.attention.sample(k, &mut self.selection_rng)?;
        let selected = outcome.sorted();

        let local_cfg = LocalTrainConfig {
            learning_rate: self.state.learning_rate,
            ..self.config.local
        };
        let global = &self.state.model;
        let strategy = self.config.strategy;
        let variates = self.state.variates.as_ref();
        let seed = self.config.seed;
        let clients = &self.clients;
        let updates: Vec<LocalOutcome> = selected
            .par_iter()
            .map(|&client| {
                let mut rng = ChaCha8Rng::seed_from_u64(seeding::local_seed(seed, t, client));
                let data = clients.client(client);
                match strategy {
                    Strategy::FedAvg => local_update_fedavg(global, data, &local_cfg, &mut rng)
                        .map(|model| LocalOutcome {
                            client,
                            model,
                            variate: None,
                        }),
                    Strategy::FedProx { prox_mu } => {
                        local_update_fedprox(global, data, &local_cfg, prox_mu, &mut rng).map(
                            |model| LocalOutcome {
                                client,
                                model,
                                variate: None,
                            },
                        )
                    }
                    Strategy::Scaffold => {
                        let variates = variates.expect("scaffold state initialized in new()");
                        local_update_scaffold(global, variates, client, data, &local_cfg, &mut rng)
                            .map(|out| LocalOutcome {
                                client,
                                model: out.model,
                                variate: Some((out.new_client_variate, out.variate_delta)),
                            })
                    }
                }
            })
            .collect::<Result<_>>()?;

        let models: Vec<&MlpModel> = updates.iter().map(|u| &u.model).collect();
        let sizes: Vec<usize> = updates
            .iter()
            .map(|u| self.client_sizes[u.client])
            .collect();
        let new_global = aggregate(&models, &sizes)?;

        let new_flat = new_global.flatten();
        let distances: Vec<f64> = updates
            .iter()
            .map(|u| euclidean_distance(&new_flat, &u.model.flatten()))
            .collect::<Result<_>>()?;

        if self.config.attention_enabled {
            self.state
                .attention
                .update(&selected, &distances, self.config.alpha)?;
        }
        if let Some(variates) = self.state.variates.as_mut() {
            let mut deltas = Vec::with_capacity(updates.len());
            for u in updates {
                let (new_ck, delta) = u.variate.expect("scaffold update carries a variate");
                variates.set_client(u.client, new_ck)?;
                deltas.push(delta);
            }
            variates.apply_server_update(&deltas)?;
        }
        self.state.model = new_global;

        let test_accuracy = if t.is_multiple_of(self.config.eval_every) || t == self.config.total_rounds {
            Some(self.state.model.evaluate(&self.test_set)?)
        } else {
            None
        };

        self.cumulative_cost += k as u64;
        let record = RoundRecord {
            round: t,
            gamma,
            cohort: k,
            selected,
            distances,
            cost_round: k as u64,
            cost_cumulative: self.cumulative_cost,
            test_accuracy,
            attention_min: self.state.attention.min_score(),
            attention_max: self.state.attention.max_score(),
            attention_entropy: self.state.attention.entropy(),
            wall_time_secs: started.elapsed().as_secs_f64(),
        };

        self.state.round = t + 1;
        self.state.learning_rate =
            self.config.local.learning_rate * self.config.lr_decay.powi(t as i32);
        Ok(record)
    }

    /// Run every remaining round and return the full trace.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        let remaining = self.config.total_rounds + 1 - self.state.round;
        let mut records = Vec::with_capacity(remaining);
        while self.state.round <= self.config.total_rounds {
            records.push(self.run_round()?);
        }
        Ok(records)
    }
}

/// Size-weighted coordinate-wise mean of local models:
/// `W ← Σ_k (n_k / n_total)·W_k` on the flattened parameters.
pub fn aggregate(models: &[&MlpModel], sizes: &[usize]) -> Result<MlpModel> {
    if models.is_empty() {
        return Err(Error::InvalidData(
            "aggregation needs at least one local model".into(),
        ));
    }
    if models.len() != sizes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} models but {} sizes",
            models.len(),
            sizes.len()
        )));
    }
    let arch = models[0].layer_sizes();
    for m in &models[1..] {
        if m.layer_sizes() != arch {
            return Err(Error::DimensionMismatch(format!(
                "architecture mismatch: {:?} vs {:?}",
                arch,
                m.layer_sizes()
            )));
        }
    }
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::InvalidData("aggregation weights sum to zero".into()));
    }
    let total = total as f64;
    let mut acc = vec![0.0; models[0].num_params()];
    for (model, &n_k) in models.iter().zip(sizes) {
        let weight = n_k as f64 / total;
        for (a, &p) in acc.iter_mut().zip(model.flatten().as_slice()) {
            *a += weight * p;
        }
    }
    MlpModel::unflatten(&arch, &ParamVector::from_vec(acc))
}
