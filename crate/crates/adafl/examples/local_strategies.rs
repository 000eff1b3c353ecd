//! The three local-update procedures side by side, starting from one
//! shared global model: plain SGD, proximal SGD, and control-variate SGD,
//! plus the equivalences that tie them together.
//!
//! Run with: cargo run --release --example local_strategies

use adafl::{
    euclidean_distance, generate_synthetic, local_update_fedavg, local_update_fedprox,
    local_update_scaffold, ControlVariates, LocalTrainConfig, MlpModel, Result,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let data = generate_synthetic(50, 6, 5, 0.8, 9)?;
    let global = MlpModel::from_seed(&[6, 16, 5], 10)?;
    let cfg = LocalTrainConfig {
        epochs: 5,
        batch_size: 10,
        learning_rate: 0.05,
        momentum: 0.5,
    };
    let anchor = global.flatten();
    let rng = || ChaCha8Rng::seed_from_u64(99);

    let fedavg = local_update_fedavg(&global, &data, &cfg, &mut rng())?;
    println!(
        "fedavg:   moved {:.4} from the global model",
        euclidean_distance(&fedavg.flatten(), &anchor)?
    );

    // the proximal pull shrinks the move as prox_mu grows
    for prox_mu in [0.0, 0.1, 1.0] {
        let prox = local_update_fedprox(&global, &data, &cfg, prox_mu, &mut rng())?;
        let dist = euclidean_distance(&prox.flatten(), &anchor)?;
        let tag = if prox_mu == 0.0 {
            format!(" (bit-equal to fedavg: {})", prox == fedavg)
        } else {
            String::new()
        };
        println!("fedprox:  prox_mu {prox_mu:<4} moved {dist:.4}{tag}");
    }

    // scaffold with zero variates is momentum-free fedavg; afterwards the
    // client variate approximates its local gradient direction
    let variates = ControlVariates::zeros(1, global.num_params());
    let outcome = local_update_scaffold(&global, &variates, 0, &data, &cfg, &mut rng())?;
    let plain_cfg = LocalTrainConfig {
        momentum: 0.0,
        ..cfg
    };
    let plain = local_update_fedavg(&global, &data, &plain_cfg, &mut rng())?;
    println!(
        "scaffold: moved {:.4} (zero variates match momentum-free fedavg: {})",
        euclidean_distance(&outcome.model.flatten(), &anchor)?,
        outcome.model == plain
    );
    let delta_norm = outcome
        .variate_delta
        .as_slice()
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    println!("scaffold: client variate delta norm {delta_norm:.4}");
    Ok(())
}
