//! Federated training on real MNIST IDX files. Point MNIST_DATA_DIR at a
//! directory containing the four unpacked files
//! (train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte,
//! t10k-labels-idx1-ubyte) and the example runs a short adaptive session;
//! without the variable it explains itself and exits.
//!
//! Run with: MNIST_DATA_DIR=data/mnist cargo run --release --example mnist_federation

use std::path::PathBuf;

use adafl::{
    load_idx, partition_noniid_shards, Federation, FederationConfig, LocalTrainConfig, MlpModel,
    Result, Strategy,
};

fn main() -> Result<()> {
    let Some(dir) = std::env::var_os("MNIST_DATA_DIR").map(PathBuf::from) else {
        eprintln!("MNIST_DATA_DIR is not set; skipping.");
        eprintln!("Point it at a directory with the four unpacked IDX files to run this example.");
        return Ok(());
    };

    println!("loading IDX files from {}", dir.display());
    let train = load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    println!(
        "train: {} samples x {} pixels, test: {} samples",
        train.len(),
        train.n_features(),
        test.len()
    );

    let clients = 100;
    let partition = partition_noniid_shards(&train, clients, 2, 1)?;
    let config = FederationConfig {
        num_clients: clients,
        total_rounds: 50, // a short session; the shipped configs run 2500
        gamma_start: 0.1,
        gamma_end: 0.5,
        num_fractions: 5,
        alpha: 0.9,
        attention_enabled: true,
        strategy: Strategy::FedAvg,
        local: LocalTrainConfig {
            epochs: 5,
            batch_size: 10,
            learning_rate: 0.01,
            momentum: 0.5,
        },
        lr_decay: 1.0,
        eval_every: 1,
        seed: 1,
    };
    let model = MlpModel::from_seed(&[train.n_features(), 200, 200, 10], 2)?;
    let mut federation = Federation::new(config, partition, test, model)?;

    for _ in 0..50 {
        let record = federation.run_round()?;
        if record.round % 5 == 0 {
            println!(
                "round {:>3}: gamma {:.1}, cost so far {:>5}, test acc {:.4}",
                record.round,
                record.gamma,
                record.cost_cumulative,
                record.test_accuracy.unwrap()
            );
        }
    }
    Ok(())
}
