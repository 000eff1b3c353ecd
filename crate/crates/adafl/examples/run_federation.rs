//! A full adaptive federated experiment driven in memory: build the data
//! and partition by hand, construct the orchestrator, and step through
//! rounds while printing the trace.
//!
//! Run with: cargo run --release --example run_federation

use adafl::{
    generate_synthetic, partition_noniid_shards, Federation, FederationConfig, LocalTrainConfig,
    MlpModel, Result, Strategy,
};

fn main() -> Result<()> {
    // one pool split 4:1 so train and test share the same class means
    let pool = generate_synthetic(1250, 10, 5, 1.5, 100)?;
    let train_idx: Vec<usize> = (0..pool.len()).filter(|i| i % 5 != 4).collect();
    let test_idx: Vec<usize> = (0..pool.len()).filter(|i| i % 5 == 4).collect();
    let train = pool.subset(&train_idx);
    let test = pool.subset(&test_idx);
    let partition = partition_noniid_shards(&train, 20, 2, 102)?;

    let config = FederationConfig {
        num_clients: 20,
        total_rounds: 40,
        gamma_start: 0.1,
        gamma_end: 0.5,
        num_fractions: 5,
        alpha: 0.9,
        attention_enabled: true,
        strategy: Strategy::FedAvg,
        local: LocalTrainConfig {
            epochs: 5,
            batch_size: 10,
            learning_rate: 0.05,
            momentum: 0.5,
        },
        lr_decay: 0.99,
        eval_every: 1,
        seed: 7,
    };
    let model = MlpModel::from_seed(&[10, 16, 5], 103)?;
    let mut federation = Federation::new(config, partition, test, model)?;

    println!("round  gamma  K  cost_cum  lr        test_acc  selected");
    for _ in 0..40 {
        let lr = federation.state().learning_rate;
        let record = federation.run_round()?;
        if record.round % 4 == 0 || record.round == 1 {
            println!(
                "{:>5}  {:>5.2}  {:>2}  {:>7}  {:.6}  {:>8.3}  {:?}",
                record.round,
                record.gamma,
                record.cohort,
                record.cost_cumulative,
                lr,
                record.test_accuracy.unwrap(),
                record.selected,
            );
        }
    }
    let attention = &federation.state().attention;
    println!(
        "\nfinal attention: min {:.5}, max {:.5}, entropy {:.4} (uniform would be {:.4})",
        attention.min_score(),
        attention.max_score(),
        attention.entropy(),
        (20.0f64).ln(),
    );
    Ok(())
}
