//! Adaptive selection + dynamic fraction versus the fixed-fraction
//! baseline, on the same data and seeds: final accuracy, stability of the
//! closing rounds, and the cost of reaching a target accuracy.
//!
//! Uses a scaled-down workload so it finishes in under a minute; the
//! shipped configs run the full desk-scale study through the CLI.
//!
//! Run with: cargo run --release --example baseline_comparison

use adafl::harness::{run_experiment, ExperimentResult};
use adafl::{Result, RunConfig};

const BASE: &str = r#"
[experiment]
name = "comparison"
seed = 1

[data]
source = "synthetic"
train_samples = 2000
test_samples = 500
features = 20
classes = 10
cluster_spread = 2.0

[partition]
kind = "shards"
shards_per_client = 2

[model]
hidden = [32]

[federation]
clients = 50
rounds = 100
alpha = 0.9
attention = true
gamma_start = 0.1
gamma_end = 0.5
fractions = 5

[local]
strategy = "fedavg"
epochs = 5
batch_size = 10
learning_rate = 0.05
momentum = 0.5

[metrics]
targets = [0.5]
"#;

fn std_of_tail(result: &ExperimentResult, window: usize) -> f64 {
    let accs = result.accuracies();
    let tail = &accs[accs.len().saturating_sub(window)..];
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    (tail.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / tail.len() as f64).sqrt()
}

fn main() -> Result<()> {
    let seeds = [1u64, 2, 3];
    let variants: [(&str, Vec<String>); 2] = [
        ("adaptive ", vec![]),
        (
            "fixed-0.1",
            vec![
                "federation.attention=false".into(),
                "federation.gamma_end=0.1".into(),
                "federation.fractions=1".into(),
            ],
        ),
    ];

    println!("variant    seed  avg(last10)  best    std(last30)  target@0.5");
    for (name, overrides) in &variants {
        let mut avg_sum = 0.0;
        let mut std_sum = 0.0;
        for &seed in &seeds {
            let mut all = overrides.clone();
            all.push(format!("experiment.seed={seed}"));
            let cfg = RunConfig::parse_with_overrides(BASE, &all)?;
            let result = run_experiment(&cfg)?;
            let s = &result.summary;
            let stability = std_of_tail(&result, 30);
            avg_sum += s.average_last_window;
            std_sum += stability;
            let target = match (s.targets[0].stopping_round, s.targets[0].cost) {
                (Some(round), Some(cost)) => format!("round {round} ({cost} units)"),
                _ => "not reached".to_string(),
            };
            println!(
                "{name}  {seed:>4}  {:>11.4}  {:.4}  {:>11.4}  {target}",
                s.average_last_window, s.best_accuracy, stability
            );
        }
        println!(
            "{name}   avg  {:>11.4}          {:>12.4}\n",
            avg_sum / seeds.len() as f64,
            std_sum / seeds.len() as f64
        );
    }
    Ok(())
}
