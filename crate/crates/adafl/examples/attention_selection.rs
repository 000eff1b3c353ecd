//! The attention mechanism in isolation: initialize scores from dataset
//! sizes, feed in a few rounds of fabricated model divergences, and watch
//! probability mass shift toward the clients with larger divergence.
//! Finishes with a sampling-frequency check against the scores.
//!
//! Run with: cargo run --release --example attention_selection

use adafl::{AttentionState, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    // four clients, sizes 10/20/30/40 -> initial scores 0.1/0.2/0.3/0.4
    let mut attention = AttentionState::from_sizes(&[10, 20, 30, 40])?;
    println!("initial scores: {:?}", attention.scores());

    // client 0 keeps producing the most divergent local models
    let alpha = 0.9;
    for round in 1..=20 {
        attention.update(&[0, 1], &[4.0, 1.0], alpha)?;
        attention.update(&[2, 3], &[1.0, 1.0], alpha)?;
        if round % 5 == 0 {
            println!(
                "after {round:>2} double-updates: {:?} (sum {:.12}, entropy {:.4})",
                attention
                    .scores()
                    .iter()
                    .map(|s| (s * 1e4).round() / 1e4)
                    .collect::<Vec<_>>(),
                attention.scores().iter().sum::<f64>(),
                attention.entropy(),
            );
        }
    }
    println!("client 0 overtook client 1 by divergence: {}", {
        let s = attention.scores();
        s[0] > s[1]
    });

    // sampling without replacement follows the scores
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws = 20_000;
    let mut hits = vec![0usize; attention.num_clients()];
    for _ in 0..draws {
        hits[attention.sample(1, &mut rng)?.indices()[0]] += 1;
    }
    println!("\nK=1 selection frequency over {draws} draws vs score:");
    for (k, (&h, &s)) in hits.iter().zip(attention.scores()).enumerate() {
        println!("  client {k}: {:.4} vs {s:.4}", h as f64 / draws as f64);
    }

    // a two-client cohort never repeats an index
    let cohort = attention.sample(2, &mut rng)?;
    println!("\nexample cohort of 2: {:?}", cohort.indices());
    Ok(())
}
