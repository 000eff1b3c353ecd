//! Dataset construction: generate a balanced synthetic set, then contrast
//! the IID split with the label-sorted shard split that gives each client
//! only a couple of classes.
//!
//! Run with: cargo run --release --example partition_data

use adafl::{generate_synthetic, partition_iid, partition_noniid_shards, Dataset, Result};

fn label_counts(data: &Dataset) -> Vec<usize> {
    let mut counts = vec![0; data.n_classes()];
    for &l in data.labels() {
        counts[l] += 1;
    }
    counts
}

fn main() -> Result<()> {
    let data = generate_synthetic(600, 6, 6, 0.8, 11)?;
    println!(
        "source: {} samples, {} classes, per-class counts {:?}\n",
        data.len(),
        data.n_classes(),
        label_counts(&data)
    );

    let iid = partition_iid(&data, 6, 21)?;
    println!("IID split over 6 clients (each sees every class):");
    for (k, client) in iid.datasets().iter().enumerate() {
        println!("  client {k}: n={} labels {:?}", client.len(), label_counts(client));
    }

    let shards = partition_noniid_shards(&data, 6, 2, 21)?;
    println!("\nshard split, 2 shards/client (each sees at most 2 classes):");
    for (k, client) in shards.datasets().iter().enumerate() {
        let distinct = label_counts(client).iter().filter(|&&c| c > 0).count();
        println!(
            "  client {k}: n={} labels {:?} ({distinct} distinct)",
            client.len(),
            label_counts(client)
        );
    }
    Ok(())
}
