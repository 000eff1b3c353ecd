//! The neural-network core on its own: build an MLP, train it with
//! mini-batch SGD + momentum on a synthetic task, and watch the loss and
//! accuracy evolve.
//!
//! Run with: cargo run --release --example train_mlp

use adafl::{generate_synthetic, sgd_step, MlpModel, OptimizerState, Result};

fn main() -> Result<()> {
    // one pool, split 3:1 so train and test share the same class means
    let pool = generate_synthetic(800, 8, 4, 1.0, 42)?;
    let train_idx: Vec<usize> = (0..pool.len()).filter(|i| i % 4 != 3).collect();
    let test_idx: Vec<usize> = (0..pool.len()).filter(|i| i % 4 == 3).collect();
    let train = pool.subset(&train_idx);
    let test = pool.subset(&test_idx);

    let mut model = MlpModel::from_seed(&[8, 32, 4], 7)?;
    let mut opt = OptimizerState::new(&model, 0.05, 0.5)?;
    println!(
        "model: layers {:?}, {} parameters",
        model.layer_sizes(),
        model.num_params()
    );

    let batch_size = 20;
    for epoch in 1..=10 {
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for start in (0..train.len()).step_by(batch_size) {
            let end = (start + batch_size).min(train.len());
            let indices: Vec<usize> = (start..end).collect();
            let batch = train.subset(&indices);
            let mut features = Vec::with_capacity(batch.len() * batch.n_features());
            let mut labels = Vec::with_capacity(batch.len());
            for i in 0..batch.len() {
                features.extend_from_slice(batch.row(i));
                labels.push(batch.label(i));
            }
            epoch_loss += sgd_step(&mut model, &mut opt, &features, &labels)?;
            batches += 1;
        }
        println!(
            "epoch {epoch:>2}: mean batch loss {:.4}, train acc {:.3}, test acc {:.3}",
            epoch_loss / batches as f64,
            model.evaluate(&train)?,
            model.evaluate(&test)?,
        );
    }

    // flatten/unflatten round trip is exact
    let flat = model.flatten();
    let rebuilt = MlpModel::unflatten(&model.layer_sizes(), &flat)?;
    println!(
        "flatten -> unflatten reproduces the model: {}",
        rebuilt == model
    );
    Ok(())
}
