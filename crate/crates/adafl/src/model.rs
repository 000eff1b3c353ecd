//! Minimal neural-network core: an MLP with ReLU hidden layers and a
//! softmax cross-entropy head, mini-batch SGD with momentum, parameter
//! flattening, and parameter-space Euclidean distance.
//!
//! All arithmetic is 64-bit. Parameters flatten in a fixed layer-major,
//! row-major order (each layer's weight rows, then its bias), which is the
//! order every flat buffer in this module follows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Flat view of every parameter of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// L2 distance between two parameter vectors of equal length.
pub fn euclidean_distance(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let sum_sq: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum();
    Ok(sum_sq.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// `out_dim × in_dim`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
}

impl Layer {
    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Dense feed-forward classifier: ReLU hidden layers, softmax output with
/// cross-entropy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

/// SGD-with-momentum state: `v ← μ·v + g`, `w ← w − η·v`.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    velocity: ParamVector,
    momentum: f64,
    learning_rate: f64,
}

impl OptimizerState {
    /// Fresh (zero-velocity) state for `model`. A learning rate of zero is
    /// accepted and leaves parameters unchanged on every step.
    pub fn new(model: &MlpModel, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and >= 0, got {learning_rate}"
            )));
        }
        if !momentum.is_finite() || !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            velocity: ParamVector::zeros(model.num_params()),
            momentum,
            learning_rate,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self) -> &ParamVector {
        &self.velocity
    }
}

impl MlpModel {
    /// Build a model from layer widths, e.g. `[784, 200, 200, 10]`.
    ///
    /// Weights are uniform in `±sqrt(6 / (fan_in + fan_out))` drawn from
    /// `rng` in layer-major, row-major order; biases start at zero.
    pub fn new(layer_sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "a model needs at least an input and an output width".into(),
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig(
                "layer widths must all be >= 1".into(),
            ));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|pair| {
                let (in_dim, out_dim) = (pair[0], pair[1]);
                let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
                let weights = (0..in_dim * out_dim)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Layer {
                    weights,
                    bias: vec![0.0; out_dim],
                    in_dim,
                    out_dim,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// [`MlpModel::new`] with a dedicated seeded generator.
    pub fn from_seed(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(layer_sizes, &mut rng)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim
    }

    /// Layer widths including input and output, e.g. `[784, 200, 200, 10]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.layers.len() + 1);
        sizes.push(self.layers[0].in_dim);
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    /// Concatenate all parameters into a single flat vector.
    pub fn flatten(&self) -> ParamVector {
        let mut values = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            values.extend_from_slice(&layer.weights);
            values.extend_from_slice(&layer.bias);
        }
        ParamVector(values)
    }

    /// Rebuild a model of the given architecture from a flat vector.
    /// `unflatten(sizes, &model.flatten())` reproduces the model bit for bit.
    pub fn unflatten(layer_sizes: &[usize], params: &ParamVector) -> Result<Self> {
        let mut model = Self::from_seed(layer_sizes, 0)?;
        model.set_params(params)?;
        Ok(model)
    }

    /// Overwrite all parameters from a flat vector.
    pub fn set_params(&mut self, params: &ParamVector) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter values for a model with {} parameters",
                params.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w_len = layer.weights.len();
            layer
                .weights
                .copy_from_slice(&params.0[offset..offset + w_len]);
            offset += w_len;
            let b_len = layer.bias.len();
            layer.bias.copy_from_slice(&params.0[offset..offset + b_len]);
            offset += b_len;
        }
        Ok(())
    }

    /// Class probabilities for a single feature row.
    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} input features for a model expecting {}",
                features.len(),
                self.input_dim()
            )));
        }
        let logits = self.logits(features);
        Ok(softmax(&logits))
    }

    /// Raw output-layer activations (softmax omitted); argmax matches
    /// [`MlpModel::forward`].
    fn logits(&self, features: &[f64]) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut activation = features.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut next = layer.bias.clone();
            for (o, out) in next.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                let mut acc = 0.0;
                for (w, a) in row.iter().zip(&activation) {
                    acc += w * a;
                }
                *out += acc;
            }
            if idx < last {
                for v in &mut next {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            activation = next;
        }
        activation
    }

    /// Mean gradient and mean cross-entropy loss over a mini-batch.
    ///
    /// `features` holds `labels.len()` rows of `input_dim()` values. The
    /// gradient comes back flat, aligned with [`MlpModel::flatten`]. A
    /// non-finite gradient is a hard error naming the offending layer.
    pub fn batch_gradient(
        &self,
        features: &[f64],
        labels: &[usize],
    ) -> Result<(ParamVector, f64)> {
        let d = self.input_dim();
        let c = self.output_dim();
        if labels.is_empty() {
            return Err(Error::InvalidData("batch must be nonempty".into()));
        }
        if features.len() != labels.len() * d {
            return Err(Error::DimensionMismatch(format!(
                "{} feature values do not form {} rows of width {d}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidData(format!(
                "label {bad} out of range for {c} output classes"
            )));
        }

        let num_layers = self.layers.len();
        let mut grad = vec![0.0; self.num_params()];
        let offsets = self.layer_offsets();
        // post-activation values per layer, reused across samples
        let mut activations: Vec<Vec<f64>> =
            self.layers.iter().map(|l| vec![0.0; l.out_dim]).collect();
        let mut total_loss = 0.0;

        for (row, &label) in features.chunks_exact(d).zip(labels) {
            // forward, keeping activations
            for (idx, layer) in self.layers.iter().enumerate() {
                let (done, rest) = activations.split_at_mut(idx);
                let input: &[f64] = if idx == 0 { row } else { &done[idx - 1] };
                let out = &mut rest[0];
                for (o, v) in out.iter_mut().enumerate() {
                    let w_row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    let mut acc = layer.bias[o];
                    for (w, a) in w_row.iter().zip(input) {
                        acc += w * a;
                    }
                    *v = if idx < num_layers - 1 {
                        acc.max(0.0)
                    } else {
                        acc
                    };
                }
            }

            let probs = softmax(&activations[num_layers - 1]);
            total_loss -= probs[label].max(f64::MIN_POSITIVE).ln();

            // backward: delta starts as dL/dlogits = probs - onehot(label)
            let mut delta = probs;
            delta[label] -= 1.0;
            for idx in (0..num_layers).rev() {
                let layer = &self.layers[idx];
                let input: &[f64] = if idx == 0 { row } else { &activations[idx - 1] };
                let layer_grad = &mut grad[offsets[idx]..offsets[idx + 1]];
                let (w_grad, b_grad) = layer_grad.split_at_mut(layer.weights.len());
                for (o, &dz) in delta.iter().enumerate() {
                    let g_row = &mut w_grad[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (g, a) in g_row.iter_mut().zip(input) {
                        *g += dz * a;
                    }
                    b_grad[o] += dz;
                }
                if idx > 0 {
                    // propagate through W^T, then gate by the ReLU mask
                    let prev = &activations[idx - 1];
                    let mut next_delta = vec![0.0; layer.in_dim];
                    for (o, &dz) in delta.iter().enumerate() {
                        let w_row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (nd, w) in next_delta.iter_mut().zip(w_row) {
                            *nd += w * dz;
                        }
                    }
                    for (nd, &a) in next_delta.iter_mut().zip(prev) {
                        if a <= 0.0 {
                            *nd = 0.0;
                        }
                    }
                    delta = next_delta;
                }
            }
        }

        let scale = 1.0 / labels.len() as f64;
        for g in &mut grad {
            *g *= scale;
        }
        for (idx, window) in offsets.windows(2).enumerate() {
            if grad[window[0]..window[1]].iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of layer {idx}")));
            }
        }
        Ok((ParamVector(grad), total_loss * scale))
    }

    /// Momentum update from a flat gradient: `v ← μ·v + g`, `w ← w − η·v`.
    pub fn apply_step(&mut self, opt: &mut OptimizerState, grad: &ParamVector) -> Result<()> {
        if grad.len() != self.num_params() || opt.velocity.len() != self.num_params() {
            return Err(Error::DimensionMismatch(format!(
                "gradient length {}, velocity length {}, model has {} parameters",
                grad.len(),
                opt.velocity.len(),
                self.num_params()
            )));
        }
        for (v, &g) in opt.velocity.0.iter_mut().zip(&grad.0) {
            *v = opt.momentum * *v + g;
        }
        let eta = opt.learning_rate;
        let mut offset = 0;
        for (idx, layer) in self.layers.iter_mut().enumerate() {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w -= eta * opt.velocity.0[offset];
                offset += 1;
            }
            if layer
                .weights
                .iter()
                .chain(layer.bias.iter())
                .any(|w| !w.is_finite())
            {
                return Err(Error::NonFinite(format!(
                    "parameters of layer {idx} after update"
                )));
            }
        }
        Ok(())
    }

    /// Fraction of samples whose argmax prediction matches the label.
    pub fn evaluate(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidData(
                "cannot evaluate on an empty dataset".into(),
            ));
        }
        if data.n_features() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "dataset has {} features, model expects {}",
                data.n_features(),
                self.input_dim()
            )));
        }
        let correct = (0..data.len())
            .filter(|&i| argmax(&self.logits(data.row(i))) == data.label(i))
            .count();
        Ok(correct as f64 / data.len() as f64)
    }

    /// Start offset of each layer's slice in the flat order, plus the total.
    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for layer in &self.layers {
            acc += layer.num_params();
            offsets.push(acc);
        }
        offsets
    }
}

/// One mini-batch SGD step; returns the batch loss measured before the
/// update. With a zero learning rate the parameters are left unchanged.
pub fn sgd_step(
    model: &mut MlpModel,
    opt: &mut OptimizerState,
    features: &[f64],
    labels: &[usize],
) -> Result<f64> {
    let (grad, loss) = model.batch_gradient(features, labels)?;
    model.apply_step(opt, &grad)?;
    Ok(loss)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
