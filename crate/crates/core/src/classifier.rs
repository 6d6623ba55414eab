//! Dense classifier trained from scratch: two ReLU hidden layers and a
//! softmax output, categorical crossentropy loss, Adam updates.
//!
//! The benchmark architecture is 784-64-64-10 (55050 parameters). Layer
//! sizes stay configurable because the gradient checks run on reduced
//! shapes.

use std::io::{Read, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{try_map_indexed, ExecMode};
use crate::mnist::Dataset;

const MODEL_MAGIC: &[u8; 4] = b"MLPB";
const MODEL_VERSION: u32 = 1;

/// Weights and biases of the three dense layers. Weights are stored
/// input-major: `w[l][i * out + o]` connects input `i` to unit `o`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    sizes: [usize; 4],
    w: [Vec<f64>; 3],
    b: [Vec<f64>; 3],
}

/// Provenance carried in the model file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelMeta {
    pub seed: u64,
    pub epochs: u32,
}

impl MlpModel {
    /// Glorot-uniform initialized model; biases start at zero.
    pub fn new(sizes: [usize; 4], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w: [Vec<f64>; 3] = Default::default();
        let mut b: [Vec<f64>; 3] = Default::default();
        for l in 0..3 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            w[l] = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            b[l] = vec![0.0; fan_out];
        }
        Self { sizes, w, b }
    }

    /// The benchmark architecture, 784-64-64-10.
    pub fn paper_architecture(seed: u64) -> Self {
        Self::new([784, 64, 64, 10], seed)
    }

    pub fn sizes(&self) -> [usize; 4] {
        self.sizes
    }

    /// Mutable weight matrix of a layer (input-major), for perturbation
    /// studies and gradient checks.
    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.w[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.b[layer]
    }

    pub fn parameter_count(&self) -> usize {
        (0..3)
            .map(|l| self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1])
            .sum()
    }

    /// Class probabilities for one input; they are nonnegative and sum to 1.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.sizes[0] {
            return Err(Error::InvalidParam(format!(
                "expected input of length {}, got {}",
                self.sizes[0],
                input.len()
            )));
        }
        let a1 = self.dense_relu(0, input);
        let a2 = self.dense_relu(1, &a1);
        Ok(self.dense_softmax(&a2))
    }

    /// Most probable class.
    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        let probs = self.forward(input)?;
        Ok(argmax(&probs))
    }

    fn dense_relu(&self, layer: usize, input: &[f64]) -> Vec<f64> {
        let out_dim = self.sizes[layer + 1];
        let mut out = self.b[layer].clone();
        for (i, &x) in input.iter().enumerate() {
            if x != 0.0 {
                let row = &self.w[layer][i * out_dim..(i + 1) * out_dim];
                for (o, &wv) in row.iter().enumerate() {
                    out[o] += wv * x;
                }
            }
        }
        for v in &mut out {
            *v = v.max(0.0);
        }
        out
    }

    fn dense_softmax(&self, input: &[f64]) -> Vec<f64> {
        let out_dim = self.sizes[3];
        let mut z = self.b[2].clone();
        for (i, &x) in input.iter().enumerate() {
            let row = &self.w[2][i * out_dim..(i + 1) * out_dim];
            for (o, &wv) in row.iter().enumerate() {
                z[o] += wv * x;
            }
        }
        softmax_in_place(&mut z);
        z
    }

    /// Serialize: magic, version, sizes, seed, epochs, then every parameter
    /// as little-endian f32 in declared order (w1, b1, w2, b2, w3, b3).
    pub fn save<W: Write>(&self, mut out: W, meta: &ModelMeta) -> Result<()> {
        out.write_all(MODEL_MAGIC)?;
        out.write_all(&MODEL_VERSION.to_le_bytes())?;
        for s in self.sizes {
            out.write_all(&(s as u32).to_le_bytes())?;
        }
        out.write_all(&meta.seed.to_le_bytes())?;
        out.write_all(&meta.epochs.to_le_bytes())?;
        for l in 0..3 {
            for &v in self.w[l].iter().chain(self.b[l].iter()) {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut reader: R) -> Result<(Self, ModelMeta)> {
        let mut data = Vec::new();
        reader.read_to_end(&mut data)?;
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if data.len() < *pos + n {
                return Err(Error::Truncated {
                    needed: *pos + n,
                    found: data.len(),
                });
            }
            let s = &data[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 4)? != MODEL_MAGIC {
            return Err(Error::Format {
                what: "model file",
                detail: "missing MLPB magic".into(),
            });
        }
        let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(Error::Format {
                what: "model file",
                detail: format!("unsupported version {version}"),
            });
        }
        let mut sizes = [0usize; 4];
        for s in &mut sizes {
            *s = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        }
        let seed = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
        let epochs = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        let mut w: [Vec<f64>; 3] = Default::default();
        let mut b: [Vec<f64>; 3] = Default::default();
        for l in 0..3 {
            let read_f32s = |pos: &mut usize, n: usize| -> Result<Vec<f64>> {
                let bytes = take(pos, n * 4)?;
                Ok(bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect())
            };
            w[l] = read_f32s(&mut pos, sizes[l] * sizes[l + 1])?;
            b[l] = read_f32s(&mut pos, sizes[l + 1])?;
        }
        Ok((Self { sizes, w, b }, ModelMeta { seed, epochs }))
    }

    pub fn save_path<P: AsRef<Path>>(&self, path: P, meta: &ModelMeta) -> Result<()> {
        self.save(std::fs::File::create(path)?, meta)
    }

    pub fn load_path<P: AsRef<Path>>(path: P) -> Result<(Self, ModelMeta)> {
        Self::load(std::fs::File::open(path)?)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Categorical crossentropy for one prediction: `-ln(p_label + 1e-12)`.
pub fn loss(probabilities: &[f64], label: usize) -> f64 {
    -(probabilities[label] + 1e-12).ln()
}

/// Gradients of the mean batch loss with respect to every parameter,
/// in the same layout as the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub dw: [Vec<f64>; 3],
    pub db: [Vec<f64>; 3],
}

/// Backpropagate a batch; returns the gradients of the mean loss and the
/// mean loss itself.
pub fn batch_gradients(
    model: &MlpModel,
    inputs: &[Vec<f64>],
    labels: &[u8],
) -> Result<(Gradients, f64)> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::InvalidParam(
            "batch inputs and labels must be nonempty and of equal length".into(),
        ));
    }
    let sizes = model.sizes;
    let mut grads = Gradients {
        dw: [
            vec![0.0; sizes[0] * sizes[1]],
            vec![0.0; sizes[1] * sizes[2]],
            vec![0.0; sizes[2] * sizes[3]],
        ],
        db: [
            vec![0.0; sizes[1]],
            vec![0.0; sizes[2]],
            vec![0.0; sizes[3]],
        ],
    };
    let mut total_loss = 0.0;

    for (input, &label) in inputs.iter().zip(labels) {
        if input.len() != sizes[0] {
            return Err(Error::InvalidParam(format!(
                "expected input of length {}, got {}",
                sizes[0],
                input.len()
            )));
        }
        let a1 = model.dense_relu(0, input);
        let a2 = model.dense_relu(1, &a1);
        let probs = model.dense_softmax(&a2);
        total_loss += loss(&probs, label as usize);

        // Softmax + crossentropy collapses to p - onehot at the last layer.
        let mut dz3 = probs;
        dz3[label as usize] -= 1.0;

        for (i, &a) in a2.iter().enumerate() {
            if a != 0.0 {
                let row = &mut grads.dw[2][i * sizes[3]..(i + 1) * sizes[3]];
                for (o, &d) in dz3.iter().enumerate() {
                    row[o] += a * d;
                }
            }
        }
        for (o, &d) in dz3.iter().enumerate() {
            grads.db[2][o] += d;
        }

        let mut dz2 = vec![0.0; sizes[2]];
        for (i, slot) in dz2.iter_mut().enumerate() {
            if a2[i] > 0.0 {
                let row = &model.w[2][i * sizes[3]..(i + 1) * sizes[3]];
                *slot = row.iter().zip(&dz3).map(|(w, d)| w * d).sum();
            }
        }
        for (i, &a) in a1.iter().enumerate() {
            if a != 0.0 {
                let row = &mut grads.dw[1][i * sizes[2]..(i + 1) * sizes[2]];
                for (o, &d) in dz2.iter().enumerate() {
                    row[o] += a * d;
                }
            }
        }
        for (o, &d) in dz2.iter().enumerate() {
            grads.db[1][o] += d;
        }

        let mut dz1 = vec![0.0; sizes[1]];
        for (i, slot) in dz1.iter_mut().enumerate() {
            if a1[i] > 0.0 {
                let row = &model.w[1][i * sizes[2]..(i + 1) * sizes[2]];
                *slot = row.iter().zip(&dz2).map(|(w, d)| w * d).sum();
            }
        }
        for (i, &x) in input.iter().enumerate() {
            if x != 0.0 {
                let row = &mut grads.dw[0][i * sizes[1]..(i + 1) * sizes[1]];
                for (o, &d) in dz1.iter().enumerate() {
                    row[o] += x * d;
                }
            }
        }
        for (o, &d) in dz1.iter().enumerate() {
            grads.db[0][o] += d;
        }
    }

    let scale = 1.0 / inputs.len() as f64;
    for l in 0..3 {
        for v in grads.dw[l].iter_mut().chain(grads.db[l].iter_mut()) {
            *v *= scale;
        }
    }
    Ok((grads, total_loss * scale))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-7,
            seed: 1,
        }
    }
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.adam_eps);
        }
    }
}

/// Train the benchmark architecture on a dataset. Deterministic given the
/// config seed: initialization and epoch shuffling draw from one fixed
/// stream, batches run in order, single-threaded.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<MlpModel> {
    train_sized(dataset, config, [784, 64, 64, 10], |_| {})
}

/// [`train`] with custom layer sizes and an epoch callback receiving
/// `(epoch, mean_loss)`.
pub fn train_sized(
    dataset: &Dataset,
    config: &TrainConfig,
    sizes: [usize; 4],
    mut on_epoch: impl FnMut((usize, f64)),
) -> Result<MlpModel> {
    if dataset.is_empty() {
        return Err(Error::InvalidParam("empty training set".into()));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::InvalidParam(
            "epochs and batch size must be positive".into(),
        ));
    }
    let mut model = MlpModel::new(sizes, config.seed);
    // Separate stream for shuffling so init and shuffle orders stay
    // independent of each other.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e3779b97f4a7c15);

    let mut adam_w: Vec<AdamState> = (0..3).map(|l| AdamState::new(model.w[l].len())).collect();
    let mut adam_b: Vec<AdamState> = (0..3).map(|l| AdamState::new(model.b[l].len())).collect();

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let inputs: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&k| dataset.images[k].intensities())
                .collect();
            let labels: Vec<u8> = chunk.iter().map(|&k| dataset.images[k].label).collect();
            let (grads, mean_loss) = batch_gradients(&model, &inputs, &labels)?;
            for l in 0..3 {
                adam_w[l].update(&mut model.w[l], &grads.dw[l], config);
                adam_b[l].update(&mut model.b[l], &grads.db[l], config);
            }
            epoch_loss += mean_loss;
            batches += 1;
        }
        on_epoch((epoch, epoch_loss / batches as f64));
    }
    Ok(model)
}

/// Fraction of correctly predicted samples in a batch of
/// `(intensities, label)` pairs.
pub fn evaluate(model: &MlpModel, batch: &[(Vec<f64>, u8)]) -> Result<f64> {
    evaluate_with(model, batch, ExecMode::default())
}

pub fn evaluate_with(model: &MlpModel, batch: &[(Vec<f64>, u8)], mode: ExecMode) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidParam("empty evaluation batch".into()));
    }
    let hits = try_map_indexed(batch.len(), mode, |k| -> Result<usize> {
        let (input, label) = &batch[k];
        Ok((model.predict(input)? == *label as usize) as usize)
    })?;
    Ok(hits.iter().sum::<usize>() as f64 / batch.len() as f64)
}

/// Accuracy over a whole dataset.
pub fn evaluate_dataset(model: &MlpModel, dataset: &Dataset) -> Result<f64> {
    let batch: Vec<(Vec<f64>, u8)> = dataset
        .images
        .iter()
        .map(|img| (img.intensities(), img.label))
        .collect();
    evaluate(model, &batch)
}
