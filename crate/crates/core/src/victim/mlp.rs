use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::SyntheticDataset;
use super::Classifier;

pub const LAYER_DIMS: [usize; 4] = [2, 16, 16, 3];
pub const TRAIN_EPOCHS: usize = 400;
pub const LEARNING_RATE: f32 = 0.2;

/// Fully connected layer, weights row-major `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f32>,
    pub biases: Vec<f32>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f32], out: &mut Vec<f32>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let acc = row.iter().zip(x).fold(self.biases[o], |a, (w, v)| a + w * v);
            out.push(acc);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

/// 2-16-16-3 ReLU classifier in float32.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyMlp {
    pub layers: Vec<Dense>,
}

impl TinyMlp {
    pub fn zeros() -> Self {
        Self {
            layers: LAYER_DIMS
                .windows(2)
                .map(|d| Dense::zeros(d[0], d[1]))
                .collect(),
        }
    }

    /// He-uniform weights, zero biases.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros();
        for layer in &mut m.layers {
            let bound = (6.0 / layer.inputs as f32).sqrt();
            layer
                .weights
                .iter_mut()
                .for_each(|w| *w = rng.random_range(-bound..bound));
        }
        m
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Dense::parameter_count).sum()
    }

    /// Logits, or `None` if any activation is not finite.
    pub fn logits(&self, x: [f32; 2]) -> Option<Vec<f32>> {
        let mut cur = x.to_vec();
        let mut next = Vec::with_capacity(16);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return None;
            }
            if i != last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Some(cur)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }
}

impl Classifier for TinyMlp {
    fn predict(&self, x: [f32; 2]) -> Option<usize> {
        let logits = self.logits(x)?;
        let mut best = 0;
        for (i, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = i;
            }
        }
        Some(best)
    }
}

/// Full-batch gradient descent on softmax cross-entropy.
pub fn train_on(seed: u64, data: &SyntheticDataset, epochs: usize, lr: f32) -> TinyMlp {
    let mut model = TinyMlp::random(seed);
    let n = data.train.len() as f32;
    let mut grads = TinyMlp::zeros();
    let mut acts: Vec<Vec<f32>> = vec![Vec::new(); model.layers.len() + 1];
    let mut deltas: Vec<Vec<f32>> = vec![Vec::new(); model.layers.len()];

    for _ in 0..epochs {
        for g in &mut grads.layers {
            g.weights.iter_mut().for_each(|v| *v = 0.0);
            g.biases.iter_mut().for_each(|v| *v = 0.0);
        }
        for (x, label) in &data.train {
            acts[0].clear();
            acts[0].extend_from_slice(x);
            let last = model.layers.len() - 1;
            for (i, layer) in model.layers.iter().enumerate() {
                let (head, tail) = acts.split_at_mut(i + 1);
                layer.forward(&head[i], &mut tail[0]);
                if i != last {
                    tail[0].iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
            // Softmax gradient at the output.
            let logits = &acts[last + 1];
            let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let exps: Vec<f32> = logits.iter().map(|v| (v - max).exp()).collect();
            let sum: f32 = exps.iter().sum();
            deltas[last].clear();
            deltas[last].extend(
                exps.iter()
                    .enumerate()
                    .map(|(c, e)| e / sum - if c == *label { 1.0 } else { 0.0 }),
            );
            for i in (0..model.layers.len()).rev() {
                let layer = &model.layers[i];
                let g = &mut grads.layers[i];
                let input = &acts[i];
                for o in 0..layer.outputs {
                    let d = deltas[i][o];
                    g.biases[o] += d;
                    for j in 0..layer.inputs {
                        g.weights[o * layer.inputs + j] += d * input[j];
                    }
                }
                if i > 0 {
                    let (lower, upper) = deltas.split_at_mut(i);
                    let below = &mut lower[i - 1];
                    below.clear();
                    for j in 0..layer.inputs {
                        let mut acc = 0.0;
                        for o in 0..layer.outputs {
                            acc += layer.weights[o * layer.inputs + j] * upper[0][o];
                        }
                        // ReLU derivative at the hidden activation.
                        below.push(if input[j] > 0.0 { acc } else { 0.0 });
                    }
                }
            }
        }
        for (layer, g) in model.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw / n;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= lr * gb / n;
            }
        }
    }
    model
}

/// The deterministic victim fixture for a seed, trained on the standard dataset.
pub fn train_tiny_mlp(seed: u64) -> TinyMlp {
    train_on(seed, &SyntheticDataset::standard(), TRAIN_EPOCHS, LEARNING_RATE)
}
