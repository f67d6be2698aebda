//! A small fully connected network with one tanh hidden layer, a shared
//! trunk, and one softmax/cross-entropy head per task. Parameters live in a
//! single flat vector so the optimization side never sees the layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Architecture of the two-task network. Layout of the flat parameter
/// vector: trunk `W1 (hidden x input)`, `b1 (hidden)`, then per task
/// `W2 (classes x hidden)`, `b2 (classes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: [usize; 2],
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: usize, classes: [usize; 2]) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || classes[0] < 2 || classes[1] < 2 {
            return Err(Error::invalid(
                "network needs positive input/hidden sizes and at least two classes per task",
            ));
        }
        Ok(MlpSpec { input_dim, hidden, classes })
    }

    pub fn param_count(&self) -> usize {
        self.hidden * self.input_dim
            + self.hidden
            + self.classes[0] * self.hidden
            + self.classes[0]
            + self.classes[1] * self.hidden
            + self.classes[1]
    }

    fn trunk_len(&self) -> usize {
        self.hidden * self.input_dim + self.hidden
    }

    fn head_offset(&self, task: usize) -> usize {
        let mut off = self.trunk_len();
        if task == 1 {
            off += self.classes[0] * self.hidden + self.classes[0];
        }
        off
    }
}

/// Seeded uniform init in `[-s, s]` with `s = 1/sqrt(fan_in)` per layer.
pub fn init_weights(spec: &MlpSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0.0; spec.param_count()];
    let s1 = 1.0 / (spec.input_dim as f64).sqrt();
    let s2 = 1.0 / (spec.hidden as f64).sqrt();
    let trunk = spec.trunk_len();
    for v in weights[..trunk].iter_mut() {
        *v = rng.random_range(-s1..s1);
    }
    for v in weights[trunk..].iter_mut() {
        *v = rng.random_range(-s2..s2);
    }
    weights
}

struct Forward {
    /// tanh activations, samples x hidden
    hidden: Vec<f64>,
    /// softmax probabilities, samples x classes
    probs: Vec<f64>,
    losses: Vec<f64>,
}

fn forward_pass(
    spec: &MlpSpec,
    weights: &[f64],
    features: &[Vec<f64>],
    labels: &[usize],
    task: usize,
) -> Result<Forward> {
    let (h, d) = (spec.hidden, spec.input_dim);
    let classes = spec.classes[task];
    let w1 = &weights[..h * d];
    let b1 = &weights[h * d..h * d + h];
    let head = spec.head_offset(task);
    let w2 = &weights[head..head + classes * h];
    let b2 = &weights[head + classes * h..head + classes * h + classes];

    let n = features.len();
    let mut hidden = vec![0.0; n * h];
    let mut probs = vec![0.0; n * classes];
    let mut losses = vec![0.0; n];

    for (j, (xi, &label)) in features.iter().zip(labels).enumerate() {
        if xi.len() != d {
            return Err(Error::DimensionMismatch {
                context: "sample features",
                expected: d,
                got: xi.len(),
            });
        }
        if label >= classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for a {classes}-class task"
            )));
        }
        let hrow = &mut hidden[j * h..(j + 1) * h];
        for i in 0..h {
            let mut pre = b1[i];
            for (k, x) in xi.iter().enumerate() {
                pre += w1[i * d + k] * x;
            }
            hrow[i] = pre.tanh();
        }
        let prow = &mut probs[j * classes..(j + 1) * classes];
        let mut zmax = f64::NEG_INFINITY;
        for c in 0..classes {
            let mut z = b2[c];
            for i in 0..h {
                z += w2[c * h + i] * hrow[i];
            }
            prow[c] = z;
            zmax = zmax.max(z);
        }
        if !zmax.is_finite() {
            return Err(Error::non_finite("network logits", j));
        }
        let mut denom = 0.0;
        for p in prow.iter_mut() {
            *p = (*p - zmax).exp();
            denom += *p;
        }
        losses[j] = -(prow[label] / denom).ln();
        for p in prow.iter_mut() {
            *p /= denom;
        }
    }
    Ok(Forward { hidden, probs, losses })
}

/// Per-sample cross-entropy losses of the given task's head.
pub fn per_sample_losses(
    spec: &MlpSpec,
    weights: &[f64],
    features: &[Vec<f64>],
    labels: &[usize],
    task: usize,
) -> Result<Vec<f64>> {
    Ok(forward_pass(spec, weights, features, labels, task)?.losses)
}

/// Gradient of `sum_j sample_weights[j] * loss_j` with respect to the flat
/// parameter vector, by analytic backpropagation.
pub fn weighted_loss_grad(
    spec: &MlpSpec,
    weights: &[f64],
    features: &[Vec<f64>],
    labels: &[usize],
    task: usize,
    sample_weights: &[f64],
) -> Result<Vec<f64>> {
    let (losses, grad_fn) = mlp_loss_and_grads(spec, weights, features, labels, task)?;
    let _ = losses;
    Ok(grad_fn(sample_weights))
}

/// Forward pass once, then a gradient callback reusing the cached
/// activations: the callback maps sample weights to the gradient of the
/// weighted loss sum.
pub fn mlp_loss_and_grads<'a>(
    spec: &'a MlpSpec,
    weights: &'a [f64],
    features: &'a [Vec<f64>],
    labels: &'a [usize],
    task: usize,
) -> Result<(Vec<f64>, impl Fn(&[f64]) -> Vec<f64> + 'a)> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "labels",
            expected: features.len(),
            got: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(Error::invalid("task batch must be non-empty"));
    }
    let fwd = forward_pass(spec, weights, features, labels, task)?;
    let losses = fwd.losses.clone();
    let (h, d) = (spec.hidden, spec.input_dim);
    let classes = spec.classes[task];
    let head = spec.head_offset(task);
    let w1_len = h * d;
    let w2 = weights[head..head + classes * h].to_vec();

    let grad_fn = move |sample_weights: &[f64]| -> Vec<f64> {
        assert_eq!(sample_weights.len(), features.len(), "one weight per sample");
        let mut grad = vec![0.0; spec.param_count()];
        let mut dz = vec![0.0; classes];
        let mut dpre = vec![0.0; h];
        for (j, (xi, &label)) in features.iter().zip(labels).enumerate() {
            let omega = sample_weights[j];
            if omega == 0.0 {
                continue;
            }
            let hrow = &fwd.hidden[j * h..(j + 1) * h];
            let prow = &fwd.probs[j * classes..(j + 1) * classes];
            for c in 0..classes {
                dz[c] = omega * (prow[c] - if c == label { 1.0 } else { 0.0 });
            }
            // head
            for c in 0..classes {
                let row = &mut grad[head + c * h..head + (c + 1) * h];
                for i in 0..h {
                    row[i] += dz[c] * hrow[i];
                }
            }
            for c in 0..classes {
                grad[head + classes * h + c] += dz[c];
            }
            // trunk through the tanh
            for i in 0..h {
                let mut dh = 0.0;
                for c in 0..classes {
                    dh += w2[c * h + i] * dz[c];
                }
                dpre[i] = dh * (1.0 - hrow[i] * hrow[i]);
            }
            for i in 0..h {
                let row = &mut grad[i * d..(i + 1) * d];
                for (k, x) in xi.iter().enumerate() {
                    row[k] += dpre[i] * x;
                }
            }
            for i in 0..h {
                grad[w1_len + i] += dpre[i];
            }
        }
        grad
    };
    Ok((losses, grad_fn))
}
