//! `6 → H → 3` tanh network with a softmax head.
//!
//! Parameters live in one flat vector laid out as
//! `[W1 (H×6, row-major) | b1 (H) | W2 (3×H, row-major) | b2 (3)]`, which is
//! also the layout of gradients and optimizer moments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{band_powers, FeatureVector, Result, StageError, StageLabel, N_FEATURES};
use crate::signal::Epoch;

const OUT: usize = 3;
/// Lower clamp on a probability before taking its logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax.
pub fn softmax<const K: usize>(logits: &[f64; K]) -> [f64; K] {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; K];
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        *o = (z - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    out
}

/// `−ln p[label]`, with `p[label]` clamped below by [`PROB_FLOOR`].
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// Fixed affine standardization applied to features before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorm {
    pub mean: [f64; N_FEATURES],
    pub scale: [f64; N_FEATURES],
}

impl Default for FeatureNorm {
    fn default() -> Self {
        Self {
            mean: [0.0; N_FEATURES],
            scale: [1.0; N_FEATURES],
        }
    }
}

impl FeatureNorm {
    /// Per-feature mean and standard deviation (floored at 1e-6).
    pub fn fit(xs: &[FeatureVector]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mut mean = [0.0; N_FEATURES];
        for x in xs {
            for (m, v) in mean.iter_mut().zip(x.0) {
                *m += v / n;
            }
        }
        let mut scale = [0.0; N_FEATURES];
        for x in xs {
            for ((s, v), m) in scale.iter_mut().zip(x.0).zip(mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        scale.iter_mut().for_each(|s| *s = s.sqrt().max(1e-6));
        Self { mean, scale }
    }

    pub fn apply(&self, x: &FeatureVector) -> [f64; N_FEATURES] {
        let mut z = [0.0; N_FEATURES];
        for i in 0..N_FEATURES {
            z[i] = (x.0[i] - self.mean[i]) / self.scale[i];
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageNet {
    hidden: usize,
    params: Vec<f64>,
    norm: FeatureNorm,
}

pub(crate) fn param_count(hidden: usize) -> usize {
    hidden * N_FEATURES + hidden + OUT * hidden + OUT
}

impl StageNet {
    /// All parameters zero: every input maps to the uniform distribution.
    pub fn zeros(hidden: usize) -> Result<Self> {
        if hidden == 0 {
            return Err(StageError::ZeroHidden);
        }
        Ok(Self {
            hidden,
            params: vec![0.0; param_count(hidden)],
            norm: FeatureNorm::default(),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(hidden: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(hidden)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = (6.0 / (N_FEATURES + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + OUT) as f64).sqrt();
        let (w1, b1, w2, _) = net.split_mut();
        w1.iter_mut().for_each(|w| *w = rng.random_range(-a1..a1));
        b1.fill(0.0);
        w2.iter_mut().for_each(|w| *w = rng.random_range(-a2..a2));
        Ok(net)
    }

    pub fn from_parts(hidden: usize, params: Vec<f64>, norm: FeatureNorm) -> Result<Self> {
        if hidden == 0 {
            return Err(StageError::ZeroHidden);
        }
        let expected = param_count(hidden);
        if params.len() != expected {
            return Err(StageError::ShapeMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            hidden,
            params,
            norm,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn norm(&self) -> &FeatureNorm {
        &self.norm
    }

    pub fn set_norm(&mut self, norm: FeatureNorm) {
        self.norm = norm;
    }

    /// Check that the flat parameter vector matches the declared shape and
    /// holds only finite values.
    pub fn validate(&self) -> Result<()> {
        let expected = param_count(self.hidden);
        if self.params.len() != expected {
            return Err(StageError::ShapeMismatch {
                expected,
                got: self.params.len(),
            });
        }
        Ok(())
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let h = self.hidden;
        let (w1, rest) = self.params.split_at(h * N_FEATURES);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(OUT * h);
        (w1, b1, w2, b2)
    }

    fn split_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
        let h = self.hidden;
        let (w1, rest) = self.params.split_at_mut(h * N_FEATURES);
        let (b1, rest) = rest.split_at_mut(h);
        let (w2, b2) = rest.split_at_mut(OUT * h);
        (w1, b1, w2, b2)
    }

    /// Mutable view of the first-layer weights (`H×6`, row-major).
    pub fn first_layer_mut(&mut self) -> &mut [f64] {
        self.split_mut().0
    }

    /// Mutable view of the output-layer weights (`3×H`, row-major).
    pub fn output_layer_mut(&mut self) -> &mut [f64] {
        self.split_mut().2
    }

    fn hidden_activations(&self, z: &[f64; N_FEATURES]) -> Vec<f64> {
        let (w1, b1, _, _) = self.split();
        w1.chunks_exact(N_FEATURES)
            .zip(b1)
            .map(|(row, b)| (row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + b).tanh())
            .collect()
    }

    fn output_logits(&self, a: &[f64]) -> [f64; OUT] {
        let (_, _, w2, b2) = self.split();
        let mut logits = [0.0; OUT];
        for (k, (row, b)) in w2.chunks_exact(self.hidden).zip(b2).enumerate() {
            logits[k] = row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>() + b;
        }
        logits
    }

    pub fn logits(&self, x: &FeatureVector) -> [f64; OUT] {
        let z = self.norm.apply(x);
        self.output_logits(&self.hidden_activations(&z))
    }

    /// Class probabilities over (W, N, R).
    pub fn forward(&self, x: &FeatureVector) -> [f64; OUT] {
        softmax(&self.logits(x))
    }

    /// Mean cross-entropy over a batch.
    pub fn loss(&self, batch: &[(FeatureVector, StageLabel)]) -> f64 {
        batch
            .iter()
            .map(|(x, y)| cross_entropy(&self.forward(x), y.index()))
            .sum::<f64>()
            / batch.len() as f64
    }

    /// Exact gradient of the mean batch cross-entropy, in parameter layout.
    pub fn gradient(&self, batch: &[(FeatureVector, StageLabel)]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(StageError::EmptyDataset);
        }
        let h = self.hidden;
        let (_, _, w2, _) = self.split();
        let mut grad = vec![0.0; self.params.len()];
        let inv = 1.0 / batch.len() as f64;
        {
            let (gw1, rest) = grad.split_at_mut(h * N_FEATURES);
            let (gb1, rest) = rest.split_at_mut(h);
            let (gw2, gb2) = rest.split_at_mut(OUT * h);
            let mut delta_h = vec![0.0; h];
            for (x, y) in batch {
                let z = self.norm.apply(x);
                let a = self.hidden_activations(&z);
                let p = softmax(&self.output_logits(&a));
                let mut delta_o = p;
                delta_o[y.index()] -= 1.0;
                for k in 0..OUT {
                    let d = delta_o[k] * inv;
                    gb2[k] += d;
                    for j in 0..h {
                        gw2[k * h + j] += d * a[j];
                    }
                }
                for j in 0..h {
                    let back: f64 = (0..OUT).map(|k| w2[k * h + j] * delta_o[k]).sum();
                    delta_h[j] = back * (1.0 - a[j] * a[j]) * inv;
                }
                for j in 0..h {
                    gb1[j] += delta_h[j];
                    for i in 0..N_FEATURES {
                        gw1[j * N_FEATURES + i] += delta_h[j] * z[i];
                    }
                }
            }
        }
        Ok(grad)
    }

    /// Argmax class; ties go to the earliest label in W < N < R.
    pub fn predict_features(&self, x: &FeatureVector) -> StageLabel {
        let p = self.forward(x);
        let mut best = 0;
        for k in 1..OUT {
            if p[k] > p[best] {
                best = k;
            }
        }
        StageLabel::ALL[best]
    }

    pub fn predict_stage(&self, epoch: &Epoch) -> StageLabel {
        self.predict_features(&band_powers(epoch))
    }
}
