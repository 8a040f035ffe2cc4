//! Seeded synthetic models and signals for tests, benchmarks and demos.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ecg::Label;
use crate::float_ref::{FloatLayer, FloatModel, FloatParams};
use crate::graph::{LayerKind, ModelMeta};
use crate::kernels::{Activation, Padding};

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let d = Normal::new(0.0, std).expect("finite deviation");
    (0..n).map(|_| d.sample(rng)).collect()
}

/// Float model with variance-preserving random weights: conv weights
/// `N(0, 2/(K*C))`, GRU kernels `N(0, 1/M)` and `N(0, 1/H)`, dense
/// `N(0, gain^2/M)`, small biases.
pub fn random_model(meta: ModelMeta, kinds: &[LayerKind], seed: u64, head_gain: f64) -> FloatModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = kinds
        .iter()
        .map(|&kind| {
            let params = match kind {
                LayerKind::Conv { kernel, in_channels, out_channels, .. } => FloatParams::Conv {
                    weights: normal_vec(&mut rng, kernel * in_channels * out_channels, (2.0 / (kernel * in_channels) as f64).sqrt()),
                    bias: normal_vec(&mut rng, out_channels, 0.05),
                },
                LayerKind::Gru { input_dim, hidden_dim } => FloatParams::Gru {
                    kernel: normal_vec(&mut rng, 3 * input_dim * hidden_dim, (1.0 / input_dim as f64).sqrt()),
                    recurrent: normal_vec(&mut rng, 3 * hidden_dim * hidden_dim, (1.0 / hidden_dim as f64).sqrt()),
                    bias: normal_vec(&mut rng, 3 * hidden_dim, 0.1),
                },
                LayerKind::Dense { input_dim, output_dim } => FloatParams::Dense {
                    weights: normal_vec(&mut rng, input_dim * output_dim, head_gain / (input_dim as f64).sqrt()),
                    bias: normal_vec(&mut rng, output_dim, 0.1),
                },
                _ => FloatParams::None,
            };
            FloatLayer { kind, params }
        })
        .collect();
    FloatModel { meta, layers, fake_quant: None }
}

pub fn canonical_random_model(seed: u64) -> FloatModel {
    random_model(ModelMeta::default(), &crate::graph::canonical_architecture(), seed, 2.0)
}

/// Two conv layers with pooling, global pooling, a 4-unit GRU and a 4-way head.
pub fn tiny_architecture() -> Vec<LayerKind> {
    let conv = |c, n| LayerKind::Conv {
        kernel: 3,
        in_channels: c,
        out_channels: n,
        stride: 1,
        padding: Padding::Same,
        activation: Activation::Relu,
    };
    vec![
        conv(1, 4),
        LayerKind::AvgPool { size: 2, stride: 2 },
        conv(4, 8),
        LayerKind::AvgPool { size: 2, stride: 2 },
        LayerKind::GlobalAvgPool,
        LayerKind::Gru { input_dim: 8, hidden_dim: 4 },
        LayerKind::Dense { input_dim: 4, output_dim: 4 },
        LayerKind::Softmax,
    ]
}

/// `n` windows of unit-variance noise with a little low-frequency structure.
pub fn random_windows(n: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let f = rng.random_range(0.5..8.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            let noise = normal_vec(&mut rng, len, 0.6);
            (0..len).map(|t| 1.1 * (2.0 * PI * f * t as f64 / 107.0 + phase).sin() + noise[t]).collect()
        })
        .collect()
}

/// Crude single-lead ECG: Gaussian QRS-like pulses plus baseline wander,
/// with rhythm features that depend on the class.
pub fn ecg_like(label: Label, fs: f64, seconds: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (fs * seconds).round() as usize;
    let mut x = vec![0.0; n];
    let base_rr = rng.random_range(0.7..1.0);
    let mut t = rng.random_range(0.0..base_rr);
    while t < seconds {
        let (amp, width) = match label {
            Label::Noise => (rng.random_range(0.2..1.5), 0.03),
            _ => (1.0, 0.012),
        };
        let centre = t * fs;
        let lo = (centre - 6.0 * width * fs).max(0.0) as usize;
        let hi = ((centre + 6.0 * width * fs) as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
            let d = (i as f64 - centre) / (width * fs);
            *v += amp * (-0.5 * d * d).exp();
        }
        t += match label {
            Label::Normal => base_rr * rng.random_range(0.97..1.03),
            Label::AF => base_rr * rng.random_range(0.5..1.3),
            Label::Other => {
                if rng.random_bool(0.2) { base_rr * 0.6 } else { base_rr * 1.1 }
            }
            Label::Noise => base_rr * rng.random_range(0.3..1.5),
        };
    }
    let wander_f = rng.random_range(0.1..0.3);
    let noise_std = if label == Label::Noise { 0.5 } else { 0.03 };
    let noise = normal_vec(&mut rng, n, noise_std);
    for (i, v) in x.iter_mut().enumerate() {
        *v += 0.2 * (2.0 * PI * wander_f * i as f64 / fs).sin() + noise[i];
    }
    x
}
