//! Brute-force references and randomized comparison drivers shared by the
//! integration tests and the acceptance run.
//!
//! The oracles work on widened integers and spell each rounding out with
//! Euclidean division, so they share no arithmetic helpers with the kernels.

#![allow(dead_code)]

use fxq::float_ref::{self, argmax, simulate_quantization, FTensor, FloatModel, FloatParams, SoftmaxBase};
use fxq::graph::{Engine, Layer};
use fxq::kernels::{self, Activation, ConvSpec, DenseSpec, GruSpec, Padding};
use fxq::par::{self, Exec};
use fxq::quantizer::{calibrate_activations, quantize_model, QuantPolicy};
use fxq::synth;
use fxq::{QBlob, QFormat, QTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---- integer helpers -------------------------------------------------------

/// `v / 2^s` rounded half toward +inf.
fn rshift_round(v: i64, s: u32) -> i64 {
    if s == 0 {
        return v;
    }
    let d = 1i64 << s;
    (2 * v + d).div_euclid(2 * d)
}

/// `v * 2^s` for signed `s`.
fn scale_pow2(v: i64, s: i32) -> i64 {
    if s >= 0 { v * (1i64 << s) } else { rshift_round(v, (-s) as u32) }
}

fn clip(v: i64, fmt: QFormat) -> i64 {
    let half = 1i64 << (fmt.total_bits() - 1);
    v.clamp(-half, half - 1)
}

fn random_fmt(rng: &mut ChaCha8Rng, bits: u8, max_frac: u8) -> QFormat {
    QFormat::with_frac(bits, rng.random_range(0..=max_frac.min(bits - 1))).unwrap()
}

fn random_raw(rng: &mut ChaCha8Rng, fmt: QFormat, n: usize) -> Vec<i16> {
    let half = 1i32 << (fmt.total_bits() - 1);
    (0..n).map(|_| rng.random_range(-half..half) as i16).collect()
}

/// Formats `(input, weight, bias, output)` that satisfy the shift contract.
fn affine_formats(rng: &mut ChaCha8Rng) -> (QFormat, QFormat, QFormat, QFormat) {
    let i = random_fmt(rng, 8, 7);
    let w = random_fmt(rng, 8, 7);
    let acc = i.frac_bits() + w.frac_bits();
    (i, w, random_fmt(rng, 8, acc), random_fmt(rng, 8, acc))
}

// ---- oracles ---------------------------------------------------------------

pub fn conv_oracle(x: &QTensor, s: &ConvSpec) -> Vec<i16> {
    let (len, c) = x.shape();
    let (k, n) = (s.kernel_size, s.out_channels);
    let (out_len, pad) = match s.padding {
        Padding::Same => {
            let out = len.div_ceil(s.stride);
            let total = ((out - 1) * s.stride + k).saturating_sub(len);
            (out, total / 2)
        }
        Padding::Valid => ((len - k) / s.stride + 1, 0),
    };
    let acc_frac = (s.in_fmt.frac_bits() + s.weights.fmt.frac_bits()) as i32;
    let mut out = Vec::new();
    for t in 0..out_len {
        for o in 0..n {
            let mut acc = (s.bias.data[o] as i64) << (acc_frac - s.bias.fmt.frac_bits() as i32);
            for tap in 0..k {
                let src = (t * s.stride + tap) as i64 - pad as i64;
                if src < 0 || src >= len as i64 {
                    continue;
                }
                for ci in 0..c {
                    acc += s.weights.data[(o * k + tap) * c + ci] as i64 * x.at(src as usize, ci) as i64;
                }
            }
            let v = clip(rshift_round(acc, (acc_frac - s.out_fmt.frac_bits() as i32) as u32), s.out_fmt);
            out.push(if s.activation == Activation::Relu { v.max(0) } else { v } as i16);
        }
    }
    out
}

pub fn dense_oracle(x: &QTensor, s: &DenseSpec) -> Vec<i16> {
    let acc_frac = (s.in_fmt.frac_bits() + s.weights.fmt.frac_bits()) as i32;
    (0..s.output_dim)
        .map(|o| {
            let mut acc = (s.bias.data[o] as i64) << (acc_frac - s.bias.fmt.frac_bits() as i32);
            for i in 0..s.input_dim {
                acc += s.weights.data[o * s.input_dim + i] as i64 * x.data()[i] as i64;
            }
            clip(rshift_round(acc, (acc_frac - s.out_fmt.frac_bits() as i32) as u32), s.out_fmt) as i16
        })
        .collect()
}

pub fn pool_oracle(x: &QTensor, size: usize, stride: usize) -> Vec<i16> {
    let (len, c) = x.shape();
    let mut out = Vec::new();
    let mut t = 0;
    while t + size <= len {
        for ci in 0..c {
            let sum: i64 = (t..t + size).map(|u| x.at(u, ci) as i64).sum();
            out.push((2 * sum + size as i64).div_euclid(2 * size as i64) as i16);
        }
        t += stride;
    }
    out
}

/// 256-entry table on the top 8 bits of a 16-bit input, linear
/// interpolation on the low 8 bits.
fn lut_oracle(raw: i64, f: fn(f64) -> f64, fmt: QFormat) -> i64 {
    let m = fmt.frac_bits() as i32;
    let entry = |i: i64| -> i64 {
        let x = ((i - 128) * 256) as f64 / 2f64.powi(m);
        let y = f(x) * 2f64.powi(m);
        clip(y.round() as i64, fmt)
    };
    let idx = raw.div_euclid(256) + 128;
    let frac = raw.rem_euclid(256);
    let lo = entry(idx);
    let hi = if idx + 1 < 256 { entry(idx + 1) } else { lo };
    lo + rshift_round((hi - lo) * frac, 8)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn gru_oracle(h: &QTensor, x: &QTensor, s: &GruSpec) -> Vec<i16> {
    let (m, hd) = (s.input_dim, s.hidden_dim);
    let (g, sf) = (s.gate_fmt, s.state_fmt);
    let (gm, sm) = (g.frac_bits() as i32, sf.frac_bits() as i32);
    let xin: Vec<i64> = x.data().iter().map(|&v| v as i64).collect();
    let hs: Vec<i64> = h.data().iter().map(|&v| v as i64).collect();
    let in_shift = gm - s.in_fmt.frac_bits() as i32 - s.kernel.fmt.frac_bits() as i32;
    let rec_shift = gm - sm - s.recurrent.fmt.frac_bits() as i32;
    let bias_shift = gm - s.bias.fmt.frac_bits() as i32;
    let pre = |gate: usize, j: usize, hv: &[i64]| -> i64 {
        let row = gate * hd + j;
        let wx: i64 = (0..m).map(|i| s.kernel.data[row * m + i] as i64 * xin[i]).sum();
        let uh: i64 = (0..hd).map(|i| s.recurrent.data[row * hd + i] as i64 * hv[i]).sum();
        clip(scale_pow2(wx, in_shift) + scale_pow2(uh, rec_shift) + scale_pow2(s.bias.data[row] as i64, bias_shift), g)
    };
    let to_state = |v: i64, from: i32| clip(scale_pow2(v, sm - from), sf);
    let z: Vec<i64> = (0..hd).map(|j| lut_oracle(pre(0, j, &hs), sigmoid, g)).collect();
    let r: Vec<i64> = (0..hd).map(|j| lut_oracle(pre(1, j, &hs), sigmoid, g)).collect();
    let rh: Vec<i64> = (0..hd).map(|j| to_state(r[j] * hs[j], gm + sm)).collect();
    (0..hd)
        .map(|j| {
            let cand = to_state(lut_oracle(pre(2, j, &rh), f64::tanh, g), gm);
            let mix = z[j] * hs[j] + ((1i64 << gm) - z[j]) * cand;
            to_state(mix, gm + sm) as i16
        })
        .collect()
}

// ---- randomized drivers ----------------------------------------------------

/// Number of mismatching cases out of `n`.
pub fn conv_cases(n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let (k, c, o) = (rng.random_range(1..=7), rng.random_range(1..=9), rng.random_range(1..=9));
            let len = rng.random_range(k..=40);
            let (fi, fw, fb, fo) = affine_formats(&mut rng);
            let act = if rng.random_bool(0.5) { Activation::Relu } else { Activation::Linear };
            let w = QBlob::new(fw, random_raw(&mut rng, fw, k * c * o)).unwrap();
            let b = QBlob::new(fb, random_raw(&mut rng, fb, o)).unwrap();
            let mut spec = ConvSpec::new(k, c, o, act, w, b, fi, fo).unwrap();
            spec.stride = rng.random_range(1..=3);
            spec.padding = if rng.random_bool(0.5) { Padding::Same } else { Padding::Valid };
            let x = QTensor::new(random_raw(&mut rng, fi, len * c), len, c, fi).unwrap();
            kernels::conv1d(&x, &spec).unwrap().data() != conv_oracle(&x, &spec)
        })
        .count()
}

pub fn dense_cases(n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let (m, o) = (rng.random_range(1..=80), rng.random_range(1..=10));
            let (fi, fw, fb, fo) = affine_formats(&mut rng);
            let w = QBlob::new(fw, random_raw(&mut rng, fw, m * o)).unwrap();
            let b = QBlob::new(fb, random_raw(&mut rng, fb, o)).unwrap();
            let spec = DenseSpec::new(m, o, w, b, fi, fo).unwrap();
            let x = QTensor::vector(random_raw(&mut rng, fi, m), fi).unwrap();
            kernels::dense(&x, &spec).unwrap().data() != dense_oracle(&x, &spec)
        })
        .count()
}

pub fn pool_cases(n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let (size, stride, c) = (rng.random_range(1..=5), rng.random_range(1..=4), rng.random_range(1..=8));
            let len = rng.random_range(size..=50);
            let fmt = random_fmt(&mut rng, 8, 7);
            let x = QTensor::new(random_raw(&mut rng, fmt, len * c), len, c, fmt).unwrap();
            let gap = kernels::global_avg_pool(&x).unwrap().into_data() != pool_oracle(&x, len, len);
            gap || kernels::avg_pool(&x, size, stride).unwrap().into_data() != pool_oracle(&x, size, stride)
        })
        .count()
}

pub fn gru_cases(n: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let (m, h) = (rng.random_range(1..=12), rng.random_range(1..=8));
            let fi = random_fmt(&mut rng, 8, 7);
            let (fk, fr, fb) = (random_fmt(&mut rng, 8, 7), random_fmt(&mut rng, 8, 7), random_fmt(&mut rng, 8, 7));
            let spec = GruSpec::new(
                m,
                h,
                QBlob::new(fk, random_raw(&mut rng, fk, 3 * m * h)).unwrap(),
                QBlob::new(fr, random_raw(&mut rng, fr, 3 * h * h)).unwrap(),
                QBlob::new(fb, random_raw(&mut rng, fb, 3 * h)).unwrap(),
                fi,
                QFormat::Q2_13,
                QFormat::Q2_13,
                random_fmt(&mut rng, 8, 7),
            )
            .unwrap();
            let state = QTensor::vector(random_raw(&mut rng, QFormat::Q2_13, h), QFormat::Q2_13).unwrap();
            let x = QTensor::vector(random_raw(&mut rng, fi, m), fi).unwrap();
            kernels::gru_step(&state, &x, &spec).unwrap().into_data() != gru_oracle(&state, &x, &spec)
        })
        .count()
}

// ---- fixed vs float --------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
pub struct Consistency {
    pub models: usize,
    pub agree: usize,
    /// Largest per-element `|fixed - float| / tolerance` over every layer.
    pub worst_ratio: f64,
    /// Layer outputs checked.
    pub layer_checks: usize,
}

impl Consistency {
    fn merge(mut self, o: Consistency) -> Self {
        self.models += o.models;
        self.agree += o.agree;
        self.worst_ratio = self.worst_ratio.max(o.worst_ratio);
        self.layer_checks += o.layer_checks;
        self
    }
}

fn ftensor(q: &QTensor) -> FTensor {
    FTensor::new(q.to_real(), q.len(), q.channels()).unwrap()
}

/// `max |a - b| / tol`, after clipping the float values to the fixed range.
fn ratio(float: &[f64], fixed: &QTensor, tol: f64) -> f64 {
    let f = fixed.fmt();
    float
        .iter()
        .zip(fixed.to_real())
        .map(|(a, b)| (a.clamp(f.real_min(), f.real_max()) - b).abs() / tol)
        .fold(0.0, f64::max)
}

/// Quantize one random float model, then compare every layer (fed the
/// engine's own input) and the final argmax.
pub fn check_model(model: &FloatModel, seed: u64, windows: usize) -> Consistency {
    let len = model.meta.window_len;
    let cal: Vec<Vec<Vec<f64>>> = (0..8).map(|k| synth::random_windows(2, len, 1000 + seed * 16 + k)).collect();
    let acts = calibrate_activations(model, &cal, 8, Exec::Sequential).unwrap();
    let (graph, scheme) = quantize_model(model, &QuantPolicy::default(), Some(&acts)).unwrap();
    let sim = simulate_quantization(model, &scheme).unwrap();
    let input = synth::random_windows(windows, len, 99_999 + seed);
    let q: Vec<QTensor> = input.iter().map(|w| QTensor::from_real(w, len, 1, graph.input_fmt).unwrap()).collect();
    let (inf, trace) = Engine::new(&graph).unwrap().run_traced(&q).unwrap();
    let float = float_ref::forward_float_traced(&sim, &input, SoftmaxBase::Two).unwrap();

    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let split = graph.layers.iter().position(|l| !l.kind().is_per_window()).unwrap();
    let grid = sim.fake_quant.as_ref().map(|p| (p.gru_gate, p.gru_state));
    for (w, qw) in q.iter().enumerate() {
        let mut prev = qw.clone();
        for (i, layer) in graph.layers[..split].iter().enumerate() {
            let out = trace.get(i, Some(w)).unwrap();
            let x = ftensor(&prev);
            let lsb_half = out.fmt().lsb() / 2.0;
            let (y, fan_in) = match (layer, &sim.layers[i].kind, &sim.layers[i].params) {
                (Layer::Conv(c), kind, FloatParams::Conv { weights, bias }) => {
                    (float_ref::conv1d(&x, kind, weights, bias).unwrap(), c.kernel_size * c.in_channels)
                }
                (Layer::AvgPool { size, stride }, ..) => (float_ref::avg_pool(&x, *size, *stride).unwrap(), *size),
                (Layer::GlobalAvgPool, ..) => (float_ref::global_avg_pool(&x).unwrap(), prev.len()),
                _ => unreachable!("front end holds convs and pools only"),
            };
            worst = worst.max(ratio(&y.data, out, fan_in as f64 * lsb_half));
            checks += 1;
            prev = out.clone();
        }
        if let (Layer::Gru(g), FloatParams::Gru { kernel, recurrent, bias }) = (&graph.layers[split], &sim.layers[split].params) {
            let h_prev = if w == 0 { vec![0.0; g.hidden_dim] } else { trace.get(split, Some(w - 1)).unwrap().to_real() };
            let y = float_ref::gru_step_snapped(&h_prev, &prev.to_real(), kernel, recurrent, bias, grid);
            let out = trace.get(split, Some(w)).unwrap();
            worst = worst.max(ratio(&y, out, (g.input_dim + g.hidden_dim) as f64 * out.fmt().lsb() / 2.0));
            checks += 1;
        }
    }
    for (i, layer) in graph.layers.iter().enumerate().skip(split + 1) {
        if let (Layer::Dense(d), FloatParams::Dense { weights, bias }) = (layer, &sim.layers[i].params) {
            let x = trace.get(i - 1, None).unwrap().to_real();
            let out = trace.get(i, None).unwrap();
            worst = worst.max(ratio(&float_ref::dense(&x, weights, bias), out, d.input_dim as f64 * out.fmt().lsb() / 2.0));
            checks += 1;
        }
    }
    Consistency { models: 1, agree: (argmax(&float.logits) == inf.class) as usize, worst_ratio: worst, layer_checks: checks }
}

/// Run [`check_model`] over `n` seeded models built by `make`.
pub fn consistency_sweep(n: usize, windows: usize, exec: Exec, make: impl Fn(u64) -> FloatModel + Sync + Send) -> Consistency {
    par::map_range(exec, n, |i| check_model(&make(i as u64), i as u64, windows))
        .into_iter()
        .fold(Consistency::default(), Consistency::merge)
}

pub fn tiny_model(seed: u64) -> FloatModel {
    let meta = fxq::graph::ModelMeta { window_len: 64, ..Default::default() };
    synth::random_model(meta, &synth::tiny_architecture(), seed, 2.0)
}

// ---- recording fixtures ----------------------------------------------------

/// Write `records` as i16 files plus a manifest in `dir`; returns the manifest path.
pub fn write_dataset(dir: &std::path::Path, records: &[(String, Option<fxq::ecg::Label>, f64, Vec<f64>)]) -> std::path::PathBuf {
    use std::fmt::Write as _;
    let scale = 1.0 / 1000.0;
    let mut manifest = String::new();
    for (id, label, fs, samples) in records {
        let bytes: Vec<u8> = samples.iter().flat_map(|v| ((v / scale).round() as i16).to_le_bytes()).collect();
        std::fs::write(dir.join(format!("{id}.bin")), bytes).unwrap();
        let label = label.map_or("null".to_string(), |l| format!("\"{}\"", l.name()));
        let _ = writeln!(
            manifest,
            r#"{{"id": "{id}", "label": {label}, "fs": {fs}, "path": "{id}.bin", "dtype": "i16", "scale": {scale}}}"#
        );
    }
    let path = dir.join("manifest.jsonl");
    std::fs::write(&path, manifest).unwrap();
    path
}

/// Labelled synthetic 300 Hz recordings, cycling through the four classes.
pub fn synthetic_records(n: usize, seconds: f64) -> Vec<(String, Option<fxq::ecg::Label>, f64, Vec<f64>)> {
    (0..n)
        .map(|i| {
            let label = fxq::ecg::Label::ALL[i % 4];
            (format!("rec{i:03}"), Some(label), 300.0, synth::ecg_like(label, 300.0, seconds, i as u64))
        })
        .collect()
}
