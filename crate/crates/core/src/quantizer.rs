//! Post-training quantization: 3-sigma format selection, activation
//! calibration and conversion of a [`FloatModel`] into a [`ModelGraph`].

use std::fmt::Write as _;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::float_ref::{forward_float_traced, FloatModel, FloatParams, SoftmaxBase};
use crate::graph::{assemble, GraphFormats, Layer, LayerKind, ModelGraph};
use crate::kernels::GruShifts;
use crate::par::{self, Exec};
use crate::qformat::{quantize_raw, QFormat, ShiftSpec};
use crate::tensor::QBlob;

/// Summary statistics of a tensor. `std` is the population deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TensorStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Running sums, merged in a fixed order so results do not depend on scheduling.
#[derive(Debug, Clone, Copy)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
}

impl Moments {
    fn new() -> Self {
        Self { n: 0, sum: 0.0, sum_sq: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    fn extend(&mut self, values: &[f64]) {
        for &v in values {
            self.n += 1;
            self.sum += v;
            self.sum_sq += v * v;
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
    }

    fn stats(&self) -> Result<TensorStats> {
        if self.n == 0 {
            return Err(Error::EmptyTensor);
        }
        let mean = self.sum / self.n as f64;
        let var = (self.sum_sq / self.n as f64 - mean * mean).max(0.0);
        Ok(TensorStats { mean, std: var.sqrt(), min: self.min, max: self.max, count: self.n })
    }
}

pub fn tensor_stats(values: &[f64]) -> Result<TensorStats> {
    if values.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(TensorStats { mean, std: var.sqrt(), min, max, count: values.len() })
}

/// Smallest `n >= 0` with `2^n >= |mean| + 3 std`, capped at `total_bits - 1`.
pub fn int_bits_for(stats: &TensorStats, total_bits: u8) -> u8 {
    let span = stats.mean.abs() + 3.0 * stats.std;
    let cap = total_bits - 1;
    let mut n = 0u8;
    while n < cap && ((1u64 << n) as f64) < span {
        n += 1;
    }
    n
}

pub fn format_for(stats: &TensorStats, total_bits: u8) -> QFormat {
    let n = int_bits_for(stats, total_bits);
    QFormat::new(total_bits, n, total_bits - 1 - n).expect("n fits in the word")
}

pub fn select_format(values: &[f64], total_bits: u8) -> Result<QFormat> {
    if !(2..=16).contains(&total_bits) {
        return Err(Error::InvalidArgument(format!("unsupported word size {total_bits}")));
    }
    Ok(format_for(&tensor_stats(values)?, total_bits))
}

/// Fraction of values clipped by `fmt`.
pub fn saturation_fraction(values: &[f64], fmt: QFormat) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = fmt.frac_bits() as i32;
    let clipped = values
        .iter()
        .filter(|&&v| {
            let r = (v * 2f64.powi(m)).round();
            r > fmt.raw_max() as f64 || r < fmt.raw_min() as f64
        })
        .count();
    clipped as f64 / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorEntry {
    pub name: String,
    pub fmt: QFormat,
    pub stats: Option<TensorStats>,
    pub saturation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationEntry {
    pub name: String,
    pub fmt: QFormat,
    pub stats: Option<TensorStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum LayerShifts {
    Affine(ShiftSpec),
    Gru(GruShifts),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftEntry {
    pub layer: String,
    pub shifts: LayerShifts,
}

/// Formats, shifts and statistics chosen for every tensor of a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QuantScheme {
    pub tensors: Vec<TensorEntry>,
    pub activations: Vec<ActivationEntry>,
    pub shifts: Vec<ShiftEntry>,
    pub warnings: Vec<String>,
}

impl QuantScheme {
    pub fn tensor_format(&self, name: &str) -> Option<QFormat> {
        self.tensors.iter().find(|t| t.name == name).map(|t| t.fmt)
    }

    pub fn activation_format(&self, name: &str) -> Option<QFormat> {
        self.activations.iter().find(|t| t.name == name).map(|t| t.fmt)
    }

    /// Plain-text report: one row per tensor and activation point.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<18} {:>10} {:>10} {:>10} {:>10} {:>10}  {:<8}", "tensor", "mean", "std", "min", "max", "sat %", "format");
        let row = |s: &mut String, name: &str, st: &Option<TensorStats>, sat: Option<f64>, fmt: QFormat| {
            let sat = sat.map_or("-".to_string(), |v| format!("{:.3}", 100.0 * v));
            match st {
                Some(t) => {
                    let _ = writeln!(
                        s,
                        "{name:<18} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {sat:>10}  {fmt}",
                        t.mean, t.std, t.min, t.max
                    );
                }
                None => {
                    let _ = writeln!(s, "{name:<18} {:>10} {:>10} {:>10} {:>10} {sat:>10}  {fmt}", "-", "-", "-", "-");
                }
            }
        };
        for t in &self.tensors {
            row(&mut s, &t.name, &t.stats, Some(t.saturation), t.fmt);
        }
        let _ = writeln!(s);
        for a in &self.activations {
            row(&mut s, &a.name, &a.stats, None, a.fmt);
        }
        let _ = writeln!(s);
        for e in &self.shifts {
            match e.shifts {
                LayerShifts::Affine(sh) => {
                    let _ = writeln!(s, "{:<18} bias <<{} out >>{}", e.layer, sh.bias_left_shift, sh.out_right_shift);
                }
                LayerShifts::Gru(g) => {
                    let _ = writeln!(s, "{:<18} input {:+} recurrent {:+} bias {:+}", e.layer, g.input, g.recurrent, g.bias);
                }
            }
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Word sizes and fixed formats used by [`quantize_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantPolicy {
    pub weight_bits: u8,
    pub activation_bits: u8,
    pub gru_gate: QFormat,
    pub gru_state: QFormat,
    /// Force one format on every weight tensor and activation point.
    pub uniform: Option<QFormat>,
}

impl Default for QuantPolicy {
    fn default() -> Self {
        Self { weight_bits: 8, activation_bits: 8, gru_gate: QFormat::Q2_13, gru_state: QFormat::Q2_13, uniform: None }
    }
}

/// Activation points calibrated, in graph order: `input`, `<conv>.out`
/// (after pooling), `gru.out` (every step's state) and `logits`.
pub fn activation_points(model: &FloatModel) -> Vec<String> {
    let mut names = vec!["input".to_string()];
    let layer_names = model.layer_names();
    for (l, n) in model.layers.iter().zip(&layer_names) {
        match l.kind {
            LayerKind::Conv { .. } => names.push(format!("{n}.out")),
            LayerKind::Gru { .. } => names.push("gru.out".into()),
            LayerKind::Dense { .. } => names.push("logits".into()),
            _ => {}
        }
    }
    names
}

fn record_moments(model: &FloatModel, windows: &[Vec<f64>], points: usize) -> Result<Vec<Moments>> {
    let trace = forward_float_traced(model, windows, SoftmaxBase::E)?;
    let ends = model.conv_block_ends();
    let mut m = vec![Moments::new(); points];
    let mut k = 0;
    for w in windows {
        m[0].extend(w);
    }
    for (j, &end) in ends.iter().enumerate() {
        for layers in &trace.windows {
            m[1 + j].extend(&layers[end].data);
        }
        k = 1 + j;
    }
    let has_gru = model.layers.iter().any(|l| matches!(l.kind, LayerKind::Gru { .. }));
    if has_gru {
        k += 1;
        for s in &trace.gru_states {
            m[k].extend(s);
        }
    }
    if k + 1 < points {
        m[k + 1].extend(&trace.logits);
    }
    Ok(m)
}

/// Run the float model over calibration recordings (each a list of windows)
/// and pick every activation format with the 3-sigma rule.
pub fn calibrate_activations(
    model: &FloatModel,
    recordings: &[Vec<Vec<f64>>],
    total_bits: u8,
    exec: Exec,
) -> Result<Vec<ActivationEntry>> {
    if recordings.is_empty() || recordings.iter().all(|r| r.is_empty()) {
        return Err(Error::InvalidArgument("calibration set is empty".into()));
    }
    let names = activation_points(model);
    let partial = par::map(exec, recordings, |r| record_moments(model, r, names.len()));
    let mut total = vec![Moments::new(); names.len()];
    for p in partial {
        for (t, m) in total.iter_mut().zip(p?) {
            t.merge(&m);
        }
    }
    names
        .into_iter()
        .zip(total)
        .map(|(name, m)| {
            let stats = m.stats()?;
            Ok(ActivationEntry { name, fmt: format_for(&stats, total_bits), stats: Some(stats) })
        })
        .collect()
}

fn quantize_blob(values: &[f64], fmt: QFormat) -> QBlob {
    QBlob { fmt, data: values.iter().map(|&v| quantize_raw(v, fmt) as i16).collect() }
}

/// Choose formats for every tensor, without building the graph.
pub fn build_scheme(model: &FloatModel, policy: &QuantPolicy, calibration: Option<&[ActivationEntry]>) -> Result<QuantScheme> {
    let mut scheme = QuantScheme::default();
    for (name, values) in model.named_tensors() {
        let (fmt, stats) = match policy.uniform {
            Some(u) => (u, tensor_stats(values).ok()),
            None => {
                let st = tensor_stats(values)?;
                (format_for(&st, policy.weight_bits), Some(st))
            }
        };
        scheme.tensors.push(TensorEntry { saturation: saturation_fraction(values, fmt), name, fmt, stats });
    }

    let layer_names = model.layer_names();
    let weight_fmt_of = |layer: usize| -> QFormat {
        let first = model.layers[layer].params.tensors()[0].0;
        scheme.tensor_format(&format!("{}.{first}", layer_names[layer])).expect("weight tensor present")
    };
    let owner = |point: &str| -> Option<usize> {
        let base = match point {
            "gru.out" => "gru",
            "logits" => "dense",
            p => p.strip_suffix(".out")?,
        };
        if base == "dense" {
            return model.layers.iter().rposition(|l| matches!(l.kind, LayerKind::Dense { .. }));
        }
        layer_names.iter().position(|n| n == base)
    };
    let mut warned = false;
    let mut activations = Vec::new();
    let mut warnings = Vec::new();
    for point in activation_points(model) {
        if let Some(u) = policy.uniform {
            activations.push(ActivationEntry { name: point, fmt: u, stats: None });
            continue;
        }
        let found = calibration.and_then(|c| c.iter().find(|a| a.name == point));
        match found {
            Some(a) => activations.push(a.clone()),
            None => {
                if !warned {
                    let msg = "no calibration data for some activations; using the producing layer's weight format".to_string();
                    warn!("{msg}");
                    warnings.push(msg);
                    warned = true;
                }
                let fmt = match owner(&point) {
                    Some(i) if point != "input" => QFormat::with_frac(policy.activation_bits, weight_fmt_of(i).frac_bits().min(policy.activation_bits - 1))?,
                    _ => QFormat::Q2_5,
                };
                activations.push(ActivationEntry { name: point, fmt, stats: None });
            }
        }
    }
    if model.layers.iter().any(|l| matches!(l.kind, LayerKind::Gru { .. })) {
        // fixed by the policy, recorded so the scheme describes every grid
        activations.push(ActivationEntry { name: "gru.gate".into(), fmt: policy.gru_gate, stats: None });
        activations.push(ActivationEntry { name: "gru.state".into(), fmt: policy.gru_state, stats: None });
    }
    scheme.activations = activations;
    scheme.warnings = warnings;
    Ok(scheme)
}

/// Formats for [`assemble`] taken from a scheme.
pub fn graph_formats(model: &FloatModel, scheme: &QuantScheme, policy: &QuantPolicy) -> Result<GraphFormats> {
    let need = |n: &str| scheme.activation_format(n).ok_or_else(|| Error::IncompleteScheme(n.to_string()));
    let names = model.layer_names();
    let conv_out = model
        .layers
        .iter()
        .zip(&names)
        .filter(|(l, _)| matches!(l.kind, LayerKind::Conv { .. }))
        .map(|(_, n)| need(&format!("{n}.out")))
        .collect::<Result<Vec<_>>>()?;
    let has = |f: fn(&LayerKind) -> bool| model.layers.iter().any(|l| f(&l.kind));
    let input = need("input")?;
    let gru_out = if has(|k| matches!(k, LayerKind::Gru { .. })) { need("gru.out")? } else { input };
    let logits = if has(|k| matches!(k, LayerKind::Dense { .. })) { need("logits")? } else { input };
    Ok(GraphFormats { input, conv_out, gru_gate: policy.gru_gate, gru_state: policy.gru_state, gru_out, logits })
}

/// Quantize a float model. Returns the graph and the scheme that produced it.
pub fn quantize_model(
    model: &FloatModel,
    policy: &QuantPolicy,
    calibration: Option<&[ActivationEntry]>,
) -> Result<(ModelGraph, QuantScheme)> {
    let mut scheme = build_scheme(model, policy, calibration)?;
    let formats = graph_formats(model, &scheme, policy)?;
    let names = model.layer_names();
    let graph = assemble(model.meta.clone(), &model.kinds(), &formats, |i, _| {
        let params: &FloatParams = &model.layers[i].params;
        params
            .tensors()
            .into_iter()
            .map(|(suffix, values)| {
                let key = format!("{}.{suffix}", names[i]);
                let fmt = scheme.tensor_format(&key).ok_or(Error::IncompleteScheme(key))?;
                Ok(quantize_blob(values, fmt))
            })
            .collect()
    })?;
    for (layer, name) in graph.layers.iter().zip(&names) {
        let shifts = match layer {
            Layer::Conv(c) => LayerShifts::Affine(c.shifts),
            Layer::Dense(d) => LayerShifts::Affine(d.shifts),
            Layer::Gru(g) => LayerShifts::Gru(g.shifts),
            _ => continue,
        };
        scheme.shifts.push(ShiftEntry { layer: name.clone(), shifts });
    }
    Ok((graph, scheme))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{canonical_architecture, validate, ModelMeta};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(mu: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mu, sigma).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    fn fmt_for(mean: f64, std: f64, bits: u8) -> QFormat {
        format_for(&TensorStats { mean, std, min: 0.0, max: 0.0, count: 1 }, bits)
    }

    #[test]
    fn three_sigma_examples() {
        assert_eq!(fmt_for(0.0, 1.0, 8), QFormat::Q2_5);
        assert_eq!(fmt_for(0.0, 0.1, 8), QFormat::Q0_7);
        assert_eq!(fmt_for(0.0, 0.0, 8), QFormat::Q0_7);
        assert_eq!(fmt_for(0.0, 0.5, 8).to_string(), "Q1.6@8");
        assert_eq!(fmt_for(0.0, 1.0, 16).to_string(), "Q2.13@16");
        // exactly on a power of two: 2^1 >= 2
        assert_eq!(fmt_for(0.5, 0.5, 8).to_string(), "Q1.6@8");
        assert_eq!(fmt_for(1e9, 0.0, 8).to_string(), "Q7.0@8");
        assert_eq!(select_format(&[0.0; 10], 8).unwrap(), QFormat::Q0_7);
        assert!(matches!(select_format(&[], 8), Err(Error::EmptyTensor)));
    }

    #[test]
    fn stats_are_population() {
        let s = tensor_stats(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
    }

    #[test]
    fn gaussian_coverage() {
        for (i, sigma) in [0.05, 0.3, 0.7, 1.0, 1.2].into_iter().enumerate() {
            let w = gaussian(0.0, sigma, 200_000, i as u64);
            let fmt = select_format(&w, 8).unwrap();
            let sat = saturation_fraction(&w, fmt);
            assert!(sat <= 0.003 + 0.001, "sigma {sigma}: {sat}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn covering_rule_holds(mu in -3.0f64..3.0, sigma in 0.0f64..3.0) {
            let fmt = fmt_for(mu, sigma, 8);
            let n = fmt.int_bits() as i32;
            let span = mu.abs() + 3.0 * sigma;
            prop_assert!(2f64.powi(n) >= span || n == 7);
            prop_assert!(n == 0 || 2f64.powi(n - 1) < span);
        }

        #[test]
        fn halving_never_widens(seed in 0u64..1000, sigma in 0.01f64..4.0) {
            let w = gaussian(0.1, sigma, 512, seed);
            let half: Vec<f64> = w.iter().map(|v| v * 0.5).collect();
            prop_assert!(select_format(&half, 8).unwrap().int_bits() <= select_format(&w, 8).unwrap().int_bits());
        }
    }

    fn random_model(sigma: f64, seed: u64) -> FloatModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, sigma).unwrap();
        FloatModel::from_fn(ModelMeta::default(), &canonical_architecture(), |_, _, _| d.sample(&mut rng))
    }

    #[test]
    fn half_sigma_weights_are_q1_6_or_tighter() {
        let m = random_model(0.5, 1);
        let (g, scheme) = quantize_model(&m, &QuantPolicy::default(), None).unwrap();
        for t in &scheme.tensors {
            assert!(t.fmt.int_bits() <= 1, "{} -> {}", t.name, t.fmt);
        }
        assert!(validate(&g).is_ok());
        assert!(!scheme.warnings.is_empty());
    }

    #[test]
    fn zero_model() {
        let m = FloatModel::zeros(ModelMeta::default(), &canonical_architecture());
        let (g, scheme) = quantize_model(&m, &QuantPolicy::default(), None).unwrap();
        assert!(scheme.tensors.iter().all(|t| t.fmt == QFormat::Q0_7));
        assert!(validate(&g).is_ok());
        assert_eq!(scheme.shifts.len(), 9);
    }

    #[test]
    fn uniform_override() {
        let m = random_model(0.1, 2);
        let policy = QuantPolicy { uniform: Some(QFormat::Q2_5), ..Default::default() };
        let (g, scheme) = quantize_model(&m, &policy, None).unwrap();
        assert!(scheme.tensors.iter().all(|t| t.fmt == QFormat::Q2_5));
        assert!(scheme.activations.iter().filter(|t| !matches!(t.name.as_str(), "gru.gate" | "gru.state")).all(|t| t.fmt == QFormat::Q2_5));
        assert_eq!(scheme.activation_format("gru.state"), Some(QFormat::Q2_13));
        assert!(validate(&g).is_ok());
        let bytes = crate::graph::serialize(&g).unwrap();
        assert!(validate(&crate::graph::deserialize(&bytes).unwrap()).is_ok());
    }

    #[test]
    fn calibration_rules() {
        let m = random_model(0.05, 3);
        let rec: Vec<Vec<f64>> = (0..2).map(|k| gaussian(0.0, 1.0, 256, 10 + k)).collect();
        let cal = calibrate_activations(&m, &[rec.clone(), rec], 8, Exec::default()).unwrap();
        let names: Vec<&str> = cal.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names[0], "input");
        assert_eq!(names[1], "conv1.out");
        assert_eq!(&names[8..], ["gru.out", "logits"]);
        assert_eq!(cal[0].fmt, QFormat::Q2_5);
        // GRU states live in (-1, 1)
        assert!(cal[8].fmt.int_bits() <= 1);
        let zero = FloatModel::zeros(ModelMeta::default(), &canonical_architecture());
        let z = calibrate_activations(&zero, &[vec![vec![0.0; 256]]], 8, Exec::Sequential).unwrap();
        assert!(z.iter().all(|a| a.fmt == QFormat::Q0_7));
        assert!(calibrate_activations(&zero, &[], 8, Exec::Sequential).is_err());
    }

    #[test]
    fn calibration_is_deterministic_across_exec() {
        let m = random_model(0.1, 4);
        let recs: Vec<Vec<Vec<f64>>> = (0..6).map(|k| vec![gaussian(0.0, 1.0, 256, k)]).collect();
        let a = calibrate_activations(&m, &recs, 8, Exec::Sequential).unwrap();
        let b = calibrate_activations(&m, &recs, 8, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_lists_every_tensor() {
        let m = random_model(0.3, 5);
        let (_, scheme) = quantize_model(&m, &QuantPolicy::default(), None).unwrap();
        let table = scheme.to_table();
        for t in &scheme.tensors {
            assert!(table.contains(&t.name));
        }
        assert_eq!(scheme.tensors.len(), 7 * 2 + 3 + 2);
    }
}
