//! Double-precision reference of the quantized network.
//!
//! Same layer structure, padding, pooling and GRU variant as the fixed-point
//! engine. With a [`FakeQuantPlan`] attached, every point where the engine
//! requantizes is snapped to its Q-format grid: the input, each front-end
//! layer output, GRU pre-activations (clipped to the gate range), the hidden
//! state, the GRU output and the logits. Nonlinearities and accumulations
//! stay in full precision.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{
    layer_names, ByteReader, ByteWriter, Container, LayerKind, LayerRecord, ModelGraph, ModelMeta, Shape,
};
use crate::kernels::conv_geometry;
use crate::qformat::{fake_quantize, QFormat};
use crate::quantizer::{QuantPolicy, QuantScheme};

pub const FXF_MAGIC: [u8; 4] = *b"FXF1";
pub const FXF_VERSION: u16 = 1;

/// Real-valued tensor of shape `(len, channels)`, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FTensor {
    pub data: Vec<f64>,
    pub len: usize,
    pub channels: usize,
}

impl FTensor {
    pub fn new(data: Vec<f64>, len: usize, channels: usize) -> Result<Self> {
        if data.len() != len * channels {
            return Err(Error::Shape(format!("{} values cannot fill ({len}, {channels})", data.len())));
        }
        Ok(Self { data, len, channels })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Self { data, len: 1, channels: n }
    }

    pub fn window(samples: &[f64]) -> Self {
        Self { data: samples.to_vec(), len: samples.len(), channels: 1 }
    }

    #[inline]
    pub fn at(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.channels + c]
    }

    fn fake_quantize(&mut self, fmt: QFormat) {
        self.data.iter_mut().for_each(|v| *v = fake_quantize(*v, fmt));
    }
}

/// Parameters of one layer. Weight layouts match the fixed-point kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum FloatParams {
    None,
    Conv { weights: Vec<f64>, bias: Vec<f64> },
    Gru { kernel: Vec<f64>, recurrent: Vec<f64>, bias: Vec<f64> },
    Dense { weights: Vec<f64>, bias: Vec<f64> },
}

impl FloatParams {
    /// `(suffix, values)` pairs in file order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        match self {
            FloatParams::None => vec![],
            FloatParams::Conv { weights, bias } | FloatParams::Dense { weights, bias } => {
                vec![("weight", weights), ("bias", bias)]
            }
            FloatParams::Gru { kernel, recurrent, bias } => {
                vec![("kernel", kernel), ("recurrent", recurrent), ("bias", bias)]
            }
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            FloatParams::None => vec![],
            FloatParams::Conv { weights, bias } | FloatParams::Dense { weights, bias } => vec![weights, bias],
            FloatParams::Gru { kernel, recurrent, bias } => vec![kernel, recurrent, bias],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatLayer {
    pub kind: LayerKind,
    pub params: FloatParams,
}

/// Where activations are snapped in simulated-quantization mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FakeQuantPlan {
    pub input: QFormat,
    /// One format per conv layer, applied after the conv and every
    /// pooling layer up to the next conv.
    pub conv_blocks: Vec<QFormat>,
    /// Range of the GRU pre-activations.
    pub gru_gate: QFormat,
    pub gru_state: QFormat,
    pub gru_output: QFormat,
    pub logits: QFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatModel {
    pub meta: ModelMeta,
    pub layers: Vec<FloatLayer>,
    pub fake_quant: Option<FakeQuantPlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SoftmaxBase {
    #[default]
    E,
    Two,
}

impl FloatModel {
    /// A model with every parameter set to zero.
    pub fn zeros(meta: ModelMeta, kinds: &[LayerKind]) -> Self {
        Self::from_fn(meta, kinds, |_, _, _| 0.0)
    }

    /// Build a model, drawing parameter `j` of tensor `t` of layer `i` from `f(i, t, j)`.
    pub fn from_fn(meta: ModelMeta, kinds: &[LayerKind], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut gen = |i: usize, t: usize, n: usize| (0..n).map(|j| f(i, t, j)).collect::<Vec<_>>();
        let layers = kinds
            .iter()
            .enumerate()
            .map(|(i, &kind)| {
                let params = match kind {
                    LayerKind::Conv { kernel, in_channels, out_channels, .. } => FloatParams::Conv {
                        weights: gen(i, 0, kernel * in_channels * out_channels),
                        bias: gen(i, 1, out_channels),
                    },
                    LayerKind::Gru { input_dim, hidden_dim } => FloatParams::Gru {
                        kernel: gen(i, 0, 3 * input_dim * hidden_dim),
                        recurrent: gen(i, 1, 3 * hidden_dim * hidden_dim),
                        bias: gen(i, 2, 3 * hidden_dim),
                    },
                    LayerKind::Dense { input_dim, output_dim } => FloatParams::Dense {
                        weights: gen(i, 0, input_dim * output_dim),
                        bias: gen(i, 1, output_dim),
                    },
                    _ => FloatParams::None,
                };
                FloatLayer { kind, params }
            })
            .collect();
        Self { meta, layers, fake_quant: None }
    }

    /// Dequantized copy of a fixed-point graph, without fake quantization.
    pub fn from_graph(graph: &ModelGraph) -> Self {
        let layers = graph
            .layers
            .iter()
            .map(|l| {
                let b: Vec<Vec<f64>> = l.blobs().iter().map(|(_, b)| b.to_real()).collect();
                let params = match l.kind() {
                    LayerKind::Conv { .. } => FloatParams::Conv { weights: b[0].clone(), bias: b[1].clone() },
                    LayerKind::Gru { .. } => {
                        FloatParams::Gru { kernel: b[0].clone(), recurrent: b[1].clone(), bias: b[2].clone() }
                    }
                    LayerKind::Dense { .. } => FloatParams::Dense { weights: b[0].clone(), bias: b[1].clone() },
                    _ => FloatParams::None,
                };
                FloatLayer { kind: l.kind(), params }
            })
            .collect();
        Self { meta: graph.meta.clone(), layers, fake_quant: None }
    }

    pub fn kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(|l| l.kind).collect()
    }

    pub fn layer_names(&self) -> Vec<String> {
        layer_names(&self.kinds())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.kind.param_count()).sum()
    }

    /// Named parameter tensors, e.g. `conv1.weight`, `gru.recurrent`.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        let names = self.layer_names();
        self.layers
            .iter()
            .zip(&names)
            .flat_map(|(l, n)| l.params.tensors().into_iter().map(move |(s, v)| (format!("{n}.{s}"), v)))
            .collect()
    }

    /// Layer indices after which conv-block fake quantization applies:
    /// the pooling layer directly following each conv, else the conv itself.
    pub fn conv_block_ends(&self) -> Vec<usize> {
        let mut ends = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            if let LayerKind::Conv { .. } = l.kind {
                let pooled = matches!(self.layers.get(i + 1).map(|n| n.kind), Some(LayerKind::AvgPool { .. }));
                ends.push(if pooled { i + 1 } else { i });
            }
        }
        ends
    }

    pub fn check_structure(&self, graph: &ModelGraph) -> Result<()> {
        if self.kinds() != graph.kinds() || self.meta.window_len != graph.meta.window_len {
            return Err(Error::Shape("float model and graph differ in structure".into()));
        }
        Ok(())
    }
}

// ---- layer ops -------------------------------------------------------------

pub fn conv1d(x: &FTensor, kind: &LayerKind, weights: &[f64], bias: &[f64]) -> Result<FTensor> {
    let LayerKind::Conv { kernel: k, in_channels: c, out_channels: n, stride, padding, activation } = *kind else {
        return Err(Error::InvalidArgument("not a conv layer".into()));
    };
    if x.channels != c {
        return Err(Error::Shape(format!("conv expects {c} channels, got {}", x.channels)));
    }
    let (out_len, pad) =
        conv_geometry(x.len, k, stride, padding).ok_or_else(|| Error::Shape("input too short".into()))?;
    let mut out = Vec::with_capacity(out_len * n);
    for t in 0..out_len {
        let start = (t * stride) as isize - pad as isize;
        for o in 0..n {
            let mut acc = bias[o];
            for tap in 0..k {
                let src = start + tap as isize;
                if src < 0 || src as usize >= x.len {
                    continue;
                }
                for ch in 0..c {
                    acc += weights[(o * k + tap) * c + ch] * x.at(src as usize, ch);
                }
            }
            out.push(activation.apply_real(acc));
        }
    }
    Ok(FTensor { data: out, len: out_len, channels: n })
}

pub fn avg_pool(x: &FTensor, size: usize, stride: usize) -> Result<FTensor> {
    if size == 0 || stride == 0 || x.len < size {
        return Err(Error::Shape(format!("pool of size {size} over length {}", x.len)));
    }
    let out_len = (x.len - size) / stride + 1;
    let mut out = Vec::with_capacity(out_len * x.channels);
    for t in 0..out_len {
        for c in 0..x.channels {
            out.push((0..size).map(|i| x.at(t * stride + i, c)).sum::<f64>() / size as f64);
        }
    }
    Ok(FTensor { data: out, len: out_len, channels: x.channels })
}

pub fn global_avg_pool(x: &FTensor) -> Result<FTensor> {
    if x.len == 0 {
        return Err(Error::EmptyTensor);
    }
    let means = (0..x.channels).map(|c| (0..x.len).map(|t| x.at(t, c)).sum::<f64>() / x.len as f64).collect();
    Ok(FTensor::vector(means))
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// One step of the single-bias GRU with the reset gate applied before the
/// recurrent product. Gates ordered z, r, h.
pub fn gru_step(h: &[f64], x: &[f64], kernel: &[f64], recurrent: &[f64], bias: &[f64]) -> Vec<f64> {
    gru_step_snapped(h, x, kernel, recurrent, bias, None)
}

/// [`gru_step`] with optional `(gate, state)` grids: pre-activations are
/// clipped to the gate range, and the reset product, candidate and new
/// state are snapped to the state grid.
pub fn gru_step_snapped(
    h: &[f64],
    x: &[f64],
    kernel: &[f64],
    recurrent: &[f64],
    bias: &[f64],
    grid: Option<(QFormat, QFormat)>,
) -> Vec<f64> {
    let (m, hd) = (x.len(), h.len());
    let clip = |v: f64| grid.map_or(v, |(g, _)| v.clamp(g.real_min(), g.real_max()));
    let snap = |v: f64| grid.map_or(v, |(_, s)| fake_quantize(v, s));
    let pre = |g: usize, j: usize, hv: &[f64]| -> f64 {
        let row = g * hd + j;
        let wx: f64 = kernel[row * m..(row + 1) * m].iter().zip(x).map(|(a, b)| a * b).sum();
        let uh: f64 = recurrent[row * hd..(row + 1) * hd].iter().zip(hv).map(|(a, b)| a * b).sum();
        clip(wx + uh + bias[row])
    };
    let z: Vec<f64> = (0..hd).map(|j| sigmoid(pre(0, j, h))).collect();
    let r: Vec<f64> = (0..hd).map(|j| sigmoid(pre(1, j, h))).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| snap(a * b)).collect();
    (0..hd)
        .map(|j| {
            let cand = snap(pre(2, j, &rh).tanh());
            snap(z[j] * h[j] + (1.0 - z[j]) * cand)
        })
        .collect()
}

pub fn dense(x: &[f64], weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let m = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, b)| b + weights[o * m..(o + 1) * m].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

/// Index of the first maximum, the same tie rule as the fixed-point engine.
pub fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best })
}

pub fn softmax(logits: &[f64], base: SoftmaxBase) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits
        .iter()
        .map(|&l| match base {
            SoftmaxBase::E => (l - max).exp(),
            SoftmaxBase::Two => (l - max).exp2(),
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

// ---- forward ---------------------------------------------------------------

/// Intermediate values of a float forward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FloatTrace {
    /// Per window, per front-end layer output (after any fake quantization).
    pub windows: Vec<Vec<FTensor>>,
    /// Hidden state after each window.
    pub gru_states: Vec<Vec<f64>>,
    /// GRU output after fake quantization (equal to the last state otherwise).
    pub gru_output: Vec<f64>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

fn front_end(model: &FloatModel, window: &[f64], trace: Option<&mut Vec<FTensor>>) -> Result<FTensor> {
    if window.len() != model.meta.window_len {
        return Err(Error::Shape(format!("window of {} samples, expected {}", window.len(), model.meta.window_len)));
    }
    let mut x = FTensor::window(window);
    if let Some(p) = &model.fake_quant {
        x.fake_quantize(p.input);
    }
    let mut trace = trace;
    let mut block: Option<usize> = None;
    for (i, layer) in model.layers.iter().enumerate() {
        if !layer.kind.is_per_window() {
            break;
        }
        x = match (&layer.kind, &layer.params) {
            (kind @ LayerKind::Conv { .. }, FloatParams::Conv { weights, bias }) => conv1d(&x, kind, weights, bias)?,
            (LayerKind::AvgPool { size, stride }, _) => avg_pool(&x, *size, *stride)?,
            (LayerKind::GlobalAvgPool, _) => global_avg_pool(&x)?,
            _ => return Err(Error::Shape(format!("layer {i} has mismatched parameters"))),
        };
        if matches!(layer.kind, LayerKind::Conv { .. }) {
            block = Some(block.map_or(0, |b| b + 1));
        }
        if let Some(p) = &model.fake_quant {
            x.fake_quantize(block.map_or(p.input, |b| p.conv_blocks[b]));
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(x.clone());
        }
    }
    Ok(x)
}

/// Full forward pass over a recording's windows.
pub fn forward_float_traced(model: &FloatModel, windows: &[Vec<f64>], base: SoftmaxBase) -> Result<FloatTrace> {
    if windows.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let convs = model.layers.iter().filter(|l| matches!(l.kind, LayerKind::Conv { .. })).count();
    if let Some(p) = &model.fake_quant {
        if p.conv_blocks.len() != convs {
            return Err(Error::IncompleteScheme(format!("{} conv block formats for {convs} convs", p.conv_blocks.len())));
        }
    }
    let mut trace = FloatTrace::default();
    let gru = model.layers.iter().find_map(|l| match (&l.kind, &l.params) {
        (LayerKind::Gru { hidden_dim, .. }, FloatParams::Gru { kernel, recurrent, bias }) => {
            Some((*hidden_dim, kernel, recurrent, bias))
        }
        _ => None,
    });
    let mut h = gru.map(|(hd, ..)| vec![0.0; hd]);
    let mut features = None;
    for w in windows {
        let mut layers = Vec::new();
        let f = front_end(model, w, Some(&mut layers))?;
        trace.windows.push(layers);
        match (&mut h, gru) {
            (Some(state), Some((_, k, r, b))) => {
                if f.data.len() * state.len() * 3 != k.len() {
                    return Err(Error::Shape("GRU input dimension mismatch".into()));
                }
                let grid = model.fake_quant.as_ref().map(|p| (p.gru_gate, p.gru_state));
                *state = gru_step_snapped(state, &f.data, k, r, b, grid);
                trace.gru_states.push(state.clone());
            }
            _ => {
                if features.is_some() {
                    return Err(Error::Shape("a model without a GRU takes exactly one window".into()));
                }
                features = Some(f.data);
            }
        }
    }
    let mut x = match h {
        Some(mut state) => {
            if let Some(p) = &model.fake_quant {
                state.iter_mut().for_each(|v| *v = fake_quantize(*v, p.gru_output));
            }
            state
        }
        None => features.expect("one window processed"),
    };
    trace.gru_output = x.clone();
    for layer in &model.layers {
        if let (LayerKind::Dense { .. }, FloatParams::Dense { weights, bias }) = (&layer.kind, &layer.params) {
            x = dense(&x, weights, bias);
            if let Some(p) = &model.fake_quant {
                x.iter_mut().for_each(|v| *v = fake_quantize(*v, p.logits));
            }
        }
    }
    trace.probabilities = softmax(&x, base);
    trace.logits = x;
    Ok(trace)
}

pub fn forward_float(model: &FloatModel, windows: &[Vec<f64>], base: SoftmaxBase) -> Result<Vec<f64>> {
    Ok(forward_float_traced(model, windows, base)?.probabilities)
}

/// Snap weights to their quantization grids and attach fake-quantize nodes.
pub fn simulate_quantization(model: &FloatModel, scheme: &QuantScheme) -> Result<FloatModel> {
    let names = model.layer_names();
    let mut out = model.clone();
    for (layer, name) in out.layers.iter_mut().zip(&names) {
        let suffixes: Vec<&str> = layer.params.tensors().iter().map(|(s, _)| *s).collect();
        for (values, suffix) in layer.params.tensors_mut().into_iter().zip(suffixes) {
            let key = format!("{name}.{suffix}");
            let fmt = scheme.tensor_format(&key).ok_or(Error::IncompleteScheme(key))?;
            values.iter_mut().for_each(|v| *v = fake_quantize(*v, fmt));
        }
    }
    let act = |key: &str| scheme.activation_format(key).ok_or_else(|| Error::IncompleteScheme(key.to_string()));
    let conv_blocks = names
        .iter()
        .zip(&model.layers)
        .filter(|(_, l)| matches!(l.kind, LayerKind::Conv { .. }))
        .map(|(n, _)| act(&format!("{n}.out")))
        .collect::<Result<Vec<_>>>()?;
    let gru_output = if model.layers.iter().any(|l| matches!(l.kind, LayerKind::Gru { .. })) {
        act("gru.out")?
    } else {
        act("input")?
    };
    let logits = if model.layers.iter().any(|l| matches!(l.kind, LayerKind::Dense { .. })) {
        act("logits")?
    } else {
        gru_output
    };
    let policy = QuantPolicy::default();
    let gru_gate = scheme.activation_format("gru.gate").unwrap_or(policy.gru_gate);
    let gru_state = scheme.activation_format("gru.state").unwrap_or(policy.gru_state);
    out.fake_quant = Some(FakeQuantPlan { input: act("input")?, conv_blocks, gru_gate, gru_state, gru_output, logits });
    Ok(out)
}

// ---- float model files -----------------------------------------------------

use crate::graph::io as tags;

/// Encode as a float model file (`FXF1`, f32 blobs).
pub fn serialize_float(model: &FloatModel) -> Result<Vec<u8>> {
    let mut payload = ByteWriter::new();
    let mut records = Vec::new();
    for layer in &model.layers {
        let mut blobs = Vec::new();
        for (_, values) in layer.params.tensors() {
            blobs.push((payload.buf.len() as u32, values.len() as u32));
            values.iter().for_each(|&v| payload.f32(v as f32));
        }
        let (tag, dims, flags) = match layer.kind {
            LayerKind::Conv { kernel, in_channels, out_channels, stride, padding, activation } => (
                tags::TAG_CONV,
                vec![kernel as u32, in_channels as u32, out_channels as u32, stride as u32],
                vec![tags::padding_flag(padding), tags::activation_flag(activation), 0],
            ),
            LayerKind::AvgPool { size, stride } => (tags::TAG_AVGPOOL, vec![size as u32, stride as u32], vec![]),
            LayerKind::GlobalAvgPool => (tags::TAG_GAP, vec![], vec![]),
            LayerKind::Gru { input_dim, hidden_dim } => (tags::TAG_GRU, vec![input_dim as u32, hidden_dim as u32], vec![]),
            LayerKind::Dense { input_dim, output_dim } => {
                (tags::TAG_DENSE, vec![input_dim as u32, output_dim as u32], vec![])
            }
            LayerKind::Softmax => (tags::TAG_SOFTMAX, vec![], vec![]),
        };
        records.push(LayerRecord { tag, dims, formats: vec![], shifts: vec![], flags, blobs });
    }
    Container { meta: model.meta.clone(), input_fmt: None, records, payload: payload.buf }.encode(FXF_MAGIC, FXF_VERSION)
}

pub fn deserialize_float(bytes: &[u8]) -> Result<FloatModel> {
    let c = Container::decode(bytes, FXF_MAGIC, FXF_VERSION, false)?;
    let read = |loc: (u32, u32)| -> Result<Vec<f64>> {
        let raw = c.blob_bytes(loc, 4)?;
        let mut r = ByteReader::new(raw);
        (0..loc.1).map(|_| r.f32().map(|v| v as f64)).collect()
    };
    let mut layers = Vec::with_capacity(c.records.len());
    for r in &c.records {
        let dim = |i: usize| {
            r.dims.get(i).map(|&d| d as usize).ok_or_else(|| Error::Malformed(format!("layer tag {} lacks dim {i}", r.tag)))
        };
        let blob = |i: usize| r.blobs.get(i).copied().ok_or_else(|| Error::Malformed(format!("layer tag {} lacks blob {i}", r.tag)));
        let flag = |i: usize| r.flags.get(i).copied().ok_or_else(|| Error::Malformed(format!("layer tag {} lacks flag {i}", r.tag)));
        let (kind, params) = match r.tag {
            tags::TAG_CONV => (
                LayerKind::Conv {
                    kernel: dim(0)?,
                    in_channels: dim(1)?,
                    out_channels: dim(2)?,
                    stride: dim(3)?,
                    padding: tags::parse_padding(flag(0)?)?,
                    activation: tags::parse_activation(flag(1)?)?,
                },
                FloatParams::Conv { weights: read(blob(0)?)?, bias: read(blob(1)?)? },
            ),
            tags::TAG_AVGPOOL => (LayerKind::AvgPool { size: dim(0)?, stride: dim(1)? }, FloatParams::None),
            tags::TAG_GAP => (LayerKind::GlobalAvgPool, FloatParams::None),
            tags::TAG_GRU => (
                LayerKind::Gru { input_dim: dim(0)?, hidden_dim: dim(1)? },
                FloatParams::Gru { kernel: read(blob(0)?)?, recurrent: read(blob(1)?)?, bias: read(blob(2)?)? },
            ),
            tags::TAG_DENSE => (
                LayerKind::Dense { input_dim: dim(0)?, output_dim: dim(1)? },
                FloatParams::Dense { weights: read(blob(0)?)?, bias: read(blob(1)?)? },
            ),
            tags::TAG_SOFTMAX => (LayerKind::Softmax, FloatParams::None),
            t => return Err(Error::Malformed(format!("unknown layer tag {t}"))),
        };
        let expected = kind.param_count();
        let got: usize = params.tensors().iter().map(|(_, v)| v.len()).sum();
        if expected != got {
            return Err(Error::Malformed(format!("{kind:?} carries {got} parameters, expected {expected}")));
        }
        layers.push(FloatLayer { kind, params });
    }
    let model = FloatModel { meta: c.meta, layers, fake_quant: None };
    crate::graph::shape_chain(&model.kinds(), model.meta.window_len)?;
    Ok(model)
}

/// Output shape of every layer for one window.
pub fn shapes(model: &FloatModel) -> Result<Vec<Shape>> {
    crate::graph::shape_chain(&model.kinds(), model.meta.window_len)
}
