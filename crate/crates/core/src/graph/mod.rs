//! Model graphs: architecture, canonical network, validation, file format
//! and memory planning.

mod container;
mod engine;
pub(crate) mod io;
mod memory;
mod validate;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{conv_geometry, Activation, ConvSpec, DenseSpec, GruSpec, Padding};
use crate::qformat::QFormat;
use crate::tensor::QBlob;

pub(crate) use container::{ByteReader, ByteWriter, Container, LayerRecord};
pub use engine::{forward_quantized, Engine, Inference, Trace, TraceEntry};
pub use io::{deserialize, serialize, FXQ_MAGIC, FXQ_VERSION};
pub use memory::{plan_memory, MemoryPlan};
pub use validate::{validate, Diagnostic, Severity, ValidationReport};

/// Length of one input window in samples.
pub const WINDOW_LEN: usize = 256;
/// Sampling rate the network consumes.
pub const MODEL_SAMPLE_RATE: f64 = 107.0;
pub const CLASS_NAMES: [&str; 4] = ["Normal", "AF", "Other", "Noise"];

/// Channel widths of the seven convolution layers.
pub const CANONICAL_CHANNELS: [usize; 7] = [8, 16, 32, 64, 64, 128, 128];
pub const CANONICAL_KERNEL: usize = 5;
pub const CANONICAL_HIDDEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub window_len: usize,
    pub sample_rate: f64,
    pub class_names: Vec<String>,
}

impl Default for ModelMeta {
    fn default() -> Self {
        Self {
            window_len: WINDOW_LEN,
            sample_rate: MODEL_SAMPLE_RATE,
            class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Shape of an activation: a multi-channel sequence or a flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Seq { len: usize, channels: usize },
    Vector(usize),
}

impl Shape {
    pub fn elements(self) -> usize {
        match self {
            Shape::Seq { len, channels } => len * channels,
            Shape::Vector(d) => d,
        }
    }
}

/// Structure of one layer, without parameters or formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv { kernel: usize, in_channels: usize, out_channels: usize, stride: usize, padding: Padding, activation: Activation },
    AvgPool { size: usize, stride: usize },
    GlobalAvgPool,
    Gru { input_dim: usize, hidden_dim: usize },
    Dense { input_dim: usize, output_dim: usize },
    Softmax,
}

impl LayerKind {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerKind::Conv { kernel, in_channels, out_channels, .. } => kernel * in_channels * out_channels + out_channels,
            LayerKind::Gru { input_dim, hidden_dim } => 3 * (input_dim * hidden_dim + hidden_dim * hidden_dim + hidden_dim),
            LayerKind::Dense { input_dim, output_dim } => input_dim * output_dim + output_dim,
            _ => 0,
        }
    }

    /// Output shape for a given input shape. The GRU maps one feature
    /// vector per window to its hidden vector.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let mismatch = |want: &str| Err(Error::Shape(format!("{self:?} expects {want}, got {input:?}")));
        match (*self, input) {
            (LayerKind::Conv { kernel, in_channels, out_channels, stride, padding, .. }, Shape::Seq { len, channels }) => {
                if channels != in_channels {
                    return mismatch(&format!("{in_channels} channels"));
                }
                let (out, _) = conv_geometry(len, kernel, stride, padding)
                    .ok_or_else(|| Error::Shape(format!("length {len} too short for kernel {kernel}")))?;
                Ok(Shape::Seq { len: out, channels: out_channels })
            }
            (LayerKind::AvgPool { size, stride }, Shape::Seq { len, channels }) => {
                if size == 0 || stride == 0 || len < size {
                    return mismatch(&format!("at least {size} samples"));
                }
                Ok(Shape::Seq { len: (len - size) / stride + 1, channels })
            }
            (LayerKind::GlobalAvgPool, Shape::Seq { len, channels }) => {
                if len == 0 {
                    return Err(Error::EmptyTensor);
                }
                Ok(Shape::Vector(channels))
            }
            (LayerKind::Gru { input_dim, hidden_dim }, Shape::Vector(d)) => {
                if d != input_dim {
                    return mismatch(&format!("a {input_dim}-vector"));
                }
                Ok(Shape::Vector(hidden_dim))
            }
            (LayerKind::Dense { input_dim, output_dim }, Shape::Vector(d)) => {
                if d != input_dim {
                    return mismatch(&format!("a {input_dim}-vector"));
                }
                Ok(Shape::Vector(output_dim))
            }
            (LayerKind::Softmax, Shape::Vector(d)) => Ok(Shape::Vector(d)),
            (_, _) => mismatch("a different rank"),
        }
    }

    pub fn is_per_window(&self) -> bool {
        matches!(self, LayerKind::Conv { .. } | LayerKind::AvgPool { .. } | LayerKind::GlobalAvgPool)
    }
}

/// Human-readable layer names: conv1.., pool1.., gap, gru, dense, softmax.
pub fn layer_names(kinds: &[LayerKind]) -> Vec<String> {
    let (mut conv, mut pool, mut gru, mut dense) = (0, 0, 0, 0);
    let bump = |n: &mut usize, base: &str, single: bool| {
        *n += 1;
        if single && *n == 1 {
            base.to_string()
        } else {
            format!("{base}{n}")
        }
    };
    kinds
        .iter()
        .map(|k| match k {
            LayerKind::Conv { .. } => bump(&mut conv, "conv", false),
            LayerKind::AvgPool { .. } => bump(&mut pool, "pool", false),
            LayerKind::GlobalAvgPool => "gap".to_string(),
            LayerKind::Gru { .. } => bump(&mut gru, "gru", true),
            LayerKind::Dense { .. } => bump(&mut dense, "dense", true),
            LayerKind::Softmax => "softmax".to_string(),
        })
        .collect()
}

/// Layer structure of the 7-conv / GRU / dense classifier.
pub fn canonical_architecture() -> Vec<LayerKind> {
    let mut kinds = Vec::new();
    let mut in_ch = 1;
    for &out_ch in &CANONICAL_CHANNELS {
        kinds.push(LayerKind::Conv {
            kernel: CANONICAL_KERNEL,
            in_channels: in_ch,
            out_channels: out_ch,
            stride: 1,
            padding: Padding::Same,
            activation: Activation::Relu,
        });
        kinds.push(LayerKind::AvgPool { size: 2, stride: 2 });
        in_ch = out_ch;
    }
    kinds.push(LayerKind::GlobalAvgPool);
    kinds.push(LayerKind::Gru { input_dim: in_ch, hidden_dim: CANONICAL_HIDDEN });
    kinds.push(LayerKind::Dense { input_dim: CANONICAL_HIDDEN, output_dim: CLASS_NAMES.len() });
    kinds.push(LayerKind::Softmax);
    kinds
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(ConvSpec),
    AvgPool { size: usize, stride: usize },
    GlobalAvgPool,
    Gru(Box<GruSpec>),
    Dense(DenseSpec),
    Softmax,
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv(c) => LayerKind::Conv {
                kernel: c.kernel_size,
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                stride: c.stride,
                padding: c.padding,
                activation: c.activation,
            },
            Layer::AvgPool { size, stride } => LayerKind::AvgPool { size: *size, stride: *stride },
            Layer::GlobalAvgPool => LayerKind::GlobalAvgPool,
            Layer::Gru(g) => LayerKind::Gru { input_dim: g.input_dim, hidden_dim: g.hidden_dim },
            Layer::Dense(d) => LayerKind::Dense { input_dim: d.input_dim, output_dim: d.output_dim },
            Layer::Softmax => LayerKind::Softmax,
        }
    }

    pub fn param_count(&self) -> usize {
        self.kind().param_count()
    }

    /// Parameter blobs with their names relative to the layer.
    pub fn blobs(&self) -> Vec<(&'static str, &QBlob)> {
        match self {
            Layer::Conv(c) => vec![("weight", &c.weights), ("bias", &c.bias)],
            Layer::Gru(g) => vec![("kernel", &g.kernel), ("recurrent", &g.recurrent), ("bias", &g.bias)],
            Layer::Dense(d) => vec![("weight", &d.weights), ("bias", &d.bias)],
            _ => Vec::new(),
        }
    }
}

/// Quantized network. Immutable once built; share freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    pub meta: ModelMeta,
    pub input_fmt: QFormat,
    pub layers: Vec<Layer>,
}

impl ModelGraph {
    pub fn kinds(&self) -> Vec<LayerKind> {
        self.layers.iter().map(Layer::kind).collect()
    }

    pub fn layer_names(&self) -> Vec<String> {
        layer_names(&self.kinds())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn gru(&self) -> Option<&GruSpec> {
        self.layers.iter().find_map(|l| match l {
            Layer::Gru(g) => Some(g.as_ref()),
            _ => None,
        })
    }

    /// Per-layer output shapes for one window.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        shape_chain(&self.kinds(), self.meta.window_len)
    }
}

pub fn shape_chain(kinds: &[LayerKind], window_len: usize) -> Result<Vec<Shape>> {
    let mut shape = Shape::Seq { len: window_len, channels: 1 };
    kinds
        .iter()
        .map(|k| {
            shape = k.output_shape(shape)?;
            Ok(shape)
        })
        .collect()
}

/// Formats used when assembling a quantized graph from an architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFormats {
    pub input: QFormat,
    /// Output format of each conv layer (pooling keeps it).
    pub conv_out: Vec<QFormat>,
    pub gru_gate: QFormat,
    pub gru_state: QFormat,
    pub gru_out: QFormat,
    pub logits: QFormat,
}

impl GraphFormats {
    pub fn canonical() -> Self {
        Self {
            input: QFormat::Q2_5,
            conv_out: vec![QFormat::Q2_5; CANONICAL_CHANNELS.len()],
            gru_gate: QFormat::Q2_13,
            gru_state: QFormat::Q2_13,
            gru_out: QFormat::Q2_5,
            logits: QFormat::Q2_5,
        }
    }
}

/// Assemble a quantized graph. `blobs` yields the parameter blobs of every
/// parameterised layer in order (conv: weight, bias; gru: kernel,
/// recurrent, bias; dense: weight, bias).
pub fn assemble(
    meta: ModelMeta,
    kinds: &[LayerKind],
    formats: &GraphFormats,
    mut blobs: impl FnMut(usize, &LayerKind) -> Result<Vec<QBlob>>,
) -> Result<ModelGraph> {
    let names = layer_names(kinds);
    let mut fmt = formats.input;
    let mut conv_idx = 0;
    let mut layers = Vec::with_capacity(kinds.len());
    for (i, kind) in kinds.iter().enumerate() {
        let named = |e: Error| match e {
            Error::IncompatibleFormatChain(m) => Error::IncompatibleFormatChain(format!("layer {}: {m}", names[i])),
            other => other,
        };
        let layer = match *kind {
            LayerKind::Conv { kernel, in_channels, out_channels, stride, padding, activation } => {
                let [w, b]: [QBlob; 2] = take_blobs(blobs(i, kind)?, &names[i])?;
                let out = *formats
                    .conv_out
                    .get(conv_idx)
                    .ok_or_else(|| Error::IncompleteScheme(format!("{}.out", names[i])))?;
                conv_idx += 1;
                let mut spec = ConvSpec::new(kernel, in_channels, out_channels, activation, w, b, fmt, out).map_err(named)?;
                spec.stride = stride;
                spec.padding = padding;
                fmt = out;
                Layer::Conv(spec)
            }
            LayerKind::AvgPool { size, stride } => Layer::AvgPool { size, stride },
            LayerKind::GlobalAvgPool => Layer::GlobalAvgPool,
            LayerKind::Gru { input_dim, hidden_dim } => {
                let [k, r, b]: [QBlob; 3] = take_blobs(blobs(i, kind)?, &names[i])?;
                let spec = GruSpec::new(
                    input_dim,
                    hidden_dim,
                    k,
                    r,
                    b,
                    fmt,
                    formats.gru_gate,
                    formats.gru_state,
                    formats.gru_out,
                )
                .map_err(named)?;
                fmt = formats.gru_out;
                Layer::Gru(Box::new(spec))
            }
            LayerKind::Dense { input_dim, output_dim } => {
                let [w, b]: [QBlob; 2] = take_blobs(blobs(i, kind)?, &names[i])?;
                let spec = DenseSpec::new(input_dim, output_dim, w, b, fmt, formats.logits).map_err(named)?;
                fmt = formats.logits;
                Layer::Dense(spec)
            }
            LayerKind::Softmax => Layer::Softmax,
        };
        layers.push(layer);
    }
    Ok(ModelGraph { meta, input_fmt: formats.input, layers })
}

fn take_blobs<const N: usize>(v: Vec<QBlob>, name: &str) -> Result<[QBlob; N]> {
    let n = v.len();
    v.try_into().map_err(|_| Error::Shape(format!("layer {name} needs {N} blobs, got {n}")))
}

/// The canonical network with all-zero parameters: Q2.5@8 weights,
/// biases and activations, Q2.13@16 GRU gates and state.
pub fn build_canonical_model() -> ModelGraph {
    let kinds = canonical_architecture();
    assemble(ModelMeta::default(), &kinds, &GraphFormats::canonical(), |_, kind| {
        Ok(zero_blobs(kind, QFormat::Q2_5))
    })
    .expect("canonical formats are consistent")
}

pub(crate) fn zero_blobs(kind: &LayerKind, fmt: QFormat) -> Vec<QBlob> {
    match *kind {
        LayerKind::Conv { kernel, in_channels, out_channels, .. } => {
            vec![QBlob::zeros(fmt, kernel * in_channels * out_channels), QBlob::zeros(fmt, out_channels)]
        }
        LayerKind::Gru { input_dim, hidden_dim } => vec![
            QBlob::zeros(fmt, 3 * input_dim * hidden_dim),
            QBlob::zeros(fmt, 3 * hidden_dim * hidden_dim),
            QBlob::zeros(fmt, 3 * hidden_dim),
        ],
        LayerKind::Dense { input_dim, output_dim } => {
            vec![QBlob::zeros(fmt, input_dim * output_dim), QBlob::zeros(fmt, output_dim)]
        }
        _ => Vec::new(),
    }
}
