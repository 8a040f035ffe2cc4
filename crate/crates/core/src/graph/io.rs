use crate::error::{Error, Result};
use crate::kernels::{Activation, ConvSpec, DenseSpec, GruShifts, GruSpec, Padding};
use crate::qformat::{QFormat, ShiftSpec};
use crate::tensor::QBlob;

use super::{Container, Layer, LayerRecord, ModelGraph};

pub const FXQ_MAGIC: [u8; 4] = *b"FXQ1";
pub const FXQ_VERSION: u16 = 1;

pub(crate) const TAG_CONV: u8 = 1;
pub(crate) const TAG_AVGPOOL: u8 = 2;
pub(crate) const TAG_GAP: u8 = 3;
pub(crate) const TAG_GRU: u8 = 4;
pub(crate) const TAG_DENSE: u8 = 5;
pub(crate) const TAG_SOFTMAX: u8 = 6;

pub(crate) fn padding_flag(p: Padding) -> u8 {
    match p {
        Padding::Same => 0,
        Padding::Valid => 1,
    }
}

pub(crate) fn activation_flag(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Linear => 1,
    }
}

pub(crate) fn parse_padding(v: u8) -> Result<Padding> {
    match v {
        0 => Ok(Padding::Same),
        1 => Ok(Padding::Valid),
        _ => Err(Error::Malformed(format!("unknown padding flag {v}"))),
    }
}

pub(crate) fn parse_activation(v: u8) -> Result<Activation> {
    match v {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Linear),
        _ => Err(Error::Malformed(format!("unknown activation flag {v}"))),
    }
}

fn push_blob(payload: &mut Vec<u8>, blob: &QBlob) -> (u32, u32) {
    let off = payload.len() as u32;
    for &v in &blob.data {
        if blob.fmt.bytes() == 1 {
            payload.push(v as i8 as u8);
        } else {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    (off, blob.data.len() as u32)
}

fn read_blob(c: &Container, loc: (u32, u32), fmt: QFormat) -> Result<QBlob> {
    let bytes = c.blob_bytes(loc, fmt.bytes())?;
    let data = if fmt.bytes() == 1 {
        bytes.iter().map(|&b| b as i8 as i16).collect()
    } else {
        bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect()
    };
    QBlob::new(fmt, data)
}

/// Encode a graph as an `.fxq` file.
pub fn serialize(graph: &ModelGraph) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let mut records = Vec::with_capacity(graph.layers.len());
    for layer in &graph.layers {
        let rec = match layer {
            Layer::Conv(c) => LayerRecord {
                tag: TAG_CONV,
                dims: vec![c.kernel_size as u32, c.in_channels as u32, c.out_channels as u32, c.stride as u32],
                formats: vec![c.in_fmt, c.out_fmt, c.weights.fmt, c.bias.fmt],
                shifts: vec![c.shifts.bias_left_shift as i8, c.shifts.out_right_shift as i8],
                flags: vec![padding_flag(c.padding), activation_flag(c.activation), c.fast as u8],
                blobs: vec![push_blob(&mut payload, &c.weights), push_blob(&mut payload, &c.bias)],
            },
            Layer::AvgPool { size, stride } => LayerRecord {
                tag: TAG_AVGPOOL,
                dims: vec![*size as u32, *stride as u32],
                ..Default::default()
            },
            Layer::GlobalAvgPool => LayerRecord { tag: TAG_GAP, ..Default::default() },
            Layer::Gru(g) => LayerRecord {
                tag: TAG_GRU,
                dims: vec![g.input_dim as u32, g.hidden_dim as u32],
                formats: vec![g.in_fmt, g.gate_fmt, g.state_fmt, g.out_fmt, g.kernel.fmt, g.recurrent.fmt, g.bias.fmt],
                shifts: vec![g.shifts.input, g.shifts.recurrent, g.shifts.bias],
                flags: vec![],
                blobs: vec![
                    push_blob(&mut payload, &g.kernel),
                    push_blob(&mut payload, &g.recurrent),
                    push_blob(&mut payload, &g.bias),
                ],
            },
            Layer::Dense(d) => LayerRecord {
                tag: TAG_DENSE,
                dims: vec![d.input_dim as u32, d.output_dim as u32],
                formats: vec![d.in_fmt, d.out_fmt, d.weights.fmt, d.bias.fmt],
                shifts: vec![d.shifts.bias_left_shift as i8, d.shifts.out_right_shift as i8],
                flags: vec![],
                blobs: vec![push_blob(&mut payload, &d.weights), push_blob(&mut payload, &d.bias)],
            },
            Layer::Softmax => LayerRecord { tag: TAG_SOFTMAX, ..Default::default() },
        };
        records.push(rec);
    }
    Container { meta: graph.meta.clone(), input_fmt: Some(graph.input_fmt), records, payload }.encode(FXQ_MAGIC, FXQ_VERSION)
}

fn expect_len<T>(v: &[T], n: usize, what: &str, tag: u8) -> Result<()> {
    if v.len() != n {
        return Err(Error::Malformed(format!("layer tag {tag}: expected {n} {what}, found {}", v.len())));
    }
    Ok(())
}

fn unsigned_shift(v: i8) -> Result<u8> {
    u8::try_from(v).map_err(|_| Error::Malformed(format!("negative shift {v}")))
}

/// Decode an `.fxq` file.
pub fn deserialize(bytes: &[u8]) -> Result<ModelGraph> {
    let c = Container::decode(bytes, FXQ_MAGIC, FXQ_VERSION, true)?;
    let mut layers = Vec::with_capacity(c.records.len());
    for r in &c.records {
        let d = |i: usize| r.dims[i] as usize;
        let layer = match r.tag {
            TAG_CONV => {
                expect_len(&r.dims, 4, "dims", r.tag)?;
                expect_len(&r.formats, 4, "formats", r.tag)?;
                expect_len(&r.shifts, 2, "shifts", r.tag)?;
                expect_len(&r.flags, 3, "flags", r.tag)?;
                expect_len(&r.blobs, 2, "blobs", r.tag)?;
                Layer::Conv(ConvSpec {
                    kernel_size: d(0),
                    in_channels: d(1),
                    out_channels: d(2),
                    stride: d(3),
                    padding: parse_padding(r.flags[0])?,
                    activation: parse_activation(r.flags[1])?,
                    fast: r.flags[2] != 0,
                    weights: read_blob(&c, r.blobs[0], r.formats[2])?,
                    bias: read_blob(&c, r.blobs[1], r.formats[3])?,
                    in_fmt: r.formats[0],
                    out_fmt: r.formats[1],
                    shifts: ShiftSpec {
                        bias_left_shift: unsigned_shift(r.shifts[0])?,
                        out_right_shift: unsigned_shift(r.shifts[1])?,
                    },
                })
            }
            TAG_AVGPOOL => {
                expect_len(&r.dims, 2, "dims", r.tag)?;
                Layer::AvgPool { size: d(0), stride: d(1) }
            }
            TAG_GAP => Layer::GlobalAvgPool,
            TAG_GRU => {
                expect_len(&r.dims, 2, "dims", r.tag)?;
                expect_len(&r.formats, 7, "formats", r.tag)?;
                expect_len(&r.shifts, 3, "shifts", r.tag)?;
                expect_len(&r.blobs, 3, "blobs", r.tag)?;
                let f = &r.formats;
                let mut g = GruSpec::new(
                    d(0),
                    d(1),
                    read_blob(&c, r.blobs[0], f[4])?,
                    read_blob(&c, r.blobs[1], f[5])?,
                    read_blob(&c, r.blobs[2], f[6])?,
                    f[0],
                    f[1],
                    f[2],
                    f[3],
                )?;
                g.shifts = GruShifts { input: r.shifts[0], recurrent: r.shifts[1], bias: r.shifts[2] };
                Layer::Gru(Box::new(g))
            }
            TAG_DENSE => {
                expect_len(&r.dims, 2, "dims", r.tag)?;
                expect_len(&r.formats, 4, "formats", r.tag)?;
                expect_len(&r.shifts, 2, "shifts", r.tag)?;
                expect_len(&r.blobs, 2, "blobs", r.tag)?;
                Layer::Dense(DenseSpec {
                    input_dim: d(0),
                    output_dim: d(1),
                    weights: read_blob(&c, r.blobs[0], r.formats[2])?,
                    bias: read_blob(&c, r.blobs[1], r.formats[3])?,
                    in_fmt: r.formats[0],
                    out_fmt: r.formats[1],
                    shifts: ShiftSpec {
                        bias_left_shift: unsigned_shift(r.shifts[0])?,
                        out_right_shift: unsigned_shift(r.shifts[1])?,
                    },
                })
            }
            TAG_SOFTMAX => Layer::Softmax,
            t => return Err(Error::Malformed(format!("unknown layer tag {t}"))),
        };
        layers.push(layer);
    }
    Ok(ModelGraph { meta: c.meta, input_fmt: c.input_fmt.expect("decoded with input format"), layers })
}
