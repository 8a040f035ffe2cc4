//! Analytic operation counts.
//!
//! | layer | ops |
//! |---|---|
//! | conv (K, C, N, output length L) | `2KCNL + LN` |
//! | average pool | `L_out * C * (size - 1)`, i.e. `L*C/2` for 2/2 pooling |
//! | GRU (M inputs, H units) | `2 * 3 * (M + H) * H`, biases not counted |
//! | dense (M, N) | `2MN + N` |
//! | global average pool, activations, softmax | 0 |

use serde::Serialize;

use crate::error::Result;
use crate::graph::{layer_names, shape_chain, LayerKind, ModelGraph, Shape};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerOps {
    pub name: String,
    pub ops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub layers: Vec<LayerOps>,
    /// Convolutions and their pooling layers.
    pub conv_block: u64,
    pub total: u64,
}

impl OpCount {
    pub fn get(&self, name: &str) -> Option<u64> {
        self.layers.iter().find(|l| l.name == name).map(|l| l.ops)
    }
}

/// Ops of one layer given its output shape.
pub fn layer_ops(kind: &LayerKind, output: Shape) -> u64 {
    let u = |v: usize| v as u64;
    match (*kind, output) {
        (LayerKind::Conv { kernel, in_channels, out_channels, .. }, Shape::Seq { len, .. }) => {
            2 * u(kernel * in_channels * out_channels * len) + u(len * out_channels)
        }
        (LayerKind::AvgPool { size, .. }, Shape::Seq { len, channels }) => u(len * channels * (size - 1)),
        (LayerKind::Gru { input_dim, hidden_dim }, _) => 2 * 3 * u((input_dim + hidden_dim) * hidden_dim),
        (LayerKind::Dense { input_dim, output_dim }, _) => 2 * u(input_dim * output_dim) + u(output_dim),
        _ => 0,
    }
}

/// Per-window operation counts for an architecture.
pub fn count_ops_kinds(kinds: &[LayerKind], window_len: usize) -> Result<OpCount> {
    let shapes = shape_chain(kinds, window_len)?;
    let names = layer_names(kinds);
    let mut layers = Vec::with_capacity(kinds.len());
    let mut conv_block = 0;
    for ((kind, &out), name) in kinds.iter().zip(&shapes).zip(names) {
        let ops = layer_ops(kind, out);
        if matches!(kind, LayerKind::Conv { .. } | LayerKind::AvgPool { .. }) {
            conv_block += ops;
        }
        layers.push(LayerOps { name, ops });
    }
    let total = layers.iter().map(|l| l.ops).sum();
    Ok(OpCount { layers, conv_block, total })
}

pub fn count_ops(graph: &ModelGraph) -> Result<OpCount> {
    count_ops_kinds(&graph.kinds(), graph.meta.window_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_canonical_model, canonical_architecture, Layer};
    use crate::instrument;
    use crate::kernels::{avg_pool, conv1d, dense, global_avg_pool, gru_output, gru_step};
    use crate::qformat::QFormat;
    use crate::tensor::QTensor;

    #[test]
    fn canonical_counts() {
        let c = count_ops_kinds(&canonical_architecture(), 256).unwrap();
        assert_eq!(c.get("conv1"), Some(22_528));
        assert_eq!(c.get("pool1"), Some(1_024));
        assert_eq!(c.get("gru"), Some(73_728));
        assert_eq!(c.get("dense"), Some(516));
        assert_eq!(c.get("gap"), Some(0));
        assert_eq!(c.conv_block, 3_149_568);
        assert_eq!(c.total, 3_223_812);
        assert_eq!(c.total, c.layers.iter().map(|l| l.ops).sum::<u64>());
    }

    /// Counting multiply-accumulates during execution reproduces the formulas.
    #[test]
    fn instrumented_execution_matches() {
        let g = build_canonical_model();
        let counts = count_ops(&g).unwrap();
        let names = g.layer_names();
        let mut x = QTensor::zeros(256, 1, QFormat::Q2_5);
        instrument::take();
        for (i, layer) in g.layers.iter().enumerate() {
            x = match layer {
                Layer::Conv(c) => conv1d(&x, c).unwrap(),
                Layer::AvgPool { size, stride } => avg_pool(&x, *size, *stride).unwrap(),
                Layer::GlobalAvgPool => global_avg_pool(&x).unwrap(),
                Layer::Gru(spec) => gru_output(&gru_step(&spec.zero_state(), &x, spec).unwrap(), spec).unwrap(),
                Layer::Dense(d) => dense(&x, d).unwrap(),
                Layer::Softmax => x,
            };
            assert_eq!(instrument::take(), counts.layers[i].ops, "{}", names[i]);
        }
    }
}
