use serde::Serialize;

use crate::kernels::GATE_COUNT;

use super::{Layer, ModelGraph};

/// Static memory layout of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemoryPlan {
    /// Weights, biases and lookup tables.
    pub flash_bytes: usize,
    pub weight_bytes: usize,
    pub lut_bytes: usize,
    /// Named RAM buffers in bytes.
    pub ram_buffers: Vec<(String, usize)>,
}

impl MemoryPlan {
    pub fn ram_bytes(&self) -> usize {
        self.ram_buffers.iter().map(|(_, b)| b).sum()
    }

    pub fn buffer(&self, name: &str) -> Option<usize> {
        self.ram_buffers.iter().find(|(n, _)| n == name).map(|(_, b)| *b)
    }
}

/// Columns of the im2col scratch, as used by the two-column matrix kernel.
const IM2COL_COLUMNS: usize = 2;
/// im2col entries are widened to 16 bits.
const IM2COL_ELEMENT_BYTES: usize = 2;

pub fn plan_memory(graph: &ModelGraph) -> MemoryPlan {
    let weight_bytes: usize =
        graph.layers.iter().flat_map(|l| l.blobs()).map(|(_, b)| b.byte_size()).sum();
    let lut_bytes = graph.gru().map_or(0, |g| g.sigmoid.byte_size() + g.tanh.byte_size());

    // per-window activations alternate between two buffers
    let shapes = graph.shapes().unwrap_or_default();
    let mut act = graph.meta.window_len * graph.input_fmt.bytes();
    let mut fmt = graph.input_fmt;
    let mut scratch = 0;
    for (layer, shape) in graph.layers.iter().zip(&shapes) {
        match layer {
            Layer::Conv(c) => {
                fmt = c.out_fmt;
                scratch = scratch.max(c.kernel_size * c.in_channels * IM2COL_ELEMENT_BYTES * IM2COL_COLUMNS);
            }
            Layer::Gru(_) | Layer::Dense(_) | Layer::Softmax => break,
            _ => {}
        }
        act = act.max(shape.elements() * fmt.bytes());
    }

    let mut ram = vec![
        ("activations_ping".to_string(), act),
        ("activations_pong".to_string(), act),
    ];
    if scratch > 0 {
        ram.push(("conv_scratch".to_string(), scratch));
    }
    if let Some(g) = graph.gru() {
        // z, r, candidate and r*h rows, the hidden state and the staged input vector
        let gates = (GATE_COUNT + 1) * g.hidden_dim * g.gate_fmt.bytes();
        let state = g.hidden_dim * g.state_fmt.bytes();
        let input = g.input_dim * g.in_fmt.bytes();
        ram.push(("gru".to_string(), gates + state + input));
    }
    if let Some(Layer::Dense(d)) = graph.layers.iter().rev().find(|l| matches!(l, Layer::Dense(_))) {
        ram.push(("logits".to_string(), d.output_dim * d.out_fmt.bytes()));
    }
    MemoryPlan { flash_bytes: weight_bytes + lut_bytes, weight_bytes, lut_bytes, ram_buffers: ram }
}
