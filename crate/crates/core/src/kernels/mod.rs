//! Fixed-point layer kernels.
//!
//! Every kernel accumulates in 32-bit integers, adds the bias shifted into
//! the accumulator's resolution, applies a rounding right shift to reach
//! the output format and clips only when the result is written.

mod conv;
mod dense;
mod gru;
mod lut;
mod pool;
mod softmax;

use serde::{Deserialize, Serialize};

pub use conv::{conv1d, fast_conv_eligible, ConvSpec};
pub use dense::{dense, DenseSpec};
pub use gru::{gru_output, gru_step, GruShifts, GruSpec, GATE_COUNT};
pub use lut::{lut_apply, ActivationLut, LutFunction};
pub use pool::{avg_pool, global_avg_pool};
pub use softmax::{softmax_pow2, PROB_FRAC_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub(crate) fn apply_raw(self, v: i64) -> i64 {
        match self {
            Activation::Relu => v.max(0),
            Activation::Linear => v,
        }
    }

    #[inline]
    pub fn apply_real(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Linear => v,
        }
    }
}

/// Output length and left zero-padding of a 1-D convolution.
pub fn conv_geometry(len: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    if kernel == 0 || stride == 0 {
        return None;
    }
    match padding {
        Padding::Same => {
            let out = len.div_ceil(stride);
            let total = ((out.max(1) - 1) * stride + kernel).saturating_sub(len);
            Some((out, total / 2))
        }
        Padding::Valid => (len >= kernel).then(|| ((len - kernel) / stride + 1, 0)),
    }
}
