//! Fixed-point inference and quantization toolchain for a compact
//! convolutional-recurrent ECG arrhythmia classifier.
//!
//! - [`qformat`]: Q-format numbers, rounding and shift algebra
//! - [`kernels`]: integer conv1d, pooling, GRU, dense, LUT activations, base-2 softmax
//! - [`graph`]: architecture, canonical model, validation, `.fxq` files, memory plan
//! - [`float_ref`]: double-precision reference of the same network, with fake quantization
//! - [`quantizer`]: 3-sigma format selection, calibration and model quantization
//! - [`ecg`]: band-pass filter, polyphase resampler, normalization and windowing
//! - [`profile`]: operation counts, throughput/power arithmetic, metrics, host timing
//!
//! # Feature flags
//!
//! - **`parallel`** *(default)*: batch work over records and models runs on rayon.
//!   Without it every [`par::Exec`] runs sequentially.

pub mod ecg;
pub mod error;
pub mod float_ref;
pub mod graph;
mod instrument;
pub mod kernels;
pub mod par;
pub mod profile;
pub mod qformat;
pub mod quantizer;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use graph::{build_canonical_model, forward_quantized, ModelGraph};
pub use qformat::{QFormat, QValue, ShiftSpec};
pub use tensor::{QBlob, QTensor};
