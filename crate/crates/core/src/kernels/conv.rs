use crate::error::{Error, Result};
use crate::instrument::tally;
use crate::qformat::{derive_shifts, round_shift, QFormat, ShiftSpec};
use crate::tensor::{QBlob, QTensor};

use super::{conv_geometry, Activation, Padding};

/// Quantized 1-D convolution layer.
///
/// Weights are stored kernel-ready as `[out_channel][tap][in_channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub padding: Padding,
    pub activation: Activation,
    /// Request the fast kernel path, which requires `C % 4 == 0` and `N % 2 == 0`.
    pub fast: bool,
    pub weights: QBlob,
    pub bias: QBlob,
    pub in_fmt: QFormat,
    pub out_fmt: QFormat,
    pub shifts: ShiftSpec,
}

impl ConvSpec {
    /// Build a layer, deriving shifts from the formats and checking blob sizes.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kernel_size: usize,
        in_channels: usize,
        out_channels: usize,
        activation: Activation,
        weights: QBlob,
        bias: QBlob,
        in_fmt: QFormat,
        out_fmt: QFormat,
    ) -> Result<Self> {
        let shifts = derive_shifts(in_fmt, weights.fmt, bias.fmt, out_fmt)?;
        let spec = Self {
            kernel_size,
            in_channels,
            out_channels,
            stride: 1,
            padding: Padding::Same,
            activation,
            fast: fast_conv_eligible(in_channels, out_channels),
            weights,
            bias,
            in_fmt,
            out_fmt,
            shifts,
        };
        spec.check_blobs()?;
        Ok(spec)
    }

    pub fn param_count(&self) -> usize {
        self.kernel_size * self.in_channels * self.out_channels + self.out_channels
    }

    pub(crate) fn check_blobs(&self) -> Result<()> {
        let w = self.kernel_size * self.in_channels * self.out_channels;
        if self.weights.len() != w || self.bias.len() != self.out_channels {
            return Err(Error::Shape(format!(
                "conv blobs hold {} weights / {} biases, expected {w} / {}",
                self.weights.len(),
                self.bias.len(),
                self.out_channels
            )));
        }
        Ok(())
    }
}

/// Input channels multiple of 4 and output channels multiple of 2.
pub fn fast_conv_eligible(in_channels: usize, out_channels: usize) -> bool {
    in_channels % 4 == 0 && out_channels % 2 == 0
}

pub fn conv1d(input: &QTensor, spec: &ConvSpec) -> Result<QTensor> {
    if input.channels() != spec.in_channels {
        return Err(Error::Shape(format!(
            "conv expects {} input channels, got {}",
            spec.in_channels,
            input.channels()
        )));
    }
    if input.fmt() != spec.in_fmt {
        return Err(Error::Format(format!("conv expects {} input, got {}", spec.in_fmt, input.fmt())));
    }
    if spec.fast && !fast_conv_eligible(spec.in_channels, spec.out_channels) {
        return Err(Error::Shape(format!(
            "fast conv needs in_channels % 4 == 0 and out_channels % 2 == 0, got {} -> {}",
            spec.in_channels, spec.out_channels
        )));
    }
    spec.check_blobs()?;
    let expected = derive_shifts(spec.in_fmt, spec.weights.fmt, spec.bias.fmt, spec.out_fmt)?;
    if expected != spec.shifts {
        return Err(Error::IncompatibleFormatChain(format!(
            "conv shifts {:?} do not match formats (expected {expected:?})",
            spec.shifts
        )));
    }

    let (k, c, n) = (spec.kernel_size, spec.in_channels, spec.out_channels);
    let (out_len, pad_left) = conv_geometry(input.len(), k, spec.stride, spec.padding)
        .ok_or_else(|| Error::Shape(format!("input length {} too short for kernel {k}", input.len())))?;

    let x = input.data();
    let w = &spec.weights.data;
    let bl = spec.shifts.bias_left_shift as u32;
    let or = spec.shifts.out_right_shift as u32;
    let fmt = spec.out_fmt;

    // im2col column: taps outside the input read as zero.
    let mut col = vec![0i32; k * c];
    let mut out = Vec::with_capacity(out_len * n);
    for t in 0..out_len {
        let start = (t * spec.stride) as isize - pad_left as isize;
        for tap in 0..k {
            let src = start + tap as isize;
            let dst = &mut col[tap * c..(tap + 1) * c];
            if src >= 0 && (src as usize) < input.len() {
                let s = src as usize * c;
                for (d, &v) in dst.iter_mut().zip(&x[s..s + c]) {
                    *d = v as i32;
                }
            } else {
                dst.fill(0);
            }
        }
        for o in 0..n {
            let row = &w[o * k * c..(o + 1) * k * c];
            let mut acc = (spec.bias.data[o] as i32) << bl;
            for (&wi, &xi) in row.iter().zip(&col) {
                acc = acc.saturating_add(wi as i32 * xi);
            }
            tally(2 * (k * c) as u64 + 1);
            let v = fmt.saturate(round_shift(acc as i64, or));
            out.push(spec.activation.apply_raw(v) as i16);
        }
    }
    Ok(QTensor::from_parts_unchecked(out, out_len, n, fmt))
}
