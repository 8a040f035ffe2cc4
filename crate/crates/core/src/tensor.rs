//! Integer tensors tagged with a Q-format.

use crate::error::{Error, Result};
use crate::qformat::{dequantize_raw, quantize_raw, QFormat};

/// Channel-interleaved fixed-point tensor of shape `(len, channels)`.
///
/// Vectors are stored with `len == 1`, so element `i` of a vector is
/// channel `i` of its only time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QTensor {
    data: Vec<i16>,
    len: usize,
    channels: usize,
    fmt: QFormat,
}

impl QTensor {
    pub fn new(data: Vec<i16>, len: usize, channels: usize, fmt: QFormat) -> Result<Self> {
        if fmt.total_bits() > 16 {
            return Err(Error::Format(format!("{fmt}: tensors hold at most 16-bit elements")));
        }
        if data.len() != len * channels {
            return Err(Error::Shape(format!(
                "{} elements cannot fill shape ({len}, {channels})",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| !fmt.contains_raw(v as i64)) {
            return Err(Error::Format(format!("raw value {bad} outside the range of {fmt}")));
        }
        Ok(Self { data, len, channels, fmt })
    }

    pub fn vector(data: Vec<i16>, fmt: QFormat) -> Result<Self> {
        let n = data.len();
        Self::new(data, 1, n, fmt)
    }

    pub fn zeros(len: usize, channels: usize, fmt: QFormat) -> Self {
        Self { data: vec![0; len * channels], len, channels, fmt }
    }

    /// Quantize real values laid out as `(len, channels)`.
    pub fn from_real(values: &[f64], len: usize, channels: usize, fmt: QFormat) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let data = values.iter().map(|&v| quantize_raw(v, fmt) as i16).collect();
        Self::new(data, len, channels, fmt)
    }

    pub(crate) fn from_parts_unchecked(data: Vec<i16>, len: usize, channels: usize, fmt: QFormat) -> Self {
        debug_assert_eq!(data.len(), len * channels);
        Self { data, len, channels, fmt }
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    pub fn into_data(self) -> Vec<i16> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn fmt(&self) -> QFormat {
        self.fmt
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.len, self.channels)
    }

    #[inline]
    pub fn at(&self, t: usize, c: usize) -> i16 {
        self.data[t * self.channels + c]
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.data.iter().map(|&v| dequantize_raw(v as i64, self.fmt)).collect()
    }

    /// Size of the tensor in bytes at its native element width.
    pub fn byte_size(&self) -> usize {
        self.data.len() * self.fmt.bytes()
    }
}

/// Raw parameter tensor (weights or biases) with one format for the whole blob.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QBlob {
    pub fmt: QFormat,
    pub data: Vec<i16>,
}

impl QBlob {
    pub fn new(fmt: QFormat, data: Vec<i16>) -> Result<Self> {
        if fmt.total_bits() > 16 {
            return Err(Error::Format(format!("{fmt}: blobs hold at most 16-bit elements")));
        }
        if let Some(bad) = data.iter().find(|&&v| !fmt.contains_raw(v as i64)) {
            return Err(Error::Format(format!("raw value {bad} outside the range of {fmt}")));
        }
        Ok(Self { fmt, data })
    }

    pub fn zeros(fmt: QFormat, n: usize) -> Self {
        Self { fmt, data: vec![0; n] }
    }

    pub fn from_real(values: &[f64], fmt: QFormat) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Self::new(fmt, values.iter().map(|&v| quantize_raw(v, fmt) as i16).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn byte_size(&self) -> usize {
        self.data.len() * self.fmt.bytes()
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.data.iter().map(|&v| dequantize_raw(v as i64, self.fmt)).collect()
    }
}
