use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qformat::{dequantize_raw, quantize_raw, round_shift, QFormat};
use crate::tensor::QTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LutFunction {
    Tanh,
    Sigmoid,
}

impl LutFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            LutFunction::Tanh => x.tanh(),
            LutFunction::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

/// Bits of the input used to index the table.
const INDEX_BITS: u32 = 8;
const TABLE_LEN: usize = 1 << INDEX_BITS;

/// Lookup-table activation.
///
/// 8-bit inputs index the 256-entry table directly. 16-bit inputs index on
/// their top 8 bits and interpolate linearly on the low 8 bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationLut {
    pub function: LutFunction,
    pub input_fmt: QFormat,
    pub output_fmt: QFormat,
    table: Vec<i16>,
}

impl ActivationLut {
    pub fn new(function: LutFunction, input_fmt: QFormat, output_fmt: QFormat) -> Result<Self> {
        let low_bits = match input_fmt.total_bits() {
            8 => 0,
            16 => 16 - INDEX_BITS,
            b => return Err(Error::Format(format!("LUT inputs must be 8 or 16 bits, got {b}"))),
        };
        if output_fmt.total_bits() > 16 {
            return Err(Error::Format(format!("LUT outputs hold at most 16 bits, got {output_fmt}")));
        }
        let table = (0..TABLE_LEN as i64)
            .map(|i| {
                let raw = (i - (TABLE_LEN as i64 / 2)) << low_bits;
                quantize_raw(function.eval(dequantize_raw(raw, input_fmt)), output_fmt) as i16
            })
            .collect();
        Ok(Self { function, input_fmt, output_fmt, table })
    }

    pub fn table(&self) -> &[i16] {
        &self.table
    }

    pub fn byte_size(&self) -> usize {
        self.table.len() * self.output_fmt.bytes()
    }

    /// Look up one raw input in `input_fmt`, returning a raw value in `output_fmt`.
    #[inline]
    pub fn lookup(&self, raw: i64) -> i64 {
        let half = TABLE_LEN as i64 / 2;
        if self.input_fmt.total_bits() == 8 {
            return self.table[(raw + half) as usize] as i64;
        }
        let low = 16 - INDEX_BITS;
        let idx = ((raw >> low) + half) as usize;
        let frac = raw & ((1 << low) - 1);
        let lo = self.table[idx] as i64;
        // the last cell has no right neighbour and holds its value
        let hi = self.table.get(idx + 1).map_or(lo, |&v| v as i64);
        lo + round_shift((hi - lo) * frac, low)
    }
}

pub fn lut_apply(x: &QTensor, lut: &ActivationLut) -> Result<QTensor> {
    if x.fmt() != lut.input_fmt {
        return Err(Error::Format(format!("LUT expects {} input, got {}", lut.input_fmt, x.fmt())));
    }
    let out = x.data().iter().map(|&v| lut.lookup(v as i64) as i16).collect();
    Ok(QTensor::from_parts_unchecked(out, x.len(), x.channels(), lut.output_fmt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_and_tanh_at_zero() {
        for fmt_in in [QFormat::Q2_5, QFormat::Q2_13] {
            let sig = ActivationLut::new(LutFunction::Sigmoid, fmt_in, QFormat::Q0_7).unwrap();
            assert!((dequantize_raw(sig.lookup(0), QFormat::Q0_7) - 0.5).abs() <= QFormat::Q0_7.lsb());
            let tanh = ActivationLut::new(LutFunction::Tanh, fmt_in, QFormat::Q0_7).unwrap();
            assert_eq!(tanh.lookup(0), 0);
        }
    }

    #[test]
    fn tanh_sweep_over_all_8bit_inputs() {
        let out = QFormat::Q0_7;
        let lut = ActivationLut::new(LutFunction::Tanh, QFormat::Q2_5, out).unwrap();
        let bound = (-(out.frac_bits() as f64 - 1.0)).exp2();
        for raw in -128..=127 {
            let got = dequantize_raw(lut.lookup(raw), out);
            let want = dequantize_raw(raw, QFormat::Q2_5).tanh();
            assert!((got - want).abs() <= bound, "raw {raw}: {got} vs {want}");
        }
    }

    #[test]
    fn interpolated_16bit_tables_track_the_function() {
        for f in [LutFunction::Sigmoid, LutFunction::Tanh] {
            let lut = ActivationLut::new(f, QFormat::Q2_13, QFormat::Q2_13).unwrap();
            let mut worst = 0.0f64;
            for raw in (-32768..32768).step_by(7) {
                let x = dequantize_raw(raw, QFormat::Q2_13);
                let got = dequantize_raw(lut.lookup(raw), QFormat::Q2_13);
                // the last cell is flat, compare against its left edge there
                let want = if raw >= 127 << 8 { f.eval(127.0 / 32.0) } else { f.eval(x) };
                worst = worst.max((got - want).abs());
            }
            assert!(worst < 3e-4, "{f:?} worst {worst}");
        }
    }

    #[test]
    fn outputs_stay_in_function_range() {
        let sig = ActivationLut::new(LutFunction::Sigmoid, QFormat::Q2_13, QFormat::Q2_13).unwrap();
        let tanh = ActivationLut::new(LutFunction::Tanh, QFormat::Q2_13, QFormat::Q2_13).unwrap();
        for raw in -32768..32768 {
            let s = dequantize_raw(sig.lookup(raw), QFormat::Q2_13);
            let t = dequantize_raw(tanh.lookup(raw), QFormat::Q2_13);
            assert!((0.0..=1.0).contains(&s) && (-1.0..=1.0).contains(&t));
        }
    }

    #[test]
    fn format_mismatch() {
        let lut = ActivationLut::new(LutFunction::Tanh, QFormat::Q2_5, QFormat::Q0_7).unwrap();
        let x = QTensor::zeros(1, 2, QFormat::Q0_7);
        assert!(matches!(lut_apply(&x, &lut), Err(Error::Format(_))));
        assert!(ActivationLut::new(LutFunction::Tanh, "Q2.9@12".parse().unwrap(), QFormat::Q0_7).is_err());
    }
}
