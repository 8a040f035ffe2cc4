//! Q-format fixed-point numbers.
//!
//! A `Qn.m` value with `total_bits` storage bits carries one sign bit, `n`
//! integer bits and `m` fractional bits. The real value is `raw / 2^m` and
//! the raw range is `[-2^B, 2^B - 1]` with `B = total_bits - 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-point number format descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct QFormat {
    total_bits: u8,
    int_bits: u8,
    frac_bits: u8,
}

impl QFormat {
    /// Q2.5 in 8 bits, the weight/activation format used throughout the canonical model.
    pub const Q2_5: QFormat = QFormat { total_bits: 8, int_bits: 2, frac_bits: 5 };
    /// Q0.7 in 8 bits.
    pub const Q0_7: QFormat = QFormat { total_bits: 8, int_bits: 0, frac_bits: 7 };
    /// Q2.13 in 16 bits, used for GRU gates and state.
    pub const Q2_13: QFormat = QFormat { total_bits: 16, int_bits: 2, frac_bits: 13 };

    pub fn new(total_bits: u8, int_bits: u8, frac_bits: u8) -> Result<Self> {
        if !(1..=32).contains(&total_bits) || int_bits as u16 + frac_bits as u16 + 1 != total_bits as u16 {
            return Err(Error::Format(format!(
                "Q{int_bits}.{frac_bits}@{total_bits}: integer + fractional + sign bits must equal total bits"
            )));
        }
        Ok(Self { total_bits, int_bits, frac_bits })
    }

    /// Format with `frac_bits` fractional bits in a word of `total_bits`.
    pub fn with_frac(total_bits: u8, frac_bits: u8) -> Result<Self> {
        if frac_bits >= total_bits {
            return Err(Error::Format(format!("{frac_bits} fractional bits do not fit in {total_bits} bits")));
        }
        Self::new(total_bits, total_bits - 1 - frac_bits, frac_bits)
    }

    pub const fn total_bits(self) -> u8 {
        self.total_bits
    }

    pub const fn int_bits(self) -> u8 {
        self.int_bits
    }

    pub const fn frac_bits(self) -> u8 {
        self.frac_bits
    }

    /// Smallest raw value, `-2^B`.
    pub const fn raw_min(self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Largest raw value, `2^B - 1`.
    pub const fn raw_max(self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// Weight of one raw step, `2^-m`.
    pub fn lsb(self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    pub fn real_min(self) -> f64 {
        self.raw_min() as f64 * self.lsb()
    }

    pub fn real_max(self) -> f64 {
        self.raw_max() as f64 * self.lsb()
    }

    /// Storage size of one element in bytes.
    pub fn bytes(self) -> usize {
        (self.total_bits as usize).div_ceil(8)
    }

    /// Clamp a widened integer to the raw range.
    #[inline]
    pub fn saturate(self, v: i64) -> i64 {
        v.clamp(self.raw_min(), self.raw_max())
    }

    pub fn contains_raw(self, raw: i64) -> bool {
        (self.raw_min()..=self.raw_max()).contains(&raw)
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}.{}@{}", self.int_bits, self.frac_bits, self.total_bits)
    }
}

impl FromStr for QFormat {
    type Err = Error;

    /// Parses `Qn.m@bits`. The `@bits` suffix may be omitted, in which case
    /// the word size is `n + m + 1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Format(format!("malformed Q-format '{s}', expected Qn.m@bits"));
        let body = s.trim().strip_prefix('Q').or_else(|| s.trim().strip_prefix('q')).ok_or_else(bad)?;
        let (nm, bits) = match body.split_once('@') {
            Some((nm, bits)) => (nm, Some(bits)),
            None => (body, None),
        };
        let (n, m) = nm.split_once('.').ok_or_else(bad)?;
        let n: u8 = n.parse().map_err(|_| bad())?;
        let m: u8 = m.parse().map_err(|_| bad())?;
        let total = match bits {
            Some(b) => b.parse().map_err(|_| bad())?,
            None => n.checked_add(m).and_then(|v| v.checked_add(1)).ok_or_else(bad)?,
        };
        QFormat::new(total, n, m)
    }
}

impl TryFrom<String> for QFormat {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<QFormat> for String {
    fn from(f: QFormat) -> String {
        f.to_string()
    }
}

/// A single fixed-point value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QValue {
    pub raw: i64,
    pub fmt: QFormat,
}

impl QValue {
    pub fn to_f64(self) -> f64 {
        dequantize_raw(self.raw, self.fmt)
    }
}

/// Round half away from zero, then clip to the format's raw range.
pub fn quantize(v: f64, fmt: QFormat) -> Result<QValue> {
    if !v.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(QValue { raw: quantize_raw(v, fmt), fmt })
}

/// Infallible variant of [`quantize`] for callers that already checked finiteness.
/// NaN maps to 0.
#[inline]
pub fn quantize_raw(v: f64, fmt: QFormat) -> i64 {
    if v.is_nan() {
        return 0;
    }
    // f64::round is half-away-from-zero; the cast saturates for huge values.
    let scaled = (v * (fmt.frac_bits as f64).exp2()).round();
    let r = if scaled >= i64::MAX as f64 {
        i64::MAX
    } else if scaled <= i64::MIN as f64 {
        i64::MIN
    } else {
        scaled as i64
    };
    fmt.saturate(r)
}

pub fn dequantize(q: QValue) -> f64 {
    q.to_f64()
}

#[inline]
pub fn dequantize_raw(raw: i64, fmt: QFormat) -> f64 {
    raw as f64 * fmt.lsb()
}

/// Snap a real value to the format's grid (quantize then dequantize).
#[inline]
pub fn fake_quantize(v: f64, fmt: QFormat) -> f64 {
    dequantize_raw(quantize_raw(v, fmt), fmt)
}

/// Format of the product of two fixed-point operands.
pub fn product_format(a: QFormat, w: QFormat) -> QFormat {
    QFormat {
        total_bits: a.total_bits + w.total_bits - 1,
        int_bits: a.int_bits + w.int_bits,
        frac_bits: a.frac_bits + w.frac_bits,
    }
}

/// Bias and output shifts for one multiply-accumulate layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub bias_left_shift: u8,
    pub out_right_shift: u8,
}

/// Align bias and output to the accumulator's fractional resolution.
pub fn derive_shifts(input: QFormat, weights: QFormat, bias: QFormat, output: QFormat) -> Result<ShiftSpec> {
    let acc_frac = input.frac_bits as i32 + weights.frac_bits as i32;
    let bias_left = acc_frac - bias.frac_bits as i32;
    let out_right = acc_frac - output.frac_bits as i32;
    if bias_left < 0 || out_right < 0 {
        return Err(Error::IncompatibleFormatChain(format!(
            "accumulator {} has fewer fractional bits than bias {bias} or output {output}",
            product_format(input, weights)
        )));
    }
    Ok(ShiftSpec { bias_left_shift: bias_left as u8, out_right_shift: out_right as u8 })
}

/// Saturating addition of two raw values in `fmt`.
#[inline]
pub fn sat_add(a: i64, b: i64, fmt: QFormat) -> i64 {
    fmt.saturate(a.saturating_add(b))
}

/// Right shift that adds `2^(shift-1)` first, i.e. rounds half toward +inf.
#[inline]
pub fn round_shift(v: i64, shift: u32) -> i64 {
    if shift == 0 {
        v
    } else {
        (v + (1i64 << (shift - 1))) >> shift
    }
}

/// Rescale a raw value from `from` fractional bits to `to` fractional bits.
/// Widening is exact; narrowing uses [`round_shift`].
#[inline]
pub fn align(v: i64, from: u8, to: u8) -> i64 {
    if to >= from {
        v << (to - from)
    } else {
        round_shift(v, (from - to) as u32)
    }
}

/// Integer division rounding half toward +inf, matching [`round_shift`] for powers of two.
#[inline]
pub fn round_div(num: i64, den: i64) -> i64 {
    debug_assert!(den > 0);
    (2 * num + den).div_euclid(2 * den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> QFormat {
        s.parse().unwrap()
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.5, QFormat::Q2_5).unwrap().raw, 16);
        assert_eq!(quantize(5.0, QFormat::Q2_5).unwrap().raw, 127);
        assert_eq!(quantize(5.0, QFormat::Q2_5).unwrap().to_f64(), 3.96875);
        assert_eq!(quantize(-4.2, QFormat::Q2_5).unwrap().raw, -128);
        assert_eq!(quantize(-4.2, QFormat::Q2_5).unwrap().to_f64(), -4.0);
        assert_eq!(quantize(0.03, QFormat::Q2_5).unwrap().raw, 1);
        assert!(matches!(quantize(f64::NAN, QFormat::Q2_5), Err(Error::NonFinite)));
        assert!(matches!(quantize(f64::INFINITY, QFormat::Q2_5), Err(Error::NonFinite)));
    }

    #[test]
    fn ties_round_away_from_zero() {
        // 0.5 LSB either side
        assert_eq!(quantize_raw(1.5 / 32.0, QFormat::Q2_5), 2);
        assert_eq!(quantize_raw(-1.5 / 32.0, QFormat::Q2_5), -2);
    }

    #[test]
    fn dequantize_examples() {
        assert_eq!(dequantize(QValue { raw: 16, fmt: QFormat::Q2_5 }), 0.5);
        assert_eq!(dequantize(QValue { raw: -128, fmt: QFormat::Q2_5 }), -4.0);
        assert_eq!(dequantize(QValue { raw: 1, fmt: QFormat::Q2_13 }), 0.0001220703125);
    }

    #[test]
    fn product_format_examples() {
        assert_eq!(product_format(QFormat::Q2_5, QFormat::Q2_5), q("Q4.10@15"));
        let p = product_format(QFormat::Q0_7, QFormat::Q2_5);
        assert_eq!((p.int_bits(), p.frac_bits()), (2, 12));
        let z = q("Q0.0@1");
        assert_eq!(product_format(z, z), z);
    }

    #[test]
    fn derive_shifts_examples() {
        let s = derive_shifts(QFormat::Q2_5, QFormat::Q2_5, QFormat::Q2_5, QFormat::Q2_5).unwrap();
        assert_eq!(s, ShiftSpec { bias_left_shift: 5, out_right_shift: 5 });
        let s = derive_shifts(QFormat::Q2_5, QFormat::Q0_7, QFormat::Q0_7, QFormat::Q2_5).unwrap();
        assert_eq!(s, ShiftSpec { bias_left_shift: 5, out_right_shift: 7 });
        let z = q("Q0.0@1");
        assert_eq!(derive_shifts(z, z, z, z).unwrap(), ShiftSpec::default());
        let err = derive_shifts(QFormat::Q2_5, QFormat::Q2_5, q("Q0.15@16"), QFormat::Q2_5);
        assert!(matches!(err, Err(Error::IncompatibleFormatChain(_))));
    }

    #[test]
    fn sat_add_examples() {
        assert_eq!(sat_add(100, 100, QFormat::Q2_5), 127);
        assert_eq!(sat_add(-100, -100, QFormat::Q2_5), -128);
        assert_eq!(sat_add(3, 4, QFormat::Q2_5), 7);
    }

    #[test]
    fn notation_round_trips() {
        for s in ["Q2.5@8", "Q2.13@16", "Q0.7@8", "Q7.0@8"] {
            assert_eq!(q(s).to_string(), s);
        }
        assert_eq!(q("Q2.5"), QFormat::Q2_5);
        assert!("Q2.5@16".parse::<QFormat>().is_err());
        assert!("2.5@8".parse::<QFormat>().is_err());
        assert!("Q2@8".parse::<QFormat>().is_err());
    }

    #[test]
    fn raw_ranges() {
        assert_eq!((QFormat::Q2_5.raw_min(), QFormat::Q2_5.raw_max()), (-128, 127));
        assert_eq!((QFormat::Q2_13.raw_min(), QFormat::Q2_13.raw_max()), (-32768, 32767));
    }

    #[test]
    fn idempotent_over_all_8bit_raws() {
        for frac in 0..8u8 {
            let fmt = QFormat::with_frac(8, frac).unwrap();
            for raw in -128..=127i64 {
                let v = dequantize_raw(raw, fmt);
                assert_eq!(quantize(v, fmt).unwrap().raw, raw);
            }
        }
    }

    #[test]
    fn rounding_helpers() {
        assert_eq!(round_shift(7, 1), 4);
        assert_eq!(round_shift(-7, 1), -3);
        assert_eq!(round_shift(5, 0), 5);
        assert_eq!(round_div(12, 4), 3);
        assert_eq!(round_div(7, 2), 4);
        assert_eq!(round_div(-7, 2), -3);
        assert_eq!(round_div(10, 3), 3);
        assert_eq!(align(3, 5, 8), 24);
        assert_eq!(align(24, 8, 5), 3);
    }

    fn any_fmt() -> impl Strategy<Value = QFormat> {
        prop_oneof![Just(8u8), Just(16u8)]
            .prop_flat_map(|bits| (Just(bits), 0..bits))
            .prop_map(|(bits, frac)| QFormat::with_frac(bits, frac).unwrap())
    }

    proptest! {
        #[test]
        fn monotone(fmt in any_fmt(), a in -300.0f64..300.0, b in -300.0f64..300.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantize_raw(lo, fmt) <= quantize_raw(hi, fmt));
        }

        #[test]
        fn bounded_error_inside_range(fmt in any_fmt(), t in 0.0f64..1.0) {
            let v = fmt.real_min() + t * (fmt.real_max() - fmt.real_min());
            let err = (fake_quantize(v, fmt) - v).abs();
            prop_assert!(err <= fmt.lsb() / 2.0 + 1e-15);
        }

        #[test]
        fn saturates_outside_range(fmt in any_fmt(), excess in 0.0f64..1e6) {
            prop_assert_eq!(quantize_raw(fmt.real_max() + fmt.lsb() + excess, fmt), fmt.raw_max());
            prop_assert_eq!(quantize_raw(fmt.real_min() - fmt.lsb() - excess, fmt), fmt.raw_min());
        }

        /// Widened-integer multiply-accumulate with derived shifts tracks the
        /// real-valued computation to within one output LSB per step.
        #[test]
        fn shift_algebra(
            in_frac in 0u8..8, w_frac in 0u8..8,
            b_sel in 0u8..8, o_sel in 0u8..8,
            xs in proptest::collection::vec(-1.0f64..1.0, 1..8),
            ws in proptest::collection::vec(-1.0f64..1.0, 8),
            bias in -1.0f64..1.0,
        ) {
            let fin = QFormat::with_frac(8, in_frac).unwrap();
            let fw = QFormat::with_frac(8, w_frac).unwrap();
            let acc = in_frac + w_frac;
            let fb = QFormat::with_frac(8, b_sel.min(acc).min(7)).unwrap();
            let fo = QFormat::with_frac(16, o_sel.min(acc)).unwrap();
            let shifts = derive_shifts(fin, fw, fb, fo).unwrap();

            let mut acc_raw = 0i64;
            let mut real = 0.0;
            for (x, w) in xs.iter().zip(&ws) {
                let xq = quantize_raw(*x, fin);
                let wq = quantize_raw(*w, fw);
                acc_raw += xq * wq;
                real += dequantize_raw(xq, fin) * dequantize_raw(wq, fw);
            }
            let bq = quantize_raw(bias, fb);
            acc_raw += bq << shifts.bias_left_shift;
            real += dequantize_raw(bq, fb);
            // bias shifted into the accumulator has the product's resolution
            prop_assert_eq!(dequantize_raw(bq << shifts.bias_left_shift, product_format(fin, fw)), dequantize_raw(bq, fb));
            let out = fo.saturate(round_shift(acc_raw, shifts.out_right_shift as u32));
            let steps = xs.len() as f64 + 1.0;
            prop_assert!((dequantize_raw(out, fo) - real).abs() <= steps * fo.lsb());
        }
    }
}
