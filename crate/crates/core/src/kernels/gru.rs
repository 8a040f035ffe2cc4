use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::tally;
use crate::qformat::{align, QFormat};
use crate::tensor::{QBlob, QTensor};

use super::lut::{ActivationLut, LutFunction};

/// Update, reset and candidate gates, in that order.
pub const GATE_COUNT: usize = 3;

/// Signed shifts aligning each gate pre-activation term to the gate format.
/// Positive values shift left (exact), negative values are rounding right shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GruShifts {
    pub input: i8,
    pub recurrent: i8,
    pub bias: i8,
}

impl GruShifts {
    pub fn derive(in_fmt: QFormat, kernel: QFormat, recurrent: QFormat, bias: QFormat, state: QFormat, gate: QFormat) -> Self {
        let g = gate.frac_bits() as i16;
        Self {
            input: (g - in_fmt.frac_bits() as i16 - kernel.frac_bits() as i16) as i8,
            recurrent: (g - state.frac_bits() as i16 - recurrent.frac_bits() as i16) as i8,
            bias: (g - bias.frac_bits() as i16) as i8,
        }
    }
}

/// Single-bias GRU with the reset gate applied before the recurrent product.
///
/// `kernel` is `[gate][unit][input]`, `recurrent` is `[gate][unit][unit]` and
/// `bias` is `[gate][unit]`, with gates ordered z, r, h.
#[derive(Debug, Clone, PartialEq)]
pub struct GruSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub kernel: QBlob,
    pub recurrent: QBlob,
    pub bias: QBlob,
    pub in_fmt: QFormat,
    pub gate_fmt: QFormat,
    pub state_fmt: QFormat,
    pub out_fmt: QFormat,
    pub shifts: GruShifts,
    pub sigmoid: ActivationLut,
    pub tanh: ActivationLut,
}

impl GruSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        kernel: QBlob,
        recurrent: QBlob,
        bias: QBlob,
        in_fmt: QFormat,
        gate_fmt: QFormat,
        state_fmt: QFormat,
        out_fmt: QFormat,
    ) -> Result<Self> {
        if gate_fmt.total_bits() != 16 || state_fmt.total_bits() > 16 {
            return Err(Error::Format(format!("GRU gates must be 16-bit, got {gate_fmt}; state {state_fmt}")));
        }
        let shifts = GruShifts::derive(in_fmt, kernel.fmt, recurrent.fmt, bias.fmt, state_fmt, gate_fmt);
        let spec = Self {
            input_dim,
            hidden_dim,
            sigmoid: ActivationLut::new(LutFunction::Sigmoid, gate_fmt, gate_fmt)?,
            tanh: ActivationLut::new(LutFunction::Tanh, gate_fmt, gate_fmt)?,
            kernel,
            recurrent,
            bias,
            in_fmt,
            gate_fmt,
            state_fmt,
            out_fmt,
            shifts,
        };
        spec.check_blobs()?;
        Ok(spec)
    }

    pub fn param_count(&self) -> usize {
        GATE_COUNT * (self.input_dim * self.hidden_dim + self.hidden_dim * self.hidden_dim + self.hidden_dim)
    }

    pub(crate) fn check_blobs(&self) -> Result<()> {
        let (m, h) = (self.input_dim, self.hidden_dim);
        if self.kernel.len() != GATE_COUNT * m * h
            || self.recurrent.len() != GATE_COUNT * h * h
            || self.bias.len() != GATE_COUNT * h
        {
            return Err(Error::Shape(format!(
                "GRU blobs {}/{}/{} do not match M={m}, H={h}",
                self.kernel.len(),
                self.recurrent.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    pub fn zero_state(&self) -> QTensor {
        QTensor::zeros(1, self.hidden_dim, self.state_fmt)
    }
}

#[inline]
fn shift(v: i64, by: i8) -> i64 {
    if by >= 0 {
        v << by
    } else {
        align(v, (-by) as u8, 0)
    }
}

#[inline]
fn dot(w: &[i16], x: &[i64]) -> i64 {
    let mut acc = 0i32;
    for (&a, &b) in w.iter().zip(x) {
        acc = acc.saturating_add(a as i32 * b as i32);
    }
    tally(2 * w.len() as u64);
    acc as i64
}

/// One recurrence step: returns the next hidden state in `state_fmt`.
pub fn gru_step(state: &QTensor, input: &QTensor, spec: &GruSpec) -> Result<QTensor> {
    let (m, h) = (spec.input_dim, spec.hidden_dim);
    if input.data().len() != m || state.data().len() != h {
        return Err(Error::Shape(format!(
            "GRU expects input {m} / state {h}, got {} / {}",
            input.data().len(),
            state.data().len()
        )));
    }
    if input.fmt() != spec.in_fmt || state.fmt() != spec.state_fmt {
        return Err(Error::Format(format!(
            "GRU expects {} input and {} state, got {} / {}",
            spec.in_fmt,
            spec.state_fmt,
            input.fmt(),
            state.fmt()
        )));
    }
    spec.check_blobs()?;

    let x: Vec<i64> = input.data().iter().map(|&v| v as i64).collect();
    let hs: Vec<i64> = state.data().iter().map(|&v| v as i64).collect();
    let gate = spec.gate_fmt;
    let sf = spec.state_fmt;
    let (gm, sm) = (gate.frac_bits(), sf.frac_bits());

    let pre = |g: usize, j: usize, hvec: &[i64]| -> i64 {
        let row = g * h + j;
        let wx = dot(&spec.kernel.data[row * m..(row + 1) * m], &x);
        let uh = dot(&spec.recurrent.data[row * h..(row + 1) * h], hvec);
        let b = spec.bias.data[row] as i64;
        gate.saturate(shift(wx, spec.shifts.input) + shift(uh, spec.shifts.recurrent) + shift(b, spec.shifts.bias))
    };

    let z: Vec<i64> = (0..h).map(|j| spec.sigmoid.lookup(pre(0, j, &hs))).collect();
    let r: Vec<i64> = (0..h).map(|j| spec.sigmoid.lookup(pre(1, j, &hs))).collect();
    let rh: Vec<i64> = r.iter().zip(&hs).map(|(&ri, &hi)| sf.saturate(align(ri * hi, gm + sm, sm))).collect();
    let one = 1i64 << gm;
    let next = (0..h)
        .map(|j| {
            let cand = sf.saturate(align(spec.tanh.lookup(pre(2, j, &rh)), gm, sm));
            let mix = z[j] * hs[j] + (one - z[j]) * cand;
            sf.saturate(align(mix, gm + sm, sm)) as i16
        })
        .collect();
    Ok(QTensor::from_parts_unchecked(next, 1, h, sf))
}

/// Requantize a hidden state into the layer's output format.
pub fn gru_output(state: &QTensor, spec: &GruSpec) -> Result<QTensor> {
    if state.fmt() != spec.state_fmt {
        return Err(Error::Format(format!("GRU state is {}, expected {}", state.fmt(), spec.state_fmt)));
    }
    let (from, to) = (spec.state_fmt.frac_bits(), spec.out_fmt.frac_bits());
    let out = state.data().iter().map(|&v| spec.out_fmt.saturate(align(v as i64, from, to)) as i16).collect();
    Ok(QTensor::from_parts_unchecked(out, 1, state.data().len(), spec.out_fmt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qformat::dequantize_raw;

    fn zero_spec(m: usize, h: usize) -> GruSpec {
        GruSpec::new(
            m,
            h,
            QBlob::zeros(QFormat::Q2_5, 3 * m * h),
            QBlob::zeros(QFormat::Q2_5, 3 * h * h),
            QBlob::zeros(QFormat::Q2_5, 3 * h),
            QFormat::Q2_5,
            QFormat::Q2_13,
            QFormat::Q2_13,
            QFormat::Q2_5,
        )
        .unwrap()
    }

    #[test]
    fn canonical_parameter_count() {
        assert_eq!(zero_spec(128, 64).param_count(), 37_056);
    }

    #[test]
    fn zero_weights_zero_state_stays_zero() {
        let s = zero_spec(4, 3);
        let x = QTensor::vector(vec![10, -20, 30, 40], QFormat::Q2_5).unwrap();
        let next = gru_step(&s.zero_state(), &x, &s).unwrap();
        assert_eq!(next.data(), &[0, 0, 0]);
    }

    #[test]
    fn zero_weights_halve_the_state() {
        let s = zero_spec(4, 3);
        let x = QTensor::vector(vec![0; 4], QFormat::Q2_5).unwrap();
        let h0 = QTensor::from_real(&[1.0, -0.7, 0.123], 1, 3, QFormat::Q2_13).unwrap();
        let next = gru_step(&h0, &x, &s).unwrap();
        for (a, b) in next.to_real().iter().zip(h0.to_real()) {
            assert!((a - 0.5 * b).abs() <= QFormat::Q2_13.lsb());
        }
    }

    #[test]
    fn shifts_for_canonical_formats() {
        let s = zero_spec(4, 3);
        assert_eq!(s.shifts, GruShifts { input: 3, recurrent: -5, bias: 8 });
    }

    #[test]
    fn output_requantizes_state() {
        let s = zero_spec(4, 2);
        let h = QTensor::from_real(&[0.5, -0.25], 1, 2, QFormat::Q2_13).unwrap();
        let out = gru_output(&h, &s).unwrap();
        assert_eq!(out.data(), &[16, -8]);
        assert_eq!(dequantize_raw(out.data()[0] as i64, out.fmt()), 0.5);
    }

    #[test]
    fn dimension_mismatch() {
        let s = zero_spec(4, 3);
        let x = QTensor::vector(vec![0; 5], QFormat::Q2_5).unwrap();
        assert!(matches!(gru_step(&s.zero_state(), &x, &s), Err(Error::Shape(_))));
    }
}
