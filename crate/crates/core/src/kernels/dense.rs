use crate::error::{Error, Result};
use crate::instrument::tally;
use crate::qformat::{derive_shifts, round_shift, QFormat, ShiftSpec};
use crate::tensor::{QBlob, QTensor};

/// Fully connected layer, weights stored `[output][input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub weights: QBlob,
    pub bias: QBlob,
    pub in_fmt: QFormat,
    pub out_fmt: QFormat,
    pub shifts: ShiftSpec,
}

impl DenseSpec {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        weights: QBlob,
        bias: QBlob,
        in_fmt: QFormat,
        out_fmt: QFormat,
    ) -> Result<Self> {
        let shifts = derive_shifts(in_fmt, weights.fmt, bias.fmt, out_fmt)?;
        let spec = Self { input_dim, output_dim, weights, bias, in_fmt, out_fmt, shifts };
        spec.check_blobs()?;
        Ok(spec)
    }

    pub fn param_count(&self) -> usize {
        self.input_dim * self.output_dim + self.output_dim
    }

    pub(crate) fn check_blobs(&self) -> Result<()> {
        if self.weights.len() != self.input_dim * self.output_dim || self.bias.len() != self.output_dim {
            return Err(Error::Shape(format!(
                "dense blobs hold {} weights / {} biases, expected {} / {}",
                self.weights.len(),
                self.bias.len(),
                self.input_dim * self.output_dim,
                self.output_dim
            )));
        }
        Ok(())
    }
}

pub fn dense(input: &QTensor, spec: &DenseSpec) -> Result<QTensor> {
    if input.data().len() != spec.input_dim {
        return Err(Error::Shape(format!("dense expects {} inputs, got {}", spec.input_dim, input.data().len())));
    }
    if input.fmt() != spec.in_fmt {
        return Err(Error::Format(format!("dense expects {} input, got {}", spec.in_fmt, input.fmt())));
    }
    spec.check_blobs()?;
    let bl = spec.shifts.bias_left_shift as u32;
    let or = spec.shifts.out_right_shift as u32;
    let x = input.data();
    let out = spec
        .weights
        .data
        .chunks_exact(spec.input_dim)
        .zip(&spec.bias.data)
        .map(|(row, &b)| {
            let mut acc = (b as i32) << bl;
            for (&w, &xi) in row.iter().zip(x) {
                acc = acc.saturating_add(w as i32 * xi as i32);
            }
            tally(2 * spec.input_dim as u64 + 1);
            spec.out_fmt.saturate(round_shift(acc as i64, or)) as i16
        })
        .collect();
    Ok(QTensor::from_parts_unchecked(out, 1, spec.output_dim, spec.out_fmt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(data: Vec<i16>) -> QBlob {
        QBlob::new(QFormat::Q2_5, data).unwrap()
    }

    #[test]
    fn canonical_head_parameter_count() {
        let s = DenseSpec::new(64, 4, blob(vec![0; 256]), blob(vec![0; 4]), QFormat::Q2_5, QFormat::Q2_5).unwrap();
        assert_eq!(s.param_count(), 260);
    }

    #[test]
    fn diagonal_weights_are_identity() {
        let mut w = vec![0; 9];
        for i in 0..3 {
            w[i * 3 + i] = 32;
        }
        let s = DenseSpec::new(3, 3, blob(w), blob(vec![0; 3]), QFormat::Q2_5, QFormat::Q2_5).unwrap();
        let x = QTensor::vector(vec![-128, 5, 127], QFormat::Q2_5).unwrap();
        assert_eq!(dense(&x, &s).unwrap().data(), x.data());
    }

    #[test]
    fn wrong_input_length() {
        let s = DenseSpec::new(3, 1, blob(vec![0; 3]), blob(vec![0]), QFormat::Q2_5, QFormat::Q2_5).unwrap();
        let x = QTensor::vector(vec![0; 4], QFormat::Q2_5).unwrap();
        assert!(matches!(dense(&x, &s), Err(Error::Shape(_))));
        assert!(DenseSpec::new(3, 2, blob(vec![0; 3]), blob(vec![0]), QFormat::Q2_5, QFormat::Q2_5).is_err());
    }
}
