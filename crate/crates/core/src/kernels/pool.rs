use crate::error::{Error, Result};
use crate::instrument::tally;
use crate::qformat::round_div;
use crate::tensor::QTensor;

/// Average pooling over time. A trailing partial window is dropped.
pub fn avg_pool(input: &QTensor, size: usize, stride: usize) -> Result<QTensor> {
    if size == 0 || stride == 0 {
        return Err(Error::InvalidArgument("pool size and stride must be positive".into()));
    }
    if input.len() < size {
        return Err(Error::Shape(format!("pool of size {size} over length {}", input.len())));
    }
    let c = input.channels();
    let out_len = (input.len() - size) / stride + 1;
    let mut out = Vec::with_capacity(out_len * c);
    for t in 0..out_len {
        for ch in 0..c {
            let sum: i64 = (0..size).map(|i| input.at(t * stride + i, ch) as i64).sum();
            out.push(round_div(sum, size as i64) as i16);
        }
    }
    tally((out_len * c * (size - 1)) as u64);
    Ok(QTensor::from_parts_unchecked(out, out_len, c, input.fmt()))
}

/// Per-channel mean over the time axis, rounded once at the end.
pub fn global_avg_pool(input: &QTensor) -> Result<QTensor> {
    let (len, c) = input.shape();
    if len == 0 || c == 0 {
        return Err(Error::EmptyTensor);
    }
    let mut sums = vec![0i64; c];
    for t in 0..len {
        for (ch, s) in sums.iter_mut().enumerate() {
            *s += input.at(t, ch) as i64;
        }
    }
    let out = sums.into_iter().map(|s| round_div(s, len as i64) as i16).collect();
    Ok(QTensor::from_parts_unchecked(out, 1, c, input.fmt()))
}
