use crate::error::{Error, Result};
use crate::tensor::QTensor;

/// Fractional bits of the returned probabilities.
pub const PROB_FRAC_BITS: u32 = 15;

const ONE_Q30: u64 = 1 << 30;

/// `2^(-2^-e)` in Q1.30 for `e = 1..=15`.
const POW2_NEG_UNIT_FRAC: [u64; 15] = [
    759250125, 902905651, 984625594, 1028218693, 1050733751, 1062175491, 1067942999, 1070838486,
    1072289173, 1073015252, 1073378477, 1073560135, 1073650976, 1073696399, 1073719111,
];

/// `2^-(d / 2^m)` in Q1.30 for a non-negative raw distance `d`.
fn pow2_neg(d: u64, frac_bits: u32) -> u64 {
    let int_part = d >> frac_bits;
    if int_part >= 31 {
        return 0;
    }
    let frac = d & ((1u64 << frac_bits) - 1);
    let mut w = ONE_Q30;
    for bit in 0..frac_bits {
        if frac >> bit & 1 == 1 {
            // bit `bit` weighs 2^(bit - m)
            let c = POW2_NEG_UNIT_FRAC[(frac_bits - bit - 1) as usize];
            w = (w * c + (1 << 29)) >> 30;
        }
    }
    w >> int_part
}

/// Base-2 softmax over the raw logits of a vector.
///
/// Each weight is `2^(l_i - max l)` computed with shifts and a short table
/// of fractional powers; probabilities are quantized to Q0.15 and returned
/// as reals.
pub fn softmax_pow2(logits: &QTensor) -> Result<Vec<f64>> {
    let raw = logits.data();
    if raw.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let m = logits.fmt().frac_bits() as u32;
    if m > POW2_NEG_UNIT_FRAC.len() as u32 {
        return Err(Error::Format(format!("softmax supports at most 15 fractional bits, got {m}")));
    }
    let max = *raw.iter().max().unwrap() as i64;
    let weights: Vec<u64> = raw.iter().map(|&l| pow2_neg((max - l as i64) as u64, m)).collect();
    let sum: u64 = weights.iter().sum();
    let scale = (1u64 << PROB_FRAC_BITS) as f64;
    Ok(weights
        .iter()
        .map(|&w| (((w << PROB_FRAC_BITS) + sum / 2) / sum) as f64 / scale)
        .collect())
}
