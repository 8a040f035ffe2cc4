//! Rational-ratio polyphase resampling with a Kaiser-windowed sinc filter.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const KAISER_BETA: f64 = 5.0;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Modified Bessel function of the first kind, order zero.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum, mut k) = (1.0, 1.0, 1.0);
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) }
}

/// Low-pass FIR of `taps` coefficients with cutoff `cutoff` (fraction of
/// Nyquist), Kaiser window, unit DC gain.
pub fn kaiser_lowpass(taps: usize, cutoff: f64, beta: f64) -> Vec<f64> {
    let alpha = (taps as f64 - 1.0) / 2.0;
    let norm = bessel_i0(beta);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let m = i as f64 - alpha;
            let r = if taps > 1 { 2.0 * i as f64 / (taps as f64 - 1.0) - 1.0 } else { 0.0 };
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm;
            cutoff * sinc(cutoff * m) * w
        })
        .collect();
    let s: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= s);
    h
}

/// Polyphase resampler for a fixed `up / down` ratio.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    half_len: usize,
    taps: Vec<f64>,
}

impl Resampler {
    pub fn new(up: u64, down: u64) -> Result<Self> {
        if up == 0 || down == 0 {
            return Err(Error::InvalidArgument("resampling factors must be positive".into()));
        }
        let g = gcd(up, down);
        let (up, down) = ((up / g) as usize, (down / g) as usize);
        let max_rate = up.max(down);
        let half_len = 10 * max_rate;
        let mut taps = kaiser_lowpass(2 * half_len + 1, 1.0 / max_rate as f64, KAISER_BETA);
        taps.iter_mut().for_each(|v| *v *= up as f64);
        Ok(Self { up, down, half_len, taps })
    }

    /// Resampler between two integer sample rates.
    pub fn for_rates(from: f64, to: f64) -> Result<Self> {
        if to > from {
            return Err(Error::UnsupportedDirection { from, to });
        }
        let int = |v: f64| {
            if v > 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
                Ok(v as u64)
            } else {
                Err(Error::InvalidArgument(format!("sample rate {v} Hz is not a positive integer")))
            }
        };
        Self::new(int(to)?, int(from)?)
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    /// `round(n * up / down)`, ties rounding up.
    pub fn output_len(&self, n: usize) -> usize {
        (2 * n * self.up + self.down) / (2 * self.down)
    }

    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        if self.up == 1 && self.down == 1 {
            return x.to_vec();
        }
        let (up, down, h) = (self.up, self.down, &self.taps);
        let n_out = self.output_len(x.len());
        (0..n_out)
            .map(|n| {
                // y[n] = sum_k h[k] * x_up[n*down + half_len - k], x_up nonzero at multiples of `up`
                let t = n * down + self.half_len;
                let first_i = (t + 1).saturating_sub(h.len()).div_ceil(up);
                let last_i = (t / up).min(x.len().saturating_sub(1));
                let mut acc = 0.0;
                if x.is_empty() {
                    return acc;
                }
                for i in first_i..=last_i {
                    acc += h[t - i * up] * x[i];
                }
                acc
            })
            .collect()
    }
}

/// Resample `x` from `from` Hz to `to` Hz (downsampling only).
pub fn resample(x: &[f64], from: f64, to: f64) -> Result<Vec<f64>> {
    Ok(Resampler::for_rates(from, to)?.process(x))
}
