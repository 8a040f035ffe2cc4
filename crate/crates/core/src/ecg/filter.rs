//! Butterworth band-pass design (analog prototype, band-pass transform,
//! bilinear map) and second-order-section filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad: `b0 b1 b2 / 1 a1 a2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

/// Cascade of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

/// Digital Butterworth band-pass of prototype order `order` (the digital
/// filter has `2 * order` poles), edges in Hz.
pub fn butter_bandpass(order: usize, low: f64, high: f64, fs: f64) -> Result<Sos> {
    if order == 0 {
        return Err(Error::InvalidArgument("filter order must be positive".into()));
    }
    if !(low > 0.0 && low < high) {
        return Err(Error::InvalidArgument(format!("band edges {low}..{high} Hz")));
    }
    if high >= fs / 2.0 {
        return Err(Error::Nyquist { fs, edge: high });
    }
    // Work on the frequency axis normalised to Nyquist = 1, with a sample rate of 2.
    let warp = |f: f64| 4.0 * (PI * (f / (fs / 2.0)) / 2.0).tan();
    let (w1, w2) = (warp(low), warp(high));
    let (bw, w0) = (w2 - w1, (w1 * w2).sqrt());

    let n = order as i64;
    let proto: Vec<Complex64> = (0..n)
        .map(|k| {
            let m = (-n + 1 + 2 * k) as f64;
            -Complex64::from_polar(1.0, PI * m / (2.0 * n as f64))
        })
        .collect();

    let mut poles = Vec::with_capacity(2 * order);
    for &p in &proto {
        let lp = p * (bw / 2.0);
        let root = (lp * lp - w0 * w0).sqrt();
        poles.push(lp + root);
        poles.push(lp - root);
    }
    let gain_analog = bw.powi(n as i32);

    let fs2 = 4.0;
    let zpoles: Vec<Complex64> = poles.iter().map(|&p| (fs2 + p) / (fs2 - p)).collect();
    // analog zeros: `order` at the origin, the rest at infinity
    let num = Complex64::new(fs2, 0.0).powi(n as i32);
    let den: Complex64 = poles.iter().map(|&p| fs2 - p).product();
    let gain = gain_analog * (num / den).re;

    Ok(Sos { sections: pair_sections(&zpoles, order, gain) })
}

/// Pair conjugate poles into biquads, each with a double zero at +1 or -1,
/// whichever is nearer and still available. Sections closest to the unit
/// circle go last; the overall gain sits in the first section.
fn pair_sections(poles: &[Complex64], order: usize, gain: f64) -> Vec<Biquad> {
    let mut upper: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > 1e-14).collect();
    let mut reals: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= 1e-14).map(|p| p.re).collect();
    reals.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    upper.sort_by(|a, b| b.norm().total_cmp(&a.norm()));

    let mut at_plus = order;
    let mut at_minus = order;
    let mut take_zero = |near: Complex64| -> f64 {
        let prefer_plus = (near - 1.0).norm() <= (near + 1.0).norm();
        if (prefer_plus && at_plus > 0) || at_minus == 0 {
            at_plus -= 1;
            1.0
        } else {
            at_minus -= 1;
            -1.0
        }
    };

    let mut sections = Vec::new();
    for p in upper {
        let z1 = take_zero(p);
        let z2 = take_zero(p);
        sections.push(Biquad { b: [1.0, -(z1 + z2), z1 * z2], a: [1.0, -2.0 * p.re, p.norm_sqr()] });
    }
    for pair in reals.chunks(2) {
        let (p1, p2) = (pair[0], pair.get(1).copied().unwrap_or(0.0));
        let z1 = take_zero(Complex64::new(p1, 0.0));
        let z2 = if pair.len() == 2 { take_zero(Complex64::new(p2, 0.0)) } else { 0.0 };
        let b = if pair.len() == 2 { [1.0, -(z1 + z2), z1 * z2] } else { [1.0, -z1, 0.0] };
        sections.push(Biquad { b, a: [1.0, -(p1 + p2), p1 * p2] });
    }
    sections.reverse();
    if let Some(first) = sections.first_mut() {
        first.b.iter_mut().for_each(|v| *v *= gain);
    }
    sections
}

impl Sos {
    /// Complex frequency response at `f` Hz.
    pub fn response(&self, f: f64, fs: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        self.sections
            .iter()
            .map(|s| (s.b[0] + s.b[1] * z + s.b[2] * z * z) / (s.a[0] + s.a[1] * z + s.a[2] * z * z))
            .product()
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        self.filter_with_state(x, &vec![[0.0; 2]; self.sections.len()])
    }

    /// Direct form II transposed, starting from the given per-section state.
    fn filter_with_state(&self, x: &[f64], init: &[[f64; 2]]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (s, z0) in self.sections.iter().zip(init) {
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            let (mut z1, mut z2) = (z0[0], z0[1]);
            for v in y.iter_mut() {
                let xin = *v;
                let out = b0 * xin + z1;
                z1 = b1 * xin - a1 * out + z2;
                z2 = b2 * xin - a2 * out;
                *v = out;
            }
        }
        y
    }

    /// Per-section state for a unit step in steady state.
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [b0, b1, b2] = s.b;
                let [_, a1, a2] = s.a;
                // (I - companion^T) zi = b[1..] - a[1..] b0
                let (r1, r2) = (b1 - a1 * b0, b2 - a2 * b0);
                let det = (1.0 + a1) + a2;
                let zi0 = (r1 + r2) / det;
                let zi1 = r2 - a2 * zi0;
                let zi = [scale * zi0, scale * zi1];
                scale *= s.b.iter().sum::<f64>() / s.a.iter().sum::<f64>();
                zi
            })
            .collect()
    }

    /// Forward-backward (zero-phase) filtering with odd extension at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = 3 * (2 * self.sections.len() + 1);
        if x.len() <= pad {
            return Err(Error::RecordTooShort { len: x.len(), needed: pad + 1 });
        }
        let n = x.len();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();
        let mut y = self.filter_with_state(&ext, &scaled(ext[0]));
        y.reverse();
        let mut y = self.filter_with_state(&y, &scaled(y[0]));
        y.reverse();
        Ok(y[pad..pad + n].to_vec())
    }
}
