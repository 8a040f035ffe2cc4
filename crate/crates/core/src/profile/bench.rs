//! Host wall-clock timing of the fixed-point engine, split by phase.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Engine, ModelGraph};
use crate::tensor::QTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseTimes {
    pub conv_s: f64,
    pub gru_s: f64,
    pub dense_s: f64,
}

impl PhaseTimes {
    pub fn total(&self) -> f64 {
        self.conv_s + self.gru_s + self.dense_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchStats {
    pub repetitions: usize,
    pub windows: usize,
    pub median_s: f64,
    pub mean_s: f64,
    /// Median recording time divided by the number of windows.
    pub per_window_median_s: f64,
    pub per_window_mean_s: f64,
    /// Median of each phase across repetitions.
    pub phases: PhaseTimes,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

/// Time full recordings on the calling thread.
pub fn benchmark_host(graph: &ModelGraph, windows: &[QTensor], repetitions: usize) -> Result<BenchStats> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument("at least one repetition".into()));
    }
    if windows.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let mut engine = Engine::new(graph)?;
    let mut runs: Vec<PhaseTimes> = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        engine.reset();
        let (mut conv, mut gru) = (Duration::ZERO, Duration::ZERO);
        for w in windows {
            let t = Instant::now();
            let f = std::hint::black_box(engine.frontend(w)?);
            conv += t.elapsed();
            let t = Instant::now();
            engine.recur(&f)?;
            gru += t.elapsed();
        }
        let t = Instant::now();
        std::hint::black_box(engine.head()?);
        let dense = t.elapsed();
        runs.push(PhaseTimes { conv_s: conv.as_secs_f64(), gru_s: gru.as_secs_f64(), dense_s: dense.as_secs_f64() });
    }
    let mut totals: Vec<f64> = runs.iter().map(PhaseTimes::total).collect();
    let mean_s = totals.iter().sum::<f64>() / repetitions as f64;
    let median_s = median(&mut totals);
    let pick = |f: fn(&PhaseTimes) -> f64| median(&mut runs.iter().map(f).collect::<Vec<_>>());
    let phases = PhaseTimes { conv_s: pick(|p| p.conv_s), gru_s: pick(|p| p.gru_s), dense_s: pick(|p| p.dense_s) };
    let n = windows.len() as f64;
    Ok(BenchStats {
        repetitions,
        windows: windows.len(),
        median_s,
        mean_s,
        per_window_median_s: median_s / n,
        per_window_mean_s: mean_s / n,
        phases,
    })
}
