//! Cost model and evaluation: operation counts, memory, throughput and
//! power arithmetic, classification metrics and host timing.

mod bench;
mod metrics;
mod ops;
mod perf;

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{plan_memory, MemoryPlan, ModelGraph};

pub use bench::{benchmark_host, BenchStats, PhaseTimes};
pub use metrics::{classification_metrics, overall_f1, ClassMetrics, ClassRow, OverallRow};
pub use ops::{count_ops, count_ops_kinds, layer_ops, LayerOps, OpCount};
pub use perf::{efficiency, ops_per_cycle, power_report, throughput, PowerReport};

/// Measured quantities supplied by the user.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Measurements {
    /// Execution time of one window, seconds.
    pub exec_time_s: Option<f64>,
    pub clock_hz: Option<f64>,
    pub v_drop: Option<f64>,
    pub r_shunt: Option<f64>,
    pub v_supply: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub exec_time_s: f64,
    pub throughput_ops_s: f64,
    pub ops_per_cycle: Option<f64>,
    pub power: Option<PowerReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub ops: OpCount,
    pub memory: MemoryPlan,
    pub flash_bytes: usize,
    pub ram_bytes: usize,
    pub derived: Option<Derived>,
}

pub fn profile(graph: &ModelGraph, m: &Measurements) -> Result<ProfileReport> {
    let ops = count_ops(graph)?;
    let memory = plan_memory(graph);
    let power_given = m.v_drop.is_some() || m.r_shunt.is_some() || m.v_supply.is_some();
    let derived = match m.exec_time_s {
        Some(t) => {
            let tp = throughput(ops.total as f64, t)?;
            let opc = m.clock_hz.map(|c| ops_per_cycle(tp, c)).transpose()?;
            let power = match (m.v_drop, m.r_shunt, m.v_supply) {
                (Some(v), Some(r), Some(s)) => Some(power_report(v, r, s, tp)?),
                (None, None, None) => None,
                _ => return Err(Error::InvalidArgument("power needs the voltage drop, shunt and supply together".into())),
            };
            Some(Derived { exec_time_s: t, throughput_ops_s: tp, ops_per_cycle: opc, power })
        }
        None if power_given || m.clock_hz.is_some() => {
            return Err(Error::InvalidArgument("throughput figures need an execution time".into()));
        }
        None => None,
    };
    Ok(ProfileReport { flash_bytes: memory.flash_bytes, ram_bytes: memory.ram_bytes(), ops, memory, derived })
}

impl ProfileReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>12}", "layer", "ops");
        for l in &self.ops.layers {
            let _ = writeln!(s, "{:<10} {:>12}", l.name, l.ops);
        }
        let _ = writeln!(s, "{:<10} {:>12}", "conv block", self.ops.conv_block);
        let _ = writeln!(s, "{:<10} {:>12}  ({:.3} MOps/window)", "total", self.ops.total, self.ops.total as f64 / 1e6);
        let _ = writeln!(s);
        let m = &self.memory;
        let _ = writeln!(
            s,
            "flash {} B ({:.2} KB): weights {} B, lookup tables {} B",
            m.flash_bytes,
            m.flash_bytes as f64 / 1e3,
            m.weight_bytes,
            m.lut_bytes
        );
        for (name, b) in &m.ram_buffers {
            let _ = writeln!(s, "ram   {name:<14} {b:>6} B");
        }
        let _ = writeln!(s, "ram   {:<14} {:>6} B", "total", self.ram_bytes);
        if let Some(d) = &self.derived {
            let _ = writeln!(s);
            let _ = writeln!(s, "execution time  {:.4} s/window", d.exec_time_s);
            let _ = writeln!(s, "throughput      {:.2} MOps/s", d.throughput_ops_s / 1e6);
            if let Some(c) = d.ops_per_cycle {
                let _ = writeln!(s, "ops per cycle   {c:.3}");
            }
            if let Some(p) = d.power {
                let _ = writeln!(s, "current         {:.2} mA", p.current_a * 1e3);
                let _ = writeln!(s, "power           {:.2} mW", p.power_w * 1e3);
                let _ = writeln!(s, "efficiency      {:.3} GOps/s/W", p.efficiency / 1e9);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_canonical_model;

    #[test]
    fn canonical_report() {
        let g = build_canonical_model();
        let m = Measurements {
            exec_time_s: Some(0.0948),
            clock_hz: Some(64e6),
            v_drop: Some(0.13625),
            r_shunt: Some(33.0),
            v_supply: Some(5.0),
        };
        let r = profile(&g, &m).unwrap();
        let d = r.derived.as_ref().unwrap();
        assert!((d.throughput_ops_s / 1e6 - 34.006).abs() < 0.01);
        assert!(d.power.is_some());
        assert_eq!(r.flash_bytes, 195_620);
        assert!(r.to_table().contains("GOps/s/W"));
        assert!(profile(&g, &Measurements { clock_hz: Some(1.0), ..Default::default() }).is_err());
        assert!(profile(&g, &Measurements { exec_time_s: Some(1.0), v_drop: Some(1.0), ..Default::default() }).is_err());
    }
}
