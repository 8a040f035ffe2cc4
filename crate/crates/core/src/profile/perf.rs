//! Throughput, cycles and shunt-based power arithmetic.

use serde::Serialize;

use crate::error::{Error, Result};

/// Operations per second.
pub fn throughput(ops: f64, exec_time_s: f64) -> Result<f64> {
    if !(exec_time_s > 0.0) {
        return Err(Error::InvalidArgument(format!("execution time must be positive, got {exec_time_s} s")));
    }
    Ok(ops / exec_time_s)
}

pub fn ops_per_cycle(throughput_ops_s: f64, clock_hz: f64) -> Result<f64> {
    if !(clock_hz > 0.0) {
        return Err(Error::InvalidArgument(format!("clock must be positive, got {clock_hz} Hz")));
    }
    Ok(throughput_ops_s / clock_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerReport {
    pub current_a: f64,
    pub power_w: f64,
    /// Ops per second per watt.
    pub efficiency: f64,
}

/// Current through the shunt, supply power and ops/s per watt.
pub fn power_report(v_drop: f64, r_shunt: f64, v_supply: f64, throughput_ops_s: f64) -> Result<PowerReport> {
    if !(r_shunt > 0.0) {
        return Err(Error::InvalidArgument(format!("shunt resistance must be positive, got {r_shunt} ohm")));
    }
    let current_a = v_drop / r_shunt;
    let power_w = v_supply * current_a;
    if power_w == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(PowerReport { current_a, power_w, efficiency: throughput_ops_s / power_w })
}

/// Ops per second per watt for a directly measured power.
pub fn efficiency(throughput_ops_s: f64, power_w: f64) -> Result<f64> {
    if power_w == 0.0 {
        return Err(Error::ZeroPower);
    }
    Ok(throughput_ops_s / power_w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        assert_eq!(throughput(5.0, 1.0).unwrap(), 5.0);
        assert!(throughput(1.0, 0.0).is_err());
        let t = throughput(3.221e6, 0.0948).unwrap();
        assert!((t / 33.98e6 - 1.0).abs() < 1e-3);
        assert!((ops_per_cycle(t, 64e6).unwrap() - 0.531).abs() < 5e-4);
        let p = power_report(0.13625, 33.0, 5.0, 33.98e6).unwrap();
        assert!((p.current_a * 1e3 - 4.13).abs() < 5e-3);
        assert!((p.power_w * 1e3 - 20.65).abs() < 1e-2);
        assert!((p.efficiency / 1e9 - 1.64).abs() < 1e-2);
        assert!(matches!(power_report(0.0, 33.0, 5.0, 1.0), Err(Error::ZeroPower)));
        assert!(power_report(0.1, 0.0, 5.0, 1.0).is_err());
        assert!((efficiency(3.0e6, 24.14e-3).unwrap() / 1e9 - 0.124).abs() < 5e-4);
    }

    #[test]
    fn doubling_the_drop() {
        let a = power_report(0.1, 33.0, 5.0, 1e7).unwrap();
        let b = power_report(0.2, 33.0, 5.0, 1e7).unwrap();
        assert!((b.current_a / a.current_a - 2.0).abs() < 1e-12);
        assert!((b.power_w / a.power_w - 2.0).abs() < 1e-12);
        assert!((a.efficiency / b.efficiency - 2.0).abs() < 1e-12);
    }
}
