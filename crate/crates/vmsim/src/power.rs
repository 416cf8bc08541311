//! Host power draw as a function of CPU utilization, and energy integration.
//!
//! The curve is defined by eleven anchors at 10% load increments; draw between
//! anchors is piecewise-linear. A sleeping host draws nothing.

use crate::error::SimError;
use crate::model::{HostState, PowerCurve};

/// Power draw in watts at the given utilization fraction.
///
/// Exact anchor values at multiples of 0.1, linear interpolation in between.
pub fn power_at(curve: &PowerCurve, utilization: f64) -> Result<f64, SimError> {
    if !(0.0..=1.0).contains(&utilization) || utilization.is_nan() {
        return Err(SimError::InvalidArgument(format!(
            "utilization {utilization} outside [0, 1]"
        )));
    }
    let anchors = curve.anchors();
    let scaled = utilization * 10.0;
    let lo = scaled.floor() as usize;
    if lo >= 10 {
        return Ok(anchors[10]);
    }
    let frac = scaled - lo as f64;
    Ok(anchors[lo] + frac * (anchors[lo + 1] - anchors[lo]))
}

/// Power draw of a host: zero when sleeping, curve value when active.
///
/// An active host with no VMs still draws its 0%-load power until the engine
/// puts it to sleep.
pub fn host_power(host: &HostState, utilization: f64) -> Result<f64, SimError> {
    if !host.is_active() {
        return Ok(0.0);
    }
    power_at(&host.spec.power_curve, utilization)
}

/// Energy of one accounting interval in kWh.
pub fn step_energy(power_w: f64, dt_s: f64) -> f64 {
    power_w * dt_s / 3_600_000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        make_default_datacenter, HostId, HostMode, HostSpec, G4_POWER, G5_POWER,
    };

    #[test]
    fn anchors_are_exact() {
        let hosts = make_default_datacenter(2, 0).unwrap();
        let g4 = &hosts[0].spec.power_curve;
        let g5 = &hosts[1].spec.power_curve;
        for i in 0..11 {
            let u = i as f64 / 10.0;
            assert_eq!(power_at(g4, u).unwrap(), G4_POWER[i]);
            assert_eq!(power_at(g5, u).unwrap(), G5_POWER[i]);
        }
    }

    #[test]
    fn interpolation_midpoint() {
        let curve = HostSpec::g4(HostId(0)).power_curve;
        // midpoint of 86 and 89.4
        assert!((power_at(&curve, 0.05).unwrap() - 87.7).abs() < 1e-12);
    }

    #[test]
    fn g5_full_load() {
        let curve = HostSpec::g5(HostId(0)).power_curve;
        assert_eq!(power_at(&curve, 1.0).unwrap(), 135.0);
    }

    #[test]
    fn out_of_range_rejected() {
        let curve = HostSpec::g4(HostId(0)).power_curve;
        assert!(power_at(&curve, -0.1).is_err());
        assert!(power_at(&curve, 1.1).is_err());
        assert!(power_at(&curve, f64::NAN).is_err());
    }

    #[test]
    fn sleeping_host_draws_nothing() {
        let mut host = crate::model::HostState::new(HostSpec::g5(HostId(0)));
        host.mode = HostMode::Sleeping;
        assert_eq!(host_power(&host, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn active_host_follows_curve() {
        let host = crate::model::HostState::new(HostSpec::g4(HostId(0)));
        assert_eq!(host_power(&host, 0.0).unwrap(), 86.0);
        assert_eq!(host_power(&host, 0.5).unwrap(), 102.0);
    }

    #[test]
    fn monotone_in_utilization() {
        let curve = HostSpec::g5(HostId(0)).power_curve;
        let mut prev = 0.0;
        for i in 0..=1000 {
            let u = i as f64 / 1000.0;
            let p = power_at(&curve, u).unwrap();
            assert!(p >= prev, "power decreased at u={u}");
            prev = p;
        }
    }

    #[test]
    fn step_energy_conversions() {
        assert!((step_energy(117.0, 3600.0) - 0.117).abs() < 1e-15);
        assert_eq!(step_energy(0.0, 12345.0), 0.0);
        assert!((step_energy(86.0, 300.0) - 86.0 * 300.0 / 3.6e6).abs() < 1e-18);
    }

    #[test]
    fn energy_additive_over_time() {
        let whole = step_energy(102.0, 750.0);
        let split = step_energy(102.0, 300.0) + step_energy(102.0, 450.0);
        assert!((whole - split).abs() < 1e-12);
    }
}
