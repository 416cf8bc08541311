//! Run-level evaluation metrics (energy, SLATAH, PDM, SLAV, ESV, migration
//! count) and the analytical single-migration / consolidation cost utilities.

use crate::engine::RunReport;
use crate::error::SimError;
use crate::model::CostParams;

/// Total energy over the run in kWh.
pub fn energy_total(report: &RunReport) -> f64 {
    report.steps.iter().map(|s| s.energy_kwh).sum()
}

/// SLA time per active host: mean over ever-active hosts of the fraction of
/// active time spent with demand above capacity.
pub fn slatah(report: &RunReport) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for h in &report.host_totals {
        if h.active_s > 0.0 {
            sum += h.saturated_s / h.active_s;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Performance degradation due to migration: mean over all VMs of the
/// fraction of demanded CPU-time lost to migration overhead.
pub fn pdm(report: &RunReport) -> f64 {
    if report.vm_totals.is_empty() {
        return 0.0;
    }
    let sum: f64 = report
        .vm_totals
        .iter()
        .map(|v| {
            if v.demand_mips_s > 0.0 {
                v.degraded_mips_s / v.demand_mips_s
            } else {
                0.0
            }
        })
        .sum();
    sum / report.vm_totals.len() as f64
}

/// Combined SLA-violation metric.
pub fn slav(report: &RunReport) -> f64 {
    slatah(report) * pdm(report)
}

/// Energy-and-SLA-violation combined objective.
pub fn esv(report: &RunReport) -> f64 {
    energy_total(report) * slav(report)
}

pub fn migration_count(report: &RunReport) -> usize {
    report.migrations.len()
}

/// Cost of a single migration given violation start `v` and migration start
/// `m`. Evaluates the three-case cost function exactly as formulated and
/// returns the cost together with the case index; inputs matching no case
/// condition yield an explicit error.
pub fn single_migration_cost(v: f64, m: f64, params: &CostParams) -> Result<(f64, u8), SimError> {
    let t = params.t_mig;
    let (c_p, c_v) = (params.c_p, params.c_v);
    if m < v && v - m >= t {
        Ok(((v - m) * c_p, 1))
    } else if m <= v && v - m < t {
        let cost = (v - m) * c_p + 2.0 * (m - v + t) * c_p + (m - v + t) * c_v;
        Ok((cost, 2))
    } else if m > v {
        let r = m - v;
        Ok((r * c_p + (r - m + v) * c_p + r * c_v, 3))
    } else {
        Err(SimError::UncoveredCostCase)
    }
}

/// Total consolidation cost over the step series: active-host cost plus
/// violation cost, one step = one unit of time.
pub fn total_cost(report: &RunReport, params: &CostParams) -> f64 {
    report
        .steps
        .iter()
        .map(|s| params.c_p * s.active_hosts as f64 + params.c_v * s.violations as f64)
        .sum()
}

/// Upper bound on the competitive ratio of the online consolidation
/// algorithm: 1 + m s / (2 (m + 1)) for m VMs per host and cost ratio s.
pub fn competitive_bound(m_vms_per_host: u64, s: f64) -> f64 {
    let m = m_vms_per_host as f64;
    1.0 + m * s / (2.0 * (m + 1.0))
}
