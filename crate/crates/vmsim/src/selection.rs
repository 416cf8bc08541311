//! VM selection policies for overloaded hosts.
//!
//! Migration time of a VM is its used RAM divided by the host bandwidth
//! available for migration. MxMT picks the VM with the longest migration
//! time, MMT the shortest, RC a uniformly random one. VMs already mid-flight
//! are never candidates.

use rand::Rng;

use crate::error::SimError;
use crate::model::VmId;

/// Megabits per MiB (2^20 * 8 / 10^6).
pub const MIB_IN_MEGABITS: f64 = 8.388608;

/// One migration candidate on a host.
#[derive(Debug, Clone, Copy)]
pub struct Candidate {
    pub vm: VmId,
    pub ram_used: f64,
    pub cpu_demand: f64,
    pub in_migration: bool,
}

/// Estimated migration duration in seconds.
pub fn migration_time(ram_used_mib: f64, net_mbps: f64) -> Result<f64, SimError> {
    if net_mbps.is_nan() || net_mbps <= 0.0 {
        return Err(SimError::NoBandwidth);
    }
    Ok(ram_used_mib * MIB_IN_MEGABITS / net_mbps)
}

fn eligible(c: &&Candidate) -> bool {
    !c.in_migration
}

// The bandwidth denominator is common to every candidate on a host, but the
// ratio is compared as such so per-VM bandwidth differentiation stays a local
// change.
fn pick<F>(candidates: &[Candidate], net_mbps: f64, better: F) -> Option<VmId>
where
    F: Fn(f64, f64) -> bool,
{
    let mut best: Option<(f64, VmId)> = None;
    for c in candidates.iter().filter(eligible) {
        let ratio = c.ram_used * MIB_IN_MEGABITS / net_mbps;
        let replace = match best {
            None => true,
            Some((r, id)) => better(ratio, r) || (ratio == r && c.vm < id),
        };
        if replace {
            best = Some((ratio, c.vm));
        }
    }
    best.map(|(_, id)| id)
}

/// Maximum-migration-time selection: argmax of used RAM over bandwidth.
pub fn select_mxmt(candidates: &[Candidate], net_mbps: f64) -> Option<VmId> {
    pick(candidates, net_mbps, |a, b| a > b)
}

/// Minimum-migration-time selection: argmin of used RAM over bandwidth.
pub fn select_mmt(candidates: &[Candidate], net_mbps: f64) -> Option<VmId> {
    pick(candidates, net_mbps, |a, b| a < b)
}

/// Random-choice selection over non-migrating candidates.
pub fn select_rc(candidates: &[Candidate], rng: &mut impl Rng) -> Option<VmId> {
    let pool: Vec<VmId> = candidates.iter().filter(eligible).map(|c| c.vm).collect();
    if pool.is_empty() {
        None
    } else {
        Some(pool[rng.gen_range(0..pool.len())])
    }
}
