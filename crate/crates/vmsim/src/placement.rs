//! Power-aware modified best-fit-decreasing placement.
//!
//! VMs are processed in decreasing CPU-demand order; each goes to the feasible
//! host whose marginal power increase is minimal. Active hosts are always
//! preferred; a sleeping host is woken only when no active host fits.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::SimError;
use crate::model::{HostId, PowerCurve, VmId, VmSpec};
use crate::power;

/// One VM awaiting a destination.
#[derive(Debug, Clone, Copy)]
pub struct PlacementRequest {
    pub vm: VmId,
    pub cpu_demand: f64,
    pub ram: f64,
    /// Transfer seconds reserved on the destination (0 for initial allocation).
    pub transfer_s: f64,
}

/// Mutable view of one host's free capacity during a placement pass.
#[derive(Debug, Clone)]
pub struct CandidateHost<'a> {
    pub id: HostId,
    pub sleeping: bool,
    pub cpu_capacity: f64,
    pub cpu_used: f64,
    pub ram_capacity: f64,
    pub ram_used: f64,
    pub free_transfer_s: f64,
    pub curve: &'a PowerCurve,
}

impl CandidateHost<'_> {
    fn utilization(&self) -> f64 {
        (self.cpu_used / self.cpu_capacity).clamp(0.0, 1.0)
    }

    fn fits(&self, req: &PlacementRequest) -> bool {
        self.cpu_capacity - self.cpu_used >= req.cpu_demand
            && self.ram_capacity - self.ram_used >= req.ram
            && self.free_transfer_s >= req.transfer_s
    }

    fn marginal_power(&self, req: &PlacementRequest) -> f64 {
        let before = self.utilization();
        let after = ((self.cpu_used + req.cpu_demand) / self.cpu_capacity).clamp(0.0, 1.0);
        let lo = power::power_at(self.curve, before).expect("clamped utilization");
        let hi = power::power_at(self.curve, after).expect("clamped utilization");
        hi - lo
    }
}

fn best_host(
    hosts: &[CandidateHost<'_>],
    req: &PlacementRequest,
    excluded: &BTreeSet<HostId>,
    sleeping_pass: bool,
) -> Option<usize> {
    let mut best: Option<(f64, HostId, usize)> = None;
    for (i, h) in hosts.iter().enumerate() {
        if h.sleeping != sleeping_pass || excluded.contains(&h.id) || !h.fits(req) {
            continue;
        }
        let score = h.marginal_power(req);
        let replace = match best {
            None => true,
            Some((s, id, _)) => score < s || (score == s && h.id < id),
        };
        if replace {
            best = Some((score, h.id, i));
        }
    }
    best.map(|(_, _, i)| i)
}

/// Assigns each request to a destination host, greedily minimizing the power
/// increase. Hosts chosen from the sleeping pool are marked awake in place.
/// Requests with no feasible host are absent from the returned map.
pub fn pabfd_place(
    requests: &[PlacementRequest],
    hosts: &mut [CandidateHost<'_>],
    excluded: &BTreeSet<HostId>,
) -> BTreeMap<VmId, HostId> {
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by(|&a, &b| {
        requests[b]
            .cpu_demand
            .partial_cmp(&requests[a].cpu_demand)
            .expect("finite demand")
            .then(requests[a].vm.cmp(&requests[b].vm))
    });

    let mut assignments = BTreeMap::new();
    for i in order {
        let req = &requests[i];
        let pick = best_host(hosts, req, excluded, false)
            .or_else(|| best_host(hosts, req, excluded, true));
        if let Some(h) = pick {
            let host = &mut hosts[h];
            host.sleeping = false;
            host.cpu_used += req.cpu_demand;
            host.ram_used += req.ram;
            host.free_transfer_s -= req.transfer_s;
            assignments.insert(req.vm, host.id);
        }
    }
    assignments
}

/// Initial allocation reserving each VM's full spec MIPS. Every VM must be
/// placeable; a shortfall is a misconfigured experiment.
pub fn initial_allocation(
    vms: &[VmSpec],
    hosts: &mut [CandidateHost<'_>],
) -> Result<BTreeMap<VmId, HostId>, SimError> {
    let requests: Vec<PlacementRequest> = vms
        .iter()
        .map(|v| PlacementRequest {
            vm: v.id,
            cpu_demand: v.mips,
            ram: v.ram,
            transfer_s: 0.0,
        })
        .collect();
    let assignments = pabfd_place(&requests, hosts, &BTreeSet::new());
    for v in vms {
        if !assignments.contains_key(&v.id) {
            return Err(SimError::Config(format!(
                "no host can hold VM {} ({} MIPS, {} MiB)",
                v.id, v.mips, v.ram
            )));
        }
    }
    Ok(assignments)
}
