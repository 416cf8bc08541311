//! The discrete-time consolidation loop.
//!
//! Each 300 s step: refresh VM demands from traces, detect overloaded and
//! underloaded hosts, select and migrate VMs, advance in-flight migrations,
//! put empty hosts to sleep, and account energy, violations, and migrations.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detection::{self, HostSnapshot};
use crate::error::SimError;
use crate::model::{
    Detection, HostId, HostMode, HostState, PolicyConfig, Selection, VmId, VmState, STEP_SECONDS,
};
use crate::placement::{self, CandidateHost, PlacementRequest};
use crate::power;
use crate::selection::{self, Candidate};
use crate::workload::Trace;

/// Fraction of a migrating VM's CPU demand counted as lost capacity.
pub const MIGRATION_DEGRADATION: f64 = 0.1;

/// A host participates in at most this many concurrent migrations.
pub const MAX_MIGRATIONS_PER_HOST: u32 = 2;

/// Transfer seconds available per host per step: two half-bandwidth channels
/// may each carry back-to-back transfers for the whole step, so at most two
/// migrations overlap at any instant.
pub const STEP_TRANSFER_BUDGET_S: f64 = MAX_MIGRATIONS_PER_HOST as f64 * STEP_SECONDS;

/// A woken host accepts load only after one full step.
pub const WAKE_DELAY_S: f64 = STEP_SECONDS;

/// Resident working-set floor: a VM's RAM in use never drops below this
/// fraction of its configured RAM, and scales up linearly with CPU activity.
pub const RAM_BASE_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Migration {
    pub vm: VmId,
    pub source: HostId,
    pub dest: HostId,
    pub started_at: f64,
    pub duration: f64,
    /// True when triggered by overload relief, false for underload evacuation.
    pub from_overload: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub active_hosts: usize,
    pub energy_kwh: f64,
    /// Hosts whose demand exceeded capacity this step.
    pub violations: usize,
    /// Hosts the detection policy flagged as overloaded this step.
    pub overloaded_hosts: usize,
    pub migrations_started: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HostTotals {
    pub id: HostId,
    pub active_s: f64,
    pub saturated_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmTotals {
    pub id: VmId,
    /// Integral of demanded CPU over time, MIPS-seconds.
    pub demand_mips_s: f64,
    /// Integral of capacity lost to migration overhead, MIPS-seconds.
    pub degraded_mips_s: f64,
    pub migrations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub policy: PolicyConfig,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub host_totals: Vec<HostTotals>,
    pub vm_totals: Vec<VmTotals>,
    pub migrations: Vec<Migration>,
}

/// True iff demand exceeds the host's capacity (evaluated before clamping).
/// A sleeping host carries no demand and never flags.
pub fn sla_flags(host: &HostState, demand: f64) -> bool {
    host.is_active() && demand > host.spec.total_mips()
}

struct InFlight {
    vm: usize,
    src: usize,
    dst: usize,
    remaining: f64,
}

/// How an overload decision degrades as planned migrations remove demand.
enum Trigger {
    Util { current: f64, threshold: f64 },
    Pred { predicted: f64, safety: f64 },
}

impl Trigger {
    fn active(&self) -> bool {
        match self {
            Trigger::Util { current, threshold } => current > threshold,
            Trigger::Pred { predicted, safety } => safety * predicted >= 1.0,
        }
    }

    fn remove_share(&mut self, share: f64) {
        match self {
            Trigger::Util { current, .. } => *current -= share,
            Trigger::Pred { predicted, .. } => *predicted -= share,
        }
    }
}

struct Sim<'a> {
    policy: PolicyConfig,
    hosts: Vec<HostState>,
    vms: Vec<VmState>,
    traces: Vec<&'a Trace>,
    host_index: BTreeMap<HostId, usize>,
    vm_index: BTreeMap<VmId, usize>,
    incoming: Vec<Vec<usize>>,
    inflight: Vec<InFlight>,
    inflight_count: Vec<u32>,
    /// Transfer seconds consumed on each host during the current step.
    transfer_used: Vec<f64>,
    woken: BTreeSet<usize>,
    rng: ChaCha8Rng,
    // accounting
    host_totals: Vec<HostTotals>,
    vm_totals: Vec<VmTotals>,
    migrations: Vec<Migration>,
    started_this_step: usize,
}

/// Runs the consolidation loop for `horizon` steps. `traces[i]` drives
/// `vms[i]`. Deterministic for a fixed seed.
pub fn run(
    hosts: Vec<HostState>,
    vms: Vec<VmState>,
    traces: &[Trace],
    policy: &PolicyConfig,
    horizon: usize,
    seed: u64,
) -> Result<RunReport, SimError> {
    if horizon == 0 {
        return Err(SimError::Config("horizon must be >= 1".into()));
    }
    if vms.len() != traces.len() {
        return Err(SimError::Config(format!(
            "{} VMs but {} traces",
            vms.len(),
            traces.len()
        )));
    }
    for (vm, trace) in vms.iter().zip(traces) {
        if trace.samples.len() < horizon {
            return Err(SimError::Config(format!(
                "trace for {} has {} samples, horizon needs {horizon}",
                vm.spec.id,
                trace.samples.len()
            )));
        }
    }

    // pair VMs with their traces, then order by id for deterministic iteration
    let mut paired: Vec<(VmState, &Trace)> = vms.into_iter().zip(traces).collect();
    paired.sort_by_key(|p| p.0.spec.id);
    let (mut vms, traces): (Vec<VmState>, Vec<&Trace>) = paired.into_iter().unzip();

    let mut hosts = hosts;
    hosts.sort_by_key(|h| h.spec.id);
    let host_index: BTreeMap<HostId, usize> =
        hosts.iter().enumerate().map(|(i, h)| (h.spec.id, i)).collect();
    let vm_index: BTreeMap<VmId, usize> =
        vms.iter().enumerate().map(|(i, v)| (v.spec.id, i)).collect();
    if vm_index.len() != vms.len() {
        return Err(SimError::Config("duplicate VM ids".into()));
    }

    // initial allocation reserving full spec MIPS
    {
        let specs: Vec<_> = vms.iter().map(|v| v.spec.clone()).collect();
        let mut candidates = build_candidates(&hosts, &vms, &vm_index, &[], &[]);
        let assignments = placement::initial_allocation(&specs, &mut candidates)?;
        for vm in vms.iter_mut() {
            let hid = assignments[&vm.spec.id];
            vm.host = Some(hid);
            hosts[host_index[&hid]].resident_vms.push(vm.spec.id);
        }
    }

    let n_hosts = hosts.len();
    let host_totals = hosts
        .iter()
        .map(|h| HostTotals {
            id: h.spec.id,
            active_s: 0.0,
            saturated_s: 0.0,
        })
        .collect();
    let vm_totals = vms
        .iter()
        .map(|v| VmTotals {
            id: v.spec.id,
            demand_mips_s: 0.0,
            degraded_mips_s: 0.0,
            migrations: 0,
        })
        .collect();

    let mut sim = Sim {
        policy: policy.clone(),
        hosts,
        vms,
        traces,
        host_index,
        vm_index,
        incoming: vec![Vec::new(); n_hosts],
        inflight: Vec::new(),
        inflight_count: vec![0; n_hosts],
        transfer_used: vec![0.0; n_hosts],
        woken: BTreeSet::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        host_totals,
        vm_totals,
        migrations: Vec::new(),
        started_this_step: 0,
    };

    let mut steps = Vec::with_capacity(horizon);
    for step in 0..horizon {
        steps.push(sim.step(step)?);
        sim.check_invariants();
    }

    Ok(RunReport {
        policy: policy.clone(),
        seed,
        steps,
        host_totals: sim.host_totals,
        vm_totals: sim.vm_totals,
        migrations: sim.migrations,
    })
}

fn build_candidates<'a>(
    hosts: &'a [HostState],
    vms: &[VmState],
    vm_index: &BTreeMap<VmId, usize>,
    incoming: &[Vec<usize>],
    transfer_used: &[f64],
) -> Vec<CandidateHost<'a>> {
    hosts
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let mut cpu_used = 0.0;
            let mut ram_used = 0.0;
            for vid in &h.resident_vms {
                let vm = &vms[vm_index[vid]];
                cpu_used += vm.cpu_demand;
                ram_used += vm.ram_used;
            }
            if let Some(inc) = incoming.get(i) {
                for &vi in inc {
                    cpu_used += vms[vi].cpu_demand;
                    ram_used += vms[vi].ram_used;
                }
            }
            let budget_left =
                STEP_TRANSFER_BUDGET_S - transfer_used.get(i).copied().unwrap_or(0.0);
            CandidateHost {
                id: h.spec.id,
                sleeping: !h.is_active(),
                cpu_capacity: h.spec.total_mips(),
                cpu_used,
                ram_capacity: h.spec.ram_capacity,
                ram_used,
                free_transfer_s: budget_left.max(0.0),
                curve: &h.spec.power_curve,
            }
        })
        .collect()
}

impl<'a> Sim<'a> {
    fn step(&mut self, step: usize) -> Result<StepRecord, SimError> {
        let now = step as f64 * STEP_SECONDS;
        self.woken.clear();
        self.started_this_step = 0;
        self.transfer_used.iter_mut().for_each(|t| *t = 0.0);

        // (1) demands from traces; per-host raw utilization and violation flag
        for (i, vm) in self.vms.iter_mut().enumerate() {
            let frac = self.traces[i].fraction_at(step);
            vm.cpu_demand = frac * vm.spec.mips;
            vm.ram_used = vm.spec.ram * (RAM_BASE_FRACTION + (1.0 - RAM_BASE_FRACTION) * frac);
            self.vm_totals[i].demand_mips_s += vm.cpu_demand * STEP_SECONDS;
        }
        let mut raw_util = vec![0.0; self.hosts.len()];
        let mut violation = vec![false; self.hosts.len()];
        for (h, host) in self.hosts.iter().enumerate() {
            let demand: f64 = host
                .resident_vms
                .iter()
                .map(|id| self.vms[self.vm_index[id]].cpu_demand)
                .sum();
            raw_util[h] = demand / host.spec.total_mips();
            violation[h] = sla_flags(host, demand);
        }

        // (2) utilization histories (clamped fractions)
        for (h, host) in self.hosts.iter_mut().enumerate() {
            if host.is_active() {
                host.push_history(raw_util[h].min(1.0));
            }
        }

        // (3) overload detection and relief
        let overloaded: BTreeSet<HostId> = self
            .hosts
            .iter()
            .enumerate()
            .filter(|(h, host)| {
                host.is_active() && !host.resident_vms.is_empty() && self.is_overloaded(*h, raw_util[*h])
            })
            .map(|(_, host)| host.spec.id)
            .collect();
        let overloaded_idx: Vec<usize> = overloaded.iter().map(|id| self.host_index[id]).collect();
        for &h in &overloaded_idx {
            self.relieve_overload(h, raw_util[h], &overloaded, now)?;
        }

        // (4) underload pass: evacuate the least-utilized idle-ish host
        self.evacuate_underloaded(&raw_util, &overloaded, now)?;

        // (5) advance in-flight migrations, accruing degradation; each
        // transfer keeps both endpoints busy, tallied for energy accounting
        let mut engagements = vec![0u32; self.hosts.len()];
        for f in &self.inflight {
            engagements[f.src] += 1;
            engagements[f.dst] += 1;
        }
        self.advance_migrations();

        // (6) empty active hosts go to sleep
        for (h, host) in self.hosts.iter_mut().enumerate() {
            if host.is_active()
                && host.resident_vms.is_empty()
                && self.incoming[h].is_empty()
                && self.inflight_count[h] == 0
                && !self.woken.contains(&h)
            {
                host.mode = HostMode::Sleeping;
            }
        }

        // (7) energy and SLA accounting
        let mut energy = 0.0;
        let mut active_hosts = 0;
        let mut violations = 0;
        for (h, host) in self.hosts.iter().enumerate() {
            if !host.is_active() {
                continue;
            }
            active_hosts += 1;
            let u = raw_util[h].min(1.0);
            let p = power::power_at(&host.spec.power_curve, u)?;
            // every migration doubles the step's energy cost on both of its
            // endpoints: the transfer keeps each host busy on top of its
            // regular load, once per transfer it is engaged in
            let scale = 1.0 + engagements[h] as f64;
            energy += scale * power::step_energy(p, STEP_SECONDS);
            self.host_totals[h].active_s += STEP_SECONDS;
            if violation[h] {
                violations += 1;
                self.host_totals[h].saturated_s += STEP_SECONDS;
            }
        }

        Ok(StepRecord {
            time: now,
            active_hosts,
            energy_kwh: energy,
            violations,
            overloaded_hosts: overloaded.len(),
            migrations_started: self.started_this_step,
        })
    }

    fn history_vec(&self, h: usize) -> Vec<f64> {
        self.hosts[h].utilization_history.iter().copied().collect()
    }

    fn is_overloaded(&self, h: usize, util: f64) -> bool {
        match self.trigger_for(h, util) {
            Trigger::Util { current, threshold } => current > threshold,
            Trigger::Pred { predicted, safety } => safety * predicted >= 1.0,
        }
    }

    fn trigger_for(&self, h: usize, util: f64) -> Trigger {
        let safety = self.policy.safety;
        let history = self.history_vec(h);
        let fallback = Trigger::Util {
            current: util,
            threshold: 1.0,
        };
        match self.policy.detection {
            Detection::Thr => Trigger::Util {
                current: util,
                threshold: safety,
            },
            Detection::Mad => match detection::mad_threshold(&history, safety) {
                Some(threshold) => Trigger::Util {
                    current: util,
                    threshold,
                },
                None => fallback,
            },
            Detection::Iqr => match detection::iqr_threshold(&history, safety) {
                Some(threshold) => Trigger::Util {
                    current: util,
                    threshold,
                },
                None => fallback,
            },
            Detection::Lr | Detection::Lrr => {
                let robust = self.policy.detection == Detection::Lrr;
                match detection::lr_predict(&history, robust) {
                    Some(predicted) => Trigger::Pred { predicted, safety },
                    None => fallback,
                }
            }
        }
    }

    fn relieve_overload(
        &mut self,
        h: usize,
        util: f64,
        overloaded: &BTreeSet<HostId>,
        now: f64,
    ) -> Result<(), SimError> {
        let capacity = self.hosts[h].spec.total_mips();
        let net = self.hosts[h].spec.net_bandwidth / 2.0;
        let mut trigger = self.trigger_for(h, util);

        while trigger.active() {
            let candidates: Vec<Candidate> = self.hosts[h]
                .resident_vms
                .iter()
                .map(|id| {
                    let vm = &self.vms[self.vm_index[id]];
                    Candidate {
                        vm: vm.spec.id,
                        ram_used: vm.ram_used,
                        cpu_demand: vm.cpu_demand,
                        in_migration: vm.in_migration,
                    }
                })
                .collect();
            let choice = match self.policy.selection {
                Selection::MxMt => selection::select_mxmt(&candidates, net),
                Selection::Mmt => selection::select_mmt(&candidates, net),
                Selection::Rc => selection::select_rc(&candidates, &mut self.rng),
            };
            let Some(vm_id) = choice else { break };
            let vmi = self.vm_index[&vm_id];

            let mut excluded = overloaded.clone();
            excluded.insert(self.hosts[h].spec.id);
            // Overload relief never wakes sleeping hosts: waking burns more
            // energy than a briefly elevated host costs. If the selected VM
            // fits on no active host, relief stalls until demand drifts down
            // or the fleet loosens up.
            let Some(dst) = self.find_destination(vmi, &excluded, true) else {
                break;
            };
            if !self.transfer_fits(vmi, h, dst)? {
                break; // bandwidth budget exhausted; defer to the next step
            }
            let share = self.vms[vmi].cpu_demand / capacity;
            self.start_migration(vmi, h, dst, now, true)?;
            trigger.remove_share(share);
        }
        Ok(())
    }

    fn evacuate_underloaded(
        &mut self,
        raw_util: &[f64],
        overloaded: &BTreeSet<HostId>,
        now: f64,
    ) -> Result<(), SimError> {
        let mut ineligible = overloaded.clone();
        for (h, host) in self.hosts.iter().enumerate() {
            if self.inflight_count[h] > 0 || self.woken.contains(&h) || !self.incoming[h].is_empty()
            {
                ineligible.insert(host.spec.id);
            }
        }
        let snapshots: Vec<HostSnapshot> = self
            .hosts
            .iter()
            .enumerate()
            .map(|(h, host)| HostSnapshot {
                id: host.spec.id,
                active: host.is_active(),
                empty: host.resident_vms.is_empty(),
                utilization: raw_util[h].min(1.0),
            })
            .collect();
        // candidates that cannot be fully evacuated are skipped in favor of
        // the next-least-utilized host; at most one host is evacuated per step
        loop {
            let Some(uid) = detection::find_underloaded(&snapshots, &ineligible) else {
                return Ok(());
            };
            let u = self.host_index[&uid];

            let requests: Vec<PlacementRequest> = self.hosts[u]
                .resident_vms
                .iter()
                .map(|id| {
                    let vm = &self.vms[self.vm_index[id]];
                    let net = self.hosts[u].spec.net_bandwidth / 2.0;
                    PlacementRequest {
                        vm: vm.spec.id,
                        cpu_demand: vm.cpu_demand,
                        ram: vm.ram_used,
                        transfer_s: selection::migration_time(vm.ram_used, net)
                            .unwrap_or(f64::INFINITY),
                    }
                })
                .collect();
            if requests.is_empty() {
                return Ok(());
            }

            // evacuation never wakes hosts: consider only active destinations
            let mut candidates = build_candidates(
                &self.hosts,
                &self.vms,
                &self.vm_index,
                &self.incoming,
                &self.transfer_used,
            );
            candidates.retain(|c| !c.sleeping);
            let mut excluded = overloaded.clone();
            excluded.insert(uid);
            let plan = placement::pabfd_place(&requests, &mut candidates, &excluded);
            if plan.len() != requests.len() {
                ineligible.insert(uid); // residents do not all fit; keep it up
                continue;
            }

            for (vm_id, dest_id) in plan {
                let dst = self.host_index[&dest_id];
                let vmi = self.vm_index[&vm_id];
                if self.vms[vmi].in_migration {
                    continue;
                }
                if !self.transfer_fits(vmi, u, dst)? {
                    break; // rest of the evacuation continues next step
                }
                self.start_migration(vmi, u, dst, now, false)?;
            }
            return Ok(());
        }
    }

    /// Single-VM destination search via the placement policy.
    fn find_destination(
        &self,
        vmi: usize,
        excluded: &BTreeSet<HostId>,
        active_only: bool,
    ) -> Option<usize> {
        let vm = &self.vms[vmi];
        let src = self.host_index[&vm.host.expect("resident VM")];
        let net = self.hosts[src].spec.net_bandwidth / 2.0;
        let request = PlacementRequest {
            vm: vm.spec.id,
            cpu_demand: vm.cpu_demand,
            ram: vm.ram_used,
            transfer_s: selection::migration_time(vm.ram_used, net).unwrap_or(f64::INFINITY),
        };
        let mut candidates = build_candidates(
            &self.hosts,
            &self.vms,
            &self.vm_index,
            &self.incoming,
            &self.transfer_used,
        );
        if active_only {
            candidates.retain(|c| !c.sleeping);
        }
        let map = placement::pabfd_place(&[request], &mut candidates, excluded);
        map.get(&vm.spec.id).map(|id| self.host_index[id])
    }

    /// Whether the transfer for `vmi` still fits in this step's per-host
    /// bandwidth budget on both endpoints. Within a step transfers run
    /// back-to-back on the two reserved channels, so the concurrency cap is
    /// a time budget rather than a start count.
    fn transfer_fits(&self, vmi: usize, src: usize, dst: usize) -> Result<bool, SimError> {
        let net = self.hosts[src].spec.net_bandwidth / 2.0;
        let d = selection::migration_time(self.vms[vmi].ram_used, net)?;
        Ok(self.transfer_used[src] + d <= STEP_TRANSFER_BUDGET_S
            && self.transfer_used[dst] + d <= STEP_TRANSFER_BUDGET_S)
    }

    fn start_migration(
        &mut self,
        vmi: usize,
        src: usize,
        dst: usize,
        now: f64,
        from_overload: bool,
    ) -> Result<(), SimError> {
        debug_assert_ne!(src, dst);
        let net = self.hosts[src].spec.net_bandwidth / 2.0;
        let mut duration = selection::migration_time(self.vms[vmi].ram_used, net)?;
        self.transfer_used[src] += duration;
        self.transfer_used[dst] += duration;
        if !self.hosts[dst].is_active() {
            self.hosts[dst].mode = HostMode::Active;
            self.woken.insert(dst);
            duration += WAKE_DELAY_S;
        }
        duration = duration.max(f64::MIN_POSITIVE);

        let vm = &mut self.vms[vmi];
        vm.in_migration = true;
        vm.migration_remaining = duration;
        self.incoming[dst].push(vmi);
        self.inflight.push(InFlight {
            vm: vmi,
            src,
            dst,
            remaining: duration,
        });
        self.inflight_count[src] += 1;
        self.inflight_count[dst] += 1;
        self.vm_totals[vmi].migrations += 1;
        self.migrations.push(Migration {
            vm: vm.spec.id,
            source: self.hosts[src].spec.id,
            dest: self.hosts[dst].spec.id,
            started_at: now,
            duration,
            from_overload,
        });
        self.started_this_step += 1;
        Ok(())
    }

    fn advance_migrations(&mut self) {
        let mut completed = Vec::new();
        for (k, m) in self.inflight.iter_mut().enumerate() {
            let overlap = m.remaining.min(STEP_SECONDS);
            self.vm_totals[m.vm].degraded_mips_s +=
                MIGRATION_DEGRADATION * self.vms[m.vm].cpu_demand * overlap;
            m.remaining -= STEP_SECONDS;
            self.vms[m.vm].migration_remaining = m.remaining.max(0.0);
            if m.remaining <= 0.0 {
                completed.push(k);
            }
        }
        for &k in completed.iter().rev() {
            let m = self.inflight.remove(k);
            let vm_id = self.vms[m.vm].spec.id;
            self.hosts[m.src].resident_vms.retain(|&id| id != vm_id);
            self.incoming[m.dst].retain(|&v| v != m.vm);
            self.hosts[m.dst].resident_vms.push(vm_id);
            let vm = &mut self.vms[m.vm];
            vm.host = Some(self.hosts[m.dst].spec.id);
            vm.in_migration = false;
            vm.migration_remaining = 0.0;
            self.inflight_count[m.src] -= 1;
            self.inflight_count[m.dst] -= 1;
        }
    }

    #[cfg(debug_assertions)]
    fn check_invariants(&self) {
        let mut seen: BTreeMap<VmId, usize> = BTreeMap::new();
        for host in &self.hosts {
            if !host.is_active() {
                assert!(
                    host.resident_vms.is_empty(),
                    "sleeping host {} has residents",
                    host.spec.id
                );
            }
            for &id in &host.resident_vms {
                *seen.entry(id).or_insert(0) += 1;
            }
        }
        for vm in &self.vms {
            assert_eq!(
                seen.get(&vm.spec.id).copied().unwrap_or(0),
                1,
                "VM {} not resident on exactly one host",
                vm.spec.id
            );
            let hid = vm.host.expect("placed VM");
            assert!(
                self.hosts[self.host_index[&hid]]
                    .resident_vms
                    .contains(&vm.spec.id),
                "VM {} host pointer out of sync",
                vm.spec.id
            );
            assert_eq!(vm.in_migration, vm.migration_remaining > 0.0);
        }
        for (h, count) in self.inflight_count.iter().enumerate() {
            let touching = self
                .inflight
                .iter()
                .filter(|m| m.src == h || m.dst == h)
                .count();
            assert_eq!(*count as usize, touching);
        }
    }

    #[cfg(not(debug_assertions))]
    fn check_invariants(&self) {}
}
