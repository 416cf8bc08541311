//! Analytical cost utilities: the three-case single-migration cost as a
//! function of when the migration starts relative to the violation, the
//! step-series total cost of a finished run, and the competitive-ratio bound
//! of the online consolidation algorithm.
//!
//! Usage: migration_cost

use vmsim::engine;
use vmsim::metrics::{competitive_bound, single_migration_cost, total_cost};
use vmsim::model::{make_default_datacenter, vm_fleet, CostParams, VmState};
use vmsim::workload::synth_traces;

fn main() {
    // power cost 1 per host-step, violation cost 3, migration takes 10 steps
    let params = CostParams::new(1.0, 3.0, 10.0).unwrap();
    let v = 100.0; // violation starts at t = 100

    println!("single migration cost, violation at t = {v}, T = {}", params.t_mig);
    println!("{:>8} {:>6} {:>10}", "m_start", "case", "cost");
    for m in [70.0, 85.0, 92.0, 100.0, 108.0, 125.0] {
        let (cost, case) = single_migration_cost(v, m, &params).unwrap();
        println!("{m:>8} {case:>6} {cost:>10.1}");
    }
    println!("case 1: migrated early enough, pay only the head start");
    println!("case 2: migration overlaps the violation, pay the overlap twice over");
    println!("case 3: migrated late, the violation runs while the VM moves");

    // Total cost of an actual run: c_p per active host-step plus c_v per
    // violating host-step, so policies trade hosts against violations.
    let hosts = make_default_datacenter(20, 0).unwrap();
    let vms: Vec<VmState> = vm_fleet(30).into_iter().map(VmState::new).collect();
    let traces = synth_traces(30, 25.0, 20.0, 0).unwrap();
    println!();
    println!("total run cost at c_p = {}, c_v = {}", params.c_p, params.c_v);
    for name in ["THR-MxMT-0.8", "THR-MMT-0.8"] {
        let policy = name.parse().unwrap();
        let report =
            engine::run(hosts.clone(), vms.clone(), &traces, &policy, 288, 0).unwrap();
        println!("  {name:<14} {:>8.1}", total_cost(&report, &params));
    }

    println!();
    println!("competitive-ratio bound 1 + m s / (2 (m + 1)) at s = {}", params.s());
    println!("{:>12} {:>8}", "VMs/host m", "bound");
    for m in [1u64, 2, 4, 8, 16, 1000] {
        println!("{m:>12} {:>8.4}", competitive_bound(m, params.s()));
    }
    println!("{:>12} {:>8.4}  (limit 1 + s/2)", "inf", 1.0 + params.s() / 2.0);
}
