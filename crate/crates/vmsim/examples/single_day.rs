//! Runs one simulated day for a single policy and prints the step-by-step
//! fleet state plus the final metrics.
//!
//! Usage: single_day [POLICY] [HOSTS] [VMS] [SEED]

use vmsim::engine;
use vmsim::metrics;
use vmsim::model::{make_default_datacenter, vm_fleet, PolicyConfig, VmState};
use vmsim::workload::{synth_traces, SAMPLES_PER_DAY};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let policy: PolicyConfig = args
        .get(1)
        .map(String::as_str)
        .unwrap_or("THR-MxMT-0.8")
        .parse()
        .expect("policy name");
    let n_hosts: usize = args.get(2).map_or(100, |s| s.parse().expect("hosts"));
    let n_vms: usize = args.get(3).map_or(150, |s| s.parse().expect("vms"));
    let seed: u64 = args.get(4).map_or(0, |s| s.parse().expect("seed"));

    let hosts = make_default_datacenter(n_hosts, seed).unwrap();
    let vms: Vec<VmState> = vm_fleet(n_vms).into_iter().map(VmState::new).collect();
    let traces = synth_traces(n_vms, 12.31, 17.09, seed).unwrap();

    let report = engine::run(hosts, vms, &traces, &policy, SAMPLES_PER_DAY, seed).unwrap();

    println!("step,active_hosts,energy_kwh,violations,migrations_started");
    for (i, s) in report.steps.iter().enumerate() {
        if i % 12 == 0 || s.migrations_started > 0 || s.violations > 0 {
            println!(
                "{i},{},{:.6},{},{}",
                s.active_hosts, s.energy_kwh, s.violations, s.migrations_started
            );
        }
    }

    println!();
    println!("policy      {policy}");
    println!("energy_kwh  {:.4}", metrics::energy_total(&report));
    println!("slatah      {:.6}", metrics::slatah(&report));
    println!("pdm         {:.6}", metrics::pdm(&report));
    println!("slav        {:.6e}", metrics::slav(&report));
    println!("esv         {:.6e}", metrics::esv(&report));
    println!("migrations  {}", metrics::migration_count(&report));
    let overload = report.migrations.iter().filter(|m| m.from_overload).count();
    println!("  overload    {overload}");
    println!("  evacuation  {}", report.migrations.len() - overload);
    let violations: usize = report.steps.iter().map(|s| s.violations).sum();
    println!("violation host-steps {violations}");
}
