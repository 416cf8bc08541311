//! Runs the six detection pairings with both MxMT and MMT selection over
//! several synthetic days and prints the head-to-head deltas.
//!
//! Usage: policy_sweep [DAYS] [HOSTS] [VMS] [BASE_SEED]

use rayon::prelude::*;

use vmsim::engine::{self, RunReport};
use vmsim::metrics;
use vmsim::model::{make_default_datacenter, vm_fleet, PolicyConfig, VmState};
use vmsim::workload::{synth_traces, SAMPLES_PER_DAY};

const PAIRINGS: [&str; 6] = [
    "THR-%-0.8",
    "THR-%-1.0",
    "IQR-%-1.5",
    "MAD-%-2.5",
    "LRR-%-1.2",
    "LR-%-1.2",
];

struct Tally {
    energy: f64,
    slatah: f64,
    migrations: usize,
    overload_migrations: usize,
    wakes: usize,
    active_host_steps: usize,
    engaged_host_steps: usize,
    overloaded_host_steps: usize,
}

fn tally(reports: &[RunReport]) -> Tally {
    let mut t = Tally {
        energy: 0.0,
        slatah: 0.0,
        migrations: 0,
        overload_migrations: 0,
        wakes: 0,
        active_host_steps: 0,
        engaged_host_steps: 0,
        overloaded_host_steps: 0,
    };
    for r in reports {
        t.energy += metrics::energy_total(r);
        t.slatah += metrics::slatah(r);
        t.migrations += metrics::migration_count(r);
        t.overload_migrations += r.migrations.iter().filter(|m| m.from_overload).count();
        // a wake shows up as the 300 s delay folded into the duration
        t.wakes += r.migrations.iter().filter(|m| m.duration >= 300.0).count();
        t.active_host_steps += r.steps.iter().map(|s| s.active_hosts).sum::<usize>();
        let engaged: std::collections::BTreeSet<(u64, u32)> = r
            .migrations
            .iter()
            .flat_map(|m| [(m.started_at as u64, m.source.0), (m.started_at as u64, m.dest.0)])
            .collect();
        t.engaged_host_steps += engaged.len();
        t.overloaded_host_steps += r.steps.iter().map(|s| s.overloaded_hosts).sum::<usize>();
    }
    t.slatah /= reports.len() as f64;
    t
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let days: usize = args.get(1).map_or(3, |s| s.parse().expect("days"));
    let n_hosts: usize = args.get(2).map_or(100, |s| s.parse().expect("hosts"));
    let n_vms: usize = args.get(3).map_or(150, |s| s.parse().expect("vms"));
    let base_seed: u64 = args.get(4).map_or(0, |s| s.parse().expect("seed"));

    let jobs: Vec<(String, u64)> = PAIRINGS
        .iter()
        .flat_map(|pat| {
            ["MxMT", "MMT"].into_iter().flat_map(move |sel| {
                (0..days).map(move |d| (pat.replace('%', sel), base_seed + d as u64))
            })
        })
        .collect();

    let reports: Vec<(String, RunReport)> = jobs
        .par_iter()
        .map(|(name, seed)| {
            let policy: PolicyConfig = name.parse().unwrap();
            let hosts = make_default_datacenter(n_hosts, *seed).unwrap();
            let vms: Vec<VmState> = vm_fleet(n_vms).into_iter().map(VmState::new).collect();
            let traces = synth_traces(n_vms, 12.31, 17.09, *seed).unwrap();
            let r = engine::run(hosts, vms, &traces, &policy, SAMPLES_PER_DAY, *seed).unwrap();
            (name.clone(), r)
        })
        .collect();

    println!(
        "{:<11} {:>9} {:>8} {:>7} {:>7} {:>6} {:>8}  ({} days, {} hosts, {} VMs)",
        "pairing", "E_red%", "mig_red%", "mig", "over", "wakes", "slatah", days, n_hosts, n_vms
    );
    for pat in PAIRINGS {
        let pick = |sel: &str| {
            let name = pat.replace('%', sel);
            let rs: Vec<RunReport> = reports
                .iter()
                .filter(|(n, _)| *n == name)
                .map(|(_, r)| r.clone())
                .collect();
            tally(&rs)
        };
        let mx = pick("MxMT");
        let mm = pick("MMT");
        let e_red = 100.0 * (mm.energy - mx.energy) / mm.energy;
        let m_red = 100.0 * (mm.migrations as f64 - mx.migrations as f64) / mm.migrations as f64;
        println!(
            "{:<11} {:>9.2} {:>8.2} {:>4}/{:<4} {:>3}/{:<3} {:>3}/{:<3} {:>.5}/{:<.5} ah {}/{} eng {}/{} ov {}/{}",
            pat.replace('%', "*"),
            e_red,
            m_red,
            mx.migrations,
            mm.migrations,
            mx.overload_migrations,
            mm.overload_migrations,
            mx.wakes,
            mm.wakes,
            mx.slatah,
            mm.slatah,
            mx.active_host_steps,
            mm.active_host_steps,
            mx.engaged_host_steps,
            mm.engaged_host_steps,
            mx.overloaded_host_steps,
            mm.overloaded_host_steps,
        );
    }
}
