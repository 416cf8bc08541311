//! Acceptance suite: nine end-to-end checks of the simulator's contract.
//!
//! Each check prints a single `acceptance N (<name>): PASS` line (visible
//! with `cargo test -- --nocapture`) before asserting, so a failing run
//! shows exactly which criterion broke.

use std::collections::BTreeMap;
use std::process::Command;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use vmsim::engine::{self, RunReport};
use vmsim::metrics;
use vmsim::model::{make_default_datacenter, vm_fleet, CostParams, PolicyConfig, VmState};
use vmsim::power;
use vmsim::selection::{self, Candidate, MIB_IN_MEGABITS};
use vmsim::workload::{synth_traces, Trace, SAMPLES_PER_DAY};
use vmsim::VmId;

fn verdict(n: u32, name: &str, ok: bool) {
    println!("acceptance {n} ({name}): {}", if ok { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------- criterion 1

/// Published wattages for the two host models, 0% to 100% load in 10% steps,
/// restated here as an independent oracle.
const G4_TABLE: [f64; 11] = [
    86.0, 89.4, 92.6, 96.0, 99.5, 102.0, 106.0, 108.0, 112.0, 114.0, 117.0,
];
const G5_TABLE: [f64; 11] = [
    93.7, 97.0, 101.0, 105.0, 110.0, 116.0, 121.0, 125.0, 129.0, 133.0, 135.0,
];

#[test]
fn criterion_1_power_anchors_exact() {
    let hosts = make_default_datacenter(2, 0).unwrap();
    let g4 = &hosts[0].spec.power_curve;
    let g5 = &hosts[1].spec.power_curve;
    let mut ok = true;
    for i in 0..11 {
        let u = i as f64 / 10.0;
        ok &= power::power_at(g4, u).unwrap() == G4_TABLE[i];
        ok &= power::power_at(g5, u).unwrap() == G5_TABLE[i];
    }
    verdict(1, "power anchors", ok);
    assert!(ok, "a power anchor deviates from the published table");
}

// ---------------------------------------------------------------- criterion 2

/// Brute-force argmax/argmin of the migration-time ratio with the same
/// eligibility and tie rules the production selectors document.
fn oracle(cands: &[Candidate], net: f64, max: bool) -> Option<VmId> {
    let mut best: Option<(f64, VmId)> = None;
    for c in cands.iter().filter(|c| !c.in_migration) {
        let ratio = c.ram_used * MIB_IN_MEGABITS / net;
        let take = match best {
            None => true,
            Some((r, id)) => {
                (if max { ratio > r } else { ratio < r }) || (ratio == r && c.vm < id)
            }
        };
        if take {
            best = Some((ratio, c.vm));
        }
    }
    best.map(|(_, id)| id)
}

#[test]
fn criterion_2_selection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut agree = 0usize;
    let total = 1500usize;
    for _ in 0..total {
        let n = rng.gen_range(1..=10);
        let cands: Vec<Candidate> = (0..n)
            .map(|i| {
                // quantized sizes so exact ties occur regularly
                let ram = if rng.gen_bool(0.3) {
                    (rng.gen_range(1..=8) * 500) as f64
                } else {
                    rng.gen_range(10.0..4000.0)
                };
                Candidate {
                    vm: VmId(i),
                    ram_used: ram,
                    cpu_demand: rng.gen_range(0.0..2500.0),
                    in_migration: rng.gen_bool(0.15),
                }
            })
            .collect();
        let net = rng.gen_range(100.0..1000.0);
        let mx_ok = selection::select_mxmt(&cands, net) == oracle(&cands, net, true);
        let mm_ok = selection::select_mmt(&cands, net) == oracle(&cands, net, false);
        if mx_ok && mm_ok {
            agree += 1;
        }
    }
    let ok = agree == total;
    verdict(2, "selection oracle", ok);
    assert_eq!(agree, total, "selection disagrees with the brute-force oracle");
}

// ------------------------------------------------------- criteria 3 through 6

const SWEEP_HOSTS: usize = 100;
const SWEEP_VMS: usize = 150;
const SWEEP_SEEDS: std::ops::Range<u64> = 0..10;
const PAIRINGS: [&str; 6] = [
    "THR-%-0.8",
    "THR-%-1.0",
    "IQR-%-1.5",
    "MAD-%-2.5",
    "LRR-%-1.2",
    "LR-%-1.2",
];

/// Ten one-day runs per policy, seeds 0-9, shared by criteria 3-6.
fn sweep() -> &'static BTreeMap<String, Vec<RunReport>> {
    static SWEEP: OnceLock<BTreeMap<String, Vec<RunReport>>> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let jobs: Vec<(String, u64)> = PAIRINGS
            .iter()
            .flat_map(|pat| {
                ["MxMT", "MMT"].into_iter().flat_map(move |sel| {
                    SWEEP_SEEDS.map(move |seed| (pat.replace('%', sel), seed))
                })
            })
            .collect();
        let runs: Vec<(String, RunReport)> = jobs
            .par_iter()
            .map(|(name, seed)| {
                let policy: PolicyConfig = name.parse().unwrap();
                let hosts = make_default_datacenter(SWEEP_HOSTS, *seed).unwrap();
                let vms: Vec<VmState> =
                    vm_fleet(SWEEP_VMS).into_iter().map(VmState::new).collect();
                let traces = synth_traces(SWEEP_VMS, 12.31, 17.09, *seed).unwrap();
                let r =
                    engine::run(hosts, vms, &traces, &policy, SAMPLES_PER_DAY, *seed).unwrap();
                (name.clone(), r)
            })
            .collect();
        let mut map: BTreeMap<String, Vec<RunReport>> = BTreeMap::new();
        for (name, r) in runs {
            map.entry(name).or_default().push(r);
        }
        map
    })
}

fn mean<F: Fn(&RunReport) -> f64>(reports: &[RunReport], f: F) -> f64 {
    reports.iter().map(f).sum::<f64>() / reports.len() as f64
}

#[test]
fn criterion_3_energy_reduction_band() {
    let sweep = sweep();
    let mut ok = true;
    for pat in PAIRINGS {
        let mx = mean(&sweep[&pat.replace('%', "MxMT")], metrics::energy_total);
        let mm = mean(&sweep[&pat.replace('%', "MMT")], metrics::energy_total);
        let reduction = 100.0 * (mm - mx) / mm;
        let in_band = (5.0..=35.0).contains(&reduction);
        if !in_band {
            eprintln!("  {}: energy reduction {reduction:.2}% outside [5, 35]", pat);
        }
        ok &= in_band;
    }
    verdict(3, "energy reduction 5-35%", ok);
    assert!(ok, "an energy reduction fell outside the 5-35% band");
}

#[test]
fn criterion_4_migration_reduction() {
    let sweep = sweep();
    let mut ok = true;
    for pat in PAIRINGS {
        let mx = mean(&sweep[&pat.replace('%', "MxMT")], |r| {
            metrics::migration_count(r) as f64
        });
        let mm = mean(&sweep[&pat.replace('%', "MMT")], |r| {
            metrics::migration_count(r) as f64
        });
        let reduction = 100.0 * (mm - mx) / mm;
        if reduction < 60.0 {
            eprintln!("  {}: migration reduction {reduction:.2}% below 60%", pat);
        }
        ok &= reduction >= 60.0;
    }
    verdict(4, "migrations reduced >= 60%", ok);
    assert!(ok, "a migration reduction fell below 60%");
}

#[test]
fn criterion_5_slatah_direction() {
    let sweep = sweep();
    let mut ok = true;
    for pat in PAIRINGS {
        let mx = mean(&sweep[&pat.replace('%', "MxMT")], metrics::slatah);
        let mm = mean(&sweep[&pat.replace('%', "MMT")], metrics::slatah);
        if mx <= mm {
            eprintln!("  {}: SLATAH {mx:.6} not above baseline {mm:.6}", pat);
        }
        ok &= mx > mm;
    }
    verdict(5, "SLATAH direction", ok);
    assert!(ok, "SLATAH direction reversed on a pairing");
}

#[test]
fn criterion_6_metric_identities() {
    let mut ok = true;
    for reports in sweep().values() {
        for r in reports {
            let slatah = metrics::slatah(r);
            let pdm = metrics::pdm(r);
            ok &= metrics::slav(r) == slatah * pdm;
            ok &= metrics::esv(r) == metrics::energy_total(r) * (slatah * pdm);
            ok &= (0.0..=1.0).contains(&slatah);
            ok &= (0.0..=0.1).contains(&pdm);
        }
    }
    verdict(6, "metric identities", ok);
    assert!(ok, "a metric identity or bound failed");
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_cost_utilities() {
    let p = CostParams::new(1.0, 2.0, 10.0).unwrap();
    let mut ok = true;

    // all three branches, by construction
    let (c1, k1) = metrics::single_migration_cost(100.0, 80.0, &p).unwrap();
    ok &= k1 == 1 && c1 == 20.0;
    let (c2, k2) = metrics::single_migration_cost(50.0, 45.0, &p).unwrap();
    ok &= k2 == 2 && c2 == 5.0 + 2.0 * 5.0 + 5.0 * 2.0;
    let (c3, k3) = metrics::single_migration_cost(40.0, 55.0, &p).unwrap();
    ok &= k3 == 3 && c3 == 15.0 + 0.0 + 15.0 * 2.0;

    ok &= metrics::competitive_bound(1, 1.0) == 1.25;

    // strictly increasing over a 100-point grid in the VM count
    let mut prev = f64::NEG_INFINITY;
    for m in 1..=100u64 {
        let b = metrics::competitive_bound(m, 2.0);
        ok &= b > prev;
        prev = b;
    }

    verdict(7, "cost utilities", ok);
    assert!(ok, "a cost-utility value or monotonicity check failed");
}

// ---------------------------------------------------------------- criterion 8

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.conf");
    std::fs::write(
        &config,
        "hosts = 20\nvms = 30\nsteps = 60\ndays = 2\nseed = 7\n\
         policies = THR-MxMT-0.8, THR-MMT-0.8\n",
    )
    .unwrap();

    let run = |out: &str, parallel: &str| {
        let out_dir = dir.path().join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_vmsim"))
            .args(["run", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .args(["--parallel", parallel])
            .status()
            .unwrap();
        assert!(status.success(), "vmsim run exited nonzero");
        std::fs::read(out_dir.join("results.csv")).unwrap()
    };

    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "8");
    let ok = a == b && a == c;
    verdict(8, "determinism", ok);
    assert!(ok, "results.csv differs across executions or thread counts");
}

// ---------------------------------------------------------------- criterion 9

#[test]
fn criterion_9_conservation() {
    // Fuzzed half-week horizon; the engine's per-step invariant checks
    // (every VM resident on exactly one host, in-flight bookkeeping in sync)
    // are active in debug builds and run on every step of this simulation.
    let horizon = 1000usize;
    let n_hosts = 12usize;
    let n_vms = 18usize;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let traces: Vec<Trace> = (0..n_vms)
        .map(|i| {
            // bursty fuzz: jumps, idles, and saturation plateaus
            let mut level: i32 = rng.gen_range(0..=100);
            let samples: Vec<u8> = (0..horizon)
                .map(|_| {
                    if rng.gen_bool(0.1) {
                        level = rng.gen_range(0..=100);
                    } else {
                        level = (level + rng.gen_range(-15..=15)).clamp(0, 100);
                    }
                    level as u8
                })
                .collect();
            Trace::new(format!("fuzz{i}"), samples).unwrap()
        })
        .collect();

    let hosts = make_default_datacenter(n_hosts, 0).unwrap();
    let vms: Vec<VmState> = vm_fleet(n_vms).into_iter().map(VmState::new).collect();
    let policy: PolicyConfig = "MAD-MxMT-2.5".parse().unwrap();
    let report = engine::run(hosts, vms, &traces, &policy, horizon, 99).unwrap();

    let mut ok = report.steps.len() == horizon;
    let max_step_kwh = 135.0 * 300.0 / 3.6e6; // hottest host, full step
    for s in &report.steps {
        ok &= s.active_hosts <= n_hosts;
        ok &= s.violations <= s.active_hosts;
        // sleeping hosts contribute nothing: the step energy is bounded by
        // the active hosts plus the per-transfer engagement surcharge
        let engagements = 2 * s.migrations_started;
        ok &= s.energy_kwh >= 0.0;
        ok &= s.energy_kwh <= (s.active_hosts + engagements) as f64 * max_step_kwh + 1e-12;
        if s.active_hosts == 0 {
            ok &= s.energy_kwh == 0.0;
        }
    }
    for h in &report.host_totals {
        // clamped utilization never exceeds 1: saturation time is capped by
        // active time
        ok &= h.saturated_s <= h.active_s;
        ok &= h.active_s <= horizon as f64 * 300.0;
    }
    let migrations_by_vm: usize = report.vm_totals.iter().map(|v| v.migrations).sum();
    ok &= migrations_by_vm == report.migrations.len();
    for v in &report.vm_totals {
        ok &= v.degraded_mips_s <= 0.1 * v.demand_mips_s + 1e-9;
    }

    verdict(9, "conservation", ok);
    assert!(ok, "a conservation bound failed");
}
