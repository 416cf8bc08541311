//! Shows how the three VM-selection policies treat the same overloaded host:
//! MxMT evicts the VM with the longest migration time, MMT the shortest, RC a
//! seeded random one, and the eviction orders they induce when the host needs
//! more than one migration.
//!
//! Usage: selection_policies [SEED]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vmsim::model::HOST_BANDWIDTH_MBPS;
use vmsim::selection::{migration_time, select_mmt, select_mxmt, select_rc, Candidate};

fn main() {
    let seed: u64 = std::env::args().nth(1).map_or(7, |s| s.parse().expect("seed"));

    // Half the NIC is reserved for normal traffic; migrations share the rest.
    let net = HOST_BANDWIDTH_MBPS / 2.0;

    // An overloaded host with one VM of each catalog size, RAM partly in use.
    let mut candidates = vec![
        cand(0, 710.0),  // large instance
        cand(1, 2950.0), // extra-large
        cand(2, 1320.0), // medium
        cand(3, 495.0),  // small
    ];
    candidates[1].in_migration = true; // already mid-flight, never selectable

    println!("candidates (migration channel {net} Mbit/s)");
    for c in &candidates {
        println!(
            "  {}  ram_used {:>6.0} MiB  migration_time {:>5.1} s{}",
            c.vm,
            c.ram_used,
            migration_time(c.ram_used, net).unwrap(),
            if c.in_migration { "  (in migration)" } else { "" }
        );
    }

    println!();
    println!("MxMT picks {:?}", select_mxmt(&candidates, net));
    println!("MMT  picks {:?}", select_mmt(&candidates, net));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    println!("RC   picks {:?} (seed {seed})", select_rc(&candidates, &mut rng));

    // Relief of a badly overloaded host evicts repeatedly; the two
    // deterministic policies walk the same set in opposite orders.
    type Picker = fn(&[Candidate], f64) -> Option<vmsim::model::VmId>;
    for (name, pick) in [("MxMT", select_mxmt as Picker), ("MMT", select_mmt as Picker)] {
        let mut pool = candidates.clone();
        let mut order = Vec::new();
        while let Some(id) = pick(&pool, net) {
            order.push(id.to_string());
            pool.retain(|c| c.vm != id);
        }
        println!("{name} eviction order: {}", order.join(" -> "));
    }
}

fn cand(id: u32, ram_used: f64) -> Candidate {
    Candidate {
        vm: vmsim::model::VmId(id),
        ram_used,
        cpu_demand: 0.0,
        in_migration: false,
    }
}
