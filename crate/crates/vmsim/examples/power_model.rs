//! Prints the host power curves, shows piecewise-linear interpolation between
//! the 10%-load anchors, and converts a constant-load day into energy.
//!
//! Usage: power_model

use vmsim::model::{HostId, HostSpec, STEP_SECONDS};
use vmsim::power::{power_at, step_energy};
use vmsim::workload::SAMPLES_PER_DAY;

fn main() {
    let g4 = HostSpec::g4(HostId(0));
    let g5 = HostSpec::g5(HostId(1));

    println!("power draw (W) by load");
    println!("{:>6} {:>8} {:>8}", "load%", "G4", "G5");
    for i in 0..=20 {
        let u = i as f64 / 20.0;
        println!(
            "{:>6.0} {:>8.2} {:>8.2}",
            u * 100.0,
            power_at(&g4.power_curve, u).unwrap(),
            power_at(&g5.power_curve, u).unwrap(),
        );
    }

    // The G5 is both faster and idles hotter: consolidation gains come from
    // the large idle draw relative to the full-load draw.
    let idle_frac_g4 = power_at(&g4.power_curve, 0.0).unwrap() / power_at(&g4.power_curve, 1.0).unwrap();
    let idle_frac_g5 = power_at(&g5.power_curve, 0.0).unwrap() / power_at(&g5.power_curve, 1.0).unwrap();
    println!();
    println!("idle draw as fraction of full-load draw: G4 {idle_frac_g4:.3}, G5 {idle_frac_g5:.3}");

    println!();
    println!("energy of one 24 h day at constant load (kWh)");
    println!("{:>6} {:>8} {:>8}", "load%", "G4", "G5");
    for load in [0.0, 0.3, 0.7, 1.0] {
        let day = |spec: &HostSpec| {
            let p = power_at(&spec.power_curve, load).unwrap();
            step_energy(p, STEP_SECONDS) * SAMPLES_PER_DAY as f64
        };
        println!("{:>6.0} {:>8.4} {:>8.4}", load * 100.0, day(&g4), day(&g5));
    }
}
