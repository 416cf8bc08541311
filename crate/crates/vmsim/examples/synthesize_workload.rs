//! Synthesizes a fleet of one-day CPU traces, checks the pooled statistics
//! against the requested moments, and measures the temporal persistence that
//! distinguishes the generator from i.i.d. sampling. Optionally writes the
//! traces as one file per VM in the plain text format `stats` reads back.
//!
//! Usage: synthesize_workload [VMS] [MEAN] [STDEV] [SEED] [OUT_DIR]

use vmsim::workload::{synth_traces, trace_stats, write_trace_dir, TRACE_PERSISTENCE};

/// Pooled lag-1 autocorrelation over all traces.
fn lag1_autocorr(traces: &[vmsim::workload::Trace]) -> f64 {
    let all: Vec<f64> = traces
        .iter()
        .flat_map(|t| t.samples.iter().map(|&s| s as f64))
        .collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var: f64 = all.iter().map(|x| (x - mean).powi(2)).sum();
    let mut cov = 0.0;
    for t in traces {
        for w in t.samples.windows(2) {
            cov += (w[0] as f64 - mean) * (w[1] as f64 - mean);
        }
    }
    cov / var
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_vms: usize = args.get(1).map_or(150, |s| s.parse().expect("vms"));
    let mean: f64 = args.get(2).map_or(12.31, |s| s.parse().expect("mean"));
    let stdev: f64 = args.get(3).map_or(17.09, |s| s.parse().expect("stdev"));
    let seed: u64 = args.get(4).map_or(42, |s| s.parse().expect("seed"));

    let traces = synth_traces(n_vms, mean, stdev, seed).unwrap();
    let s = trace_stats(&traces).unwrap();

    println!("{} traces x {} samples, seed {seed}", traces.len(), traces[0].samples.len());
    println!("{:<12} {:>8} {:>8}", "", "target", "pooled");
    println!("{:<12} {:>8.2} {:>8.2}", "mean", mean, s.mean);
    println!("{:<12} {:>8.2} {:>8.2}", "stdev", stdev, s.stdev);
    println!("{:<12} {:>8} {:>8.2}", "quartile1", "", s.quartile1);
    println!("{:<12} {:>8} {:>8.2}", "median", "", s.median);
    println!("{:<12} {:>8} {:>8.2}", "quartile3", "", s.quartile3);
    println!();
    println!(
        "median {} mean: utilization is right-skewed (most VMs idle, a few busy)",
        if s.median < s.mean { "<" } else { ">=" }
    );
    println!(
        "lag-1 autocorrelation {:.3} (log-space target {TRACE_PERSISTENCE}): busy VMs stay busy",
        lag1_autocorr(&traces)
    );

    if let Some(dir) = args.get(5) {
        write_trace_dir(&traces, dir).unwrap();
        println!("wrote {} trace files to {dir}", traces.len());
    }
}
