//! Feeds the same utilization history to every overload-detection policy and
//! prints the threshold (or prediction) each one derives, for a calm host, a
//! noisy host, and a host trending toward saturation.
//!
//! Usage: detection_thresholds

use vmsim::detection::{
    iqr_threshold, lr_overloaded, lr_predict, mad_threshold, thr_overloaded, MIN_HISTORY,
};

fn show(name: &str, history: &[f64]) {
    let last = *history.last().unwrap();
    let shown: Vec<String> = history.iter().map(|u| format!("{u:.2}")).collect();
    println!("{name}: history [{}]", shown.join(", "));
    println!("  current utilization {last:.2}");
    println!(
        "  THR-0.8  overloaded: {}",
        thr_overloaded(last, 0.8)
    );
    match mad_threshold(history, 2.5) {
        Some(t) => println!("  MAD-2.5  threshold {t:.3}  overloaded: {}", last > t),
        None => println!("  MAD-2.5  < {MIN_HISTORY} samples, static fallback 1.0"),
    }
    match iqr_threshold(history, 1.5) {
        Some(t) => println!("  IQR-1.5  threshold {t:.3}  overloaded: {}", last > t),
        None => println!("  IQR-1.5  < {MIN_HISTORY} samples, static fallback 1.0"),
    }
    for (label, robust) in [("LR -1.2", false), ("LRR-1.2", true)] {
        match (lr_predict(history, robust), lr_overloaded(history, 1.2, robust)) {
            (Some(p), Some(o)) => println!("  {label}  predicted {p:.3}  overloaded: {o}"),
            _ => println!("  {label}  < {MIN_HISTORY} samples, static fallback 1.0"),
        }
    }
    println!();
}

fn main() {
    let calm: Vec<f64> = (0..12).map(|i| 0.42 + 0.01 * (i % 3) as f64).collect();
    show("calm host", &calm);

    let noisy: Vec<f64> = (0..12)
        .map(|i| 0.55 + if i % 2 == 0 { 0.25 } else { -0.25 })
        .collect();
    show("noisy host (adaptive policies lower their threshold)", &noisy);

    let mut trending: Vec<f64> = (0..12).map(|i| 0.40 + 0.045 * i as f64).collect();
    // one spurious dip that the robust regression discounts
    trending[8] = 0.30;
    show("host trending to saturation, with one outlier dip", &trending);

    let short = [0.95; 5];
    show("freshly woken host (too little history)", &short);
}
