//! Host overload- and underload-detection policies.
//!
//! THR compares current utilization against a static threshold. MAD and IQR
//! derive an adaptive threshold from the dispersion of recent utilization
//! history. LR fits a local regression over the last ten observations and
//! tests the predicted next-step utilization; LRR is the bisquare-reweighted
//! robust variant. Statistical policies need at least [`MIN_HISTORY`] points;
//! with less history callers fall back to a static threshold of 1.0.

use std::collections::BTreeSet;

use crate::model::HostId;
use crate::stats;

/// Minimum history length for the MAD/IQR/LR policies.
pub const MIN_HISTORY: usize = 10;

/// Window length for the local-regression fit.
pub const LR_WINDOW: usize = 10;

/// Static-threshold overload test. Boundary equality is not overload.
pub fn thr_overloaded(utilization: f64, threshold: f64) -> bool {
    utilization > threshold
}

/// Adaptive threshold 1 - safety * MAD(history), floored at 0.
///
/// Returns `None` when history is too short; the caller falls back to a
/// static threshold of 1.0.
pub fn mad_threshold(history: &[f64], safety: f64) -> Option<f64> {
    if history.len() < MIN_HISTORY {
        return None;
    }
    Some((1.0 - safety * stats::mad(history)).max(0.0))
}

/// Adaptive threshold 1 - safety * IQR(history), floored at 0.
pub fn iqr_threshold(history: &[f64], safety: f64) -> Option<f64> {
    if history.len() < MIN_HISTORY {
        return None;
    }
    Some((1.0 - safety * stats::iqr(history)).max(0.0))
}

/// Predicted next-step utilization from a tricube-weighted local regression
/// over the last [`LR_WINDOW`] observations. `robust` applies two rounds of
/// bisquare reweighting. `None` when history is too short; a degenerate fit
/// falls back to the last observed value.
pub fn lr_predict(history: &[f64], robust: bool) -> Option<f64> {
    if history.len() < MIN_HISTORY {
        return None;
    }
    let window = &history[history.len() - LR_WINDOW..];
    let n = window.len();
    let last = window[n - 1];

    // Tricube weights by distance from the latest observation.
    let span = (n - 1) as f64;
    let mut weights: Vec<f64> = (0..n)
        .map(|i| {
            let d = (n - 1 - i) as f64 / span;
            let t = 1.0 - d * d * d;
            t * t * t
        })
        .collect();

    let mut fit = wls_fit(window, &weights)?;
    if robust {
        for _ in 0..2 {
            let residuals: Vec<f64> = window
                .iter()
                .enumerate()
                .map(|(i, &y)| y - (fit.0 + fit.1 * i as f64))
                .collect();
            let abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
            let scale = 6.0 * stats::median(&abs);
            if scale < 1e-12 {
                break;
            }
            let reweighted: Vec<f64> = weights
                .iter()
                .zip(&residuals)
                .map(|(&w, &r)| {
                    let u = r / scale;
                    if u.abs() >= 1.0 {
                        0.0
                    } else {
                        let b = 1.0 - u * u;
                        w * b * b
                    }
                })
                .collect();
            match wls_fit(window, &reweighted) {
                Some(f) => {
                    weights = reweighted;
                    fit = f;
                }
                None => break,
            }
        }
    }

    let (a, b) = fit;
    let predicted = a + b * n as f64;
    if predicted.is_finite() {
        Some(predicted)
    } else {
        Some(last)
    }
}

// Weighted least squares of y over x = 0..n; None only when total weight
// vanishes, Some(last-value horizontal fit) on a singular design.
fn wls_fit(ys: &[f64], weights: &[f64]) -> Option<(f64, f64)> {
    let (mut sw, mut swx, mut swy, mut swxx, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, (&y, &w)) in ys.iter().zip(weights).enumerate() {
        let x = i as f64;
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
    }
    if sw <= 0.0 {
        return None;
    }
    let denom = sw * swxx - swx * swx;
    if denom.abs() < 1e-12 {
        // constant-x degenerate case: horizontal line through the last value
        return Some((ys[ys.len() - 1], 0.0));
    }
    let b = (sw * swxy - swx * swy) / denom;
    let a = (swy - b * swx) / sw;
    Some((a, b))
}

/// Local-regression overload test: overloaded iff safety * predicted >= 1.
pub fn lr_overloaded(history: &[f64], safety: f64, robust: bool) -> Option<bool> {
    lr_predict(history, robust).map(|p| safety * p >= 1.0)
}

/// Per-host snapshot used by the underload scan.
#[derive(Debug, Clone, Copy)]
pub struct HostSnapshot {
    pub id: HostId,
    pub active: bool,
    pub empty: bool,
    pub utilization: f64,
}

/// Hosts at or above this utilization are never evacuation candidates;
/// draining a moderately busy host churns migrations without freeing it.
pub const UNDERLOAD_CUTOFF: f64 = 0.5;

/// Among active, non-overloaded, non-empty hosts below [`UNDERLOAD_CUTOFF`],
/// the one with minimum CPU utilization; ties broken by smallest id.
pub fn find_underloaded(hosts: &[HostSnapshot], overloaded: &BTreeSet<HostId>) -> Option<HostId> {
    let mut best: Option<(f64, HostId)> = None;
    for h in hosts {
        if !h.active || h.empty || h.utilization >= UNDERLOAD_CUTOFF || overloaded.contains(&h.id) {
            continue;
        }
        let better = match best {
            None => true,
            Some((u, id)) => h.utilization < u || (h.utilization == u && h.id < id),
        };
        if better {
            best = Some((h.utilization, h.id));
        }
    }
    best.map(|(_, id)| id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(id: u32, active: bool, empty: bool, u: f64) -> HostSnapshot {
        HostSnapshot {
            id: HostId(id),
            active,
            empty,
            utilization: u,
        }
    }

    #[test]
    fn thr_basic() {
        assert!(thr_overloaded(0.95, 0.8));
        assert!(!thr_overloaded(0.8, 0.8)); // boundary, strict
        assert!(!thr_overloaded(1.0, 1.0));
    }

    #[test]
    fn mad_constant_history_gives_one() {
        let history = [0.3; 12];
        assert_eq!(mad_threshold(&history, 2.5), Some(1.0));
    }

    #[test]
    fn mad_matches_brute_force_oracle() {
        let history = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        // brute-force median of absolute deviations
        let m = {
            let mut s = history.to_vec();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (s[4] + s[5]) / 2.0
        };
        let mut devs: Vec<f64> = history.iter().map(|x: &f64| (x - m).abs()).collect();
        devs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mad = (devs[4] + devs[5]) / 2.0;
        let expect = 1.0 - 2.5 * mad;
        assert!((mad_threshold(&history, 2.5).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn zero_safety_disables_adaptive_threshold() {
        let history = [0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.4, 0.6, 0.5, 0.5];
        assert_eq!(mad_threshold(&history, 0.0), Some(1.0));
        assert_eq!(iqr_threshold(&history, 0.0), Some(1.0));
    }

    #[test]
    fn short_history_signals_fallback() {
        let history = [0.5; 9];
        assert_eq!(mad_threshold(&history, 2.5), None);
        assert_eq!(iqr_threshold(&history, 1.5), None);
        assert_eq!(lr_overloaded(&history, 1.2, false), None);
    }

    #[test]
    fn iqr_constant_history_gives_one() {
        assert_eq!(iqr_threshold(&[0.4; 12], 1.5), Some(1.0));
    }

    #[test]
    fn iqr_evenly_spaced_matches_quartile_oracle() {
        let history: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let q1 = stats::quantile(&history, 0.25);
        let q3 = stats::quantile(&history, 0.75);
        let expect = 1.0 - 1.5 * (q3 - q1);
        assert!((iqr_threshold(&history, 1.5).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn iqr_more_robust_to_outlier_than_stdev() {
        let clean: Vec<f64> = (0..12).map(|i| 0.3 + 0.01 * i as f64).collect();
        let mut spiked = clean.clone();
        spiked[11] = 1.0;
        let iqr_shift =
            (iqr_threshold(&spiked, 1.5).unwrap() - iqr_threshold(&clean, 1.5).unwrap()).abs();
        let stdev_shift =
            1.5 * (stats::sample_stdev(&spiked) - stats::sample_stdev(&clean)).abs();
        assert!(iqr_shift < stdev_shift);
    }

    #[test]
    fn thresholds_antitone_in_dispersion() {
        let narrow: Vec<f64> = (0..12).map(|i| 0.5 + 0.01 * i as f64).collect();
        let wide: Vec<f64> = (0..12).map(|i| 0.5 + 0.04 * i as f64).collect();
        assert!(mad_threshold(&wide, 2.5).unwrap() <= mad_threshold(&narrow, 2.5).unwrap());
        assert!(iqr_threshold(&wide, 1.5).unwrap() <= iqr_threshold(&narrow, 1.5).unwrap());
    }

    #[test]
    fn lr_rising_history_triggers() {
        // steadily rising 0.60 -> 0.93
        let history: Vec<f64> = (0..10).map(|i| 0.60 + 0.0367 * i as f64).collect();
        // independent plain least-squares oracle over the same window
        let n = 10.0;
        let sx: f64 = (0..10).map(|i| i as f64).sum();
        let sy: f64 = history.iter().sum();
        let sxx: f64 = (0..10).map(|i| (i * i) as f64).sum();
        let sxy: f64 = history.iter().enumerate().map(|(i, y)| i as f64 * y).sum();
        let b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let a = (sy - b * sx) / n;
        let ols_pred = a + b * 10.0;
        assert!(ols_pred >= 0.84);

        let pred = lr_predict(&history, false).unwrap();
        // exact linear data: weighting cannot change the fitted line
        assert!((pred - ols_pred).abs() < 1e-9);
        assert_eq!(lr_overloaded(&history, 1.2, false), Some(true));
    }

    #[test]
    fn lr_constant_history_stays_calm() {
        let history = [0.5; 10];
        let pred = lr_predict(&history, false).unwrap();
        assert!((pred - 0.5).abs() < 1e-9);
        assert_eq!(lr_overloaded(&history, 1.2, false), Some(false));
    }

    #[test]
    fn robust_matches_plain_without_outliers() {
        let history: Vec<f64> = (0..10).map(|i| 0.30 + 0.02 * i as f64).collect();
        let plain = lr_overloaded(&history, 1.2, false).unwrap();
        let robust = lr_overloaded(&history, 1.2, true).unwrap();
        assert_eq!(plain, robust);
    }

    #[test]
    fn lr_window_ignores_older_history() {
        let recent: Vec<f64> = (0..10).map(|i| 0.4 + 0.01 * i as f64).collect();
        let mut padded = vec![0.9, 0.95];
        padded.extend_from_slice(&recent);
        assert_eq!(
            lr_predict(&recent, false).unwrap(),
            lr_predict(&padded, false).unwrap()
        );
    }

    #[test]
    fn underloaded_picks_minimum_utilization() {
        let overloaded: BTreeSet<HostId> = [HostId(2)].into();
        let hosts = [
            snap(0, true, false, 0.2),
            snap(1, true, false, 0.5),
            snap(2, true, false, 0.9),
        ];
        assert_eq!(find_underloaded(&hosts, &overloaded), Some(HostId(0)));
    }

    #[test]
    fn underloaded_none_when_all_overloaded() {
        let overloaded: BTreeSet<HostId> = [HostId(0), HostId(1)].into();
        let hosts = [snap(0, true, false, 0.9), snap(1, true, false, 0.8)];
        assert_eq!(find_underloaded(&hosts, &overloaded), None);
    }

    #[test]
    fn underloaded_tie_breaks_by_id() {
        let hosts = [
            snap(3, true, false, 0.2),
            snap(1, true, false, 0.2),
            snap(2, false, false, 0.1),
            snap(4, true, true, 0.0),
        ];
        assert_eq!(find_underloaded(&hosts, &BTreeSet::new()), Some(HostId(1)));
    }

    #[test]
    fn underloaded_result_is_minimal() {
        let hosts: Vec<HostSnapshot> = (0..20)
            .map(|i| snap(i, i % 3 != 0, false, ((i * 7) % 13) as f64 / 13.0))
            .collect();
        if let Some(id) = find_underloaded(&hosts, &BTreeSet::new()) {
            let winner = hosts.iter().find(|h| h.id == id).unwrap();
            for h in &hosts {
                if h.active && !h.empty {
                    assert!(winner.utilization <= h.utilization);
                }
            }
        }
    }
}
