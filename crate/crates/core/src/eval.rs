//! Assignment quality evaluation: intra/inter-cluster handover splits, the
//! ratio `R`, periodic re-clustering experiments, and fiber propagation
//! delay reports.

use thiserror::Error;

use crate::cluster::{cluster_data_driven, cluster_geographic, ClusterAssignment, ClusterError, Strategy};
use crate::geo::haversine_m;
use crate::telemetry::{count_handovers, EventLog, HandoverCounts, Station};

/// Signal propagation speed in single-mode fiber (c / 1.468), m/s.
pub const FIBER_SPEED_M_PER_S: f64 = 2.04e8;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Intra/inter handover split for one scoring window. The ratio is missing
/// when there are no inter-cluster handovers (`R` would be infinite).
#[derive(Debug, Clone, PartialEq)]
pub struct RatioPoint {
    pub window_start: i64,
    pub intra: u64,
    pub inter: u64,
}

impl RatioPoint {
    pub fn ratio(&self) -> Option<f64> {
        (self.inter > 0).then(|| self.intra as f64 / self.inter as f64)
    }
}

/// Mean ratio with a 95% normal confidence interval over seeds.
#[derive(Debug, Clone)]
pub struct RatioSummary {
    pub n_clusters: usize,
    pub strategy: Strategy,
    pub mean_r: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub n_seeds: usize,
}

/// Per-station one-way fiber propagation delays to a datacenter.
#[derive(Debug, Clone)]
pub struct DelayReport {
    pub delays_us: Vec<f64>,
    pub mean_us: f64,
    pub max_us: f64,
}

/// Splits a window's handovers into (intra, inter) under an assignment.
pub fn split_handovers(
    counts: &HandoverCounts,
    assignment: &ClusterAssignment,
) -> Result<(u64, u64), EvalError> {
    let n = counts.n();
    if assignment.labels.len() != n {
        return Err(EvalError::Shape(format!(
            "assignment covers {} stations, counts have {}",
            assignment.labels.len(),
            n
        )));
    }
    let mut intra = 0u64;
    for i in 0..n {
        for j in 0..n {
            if assignment.labels[i] == assignment.labels[j] {
                intra += counts.get(i, j);
            }
        }
    }
    Ok((intra, counts.total() - intra))
}

/// Periodic re-clustering with decoupled scoring granularity.
///
/// Assignments update every `t_c_s`: the data-driven strategy re-clusters
/// from the previous update window, the geographic baseline computes one
/// static assignment. Ratios are reported every `score_bin_s` inside each
/// update window. The first update window is never scored (there is no
/// previous window to cluster from), for either strategy, so strategy
/// comparisons average over identical windows.
pub fn evaluate_periodic_binned(
    log: &EventLog,
    strategy: Strategy,
    n_clusters: usize,
    t_c_s: i64,
    score_bin_s: i64,
    seed: u64,
) -> Result<Vec<RatioPoint>, EvalError> {
    if t_c_s <= 0 || score_bin_s <= 0 {
        return Err(EvalError::Config("window lengths must be positive".into()));
    }
    let trace_end = log.trace_end_s();
    if trace_end + 1 < 2 * t_c_s {
        return Err(EvalError::Config(format!(
            "log spans {}s, need at least two update windows of {t_c_s}s",
            trace_end + 1
        )));
    }
    let n_windows = trace_end / t_c_s + 1;
    let static_assignment = match strategy {
        Strategy::Geographic => Some(cluster_geographic(log.stations(), n_clusters, seed)?),
        Strategy::DataDriven => None,
    };

    let mut points = Vec::new();
    for k in 1..n_windows {
        let window_start = k * t_c_s;
        let assignment = match &static_assignment {
            Some(a) => a.clone(),
            None => {
                let previous = count_handovers(log, window_start - t_c_s, t_c_s);
                cluster_data_driven(&previous, n_clusters, seed)?
            }
        };
        let mut score_start = window_start;
        while score_start < window_start + t_c_s && score_start <= trace_end {
            let len = score_bin_s.min(window_start + t_c_s - score_start);
            let counts = count_handovers(log, score_start, len);
            let (intra, inter) = split_handovers(&counts, &assignment)?;
            points.push(RatioPoint {
                window_start: score_start,
                intra,
                inter,
            });
            score_start += score_bin_s;
        }
    }
    Ok(points)
}

/// Periodic re-clustering scored at the update granularity
/// (`score_bin = t_c`).
pub fn evaluate_periodic(
    log: &EventLog,
    strategy: Strategy,
    n_clusters: usize,
    t_c_s: i64,
    seed: u64,
) -> Result<Vec<RatioPoint>, EvalError> {
    evaluate_periodic_binned(log, strategy, n_clusters, t_c_s, t_c_s, seed)
}

/// Mean ratio per cluster count, averaged over seeds, with a 95% normal CI.
/// Needs at least two seeds; seeds whose every window has inter = 0 are
/// excluded, and `mean_r` is missing when no seed produced a finite ratio.
pub fn ratio_vs_clusters(
    log: &EventLog,
    strategy: Strategy,
    n_clusters_list: &[usize],
    t_c_s: i64,
    seeds: &[u64],
) -> Result<Vec<RatioSummary>, EvalError> {
    if seeds.len() < 2 {
        return Err(EvalError::Config("need at least two seeds".into()));
    }
    let mut out = Vec::new();
    for &n_clusters in n_clusters_list {
        let mut per_seed = Vec::new();
        for &seed in seeds {
            let points = evaluate_periodic(log, strategy, n_clusters, t_c_s, seed)?;
            let ratios: Vec<f64> = points.iter().filter_map(RatioPoint::ratio).collect();
            if !ratios.is_empty() {
                per_seed.push(ratios.iter().sum::<f64>() / ratios.len() as f64);
            }
        }
        let summary = if per_seed.is_empty() {
            RatioSummary {
                n_clusters,
                strategy,
                mean_r: None,
                ci_lo: None,
                ci_hi: None,
                n_seeds: 0,
            }
        } else {
            let n = per_seed.len() as f64;
            let mean = per_seed.iter().sum::<f64>() / n;
            let half = if per_seed.len() > 1 {
                let var = per_seed.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
                1.96 * (var / n).sqrt()
            } else {
                0.0
            };
            RatioSummary {
                n_clusters,
                strategy,
                mean_r: Some(mean),
                ci_lo: Some(mean - half),
                ci_hi: Some(mean + half),
                n_seeds: per_seed.len(),
            }
        };
        out.push(summary);
    }
    Ok(out)
}

/// One-way fiber propagation delay from every station to a datacenter at
/// `(lat, lon)`, in microseconds.
pub fn propagation_delay(stations: &[Station], datacenter: (f64, f64)) -> DelayReport {
    let delays_us: Vec<f64> = stations
        .iter()
        .map(|s| haversine_m(s.lat, s.lon, datacenter.0, datacenter.1) / FIBER_SPEED_M_PER_S * 1e6)
        .collect();
    let mean_us = if delays_us.is_empty() {
        0.0
    } else {
        delays_us.iter().sum::<f64>() / delays_us.len() as f64
    };
    let max_us = delays_us.iter().copied().fold(0.0, f64::max);
    DelayReport {
        delays_us,
        mean_us,
        max_us,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::SourceWindow;
    use crate::telemetry::{Event, EventKind, StationId};

    fn assignment(labels: Vec<usize>, n_clusters: usize) -> ClusterAssignment {
        ClusterAssignment {
            strategy: Strategy::DataDriven,
            n_clusters,
            min_size: 0,
            max_size: labels.len(),
            labels,
            source_window: SourceWindow::Static,
        }
    }

    fn counts_from(n: usize, entries: &[(usize, usize, u64)]) -> HandoverCounts {
        let mut counts = HandoverCounts::zeros(n, 0, 3600);
        for &(i, j, c) in entries {
            counts.add(i, j, c);
        }
        counts
    }

    #[test]
    fn one_cluster_means_no_inter() {
        let counts = counts_from(3, &[(0, 1, 4), (2, 0, 2)]);
        let (intra, inter) = split_handovers(&counts, &assignment(vec![0, 0, 0], 1)).unwrap();
        assert_eq!((intra, inter), (6, 0));
        assert_eq!(
            RatioPoint {
                window_start: 0,
                intra,
                inter
            }
            .ratio(),
            None
        );
    }

    #[test]
    fn singletons_mean_no_intra() {
        let counts = counts_from(3, &[(0, 1, 4), (2, 0, 2)]);
        let (intra, inter) = split_handovers(&counts, &assignment(vec![0, 1, 2], 3)).unwrap();
        assert_eq!((intra, inter), (0, 6));
    }

    #[test]
    fn hand_enumerated_split() {
        // Labels [0, 0, 1, 1]; handovers only 0->1 and 2->3: all intra.
        let counts = counts_from(4, &[(0, 1, 7), (2, 3, 5)]);
        let (intra, inter) = split_handovers(&counts, &assignment(vec![0, 0, 1, 1], 2)).unwrap();
        assert_eq!((intra, inter), (12, 0));
        // Flip the pairing: all inter.
        let (intra, inter) = split_handovers(&counts, &assignment(vec![0, 1, 0, 1], 2)).unwrap();
        assert_eq!((intra, inter), (0, 12));
    }

    #[test]
    fn split_is_partition_and_relabel_invariant() {
        let counts = counts_from(4, &[(0, 1, 3), (1, 2, 2), (3, 0, 8), (2, 3, 1)]);
        let a = assignment(vec![0, 0, 1, 1], 2);
        let b = assignment(vec![1, 1, 0, 0], 2); // relabeled
        let (ia, ra) = split_handovers(&counts, &a).unwrap();
        let (ib, rb) = split_handovers(&counts, &b).unwrap();
        assert_eq!((ia, ra), (ib, rb));
        assert_eq!(ia + ra, counts.total());
    }

    /// Handovers only within {0,1} and within {2,3} during window 0, then
    /// only across those pairs during window 1.
    fn two_phase_log() -> EventLog {
        let stations: Vec<Station> = (0..4)
            .map(|i| Station {
                id: StationId(i),
                lat: 37.7 + 0.01 * f64::from(i),
                lon: -122.4,
                capacity_mbps: 100.0,
            })
            .collect();
        let mut events = Vec::new();
        let mut ho = |t: i64, src: u32, dst: u32, ue: String| {
            events.push(Event {
                t,
                kind: EventKind::HoX2,
                src: StationId(src),
                dst: Some(StationId(dst)),
                ue,
            });
        };
        // Window 0: [0, 100). Communities {0,1} and {2,3}.
        for k in 0..34 {
            ho(3 * k, 0, 1, format!("a{k}"));
            ho(3 * k, 1, 0, format!("b{k}"));
            ho(3 * k, 2, 3, format!("c{k}"));
            ho(3 * k, 3, 2, format!("d{k}"));
        }
        // Window 1: [100, 200). Marker handovers pair {0,2} and {1,3};
        // the last event lands at t = 199 so the log spans both windows.
        for k in 0..34 {
            ho(100 + 3 * k, 0, 2, format!("e{k}"));
            ho(100 + 3 * k, 2, 0, format!("f{k}"));
            ho(100 + 3 * k, 1, 3, format!("g{k}"));
            ho(100 + 3 * k, 3, 1, format!("h{k}"));
        }
        EventLog::new(stations, events, 0).unwrap()
    }

    #[test]
    fn periodic_scoring_is_strictly_causal() {
        let log = two_phase_log();
        let points = evaluate_periodic(&log, Strategy::DataDriven, 2, 100, 5).unwrap();
        assert_eq!(points.len(), 1);
        // Window 1 is scored with the assignment from window 0, which pairs
        // {0,1} and {2,3}; every window-1 handover crosses that partition.
        // An assignment leaked from window 1 itself would score intra = 120.
        assert_eq!(points[0].window_start, 100);
        assert_eq!(points[0].intra, 0);
        assert_eq!(points[0].inter, 136);
    }

    #[test]
    fn static_strategy_reuses_one_assignment() {
        let log = two_phase_log();
        let points = evaluate_periodic(&log, Strategy::Geographic, 2, 50, 5).unwrap();
        // Scored windows: [50,100), [100,150), [150,200). The last two carry
        // structurally identical marker traffic; with one static assignment
        // they must split identically.
        assert_eq!(points.len(), 3);
        assert_eq!(points[1].window_start, 100);
        assert_eq!(points[2].window_start, 150);
        assert_eq!(points[1].intra + points[1].inter, 68);
        assert_eq!(
            (points[1].intra, points[1].inter),
            (points[2].intra, points[2].inter)
        );
    }

    #[test]
    fn identical_windows_give_identical_ratio() {
        // Second day identical to first: daily re-clustering scores day 1
        // with day-0 data, which equals clustering-and-scoring day 1 itself.
        let stations: Vec<Station> = (0..4)
            .map(|i| Station {
                id: StationId(i),
                lat: 37.7,
                lon: -122.4 + 0.01 * f64::from(i),
                capacity_mbps: 100.0,
            })
            .collect();
        let mut events = Vec::new();
        for day in 0..2i64 {
            for k in 0..20 {
                // Spread over the window, ending at +99 so the log spans
                // both 100-second "days".
                let t = day * 100 + (99 * k / 19);
                events.push(Event {
                    t,
                    kind: EventKind::HoX2,
                    src: StationId(0),
                    dst: Some(StationId(1)),
                    ue: format!("u{day}_{k}"),
                });
                events.push(Event {
                    t,
                    kind: EventKind::HoX2,
                    src: StationId(2),
                    dst: Some(StationId(3)),
                    ue: format!("v{day}_{k}"),
                });
            }
        }
        let log = EventLog::new(stations, events, 0).unwrap();
        let points = evaluate_periodic(&log, Strategy::DataDriven, 2, 100, 9).unwrap();
        assert_eq!(points.len(), 1);
        // Clustering day 0 pairs {0,1} and {2,3}; scoring identical day 1
        // keeps every handover intra.
        assert_eq!(points[0].inter, 0);
        assert_eq!(points[0].intra, 40);
    }

    #[test]
    fn ratio_vs_clusters_reports_missing_for_single_cluster() {
        let log = two_phase_log();
        let table = ratio_vs_clusters(&log, Strategy::DataDriven, &[1, 2], 100, &[1, 2]).unwrap();
        assert_eq!(table[0].n_clusters, 1);
        assert!(table[0].mean_r.is_none());
        assert_eq!(table[1].n_clusters, 2);
        assert!(table[1].mean_r.is_some());
    }

    #[test]
    fn ratio_vs_clusters_is_deterministic() {
        let log = two_phase_log();
        let a = ratio_vs_clusters(&log, Strategy::Geographic, &[2], 100, &[3, 4]).unwrap();
        let b = ratio_vs_clusters(&log, Strategy::Geographic, &[2], 100, &[3, 4]).unwrap();
        assert_eq!(a[0].mean_r, b[0].mean_r);
        assert_eq!(a[0].ci_lo, b[0].ci_lo);
    }

    #[test]
    fn delay_zero_at_datacenter_and_25us_at_5100m() {
        // 5100 m north of the datacenter: 5100 / 2.04e8 s = 25.0 us.
        let meters_per_deg_lat = crate::geo::EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        let dc = (37.76, -122.45);
        let stations = vec![
            Station {
                id: StationId(0),
                lat: dc.0,
                lon: dc.1,
                capacity_mbps: 1.0,
            },
            Station {
                id: StationId(1),
                lat: dc.0 + 5100.0 / meters_per_deg_lat,
                lon: dc.1,
                capacity_mbps: 1.0,
            },
        ];
        let report = propagation_delay(&stations, dc);
        assert_eq!(report.delays_us[0], 0.0);
        assert!((report.delays_us[1] - 25.0).abs() < 0.1);
    }
}
