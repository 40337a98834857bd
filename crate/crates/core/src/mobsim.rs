//! Deterministic, seeded generator of synthetic event logs.
//!
//! The generator stands in for a proprietary carrier trace: background UEs
//! open sessions whose hourly intensity follows a daily profile with
//! weekday/weekend scaling and hand over to geographically nearby stations,
//! while corridor UEs walk fixed station paths and carry the spatially
//! correlated load that data-driven clustering and cluster-based
//! forecasting are meant to exploit.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::haversine_m;
use crate::stream_seed;
use crate::telemetry::{Calendar, Event, EventKind, EventLog, Station, StationId};

const STREAM_TOPOLOGY: u64 = 1;
const STREAM_SESSIONS: u64 = 2;
const STREAM_CORRIDORS: u64 = 3;
const STREAM_BACKGROUND: u64 = 4;
const STREAM_WEIGHTS: u64 = 5;

/// Station layout strategy for [`generate_topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    #[default]
    Grid,
    UniformRandom,
}

/// Geographic bounding box for station placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl Default for BoundingBox {
    fn default() -> Self {
        // Roughly the San Francisco peninsula tip.
        BoundingBox {
            lat_min: 37.70,
            lat_max: 37.81,
            lon_min: -122.52,
            lon_max: -122.38,
        }
    }
}

/// A mobility corridor: UEs enter at one end of `path`, hand over from
/// station to station, and leave at the other end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub path: Vec<StationId>,
    /// Entry rate at profile weight 1, in UEs per hour.
    pub flow_per_hour: f64,
    /// Fraction of entries walking the path forward; the rest walk it
    /// reversed.
    pub direction_bias: f64,
    /// When set, the corridor follows a Gaussian load bump centered at this
    /// hour (width 2 h) instead of the global daily profile, so different
    /// corridors can peak at different times of day.
    #[serde(default)]
    pub peak_hour: Option<u32>,
}

/// Full generator configuration. `seed` drives independent per-subsystem
/// RNG streams, so runs are reproducible event for event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_stations: usize,
    pub n_ues: usize,
    pub days: u32,
    pub seed: u64,
    pub layout: Layout,
    pub corridors: Vec<Corridor>,
    /// Hourly intensity multipliers, indexed by hour of day.
    pub daily_profile: [f64; 24],
    pub weekday_multiplier: f64,
    pub weekend_multiplier: f64,
    /// In-session handovers per UE per hour at profile weight 1.
    pub handover_rate_per_ue: f64,
    /// Session starts per background UE per hour at profile weight 1.
    pub session_rate_per_ue: f64,
    /// Mean session duration, seconds.
    pub session_mean_s: f64,
    /// Mean dwell per corridor station, seconds.
    pub corridor_dwell_s: f64,
    pub bbox: BoundingBox,
    /// Unix seconds of trace time 0.
    pub epoch_unix_s: i64,
    pub station_capacity_mbps: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_stations: 16,
            n_ues: 200,
            days: 3,
            seed: 7,
            layout: Layout::Grid,
            corridors: Vec::new(),
            daily_profile: DEFAULT_DAILY_PROFILE,
            weekday_multiplier: 1.0,
            weekend_multiplier: 0.7,
            handover_rate_per_ue: 1.0,
            session_rate_per_ue: 0.5,
            session_mean_s: 1200.0,
            corridor_dwell_s: 240.0,
            bbox: BoundingBox::default(),
            // 2017-01-31T00:00:00Z, a Tuesday.
            epoch_unix_s: 1_485_820_800,
            station_capacity_mbps: 300.0,
        }
    }
}

/// Commuter-shaped default profile: morning and evening peaks, quiet nights.
pub const DEFAULT_DAILY_PROFILE: [f64; 24] = [
    0.15, 0.10, 0.08, 0.08, 0.10, 0.20, 0.45, 0.80, 1.00, 0.90, 0.80, 0.85, 0.90, 0.85, 0.80,
    0.85, 0.95, 1.10, 1.20, 1.00, 0.75, 0.55, 0.35, 0.22,
];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |msg: String| Err(SimError::Config(msg));
        if self.n_stations < 2 {
            return err(format!("n_stations must be >= 2, got {}", self.n_stations));
        }
        if self.days < 1 {
            return err("days must be >= 1".into());
        }
        if self.daily_profile.iter().any(|&p| !(p >= 0.0)) {
            return err("daily_profile values must be non-negative".into());
        }
        if !(self.weekday_multiplier >= 0.0) || !(self.weekend_multiplier >= 0.0) {
            return err("weekday/weekend multipliers must be non-negative".into());
        }
        if !(self.handover_rate_per_ue >= 0.0) || !(self.session_rate_per_ue >= 0.0) {
            return err("rates must be non-negative".into());
        }
        if !(self.session_mean_s > 0.0) || !(self.corridor_dwell_s > 0.0) {
            return err("session and dwell means must be positive".into());
        }
        if !(self.station_capacity_mbps > 0.0) {
            return err("station capacity must be positive".into());
        }
        if self.bbox.lat_min >= self.bbox.lat_max || self.bbox.lon_min >= self.bbox.lon_max {
            return err("bounding box must be non-degenerate".into());
        }
        for (i, c) in self.corridors.iter().enumerate() {
            if c.path.len() < 2 {
                return err(format!("corridor {i}: path must have >= 2 stations"));
            }
            if c.path.windows(2).any(|w| w[0] == w[1]) {
                return err(format!("corridor {i}: adjacent path stations must differ"));
            }
            if c.path.iter().any(|s| s.index() >= self.n_stations) {
                return err(format!("corridor {i}: path references unknown station"));
            }
            if !(0.0..=1.0).contains(&c.direction_bias) {
                return err(format!("corridor {i}: direction_bias must be in [0, 1]"));
            }
            if !(c.flow_per_hour >= 0.0) {
                return err(format!("corridor {i}: flow_per_hour must be non-negative"));
            }
            if let Some(h) = c.peak_hour {
                if h >= 24 {
                    return err(format!("corridor {i}: peak_hour must be < 24"));
                }
            }
        }
        Ok(())
    }

    fn trace_len_s(&self) -> i64 {
        i64::from(self.days) * 86_400
    }
}

/// Generates the station layout; deterministic for a fixed seed.
pub fn generate_topology(cfg: &SimConfig) -> Result<Vec<Station>, SimError> {
    cfg.validate()?;
    let n = cfg.n_stations;
    let b = cfg.bbox;
    let coords: Vec<(f64, f64)> = match cfg.layout {
        Layout::Grid => {
            let cols = (n as f64).sqrt().ceil() as usize;
            let rows = n.div_ceil(cols);
            (0..n)
                .map(|i| {
                    let r = i / cols;
                    let c = i % cols;
                    let lat =
                        b.lat_min + (r as f64 + 0.5) / rows as f64 * (b.lat_max - b.lat_min);
                    let lon =
                        b.lon_min + (c as f64 + 0.5) / cols as f64 * (b.lon_max - b.lon_min);
                    (lat, lon)
                })
                .collect()
        }
        Layout::UniformRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_TOPOLOGY));
            (0..n)
                .map(|_| {
                    (
                        rng.gen_range(b.lat_min..b.lat_max),
                        rng.gen_range(b.lon_min..b.lon_max),
                    )
                })
                .collect()
        }
    };
    Ok(coords
        .into_iter()
        .enumerate()
        .map(|(i, (lat, lon))| Station {
            id: StationId(i as u32),
            lat,
            lon,
            capacity_mbps: cfg.station_capacity_mbps,
        })
        .collect())
}

/// Hourly intensity weight: daily profile times the weekday/weekend factor.
fn profile_weight(cfg: &SimConfig, cal: Calendar, hour_slot: i64) -> f64 {
    let t = hour_slot * 3600;
    let hour = cal.hour_of(t) as usize;
    let day_factor = if cal.is_weekday(t) {
        cfg.weekday_multiplier
    } else {
        cfg.weekend_multiplier
    };
    cfg.daily_profile[hour] * day_factor
}

/// Gaussian bump profile for corridors with an explicit peak hour, evaluated
/// on the circular 24 h clock.
fn corridor_weight(cfg: &SimConfig, cal: Calendar, hour_slot: i64, corridor: &Corridor) -> f64 {
    match corridor.peak_hour {
        None => profile_weight(cfg, cal, hour_slot),
        Some(peak) => {
            let t = hour_slot * 3600;
            let hour = cal.hour_of(t) as f64;
            let mut d = (hour - f64::from(peak)).abs();
            if d > 12.0 {
                d = 24.0 - d;
            }
            let day_factor = if cal.is_weekday(t) {
                cfg.weekday_multiplier
            } else {
                cfg.weekend_multiplier
            };
            (-0.5 * (d / 2.0).powi(2)).exp() * day_factor
        }
    }
}

fn sample_poisson(rng: &mut ChaCha8Rng, lambda: f64) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive lambda").sample(rng) as u64
}

fn sample_exp_s(rng: &mut ChaCha8Rng, mean_s: f64) -> i64 {
    let x = Exp::new(1.0 / mean_s).expect("positive mean").sample(rng);
    (x.floor() as i64).max(1)
}

/// 4-nearest-neighbor lists with inverse-distance weights, used for
/// background handovers.
fn neighbor_table(topo: &[Station]) -> Vec<Vec<(usize, f64)>> {
    let n = topo.len();
    let k = 4.min(n - 1);
    (0..n)
        .map(|i| {
            let mut dists: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    (
                        j,
                        haversine_m(topo[i].lat, topo[i].lon, topo[j].lat, topo[j].lon),
                    )
                })
                .collect();
            dists.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            dists
                .into_iter()
                .take(k)
                .map(|(j, d)| (j, 1.0 / d.max(1.0)))
                .collect()
        })
        .collect()
}

fn pick_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        x -= w;
        if x < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Simulates a full trace over the topology; deterministic for a fixed
/// config. Every attachment change emits a context release at the source
/// and a setup at the target alongside the handover event, so binned user
/// counts track where UEs actually are.
pub fn simulate(cfg: &SimConfig, topo: &[Station]) -> Result<EventLog, SimError> {
    cfg.validate()?;
    if topo.len() != cfg.n_stations {
        return Err(SimError::Config(format!(
            "topology has {} stations, config says {}",
            topo.len(),
            cfg.n_stations
        )));
    }
    let cal = Calendar {
        epoch_unix_s: cfg.epoch_unix_s,
    };
    let trace_end = cfg.trace_len_s();
    let neighbors = neighbor_table(topo);

    // Static per-station popularity for background session placement.
    let mut weight_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_WEIGHTS));
    let popularity: Vec<f64> = (0..cfg.n_stations)
        .map(|_| weight_rng.gen_range(0.5..1.5))
        .collect();

    let mut events: Vec<Event> = Vec::new();

    // Background sessions.
    let mut session_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_SESSIONS));
    let mut background_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_BACKGROUND));
    let mut session_counter = 0u64;
    for hour_slot in 0..i64::from(cfg.days) * 24 {
        let weight = profile_weight(cfg, cal, hour_slot);
        let lambda = cfg.n_ues as f64 * cfg.session_rate_per_ue * weight;
        let n_sessions = sample_poisson(&mut session_rng, lambda);
        for _ in 0..n_sessions {
            let ue = format!("u{}", session_counter % cfg.n_ues as u64);
            session_counter += 1;
            let start = hour_slot * 3600 + session_rng.gen_range(0..3600);
            let duration = sample_exp_s(&mut session_rng, cfg.session_mean_s);
            let end = (start + duration).min(trace_end);
            let mut at = pick_weighted(&mut session_rng, &popularity);
            events.push(Event {
                t: start,
                kind: EventKind::CtxSetup,
                src: StationId(at as u32),
                dst: None,
                ue: ue.clone(),
            });
            // In-session mobility at the profile-weighted handover rate.
            if cfg.handover_rate_per_ue > 0.0 && weight > 0.0 {
                let mean_gap = 3600.0 / (cfg.handover_rate_per_ue * weight);
                let mut t = start;
                loop {
                    t += sample_exp_s(&mut background_rng, mean_gap);
                    if t >= end {
                        break;
                    }
                    let nbrs = &neighbors[at];
                    let weights: Vec<f64> = nbrs.iter().map(|&(_, w)| w).collect();
                    let next = nbrs[pick_weighted(&mut background_rng, &weights)].0;
                    let kind = if background_rng.gen_bool(0.8) {
                        EventKind::HoX2
                    } else {
                        EventKind::HoS1
                    };
                    events.push(Event {
                        t,
                        kind,
                        src: StationId(at as u32),
                        dst: Some(StationId(next as u32)),
                        ue: ue.clone(),
                    });
                    events.push(Event {
                        t,
                        kind: EventKind::CtxRelease,
                        src: StationId(at as u32),
                        dst: None,
                        ue: ue.clone(),
                    });
                    events.push(Event {
                        t,
                        kind: EventKind::CtxSetup,
                        src: StationId(next as u32),
                        dst: None,
                        ue: ue.clone(),
                    });
                    at = next;
                }
            }
            events.push(Event {
                t: end,
                kind: EventKind::CtxRelease,
                src: StationId(at as u32),
                dst: None,
                ue: ue.clone(),
            });
        }
    }

    // Corridor walkers.
    let mut corridor_rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, STREAM_CORRIDORS));
    let mut walker_counter = 0u64;
    for (ci, corridor) in cfg.corridors.iter().enumerate() {
        for hour_slot in 0..i64::from(cfg.days) * 24 {
            let weight = corridor_weight(cfg, cal, hour_slot, corridor);
            let n_entries = sample_poisson(&mut corridor_rng, corridor.flow_per_hour * weight);
            for _ in 0..n_entries {
                let ue = format!("c{ci}_{walker_counter}");
                walker_counter += 1;
                let forward = corridor_rng.gen_bool(corridor.direction_bias.clamp(0.0, 1.0));
                let path: Vec<StationId> = if forward {
                    corridor.path.clone()
                } else {
                    corridor.path.iter().rev().copied().collect()
                };
                let mut t = hour_slot * 3600 + corridor_rng.gen_range(0..3600);
                events.push(Event {
                    t,
                    kind: EventKind::CtxSetup,
                    src: path[0],
                    dst: None,
                    ue: ue.clone(),
                });
                let mut at = path[0];
                let mut done = false;
                for &next in &path[1..] {
                    let dwell = sample_exp_s(&mut corridor_rng, cfg.corridor_dwell_s);
                    t += dwell;
                    if t >= trace_end {
                        events.push(Event {
                            t: trace_end,
                            kind: EventKind::CtxRelease,
                            src: at,
                            dst: None,
                            ue: ue.clone(),
                        });
                        done = true;
                        break;
                    }
                    events.push(Event {
                        t,
                        kind: EventKind::HoX2,
                        src: at,
                        dst: Some(next),
                        ue: ue.clone(),
                    });
                    events.push(Event {
                        t,
                        kind: EventKind::CtxRelease,
                        src: at,
                        dst: None,
                        ue: ue.clone(),
                    });
                    events.push(Event {
                        t,
                        kind: EventKind::CtxSetup,
                        src: next,
                        dst: None,
                        ue: ue.clone(),
                    });
                    at = next;
                }
                if !done {
                    let dwell = sample_exp_s(&mut corridor_rng, cfg.corridor_dwell_s);
                    events.push(Event {
                        t: (t + dwell).min(trace_end),
                        kind: EventKind::CtxRelease,
                        src: at,
                        dst: None,
                        ue: ue.clone(),
                    });
                }
            }
        }
    }

    EventLog::new(topo.to_vec(), events, cfg.epoch_unix_s)
        .map_err(|e| SimError::Config(format!("generated invalid log: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::bin_user_counts;

    fn base_cfg() -> SimConfig {
        SimConfig {
            n_stations: 9,
            n_ues: 50,
            days: 1,
            seed: 11,
            ..SimConfig::default()
        }
    }

    #[test]
    fn grid_layout_2x2() {
        let cfg = SimConfig {
            n_stations: 4,
            ..base_cfg()
        };
        let topo = generate_topology(&cfg).unwrap();
        let lats: Vec<f64> = topo.iter().map(|s| s.lat).collect();
        let lons: Vec<f64> = topo.iter().map(|s| s.lon).collect();
        // Two distinct latitudes and two distinct longitudes, 2x2.
        assert_eq!(lats[0], lats[1]);
        assert_eq!(lats[2], lats[3]);
        assert_ne!(lats[0], lats[2]);
        assert_eq!(lons[0], lons[2]);
        assert_eq!(lons[1], lons[3]);
        assert_ne!(lons[0], lons[1]);
    }

    #[test]
    fn topology_deterministic_and_seed_sensitive() {
        let cfg = SimConfig {
            layout: Layout::UniformRandom,
            ..base_cfg()
        };
        let a = generate_topology(&cfg).unwrap();
        let b = generate_topology(&cfg).unwrap();
        assert_eq!(a, b);
        let cfg_b = SimConfig { seed: 12, ..cfg };
        let c = generate_topology(&cfg_b).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn simulate_is_deterministic() {
        let cfg = SimConfig {
            corridors: vec![Corridor {
                path: vec![StationId(0), StationId(1), StationId(2)],
                flow_per_hour: 5.0,
                direction_bias: 0.5,
                peak_hour: None,
            }],
            ..base_cfg()
        };
        let topo = generate_topology(&cfg).unwrap();
        let a = simulate(&cfg, &topo).unwrap();
        let b = simulate(&cfg, &topo).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_handover_sources_means_context_only() {
        let cfg = SimConfig {
            handover_rate_per_ue: 0.0,
            corridors: vec![],
            ..base_cfg()
        };
        let topo = generate_topology(&cfg).unwrap();
        let log = simulate(&cfg, &topo).unwrap();
        assert!(!log.events().is_empty());
        assert!(log.events().iter().all(|e| !e.kind.is_handover()));
    }

    #[test]
    fn forced_corridor_direction_constrains_handovers() {
        let cfg = SimConfig {
            handover_rate_per_ue: 0.0,
            session_rate_per_ue: 0.0,
            corridors: vec![Corridor {
                path: vec![StationId(0), StationId(1), StationId(2)],
                flow_per_hour: 10.0,
                direction_bias: 1.0,
                peak_hour: None,
            }],
            ..base_cfg()
        };
        let topo = generate_topology(&cfg).unwrap();
        let log = simulate(&cfg, &topo).unwrap();
        let handovers: Vec<(u32, u32)> = log
            .events()
            .iter()
            .filter(|e| e.kind.is_handover())
            .map(|e| (e.src.0, e.dst.unwrap().0))
            .collect();
        assert!(!handovers.is_empty());
        assert!(handovers.iter().all(|&p| p == (0, 1) || p == (1, 2)));
    }

    #[test]
    fn peak_hour_shows_up_in_binned_counts() {
        let mut profile = [0.05; 24];
        profile[18] = 3.0;
        let cfg = SimConfig {
            days: 7,
            daily_profile: profile,
            weekend_multiplier: 1.0,
            session_mean_s: 600.0,
            handover_rate_per_ue: 0.0,
            n_ues: 100,
            ..base_cfg()
        };
        let topo = generate_topology(&cfg).unwrap();
        let log = simulate(&cfg, &topo).unwrap();
        let binned = bin_user_counts(&log, 3600);
        let cal = log.calendar();
        // Mean active count per hour of day, across stations and days.
        let mut sums = [0f64; 24];
        let mut counts = [0f64; 24];
        for series in &binned.series {
            for p in &series.values {
                let hour = cal.hour_of(p.bin * 3600) as usize;
                sums[hour] += f64::from(p.n_ue);
                counts[hour] += 1.0;
            }
        }
        let means: Vec<f64> = (0..24)
            .map(|h| if counts[h] > 0.0 { sums[h] / counts[h] } else { 0.0 })
            .collect();
        let argmax = means
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, 18);
    }

    #[test]
    fn config_validation_rejects_bad_corridor() {
        let cfg = SimConfig {
            corridors: vec![Corridor {
                path: vec![StationId(0)],
                flow_per_hour: 1.0,
                direction_bias: 0.5,
                peak_hour: None,
            }],
            ..base_cfg()
        };
        assert!(matches!(generate_topology(&cfg), Err(SimError::Config(_))));
    }
}
