//! Prediction-driven route metrics and ranking: per-route mean throughput
//! and maximum outage duration derived from predicted per-station user
//! counts at each leg's arrival bin.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{Station, StationId};

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("invalid route {0}: {1}")]
    InvalidRoute(String, String),
    #[error("no prediction for station {station} at bin {bin}")]
    MissingPrediction { station: StationId, bin: i64 },
    #[error("no capacity for station {0}")]
    MissingCapacity(StationId),
}

/// One leg of an itinerary: the serving station and the dwell time under it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    pub station: StationId,
    pub dwell_s: i64,
}

/// A named itinerary as an ordered station sequence with dwell times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub name: String,
    pub legs: Vec<Leg>,
}

impl Route {
    pub fn total_duration_s(&self) -> i64 {
        self.legs.iter().map(|l| l.dwell_s).sum()
    }

    fn validate(&self) -> Result<(), RouteError> {
        if self.legs.is_empty() {
            return Err(RouteError::InvalidRoute(
                self.name.clone(),
                "route has no legs".into(),
            ));
        }
        if let Some(bad) = self.legs.iter().find(|l| l.dwell_s <= 0) {
            return Err(RouteError::InvalidRoute(
                self.name.clone(),
                format!("leg at station {} has non-positive dwell", bad.station),
            ));
        }
        Ok(())
    }
}

/// Source of predicted user counts per (station, bin).
pub trait UserCountPredictor {
    fn predict(&self, station: StationId, bin: i64) -> Option<f64>;
    fn bin_s(&self) -> i64;
}

/// Dense prediction lookup table. When several look-ahead values predict
/// the same (station, bin), the smallest look-ahead wins: it is the
/// shortest horizon that covers the arrival offset.
#[derive(Debug, Clone)]
pub struct PredictionTable {
    bin_s: i64,
    entries: HashMap<(u32, i64), (usize, f64)>,
}

impl PredictionTable {
    pub fn new(bin_s: i64) -> Self {
        PredictionTable {
            bin_s,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, station: StationId, bin: i64, lookahead: usize, value: f64) {
        self.entries
            .entry((station.0, bin))
            .and_modify(|slot| {
                if lookahead < slot.0 {
                    *slot = (lookahead, value);
                }
            })
            .or_insert((lookahead, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl UserCountPredictor for PredictionTable {
    fn predict(&self, station: StationId, bin: i64) -> Option<f64> {
        self.entries.get(&(station.0, bin)).map(|&(_, v)| v)
    }

    fn bin_s(&self) -> i64 {
        self.bin_s
    }
}

/// Maps a predicted user count to per-user throughput at a station.
pub trait ThroughputModel {
    fn leg_throughput_mbps(&self, station: StationId, n_users: f64) -> Result<f64, RouteError>;
}

/// Default model: the station capacity shared equally among the predicted
/// users (at least one).
#[derive(Debug, Clone)]
pub struct EqualShare {
    capacity_mbps: Vec<f64>,
}

impl EqualShare {
    pub fn new(stations: &[Station]) -> Self {
        EqualShare {
            capacity_mbps: stations.iter().map(|s| s.capacity_mbps).collect(),
        }
    }
}

impl ThroughputModel for EqualShare {
    fn leg_throughput_mbps(&self, station: StationId, n_users: f64) -> Result<f64, RouteError> {
        let capacity = *self
            .capacity_mbps
            .get(station.index())
            .ok_or(RouteError::MissingCapacity(station))?;
        Ok(capacity / n_users.max(1.0))
    }
}

/// Per-route summary: dwell-weighted mean throughput and the longest run of
/// consecutive outage dwell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteMetrics {
    pub s_hat_mbps: f64,
    pub d_o_max_s: i64,
}

/// Computes the metrics of one route for a departure time.
///
/// Leg `i` is entered at `departure + sum(dwell of previous legs)`; its
/// prediction bin is that arrival time floored to the predictor's bin. A
/// leg is in outage when its per-user throughput falls below `s_min_mbps`,
/// and the maximum outage duration is the longest run of consecutive
/// outage dwell.
pub fn route_metrics(
    route: &Route,
    departure_s: i64,
    predictor: &dyn UserCountPredictor,
    throughput: &dyn ThroughputModel,
    s_min_mbps: f64,
) -> Result<RouteMetrics, RouteError> {
    route.validate()?;
    let bin_s = predictor.bin_s();
    let mut arrival = departure_s;
    let mut weighted = 0.0;
    let mut total_dwell = 0i64;
    let mut outage_run = 0i64;
    let mut d_o_max = 0i64;
    for leg in &route.legs {
        let bin = arrival.div_euclid(bin_s);
        let n_users = predictor
            .predict(leg.station, bin)
            .ok_or(RouteError::MissingPrediction {
                station: leg.station,
                bin,
            })?;
        let s_leg = throughput.leg_throughput_mbps(leg.station, n_users)?;
        weighted += s_leg * leg.dwell_s as f64;
        total_dwell += leg.dwell_s;
        if s_leg < s_min_mbps {
            outage_run += leg.dwell_s;
            d_o_max = d_o_max.max(outage_run);
        } else {
            outage_run = 0;
        }
        arrival += leg.dwell_s;
    }
    Ok(RouteMetrics {
        s_hat_mbps: weighted / total_dwell as f64,
        d_o_max_s: d_o_max,
    })
}

/// Ranking criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMetric {
    /// Descending mean throughput.
    Throughput,
    /// Ascending maximum outage duration.
    Outage,
}

#[derive(Debug, Clone)]
pub struct RankedRoute {
    pub rank: usize,
    pub name: String,
    pub metrics: RouteMetrics,
    pub total_duration_s: i64,
}

/// Ranks routes for one departure time. Ties break toward the shorter
/// total duration, then the lexicographically smaller name, so the order
/// is total.
pub fn rank_routes(
    routes: &[Route],
    departure_s: i64,
    predictor: &dyn UserCountPredictor,
    throughput: &dyn ThroughputModel,
    s_min_mbps: f64,
    metric: RankMetric,
) -> Result<Vec<RankedRoute>, RouteError> {
    let mut scored: Vec<RankedRoute> = routes
        .iter()
        .map(|r| {
            route_metrics(r, departure_s, predictor, throughput, s_min_mbps).map(|m| RankedRoute {
                rank: 0,
                name: r.name.clone(),
                metrics: m,
                total_duration_s: r.total_duration_s(),
            })
        })
        .collect::<Result<_, _>>()?;
    scored.sort_by(|a, b| {
        let primary = match metric {
            RankMetric::Throughput => b.metrics.s_hat_mbps.total_cmp(&a.metrics.s_hat_mbps),
            RankMetric::Outage => a.metrics.d_o_max_s.cmp(&b.metrics.d_o_max_s),
        };
        primary
            .then(a.total_duration_s.cmp(&b.total_duration_s))
            .then(a.name.cmp(&b.name))
    });
    for (i, r) in scored.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stations(capacities: &[f64]) -> Vec<Station> {
        capacities
            .iter()
            .enumerate()
            .map(|(i, &c)| Station {
                id: StationId(i as u32),
                lat: 37.7,
                lon: -122.4 + 0.01 * i as f64,
                capacity_mbps: c,
            })
            .collect()
    }

    fn route(name: &str, legs: &[(u32, i64)]) -> Route {
        Route {
            name: name.to_string(),
            legs: legs
                .iter()
                .map(|&(s, d)| Leg {
                    station: StationId(s),
                    dwell_s: d,
                })
                .collect(),
        }
    }

    /// Predictor that ignores the bin: constant per station.
    struct FlatPredictor {
        per_station: Vec<f64>,
        bin_s: i64,
    }

    impl UserCountPredictor for FlatPredictor {
        fn predict(&self, station: StationId, _bin: i64) -> Option<f64> {
            self.per_station.get(station.index()).copied()
        }
        fn bin_s(&self) -> i64 {
            self.bin_s
        }
    }

    #[test]
    fn idle_network_gives_full_capacity_and_no_outage() {
        let st = stations(&[100.0, 50.0]);
        let model = EqualShare::new(&st);
        let pred = FlatPredictor {
            per_station: vec![0.0, 0.0],
            bin_s: 300,
        };
        let r = route("r", &[(0, 100), (1, 300)]);
        let m = route_metrics(&r, 0, &pred, &model, 1.0).unwrap();
        // Dwell-weighted mean of full capacities: (100*100 + 50*300) / 400.
        assert!((m.s_hat_mbps - 62.5).abs() < 1e-12);
        assert_eq!(m.d_o_max_s, 0);
    }

    #[test]
    fn single_leg_below_threshold_is_its_own_outage() {
        let st = stations(&[100.0]);
        let model = EqualShare::new(&st);
        let pred = FlatPredictor {
            per_station: vec![200.0],
            bin_s: 300,
        };
        let r = route("r", &[(0, 240)]);
        let m = route_metrics(&r, 0, &pred, &model, 1.0).unwrap();
        assert!((m.s_hat_mbps - 0.5).abs() < 1e-12);
        assert_eq!(m.d_o_max_s, 240);
    }

    #[test]
    fn three_leg_hand_computed_metrics() {
        // Capacities 120/90/60; predictions 30/90/10 users; s_min = 1.2.
        // Throughputs: 4.0, 1.0 (outage), 6.0. Dwells 60/120/180.
        // S_hat = (4*60 + 1*120 + 6*180) / 360 = 1440/360 = 4.0.
        // Outage run = 120 s.
        let st = stations(&[120.0, 90.0, 60.0]);
        let model = EqualShare::new(&st);
        let pred = FlatPredictor {
            per_station: vec![30.0, 90.0, 10.0],
            bin_s: 300,
        };
        let r = route("r", &[(0, 60), (1, 120), (2, 180)]);
        let m = route_metrics(&r, 0, &pred, &model, 1.2).unwrap();
        assert!((m.s_hat_mbps - 4.0).abs() < 1e-12);
        assert_eq!(m.d_o_max_s, 120);
    }

    #[test]
    fn consecutive_outage_legs_accumulate() {
        let st = stations(&[10.0, 10.0, 10.0, 10.0]);
        let model = EqualShare::new(&st);
        let pred = FlatPredictor {
            per_station: vec![100.0, 100.0, 1.0, 100.0],
            bin_s: 300,
        };
        let r = route("r", &[(0, 50), (1, 70), (2, 10), (3, 40)]);
        let m = route_metrics(&r, 0, &pred, &model, 1.0).unwrap();
        // Legs 0 and 1 are consecutive outages (0.1 < 1), leg 2 recovers,
        // leg 3 is an outage again but shorter.
        assert_eq!(m.d_o_max_s, 120);
    }

    #[test]
    fn splitting_a_leg_preserves_outage_duration() {
        let st = stations(&[10.0, 10.0]);
        let model = EqualShare::new(&st);
        let pred = FlatPredictor {
            per_station: vec![100.0, 2.0],
            bin_s: 300,
        };
        let whole = route("w", &[(0, 100), (1, 200)]);
        let split = route("s", &[(0, 100), (1, 80), (1, 120)]);
        let mw = route_metrics(&whole, 0, &pred, &model, 1.0).unwrap();
        let ms = route_metrics(&split, 0, &pred, &model, 1.0).unwrap();
        assert_eq!(mw.d_o_max_s, ms.d_o_max_s);
        assert!((mw.s_hat_mbps - ms.s_hat_mbps).abs() < 1e-12);
    }

    #[test]
    fn throughput_monotone_in_predicted_users() {
        let st = stations(&[80.0]);
        let model = EqualShare::new(&st);
        let r = route("r", &[(0, 100)]);
        let mut last = f64::INFINITY;
        for users in [0.0, 1.0, 5.0, 20.0, 400.0] {
            let pred = FlatPredictor {
                per_station: vec![users],
                bin_s: 300,
            };
            let m = route_metrics(&r, 0, &pred, &model, 1.0).unwrap();
            assert!(m.s_hat_mbps <= last);
            last = m.s_hat_mbps;
        }
    }

    #[test]
    fn ranking_orders_and_breaks_ties() {
        let st = stations(&[100.0, 100.0]);
        let model = EqualShare::new(&st);
        let pred = FlatPredictor {
            per_station: vec![10.0, 10.0],
            bin_s: 300,
        };
        // Identical metrics; the shorter route must rank first, names break
        // the final tie.
        let routes = vec![
            route("bravo", &[(0, 200)]),
            route("alpha", &[(0, 100), (1, 100)]),
            route("delta", &[(1, 100)]),
        ];
        let ranked = rank_routes(&routes, 0, &pred, &model, 1.0, RankMetric::Throughput).unwrap();
        assert_eq!(ranked[0].name, "delta"); // 100 s, same S_hat
        assert_eq!(ranked[1].name, "alpha"); // 200 s, ties with bravo on duration? no: alpha 200 vs bravo 200 -> name
        assert_eq!(ranked[2].name, "bravo");
        assert_eq!(
            ranked.iter().map(|r| r.rank).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn single_route_ranks_first() {
        let st = stations(&[100.0]);
        let model = EqualShare::new(&st);
        let pred = FlatPredictor {
            per_station: vec![5.0],
            bin_s: 300,
        };
        let routes = vec![route("only", &[(0, 60)])];
        let ranked = rank_routes(&routes, 0, &pred, &model, 1.0, RankMetric::Outage).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].rank, 1);
        assert_eq!(ranked[0].name, "only");
    }

    #[test]
    fn missing_prediction_is_an_error() {
        let st = stations(&[100.0]);
        let model = EqualShare::new(&st);
        let table = PredictionTable::new(300);
        let r = route("r", &[(0, 60)]);
        assert!(matches!(
            route_metrics(&r, 0, &table, &model, 1.0),
            Err(RouteError::MissingPrediction { .. })
        ));
    }

    #[test]
    fn prediction_table_prefers_smallest_lookahead() {
        let mut table = PredictionTable::new(300);
        table.insert(StationId(0), 10, 5, 50.0);
        table.insert(StationId(0), 10, 2, 20.0);
        table.insert(StationId(0), 10, 7, 70.0);
        assert_eq!(table.predict(StationId(0), 10), Some(20.0));
    }
}
