//! Canonical data model for network events and binned time series.
//!
//! The raw trace is a sequence of timestamped events ([`Event`]): X2/S1
//! handovers between stations, and per-UE context setup/release pairs from
//! which active-user counts are derived. [`bin_user_counts`] reduces context
//! intervals to per-station series of distinct-UE counts per bin, and
//! [`count_handovers`] aggregates handovers into an origin/destination
//! matrix over a time window.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nominal per-station UE capacity used to derive the utilization fraction
/// of a [`StationSeries`] bin. Utilization has no independent source in a
/// synthetic trace; it is a clamped occupancy proxy, kept for schema
/// completeness and excluded from the default forecasting features.
pub const NOMINAL_UE_CAPACITY: u32 = 100;

/// Index into the station set; ids are dense `0..n_stations`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct StationId(pub u32);

impl StationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A base station: position plus the nominal capacity used by route ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: StationId,
    pub lat: f64,
    pub lon: f64,
    pub capacity_mbps: f64,
}

/// Trace event kinds. X2 and S1 handovers are treated identically by all
/// counting operations; the distinction is kept for schema fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    HoX2,
    HoS1,
    CtxSetup,
    CtxRelease,
}

impl EventKind {
    pub fn is_handover(self) -> bool {
        matches!(self, EventKind::HoX2 | EventKind::HoS1)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::HoX2 => "HO_X2",
            EventKind::HoS1 => "HO_S1",
            EventKind::CtxSetup => "CTX_SETUP",
            EventKind::CtxRelease => "CTX_RELEASE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "HO_X2" => Some(EventKind::HoX2),
            "HO_S1" => Some(EventKind::HoS1),
            "CTX_SETUP" => Some(EventKind::CtxSetup),
            "CTX_RELEASE" => Some(EventKind::CtxRelease),
            _ => None,
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single trace event. `dst` is present iff the kind is a handover.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Seconds since the trace epoch.
    pub t: i64,
    pub kind: EventKind,
    pub src: StationId,
    pub dst: Option<StationId>,
    /// Opaque (pre-hashed) UE identifier.
    pub ue: String,
}

/// Errors from trace ingestion and data-model validation.
#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("schema error at line {line}: {msg}")]
    Schema { line: u64, msg: String },
    #[error("invalid data: {0}")]
    Invalid(String),
}

/// A full trace: stations, events sorted by time, and the calendar epoch of
/// `t = 0` as unix seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    stations: Vec<Station>,
    events: Vec<Event>,
    epoch_unix_s: i64,
}

impl EventLog {
    /// Validates stations and events, then stable-sorts events by time.
    /// Ties keep their input order, so construction is deterministic.
    pub fn new(
        stations: Vec<Station>,
        mut events: Vec<Event>,
        epoch_unix_s: i64,
    ) -> Result<Self, TelemetryError> {
        validate_stations(&stations)?;
        let n = stations.len() as u32;
        for ev in &events {
            validate_event(ev, n, 0)?;
        }
        events.sort_by_key(|e| e.t);
        Ok(EventLog {
            stations,
            events,
            epoch_unix_s,
        })
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn epoch_unix_s(&self) -> i64 {
        self.epoch_unix_s
    }

    pub fn calendar(&self) -> Calendar {
        Calendar {
            epoch_unix_s: self.epoch_unix_s,
        }
    }

    /// Timestamp of the last event, or 0 for an empty log.
    pub fn trace_end_s(&self) -> i64 {
        self.events.last().map_or(0, |e| e.t)
    }
}

fn validate_stations(stations: &[Station]) -> Result<(), TelemetryError> {
    for (i, s) in stations.iter().enumerate() {
        if s.id.index() != i {
            return Err(TelemetryError::Invalid(format!(
                "station ids must be dense 0..{}, found {} at position {}",
                stations.len(),
                s.id,
                i
            )));
        }
        if !(-90.0..=90.0).contains(&s.lat) || !(-180.0..=180.0).contains(&s.lon) {
            return Err(TelemetryError::Invalid(format!(
                "station {} has out-of-range coordinates ({}, {})",
                s.id, s.lat, s.lon
            )));
        }
        if !(s.capacity_mbps > 0.0) {
            return Err(TelemetryError::Invalid(format!(
                "station {} has non-positive capacity",
                s.id
            )));
        }
    }
    Ok(())
}

fn validate_event(ev: &Event, n_stations: u32, line: u64) -> Result<(), TelemetryError> {
    let schema = |msg: String| TelemetryError::Schema { line, msg };
    if ev.src.0 >= n_stations {
        return Err(schema(format!("unknown src station {}", ev.src)));
    }
    match (ev.kind.is_handover(), ev.dst) {
        (true, None) => return Err(schema(format!("{} event missing dst", ev.kind))),
        (true, Some(dst)) => {
            if dst.0 >= n_stations {
                return Err(schema(format!("unknown dst station {dst}")));
            }
            if dst == ev.src {
                return Err(schema(format!("self-handover at station {dst}")));
            }
        }
        (false, Some(_)) => {
            return Err(schema(format!("{} event must not carry dst", ev.kind)));
        }
        (false, None) => {}
    }
    Ok(())
}

/// Per-station binned time series of active-UE counts.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub station: StationId,
    /// Bin width in seconds.
    pub bin_s: i64,
    pub values: Vec<SeriesPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub bin: i64,
    pub n_ue: u32,
    pub utilization: f64,
}

impl StationSeries {
    /// Counts as a dense f64 vector, in bin order.
    pub fn counts(&self) -> Vec<f64> {
        self.values.iter().map(|p| f64::from(p.n_ue)).collect()
    }

    /// Trace-relative start time of the given bin.
    pub fn bin_start_s(&self, bin: i64) -> i64 {
        bin * self.bin_s
    }
}

/// Result of [`bin_user_counts`]: one series per station plus counters for
/// the pairing anomalies that were tolerated (lossy traces are expected).
#[derive(Debug, Clone)]
pub struct BinnedUsers {
    pub series: Vec<StationSeries>,
    /// CTX_RELEASE events without a matching open CTX_SETUP; dropped.
    pub unmatched_releases: u64,
    /// CTX_SETUP events still open at trace end; closed at the last event time.
    pub unclosed_setups: u64,
}

/// Origin/destination handover counts over `[window_start, window_start + window_len)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HandoverCounts {
    pub window_start: i64,
    pub window_len: i64,
    n: usize,
    counts: Vec<u64>,
}

impl HandoverCounts {
    pub fn zeros(n: usize, window_start: i64, window_len: i64) -> Self {
        HandoverCounts {
            window_start,
            window_len,
            n,
            counts: vec![0; n * n],
        }
    }

    /// Builds counts from an explicit row-major matrix; the diagonal must be
    /// zero (no self-handovers).
    pub fn from_matrix(
        n: usize,
        counts: Vec<u64>,
        window_start: i64,
        window_len: i64,
    ) -> Result<Self, TelemetryError> {
        if counts.len() != n * n {
            return Err(TelemetryError::Invalid(format!(
                "expected {}x{} counts, got {} entries",
                n,
                n,
                counts.len()
            )));
        }
        for i in 0..n {
            if counts[i * n + i] != 0 {
                return Err(TelemetryError::Invalid(format!(
                    "nonzero diagonal at station {i}"
                )));
            }
        }
        Ok(HandoverCounts {
            window_start,
            window_len,
            n,
            counts,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n + j]
    }

    pub fn add(&mut self, i: usize, j: usize, delta: u64) {
        debug_assert_ne!(i, j, "self-handover");
        self.counts[i * self.n + j] += delta;
    }

    /// Total handovers in the window.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Row sum for station `i`.
    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i * self.n..(i + 1) * self.n].iter().sum()
    }
}

/// Calendar arithmetic over a trace epoch, without a timezone model: the
/// epoch is interpreted as UTC and all traces are treated as UTC-local.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Calendar {
    pub epoch_unix_s: i64,
}

impl Calendar {
    /// Hour of day (0..24) at trace-relative time `t_s`.
    pub fn hour_of(&self, t_s: i64) -> u32 {
        let unix = self.epoch_unix_s + t_s;
        unix.div_euclid(3600).rem_euclid(24) as u32
    }

    /// Absolute day number (days since the unix epoch) at `t_s`.
    pub fn day_index(&self, t_s: i64) -> i64 {
        (self.epoch_unix_s + t_s).div_euclid(86_400)
    }

    /// Day of week at `t_s`; 0 = Sunday .. 6 = Saturday.
    pub fn weekday(&self, t_s: i64) -> u32 {
        (self.day_index(t_s) + 4).rem_euclid(7) as u32
    }

    /// Monday..Friday.
    pub fn is_weekday(&self, t_s: i64) -> bool {
        (1..=5).contains(&self.weekday(t_s))
    }
}

/// Reads a station CSV (`id,lat,lon,capacity_mbps`).
pub fn read_stations(path: &Path) -> Result<Vec<Station>, TelemetryError> {
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut stations = Vec::new();
    for result in reader.records() {
        let record = result.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |idx: usize, name: &str| -> Result<&str, TelemetryError> {
            record.get(idx).ok_or_else(|| TelemetryError::Parse {
                line,
                msg: format!("missing column {name}"),
            })
        };
        let id: u32 = parse_field(parse(0, "id")?, line, "id")?;
        let lat: f64 = parse_field(parse(1, "lat")?, line, "lat")?;
        let lon: f64 = parse_field(parse(2, "lon")?, line, "lon")?;
        let capacity_mbps: f64 = parse_field(parse(3, "capacity_mbps")?, line, "capacity_mbps")?;
        stations.push(Station {
            id: StationId(id),
            lat,
            lon,
            capacity_mbps,
        });
    }
    validate_stations(&stations)?;
    Ok(stations)
}

/// Ingests an event CSV (`t_s,kind,src,dst,ue`; `dst` empty for context
/// events) against a known station set. Events are returned sorted by time;
/// rows referencing unknown stations are rejected.
pub fn ingest_events(
    path: &Path,
    stations: Vec<Station>,
    epoch_unix_s: i64,
) -> Result<EventLog, TelemetryError> {
    validate_stations(&stations)?;
    let n = stations.len() as u32;
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut events = Vec::new();
    for result in reader.records() {
        let record = result.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 5 {
            return Err(TelemetryError::Parse {
                line,
                msg: format!("expected 5 columns, got {}", record.len()),
            });
        }
        let t: i64 = parse_field(&record[0], line, "t_s")?;
        let kind = EventKind::parse(&record[1]).ok_or_else(|| TelemetryError::Schema {
            line,
            msg: format!("unknown kind {:?}", &record[1]),
        })?;
        let src = StationId(parse_field(&record[2], line, "src")?);
        let dst = if record[3].is_empty() {
            None
        } else {
            Some(StationId(parse_field(&record[3], line, "dst")?))
        };
        let ue = record[4].to_string();
        let ev = Event {
            t,
            kind,
            src,
            dst,
            ue,
        };
        validate_event(&ev, n, line)?;
        events.push(ev);
    }
    events.sort_by_key(|e| e.t);
    Ok(EventLog {
        stations,
        events,
        epoch_unix_s,
    })
}

fn csv_error(err: csv::Error) -> TelemetryError {
    let line = err.position().map_or(0, |p| p.line());
    TelemetryError::Parse {
        line,
        msg: err.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: u64, name: &str) -> Result<T, TelemetryError>
where
    T::Err: fmt::Display,
{
    s.trim().parse().map_err(|e| TelemetryError::Parse {
        line,
        msg: format!("bad {name} value {s:?}: {e}"),
    })
}

/// Writes the event CSV for a log (inverse of [`ingest_events`]).
pub fn write_events_csv(log: &EventLog, path: &Path) -> Result<(), TelemetryError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "t_s,kind,src,dst,ue")?;
    for ev in &log.events {
        let dst = ev.dst.map_or(String::new(), |d| d.to_string());
        writeln!(out, "{},{},{},{},{}", ev.t, ev.kind, ev.src, dst, ev.ue)?;
    }
    Ok(())
}

/// Writes the station CSV (inverse of [`read_stations`]).
pub fn write_stations_csv(stations: &[Station], path: &Path) -> Result<(), TelemetryError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "id,lat,lon,capacity_mbps")?;
    for s in stations {
        writeln!(out, "{},{},{},{}", s.id, s.lat, s.lon, s.capacity_mbps)?;
    }
    Ok(())
}

/// Writes series CSV rows (`station,bin,n_ue,utilization`).
pub fn write_series_csv(series: &[StationSeries], path: &Path) -> Result<(), TelemetryError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "station,bin,n_ue,utilization")?;
    for s in series {
        for p in &s.values {
            writeln!(out, "{},{},{},{}", s.station, p.bin, p.n_ue, p.utilization)?;
        }
    }
    Ok(())
}

/// Reads series CSV rows back into per-station series (bins sorted).
pub fn read_series_csv(path: &Path, bin_s: i64) -> Result<Vec<StationSeries>, TelemetryError> {
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut per_station: HashMap<u32, Vec<SeriesPoint>> = HashMap::new();
    for result in reader.records() {
        let record = result.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let station: u32 = parse_field(&record[0], line, "station")?;
        let bin: i64 = parse_field(&record[1], line, "bin")?;
        let n_ue: u32 = parse_field(&record[2], line, "n_ue")?;
        let utilization: f64 = parse_field(&record[3], line, "utilization")?;
        per_station.entry(station).or_default().push(SeriesPoint {
            bin,
            n_ue,
            utilization,
        });
    }
    let mut out: Vec<StationSeries> = per_station
        .into_iter()
        .map(|(station, mut values)| {
            values.sort_by_key(|p| p.bin);
            StationSeries {
                station: StationId(station),
                bin_s,
                values,
            }
        })
        .collect();
    out.sort_by_key(|s| s.station);
    Ok(out)
}

/// Bins active-UE counts: for every station and bin, the number of distinct
/// UEs whose context interval at that station intersects the bin (intervals
/// are inclusive of the release second).
///
/// Pairing is an occupancy counter per (UE, station): setups increment,
/// releases decrement, and the UE is active while the counter is positive.
/// Within one timestamp setups are applied before releases, which makes the
/// result invariant to reordering of equal-time events. A release at counter
/// zero is dropped (counted); a counter still positive at trace end closes
/// at the last event timestamp (counted). Every station receives the same
/// dense bin range `0..=last_event_bin`; an empty log yields empty series.
pub fn bin_user_counts(log: &EventLog, bin_s: i64) -> BinnedUsers {
    assert!(bin_s > 0, "bin width must be positive");
    let n = log.n_stations();
    if log.events.is_empty() {
        return BinnedUsers {
            series: (0..n)
                .map(|i| StationSeries {
                    station: StationId(i as u32),
                    bin_s,
                    values: Vec::new(),
                })
                .collect(),
            unmatched_releases: 0,
            unclosed_setups: 0,
        };
    }

    let trace_end = log.trace_end_s();
    let last_bin = trace_end.div_euclid(bin_s);
    let mut unmatched_releases = 0u64;
    let mut unclosed_setups = 0u64;

    // Timestamped +1/-1 deltas per (station, ue).
    let mut deltas: HashMap<(u32, &str), Vec<(i64, i8)>> = HashMap::new();
    for ev in &log.events {
        let delta = match ev.kind {
            EventKind::CtxSetup => 1,
            EventKind::CtxRelease => -1,
            _ => continue,
        };
        deltas
            .entry((ev.src.0, ev.ue.as_str()))
            .or_default()
            .push((ev.t, delta));
    }

    // Per station: +1/-1 bin diff array over the UE's active spans, with
    // bin ranges merged so a UE reconnecting within one bin counts once.
    let n_bins = (last_bin + 1) as usize;
    let mut diffs: Vec<Vec<i64>> = vec![vec![0; n_bins + 1]; n];
    for ((station, _ue), mut events) in deltas {
        // Events arrive time-sorted; canonicalize ties to setup-first.
        events.sort_by_key(|&(t, d)| (t, d < 0));
        let mut counter = 0i64;
        let mut span_start = 0i64;
        let mut ranges: Vec<(i64, i64)> = Vec::new();
        for (t, d) in events {
            if d > 0 {
                if counter == 0 {
                    span_start = t;
                }
                counter += 1;
            } else if counter > 0 {
                counter -= 1;
                if counter == 0 {
                    ranges.push((span_start.div_euclid(bin_s), t.div_euclid(bin_s)));
                }
            } else {
                unmatched_releases += 1;
            }
        }
        if counter > 0 {
            unclosed_setups += counter as u64;
            ranges.push((span_start.div_euclid(bin_s), last_bin));
        }

        let diff = &mut diffs[station as usize];
        let mut current: Option<(i64, i64)> = None;
        for (b0, b1) in ranges {
            match current {
                Some((c0, c1)) if b0 <= c1 => current = Some((c0, c1.max(b1))),
                Some((c0, c1)) => {
                    diff[c0 as usize] += 1;
                    diff[c1 as usize + 1] -= 1;
                    current = Some((b0, b1));
                }
                None => current = Some((b0, b1)),
            }
        }
        if let Some((c0, c1)) = current {
            diff[c0 as usize] += 1;
            diff[c1 as usize + 1] -= 1;
        }
    }

    let series = (0..n)
        .map(|i| {
            let mut level = 0i64;
            let values = (0..n_bins)
                .map(|b| {
                    level += diffs[i][b];
                    let n_ue = u32::try_from(level).expect("negative occupancy");
                    SeriesPoint {
                        bin: b as i64,
                        n_ue,
                        utilization: (f64::from(n_ue) / f64::from(NOMINAL_UE_CAPACITY)).min(1.0),
                    }
                })
                .collect();
            StationSeries {
                station: StationId(i as u32),
                bin_s,
                values,
            }
        })
        .collect();

    BinnedUsers {
        series,
        unmatched_releases,
        unclosed_setups,
    }
}

/// Counts X2 + S1 handovers with `t` in `[window_start, window_start + window_len)`
/// into an origin/destination matrix.
pub fn count_handovers(log: &EventLog, window_start: i64, window_len: i64) -> HandoverCounts {
    assert!(window_len > 0, "window length must be positive");
    let mut counts = HandoverCounts::zeros(log.n_stations(), window_start, window_len);
    let end = window_start + window_len;
    for ev in &log.events {
        if ev.t < window_start {
            continue;
        }
        if ev.t >= end {
            break;
        }
        if ev.kind.is_handover() {
            let dst = ev.dst.expect("validated handover");
            counts.add(ev.src.index(), dst.index(), 1);
        }
    }
    counts
}
