//! Subcommand implementations.

pub mod cluster;
pub mod eval_clusters;
pub mod forecast;
pub mod rank_routes;
pub mod simulate;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use edgemind::telemetry::{ingest_events, read_stations, EventLog};

pub fn ensure_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

pub fn load_trace(events: &Path, stations: &Path, epoch_unix_s: i64) -> Result<EventLog> {
    let stations = read_stations(stations)
        .with_context(|| format!("reading stations {}", stations.display()))?;
    let log = ingest_events(events, stations, epoch_unix_s)
        .with_context(|| format!("ingesting events {}", events.display()))?;
    Ok(log)
}

pub fn write_text(path: &PathBuf, body: String) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// Formats an optional float as an empty CSV field when missing.
pub fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
