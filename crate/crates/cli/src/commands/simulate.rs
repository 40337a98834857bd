//! `simulate`: generate a synthetic trace and write the telemetry CSVs,
//! the corridor ground truth, and the run manifest.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use edgemind::mobsim::{generate_topology, simulate, SimConfig};
use edgemind::telemetry::{write_events_csv, write_stations_csv};

use crate::commands::ensure_out_dir;
use crate::manifest::RunManifest;

#[derive(Serialize)]
struct GroundTruth {
    epoch_unix_s: i64,
    corridors: Vec<Vec<u32>>,
}

pub fn run(config_path: &Path, cfg: SimConfig, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let topo = generate_topology(&cfg)?;
    let log = simulate(&cfg, &topo)?;

    let stations_path = out_dir.join("stations.csv");
    let events_path = out_dir.join("events.csv");
    write_stations_csv(log.stations(), &stations_path)?;
    write_events_csv(&log, &events_path)?;

    let truth = GroundTruth {
        epoch_unix_s: cfg.epoch_unix_s,
        corridors: cfg
            .corridors
            .iter()
            .map(|c| c.path.iter().map(|s| s.0).collect())
            .collect(),
    };
    let truth_path = out_dir.join("ground_truth.json");
    std::fs::write(
        &truth_path,
        serde_json::to_string_pretty(&truth).context("serializing ground truth")? + "\n",
    )?;

    let mut manifest = RunManifest::new("simulate", config_path, Some(cfg.seed))?;
    manifest.record(&stations_path)?;
    manifest.record(&events_path)?;
    manifest.record(&truth_path)?;
    manifest.write(out_dir)?;

    eprintln!(
        "simulate: {} stations, {} events -> {}",
        log.n_stations(),
        log.events().len(),
        out_dir.display()
    );
    Ok(())
}
