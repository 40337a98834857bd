//! `cluster`: compute one station-to-controller assignment from a trace
//! window and write it as JSON, optionally with dense matrix dumps.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use nalgebra::DMatrix;

use edgemind::cluster::{
    cluster_data_driven, cluster_geographic, ClusterAssignment, Strategy, TransitionGraph,
};
use edgemind::telemetry::count_handovers;

use crate::commands::{ensure_out_dir, load_trace, write_text};
use crate::config::ClusterConfig;
use crate::manifest::RunManifest;

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn run(config_path: &Path, cfg: ClusterConfig, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let log = load_trace(&cfg.events, &cfg.stations, cfg.epoch_unix_s)?;
    let (window_start, window_len) = match cfg.window {
        Some(w) => (w.start, w.len),
        None => (0, log.trace_end_s() + 1),
    };
    let counts = count_handovers(&log, window_start, window_len);

    let assignment: ClusterAssignment = match cfg.strategy {
        Strategy::DataDriven => cluster_data_driven(&counts, cfg.n_clusters, cfg.seed)?,
        Strategy::Geographic => cluster_geographic(log.stations(), cfg.n_clusters, cfg.seed)?,
    };

    let assignment_path = out_dir.join("assignment.json");
    std::fs::write(
        &assignment_path,
        serde_json::to_string_pretty(&assignment).context("serializing assignment")? + "\n",
    )?;

    let mut manifest = RunManifest::new("cluster", config_path, Some(cfg.seed))?;
    manifest.record(&assignment_path)?;

    if cfg.dump_matrices {
        let graph = TransitionGraph::from_counts(&counts)?;
        let h_path = out_dir.join("transition_matrix.csv");
        let w_path = out_dir.join("weight_matrix.csv");
        write_text(&h_path, matrix_csv(&graph.h))?;
        write_text(&w_path, matrix_csv(&graph.w))?;
        manifest.record(&h_path)?;
        manifest.record(&w_path)?;
    }
    manifest.write(out_dir)?;

    eprintln!(
        "cluster: {} strategy, {} clusters, sizes {:?} -> {}",
        assignment.strategy,
        assignment.n_clusters,
        assignment.cluster_sizes(),
        out_dir.display()
    );
    Ok(())
}
