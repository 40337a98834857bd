//! `forecast`: bin the trace, run the local/cluster experiment grid, and
//! write the RMSE report, the chosen hyperparameters, and optionally the
//! test predictions.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use edgemind::cluster::ClusterAssignment;
use edgemind::forecast::{
    reference_grid, run_experiment, ExperimentSpec, HourMapping, Method, ModelSpec,
};
use edgemind::telemetry::bin_user_counts;

use crate::commands::{ensure_out_dir, load_trace, write_text};
use crate::config::ForecastConfig;
use crate::manifest::RunManifest;

pub fn run(config_path: &Path, cfg: ForecastConfig, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let log = load_trace(&cfg.events, &cfg.stations, cfg.epoch_unix_s)?;
    let assignment: ClusterAssignment = serde_json::from_str(
        &std::fs::read_to_string(&cfg.assignment)
            .with_context(|| format!("reading assignment {}", cfg.assignment.display()))?,
    )
    .context("parsing assignment JSON")?;
    anyhow::ensure!(
        assignment.n_stations() == log.n_stations(),
        "assignment covers {} stations, trace has {}",
        assignment.n_stations(),
        log.n_stations()
    );

    let binned = bin_user_counts(&log, cfg.bin_s);
    if binned.unmatched_releases > 0 || binned.unclosed_setups > 0 {
        eprintln!(
            "forecast: trace pairing anomalies: {} unmatched releases, {} unclosed setups",
            binned.unmatched_releases, binned.unclosed_setups
        );
    }

    let spec = ExperimentSpec {
        methods: cfg.methods.clone(),
        scopes: cfg.scopes.clone(),
        l_grid: cfg.l_grid.clone(),
        w_grid: cfg.w_grid.clone(),
        folds: cfg.folds,
        bin_s: cfg.bin_s,
        hour_mapping: match &cfg.hours {
            Some(hours) => HourMapping::Hours(hours.clone()),
            None => HourMapping::FullDay,
        },
        weekday_flag: cfg.weekday_flag,
        split_target_s: cfg.resolve_split_target()?,
        brr_grid: reference_grid(Method::Brr),
        gpr_grid: reference_grid(Method::Gpr),
        rfr_grid: if cfg.rfr_full_grid {
            reference_grid(Method::Rfr)
        } else {
            vec![ModelSpec::Rfr {
                n_trees: cfg.rfr_trees,
            }]
        },
        gpr_train_stride: cfg.gpr_train_stride,
        clusters: cfg.clusters.clone(),
        seed: cfg.seed,
        emit_predictions: cfg.emit_predictions,
    };
    let report = run_experiment(&binned.series, &assignment, log.calendar(), &spec)?;

    // Per-station rows plus one aggregate row per cell.
    let mut body = String::from("method,scope,cluster,L,W,station,sigma_b\n");
    for cell in &report.cells {
        for (station, sigma) in &cell.station_sigmas {
            let _ = writeln!(
                body,
                "{},{},{},{},{},{},{}",
                cell.method, cell.scope, cell.cluster, cell.lookahead, cell.window, station, sigma
            );
        }
        let _ = writeln!(
            body,
            "{},{},{},{},{},mean,{}",
            cell.method, cell.scope, cell.cluster, cell.lookahead, cell.window, cell.sigma_hat
        );
    }
    let report_path = out_dir.join("forecast_report.csv");
    write_text(&report_path, body)?;

    let chosen: Vec<serde_json::Value> = report
        .cells
        .iter()
        .map(|cell| {
            serde_json::json!({
                "method": cell.method,
                "scope": cell.scope,
                "cluster": cell.cluster,
                "L": cell.lookahead,
                "W": cell.window,
                "chosen": cell.chosen,
                "cv_rmse": if cell.cv_rmse.is_nan() { None } else { Some(cell.cv_rmse) },
                "sigma_hat": cell.sigma_hat,
            })
        })
        .collect();
    let hyper_path = out_dir.join("hyperparams.json");
    std::fs::write(
        &hyper_path,
        serde_json::to_string_pretty(&chosen).context("serializing hyperparameters")? + "\n",
    )?;

    let mut manifest = RunManifest::new("forecast", config_path, Some(cfg.seed))?;
    manifest.record(&report_path)?;
    manifest.record(&hyper_path)?;

    if cfg.emit_predictions {
        let mut body = String::from("station,bin,l,n_ue_pred\n");
        for cell in &report.cells {
            for &(station, bin, value) in &cell.predictions {
                let _ = writeln!(body, "{station},{bin},{},{value}", cell.lookahead);
            }
        }
        let pred_path = out_dir.join("predictions.csv");
        write_text(&pred_path, body)?;
        manifest.record(&pred_path)?;
    }
    manifest.write(out_dir)?;

    eprintln!(
        "forecast: {} cells -> {}",
        report.cells.len(),
        out_dir.display()
    );
    Ok(())
}
