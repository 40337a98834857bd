//! `rank-routes`: score candidate itineraries against a prediction table
//! and rank them per departure time.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use edgemind::routes::{rank_routes, EqualShare, PredictionTable, Route};
use edgemind::telemetry::{read_stations, StationId};

use crate::commands::{ensure_out_dir, write_text};
use crate::config::RankRoutesConfig;
use crate::manifest::RunManifest;

fn read_predictions(path: &Path, bin_s: i64) -> Result<PredictionTable> {
    let mut table = PredictionTable::new(bin_s);
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("reading predictions {}", path.display()))?;
    for record in reader.records() {
        let record = record?;
        let station: u32 = record[0].trim().parse().context("prediction station")?;
        let bin: i64 = record[1].trim().parse().context("prediction bin")?;
        let lookahead: usize = record[2].trim().parse().context("prediction L")?;
        let value: f64 = record[3].trim().parse().context("prediction value")?;
        table.insert(StationId(station), bin, lookahead, value);
    }
    Ok(table)
}

pub fn run(config_path: &Path, cfg: RankRoutesConfig, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let stations = read_stations(&cfg.stations)?;
    let routes: Vec<Route> = serde_json::from_str(
        &std::fs::read_to_string(&cfg.routes)
            .with_context(|| format!("reading routes {}", cfg.routes.display()))?,
    )
    .context("parsing routes JSON")?;
    let predictions = read_predictions(&cfg.predictions, cfg.bin_s)?;
    let throughput = EqualShare::new(&stations);

    let mut body = String::from("route,departure,S_hat_mbps,D_o_max_s,rank\n");
    for (label, departure_s) in cfg.resolve_departures()? {
        let ranked = rank_routes(
            &routes,
            departure_s,
            &predictions,
            &throughput,
            cfg.s_min_mbps,
            cfg.metric,
        )?;
        for r in &ranked {
            let _ = writeln!(
                body,
                "{},{},{},{},{}",
                r.name, label, r.metrics.s_hat_mbps, r.metrics.d_o_max_s, r.rank
            );
        }
    }
    let path = out_dir.join("route_ranking.csv");
    write_text(&path, body)?;

    let mut manifest = RunManifest::new("rank-routes", config_path, None)?;
    manifest.record(&path)?;
    manifest.write(out_dir)?;

    eprintln!("rank-routes: {} routes -> {}", routes.len(), out_dir.display());
    Ok(())
}
