//! `eval-clusters`: periodic re-clustering ratios per strategy, the
//! cluster-count sweep with confidence intervals, and the optional fiber
//! delay report.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

use edgemind::eval::{evaluate_periodic_binned, propagation_delay, ratio_vs_clusters};

use crate::commands::{ensure_out_dir, load_trace, opt_f64, write_text};
use crate::config::EvalClustersConfig;
use crate::manifest::RunManifest;

pub fn run(config_path: &Path, cfg: EvalClustersConfig, out_dir: &Path) -> Result<()> {
    ensure_out_dir(out_dir)?;
    let log = load_trace(&cfg.events, &cfg.stations, cfg.epoch_unix_s)?;
    let score_bin = cfg.score_bin_s.unwrap_or(cfg.t_c_s);
    let mut manifest = RunManifest::new("eval-clusters", config_path, Some(cfg.seed))?;

    for &strategy in &cfg.strategies {
        let points =
            evaluate_periodic_binned(&log, strategy, cfg.n_clusters, cfg.t_c_s, score_bin, cfg.seed)?;
        let mut body = String::from("window_start,intra,inter,R\n");
        for p in &points {
            let _ = writeln!(
                body,
                "{},{},{},{}",
                p.window_start,
                p.intra,
                p.inter,
                opt_f64(p.ratio())
            );
        }
        let path = out_dir.join(format!("ratio_{strategy}.csv"));
        write_text(&path, body)?;
        manifest.record(&path)?;
    }

    if !cfg.sweep_n_clusters.is_empty() {
        let mut body = String::from("n_clusters,strategy,mean_R,ci_lo,ci_hi\n");
        for &strategy in &cfg.strategies {
            let table = ratio_vs_clusters(
                &log,
                strategy,
                &cfg.sweep_n_clusters,
                cfg.t_c_s,
                &cfg.sweep_seeds,
            )?;
            for row in table {
                let _ = writeln!(
                    body,
                    "{},{},{},{},{}",
                    row.n_clusters,
                    row.strategy,
                    opt_f64(row.mean_r),
                    opt_f64(row.ci_lo),
                    opt_f64(row.ci_hi)
                );
            }
        }
        let path = out_dir.join("ratio_sweep.csv");
        write_text(&path, body)?;
        manifest.record(&path)?;
    }

    if let Some([lat, lon]) = cfg.datacenter {
        let report = propagation_delay(log.stations(), (lat, lon));
        let mut body = String::from("station,delay_us\n");
        for (i, d) in report.delays_us.iter().enumerate() {
            let _ = writeln!(body, "{i},{d}");
        }
        let path = out_dir.join("delay.csv");
        write_text(&path, body)?;
        manifest.record(&path)?;
        eprintln!(
            "eval-clusters: delay mean {:.1} us, max {:.1} us",
            report.mean_us, report.max_us
        );
    }

    manifest.write(out_dir)?;
    eprintln!("eval-clusters: reports -> {}", out_dir.display());
    Ok(())
}
