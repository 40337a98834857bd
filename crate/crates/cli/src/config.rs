//! TOML configuration schemas for the subcommands. Times of day may be
//! given either as trace-relative seconds (`*_s` keys) or as RFC 3339
//! datetimes resolved against the trace epoch.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use edgemind::cluster::Strategy;
use edgemind::forecast::{Method, Scope};
use edgemind::mobsim::SimConfig;
use edgemind::routes::RankMetric;

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// RFC 3339 datetime to unix seconds.
pub fn parse_datetime(s: &str) -> Result<i64> {
    let dt = chrono::DateTime::parse_from_rfc3339(s)
        .with_context(|| format!("parsing datetime {s:?} (expected RFC 3339)"))?;
    Ok(dt.timestamp())
}

/// A point in time: either trace-relative seconds or an absolute datetime.
fn resolve_instant(
    seconds: Option<i64>,
    datetime: &Option<String>,
    epoch_unix_s: i64,
    what: &str,
) -> Result<i64> {
    match (seconds, datetime) {
        (Some(s), None) => Ok(s),
        (None, Some(dt)) => Ok(parse_datetime(dt)? - epoch_unix_s),
        (None, None) => bail!("{what} missing: give {what}_s or {what}"),
        (Some(_), Some(_)) => bail!("{what} given twice: use {what}_s or {what}, not both"),
    }
}

/// `simulate` reads the generator configuration directly.
pub type SimulateConfig = SimConfig;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub events: PathBuf,
    pub stations: PathBuf,
    #[serde(default)]
    pub epoch_unix_s: i64,
    pub strategy: Strategy,
    pub n_clusters: usize,
    pub seed: u64,
    /// Handover window the clustering is computed from; the whole trace
    /// when absent.
    #[serde(default)]
    pub window: Option<WindowConfig>,
    /// Also dump the transition and weight matrices as dense CSV.
    #[serde(default)]
    pub dump_matrices: bool,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub start: i64,
    pub len: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalClustersConfig {
    pub events: PathBuf,
    pub stations: PathBuf,
    #[serde(default)]
    pub epoch_unix_s: i64,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    pub n_clusters: usize,
    /// Re-clustering period, seconds.
    pub t_c_s: i64,
    /// Scoring granularity, seconds; defaults to `t_c_s`.
    #[serde(default)]
    pub score_bin_s: Option<i64>,
    pub seed: u64,
    /// When present, also sweep these cluster counts over `sweep_seeds`.
    #[serde(default)]
    pub sweep_n_clusters: Vec<usize>,
    #[serde(default)]
    pub sweep_seeds: Vec<u64>,
    /// When present, also report fiber propagation delays to this
    /// `[lat, lon]` datacenter.
    #[serde(default)]
    pub datacenter: Option<[f64; 2]>,
}

fn default_strategies() -> Vec<Strategy> {
    vec![Strategy::DataDriven, Strategy::Geographic]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    pub events: PathBuf,
    pub stations: PathBuf,
    #[serde(default)]
    pub epoch_unix_s: i64,
    pub assignment: PathBuf,
    #[serde(default = "default_bin_s")]
    pub bin_s: i64,
    /// First test target, trace-relative seconds or RFC 3339.
    #[serde(default)]
    pub split_target_s: Option<i64>,
    #[serde(default)]
    pub split_target: Option<String>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_scopes")]
    pub scopes: Vec<Scope>,
    #[serde(default = "default_l_grid")]
    pub l_grid: Vec<usize>,
    #[serde(default = "default_w_grid")]
    pub w_grid: Vec<usize>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    pub seed: u64,
    /// Forest size for the desk-scale default grid.
    #[serde(default = "default_rfr_trees")]
    pub rfr_trees: usize,
    /// Use the published forest grid {1000, 5000, 10000} instead.
    #[serde(default)]
    pub rfr_full_grid: bool,
    #[serde(default = "default_stride")]
    pub gpr_train_stride: usize,
    /// Hours enumerated by the h(t) feature; full-day when absent.
    #[serde(default)]
    pub hours: Option<Vec<u32>>,
    #[serde(default = "default_true")]
    pub weekday_flag: bool,
    /// Cluster ids to run; all when absent.
    #[serde(default)]
    pub clusters: Option<Vec<usize>>,
    #[serde(default)]
    pub emit_predictions: bool,
}

fn default_bin_s() -> i64 {
    300
}
fn default_methods() -> Vec<Method> {
    vec![Method::Brr, Method::Gpr, Method::Rfr, Method::Arma]
}
fn default_scopes() -> Vec<Scope> {
    vec![Scope::Local, Scope::Cluster]
}
fn default_l_grid() -> Vec<usize> {
    (1..=9).collect()
}
fn default_w_grid() -> Vec<usize> {
    (1..=10).collect()
}
fn default_folds() -> usize {
    3
}
fn default_rfr_trees() -> usize {
    200
}
fn default_stride() -> usize {
    1
}
fn default_true() -> bool {
    true
}

impl ForecastConfig {
    pub fn resolve_split_target(&self) -> Result<i64> {
        resolve_instant(
            self.split_target_s,
            &self.split_target,
            self.epoch_unix_s,
            "split_target",
        )
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankRoutesConfig {
    pub routes: PathBuf,
    pub stations: PathBuf,
    pub predictions: PathBuf,
    #[serde(default = "default_bin_s")]
    pub bin_s: i64,
    #[serde(default)]
    pub epoch_unix_s: i64,
    /// Departure times, trace-relative seconds or RFC 3339 strings.
    #[serde(default)]
    pub departures_s: Vec<i64>,
    #[serde(default)]
    pub departures: Vec<String>,
    #[serde(default = "default_s_min")]
    pub s_min_mbps: f64,
    #[serde(default = "default_metric")]
    pub metric: RankMetric,
}

fn default_s_min() -> f64 {
    1.0
}
fn default_metric() -> RankMetric {
    RankMetric::Throughput
}

impl RankRoutesConfig {
    /// All departures as (label, trace-relative seconds), config order.
    pub fn resolve_departures(&self) -> Result<Vec<(String, i64)>> {
        let mut out: Vec<(String, i64)> = self
            .departures_s
            .iter()
            .map(|&s| (s.to_string(), s))
            .collect();
        for dt in &self.departures {
            out.push((dt.clone(), parse_datetime(dt)? - self.epoch_unix_s));
        }
        if out.is_empty() {
            bail!("no departures given: set departures_s or departures");
        }
        Ok(out)
    }
}
