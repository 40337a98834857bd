//! Per-station user-count forecasting: feature/target construction for the
//! local (single-station) and cluster (joint multi-output) variants,
//! train-fitted scaling, four regressors, expanding-window cross-validation,
//! and the experiment driver comparing them.

pub mod arma;
pub mod brr;
mod experiment;
pub mod gpr;
pub mod rfr;

pub use experiment::{
    cv_scores, cv_select, run_experiment, CellReport, ExperimentSpec, ForecastReport, Scope,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{Calendar, StationSeries};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("series alignment error: {0}")]
    Alignment(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("Cholesky factorization failed after {0} attempts")]
    Cholesky(usize),
    #[error("scaling must be fitted on training rows only")]
    LeakageGuard,
    #[error("non-stationary fit: {0}")]
    NonStationary(String),
    #[error("{0}")]
    Config(String),
}

/// Hour-of-day feature mapping. Traces restricted to a daily time window
/// can enumerate their hours explicitly so `h(t)` stays a small index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum HourMapping {
    /// `h(t)` is the calendar hour, 0..23.
    #[default]
    FullDay,
    /// `h(t)` is the position of the calendar hour in this list; hours not
    /// listed map to 0 (only sensible when the trace stays inside the list).
    Hours(Vec<u32>),
}

impl HourMapping {
    pub fn index(&self, hour: u32) -> f64 {
        match self {
            HourMapping::FullDay => f64::from(hour),
            HourMapping::Hours(hours) => hours
                .iter()
                .position(|&h| h == hour)
                .map_or(0.0, |i| i as f64),
        }
    }
}

/// Feature layout configuration: history window `W`, look-ahead `L`, bin
/// width, hour mapping, and whether the weekday flag is included.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub window: usize,
    pub lookahead: usize,
    pub bin_s: i64,
    pub hour_mapping: HourMapping,
    pub weekday_flag: bool,
}

impl FeatureSpec {
    pub fn new(window: usize, lookahead: usize) -> Self {
        FeatureSpec {
            window,
            lookahead,
            bin_s: 300,
            hour_mapping: HourMapping::FullDay,
            weekday_flag: true,
        }
    }

    /// Feature columns contributed by each past step.
    fn step_width(&self, n_members: usize) -> usize {
        n_members + 1 + usize::from(self.weekday_flag)
    }
}

/// Train/test provenance tag used by the leakage instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitTag {
    #[default]
    All,
    Train,
    Test,
}

/// A design matrix: feature rows `x`, target rows `y`, per-row timestamps,
/// per-column count markers, and a provenance tag.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// Trace time of the latest feature bin in each row.
    pub feature_end_s: Vec<i64>,
    /// Trace time of each row's target bin.
    pub target_s: Vec<i64>,
    /// Target bin index of each row.
    pub target_bin: Vec<i64>,
    /// True for feature columns holding user counts (log1p-scaled).
    pub x_is_count: Vec<bool>,
    pub tag: SplitTag,
}

impl DesignMatrix {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    fn take_rows(&self, rows: &[usize], tag: SplitTag) -> DesignMatrix {
        let x = DMatrix::from_fn(rows.len(), self.x.ncols(), |i, j| self.x[(rows[i], j)]);
        let y = DMatrix::from_fn(rows.len(), self.y.ncols(), |i, j| self.y[(rows[i], j)]);
        DesignMatrix {
            x,
            y,
            feature_end_s: rows.iter().map(|&r| self.feature_end_s[r]).collect(),
            target_s: rows.iter().map(|&r| self.target_s[r]).collect(),
            target_bin: rows.iter().map(|&r| self.target_bin[r]).collect(),
            x_is_count: self.x_is_count.clone(),
            tag,
        }
    }

    /// Range-based row subset (used by expanding-window CV).
    pub fn slice_rows(&self, range: std::ops::Range<usize>, tag: SplitTag) -> DesignMatrix {
        let rows: Vec<usize> = range.collect();
        self.take_rows(&rows, tag)
    }

    /// Chronological split: rows whose target falls strictly before
    /// `split_s` become the train set, the rest the test set. Every train
    /// feature then predates every test target.
    pub fn split_at_target(&self, split_s: i64) -> (DesignMatrix, DesignMatrix) {
        let train_rows: Vec<usize> = (0..self.rows())
            .filter(|&r| self.target_s[r] < split_s)
            .collect();
        let test_rows: Vec<usize> = (0..self.rows())
            .filter(|&r| self.target_s[r] >= split_s)
            .collect();
        (
            self.take_rows(&train_rows, SplitTag::Train),
            self.take_rows(&test_rows, SplitTag::Test),
        )
    }

    /// Every `stride`-th row, preserving order and tag (used to thin GP
    /// training sets).
    pub fn thin(&self, stride: usize) -> DesignMatrix {
        if stride <= 1 {
            return self.clone();
        }
        let rows: Vec<usize> = (0..self.rows()).step_by(stride).collect();
        self.take_rows(&rows, self.tag)
    }
}

/// Builds the single-station design: each row interleaves
/// `count, h, weekday` for the `W` past bins, the target is the count `L`
/// bins ahead. Within each calendar day the first `W` bins do not anchor
/// rows.
pub fn build_local(
    series: &StationSeries,
    cal: Calendar,
    spec: &FeatureSpec,
) -> Result<DesignMatrix, ForecastError> {
    build_design(std::slice::from_ref(&series), cal, spec)
}

/// Builds the joint cluster design over aligned member series: each row
/// stacks every member's count then `h, weekday` per past bin; the target
/// row is the vector of member counts `L` bins ahead.
pub fn build_cluster(
    members: &[&StationSeries],
    cal: Calendar,
    spec: &FeatureSpec,
) -> Result<DesignMatrix, ForecastError> {
    build_design(members, cal, spec)
}

fn build_design(
    members: &[&StationSeries],
    cal: Calendar,
    spec: &FeatureSpec,
) -> Result<DesignMatrix, ForecastError> {
    if members.is_empty() {
        return Err(ForecastError::Shape("no member series".into()));
    }
    if spec.window < 1 || spec.lookahead < 1 {
        return Err(ForecastError::Config("window and lookahead must be >= 1".into()));
    }
    let bins: Vec<i64> = members[0].values.iter().map(|p| p.bin).collect();
    for m in members {
        if m.bin_s != spec.bin_s {
            return Err(ForecastError::Alignment(format!(
                "station {} has bin width {}, expected {}",
                m.station, m.bin_s, spec.bin_s
            )));
        }
        let mb: Vec<i64> = m.values.iter().map(|p| p.bin).collect();
        if mb != bins {
            return Err(ForecastError::Alignment(format!(
                "station {} bins differ from the first member's",
                m.station
            )));
        }
    }
    let n_bins = bins.len();
    let w = spec.window;
    let l = spec.lookahead;
    if n_bins < w + l + 1 {
        return Err(ForecastError::InsufficientData(format!(
            "{n_bins} bins cannot support window {w} + lookahead {l}"
        )));
    }
    let counts: Vec<Vec<f64>> = members.iter().map(|m| m.counts()).collect();
    let day_of = |pos: usize| cal.day_index(bins[pos] * spec.bin_s);

    // Position of the first bin of each row's anchor day, scanning once.
    let mut day_first_pos = vec![0usize; n_bins];
    for pos in 1..n_bins {
        day_first_pos[pos] = if day_of(pos) == day_of(pos - 1) {
            day_first_pos[pos - 1]
        } else {
            pos
        };
    }

    let mut anchors: Vec<usize> = Vec::new();
    for pos in 0..n_bins {
        // Skip the first W bins of each day, require a contiguous window
        // and an existing target bin.
        if pos < w || pos + l >= n_bins {
            continue;
        }
        if pos - day_first_pos[pos] < w {
            continue;
        }
        if bins[pos] - bins[pos - (w - 1)] != (w - 1) as i64 {
            continue;
        }
        if bins[pos + l] - bins[pos] != l as i64 {
            continue;
        }
        anchors.push(pos);
    }
    if anchors.is_empty() {
        return Err(ForecastError::InsufficientData(
            "no usable rows after the per-day discard rule".into(),
        ));
    }

    let n_members = members.len();
    let step = spec.step_width(n_members);
    let n_features = step * w;
    let mut x = DMatrix::zeros(anchors.len(), n_features);
    let mut y = DMatrix::zeros(anchors.len(), n_members);
    let mut x_is_count = vec![false; n_features];
    for s in 0..w {
        for m in 0..n_members {
            x_is_count[s * step + m] = true;
        }
    }
    let mut feature_end_s = Vec::with_capacity(anchors.len());
    let mut target_s = Vec::with_capacity(anchors.len());
    let mut target_bin = Vec::with_capacity(anchors.len());
    for (row, &pos) in anchors.iter().enumerate() {
        for s in 0..w {
            let p = pos - (w - 1) + s;
            let t = bins[p] * spec.bin_s;
            let base = s * step;
            for m in 0..n_members {
                x[(row, base + m)] = counts[m][p];
            }
            x[(row, base + n_members)] = spec.hour_mapping.index(cal.hour_of(t));
            if spec.weekday_flag {
                x[(row, base + n_members + 1)] = f64::from(u8::from(cal.is_weekday(t)));
            }
        }
        for m in 0..n_members {
            y[(row, m)] = counts[m][pos + l];
        }
        feature_end_s.push(bins[pos] * spec.bin_s);
        target_s.push(bins[pos + l] * spec.bin_s);
        target_bin.push(bins[pos + l]);
    }
    Ok(DesignMatrix {
        x,
        y,
        feature_end_s,
        target_s,
        target_bin,
        x_is_count,
        tag: SplitTag::All,
    })
}

/// Per-column monotone scaling: optional `log(1+x)` followed by min-max to
/// `[0, 1]` with bounds fitted on the training rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnScale {
    pub log1p: bool,
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    fn fit(values: impl Iterator<Item = f64>, log1p: bool) -> ColumnScale {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            let g = if log1p { v.ln_1p() } else { v };
            min = min.min(g);
            max = max.max(g);
        }
        ColumnScale { log1p, min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.max > self.min)
    }

    pub fn apply(&self, v: f64) -> f64 {
        let g = if self.log1p { v.ln_1p() } else { v };
        if self.is_degenerate() {
            0.0
        } else {
            (g - self.min) / (self.max - self.min)
        }
    }

    pub fn invert(&self, s: f64) -> f64 {
        let g = if self.is_degenerate() {
            self.min
        } else {
            s * (self.max - self.min) + self.min
        };
        if self.log1p {
            g.exp_m1()
        } else {
            g
        }
    }
}

/// Fitted feature/target scaling. Degenerate (constant on train) columns
/// map to 0 and are recorded by index.
#[derive(Debug, Clone)]
pub struct Transform {
    pub x_cols: Vec<ColumnScale>,
    pub y_cols: Vec<ColumnScale>,
    pub degenerate_x: Vec<usize>,
    pub degenerate_y: Vec<usize>,
}

/// Fits the scaling on a training design matrix. Count columns (features
/// and all targets) pass through `log(1+x)` before min-max. Refuses
/// test-tagged rows outright: the scaling must never see the test set.
pub fn fit_transform(dm: &DesignMatrix) -> Result<Transform, ForecastError> {
    if dm.tag == SplitTag::Test {
        return Err(ForecastError::LeakageGuard);
    }
    if dm.rows() == 0 {
        return Err(ForecastError::InsufficientData("no rows to fit scaling".into()));
    }
    let x_cols: Vec<ColumnScale> = (0..dm.x.ncols())
        .map(|j| ColumnScale::fit(dm.x.column(j).iter().copied(), dm.x_is_count[j]))
        .collect();
    let y_cols: Vec<ColumnScale> = (0..dm.y.ncols())
        .map(|j| ColumnScale::fit(dm.y.column(j).iter().copied(), true))
        .collect();
    let degenerate_x = x_cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_degenerate())
        .map(|(i, _)| i)
        .collect();
    let degenerate_y = y_cols
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_degenerate())
        .map(|(i, _)| i)
        .collect();
    Ok(Transform {
        x_cols,
        y_cols,
        degenerate_x,
        degenerate_y,
    })
}

/// Applies a fitted scaling to any design matrix (train or test).
pub fn apply_transform(t: &Transform, dm: &DesignMatrix) -> Result<DesignMatrix, ForecastError> {
    if t.x_cols.len() != dm.x.ncols() || t.y_cols.len() != dm.y.ncols() {
        return Err(ForecastError::Shape(format!(
            "transform fitted for {}x/{}y columns, matrix has {}x/{}y",
            t.x_cols.len(),
            t.y_cols.len(),
            dm.x.ncols(),
            dm.y.ncols()
        )));
    }
    let mut out = dm.clone();
    for j in 0..out.x.ncols() {
        for i in 0..out.x.nrows() {
            out.x[(i, j)] = t.x_cols[j].apply(out.x[(i, j)]);
        }
    }
    for j in 0..out.y.ncols() {
        for i in 0..out.y.nrows() {
            out.y[(i, j)] = t.y_cols[j].apply(out.y[(i, j)]);
        }
    }
    Ok(out)
}

impl Transform {
    /// Maps scaled predictions back to the original count scale.
    pub fn invert_y(&self, y_scaled: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(y_scaled.nrows(), y_scaled.ncols(), |i, j| {
            self.y_cols[j].invert(y_scaled[(i, j)])
        })
    }
}

/// Root-mean-square error between two equal-length slices.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, ForecastError> {
    if y.len() != y_hat.len() {
        return Err(ForecastError::Shape(format!(
            "length mismatch: {} vs {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(ForecastError::Shape("empty series".into()));
    }
    let sum: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / y.len() as f64).sqrt())
}

/// Per-column RMSE between two equally shaped matrices.
pub fn rmse_per_column(
    y: &DMatrix<f64>,
    y_hat: &DMatrix<f64>,
) -> Result<Vec<f64>, ForecastError> {
    if y.shape() != y_hat.shape() {
        return Err(ForecastError::Shape(format!(
            "shape mismatch: {:?} vs {:?}",
            y.shape(),
            y_hat.shape()
        )));
    }
    (0..y.ncols())
        .map(|j| {
            let a: Vec<f64> = y.column(j).iter().copied().collect();
            let b: Vec<f64> = y_hat.column(j).iter().copied().collect();
            rmse(&a, &b)
        })
        .collect()
}

/// Mean of the per-station RMSEs.
pub fn aggregate_rmse(sigmas: &[f64]) -> f64 {
    if sigmas.is_empty() {
        return 0.0;
    }
    sigmas.iter().sum::<f64>() / sigmas.len() as f64
}

/// Expanding-window split boundaries: fold `i` trains on
/// `0..n - (folds - i) * test_size` and validates on the next
/// `test_size = n / (folds + 1)` rows, so validation indices always exceed
/// training indices and later folds strictly extend earlier ones.
pub fn expanding_window_splits(
    n_rows: usize,
    folds: usize,
) -> Result<Vec<(std::ops::Range<usize>, std::ops::Range<usize>)>, ForecastError> {
    if folds == 0 {
        return Err(ForecastError::Config("folds must be >= 1".into()));
    }
    let test_size = n_rows / (folds + 1);
    if test_size == 0 {
        return Err(ForecastError::InsufficientData(format!(
            "{n_rows} rows cannot support {folds}-fold expanding-window CV"
        )));
    }
    Ok((0..folds)
        .map(|i| {
            let val_start = n_rows - (folds - i) * test_size;
            (0..val_start, val_start..val_start + test_size)
        })
        .collect())
}

/// Regression method identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Brr,
    Gpr,
    Rfr,
    Arma,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Brr => f.write_str("BRR"),
            Method::Gpr => f.write_str("GPR"),
            Method::Rfr => f.write_str("RFR"),
            Method::Arma => f.write_str("ARMA"),
        }
    }
}

/// A concrete hyperparameter point for one method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "UPPERCASE")]
pub enum ModelSpec {
    Brr { alpha: f64, lambda: f64 },
    Gpr { alpha: f64, sigma_k: f64 },
    Rfr { n_trees: usize },
    Arma { p: usize, q: usize },
}

impl ModelSpec {
    pub fn method(&self) -> Method {
        match self {
            ModelSpec::Brr { .. } => Method::Brr,
            ModelSpec::Gpr { .. } => Method::Gpr,
            ModelSpec::Rfr { .. } => Method::Rfr,
            ModelSpec::Arma { .. } => Method::Arma,
        }
    }
}

/// The published cross-validation grids.
pub fn reference_grid(method: Method) -> Vec<ModelSpec> {
    match method {
        Method::Brr => {
            let values = [1e-6, 1e-3, 1.0, 10.0, 100.0];
            values
                .iter()
                .flat_map(|&alpha| {
                    values
                        .iter()
                        .map(move |&lambda| ModelSpec::Brr { alpha, lambda })
                })
                .collect()
        }
        Method::Gpr => [1e-6, 1e-4, 1e-2, 0.1]
            .iter()
            .flat_map(|&alpha| {
                [0.001, 0.01]
                    .iter()
                    .map(move |&sigma_k| ModelSpec::Gpr { alpha, sigma_k })
            })
            .collect(),
        Method::Rfr => [1000, 5000, 10000]
            .iter()
            .map(|&n_trees| ModelSpec::Rfr { n_trees })
            .collect(),
        Method::Arma => vec![ModelSpec::Arma { p: 4, q: 2 }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::{SeriesPoint, StationId};

    pub(crate) fn series_from(station: u32, bin_s: i64, counts: &[f64]) -> StationSeries {
        StationSeries {
            station: StationId(station),
            bin_s,
            values: counts
                .iter()
                .enumerate()
                .map(|(i, &c)| SeriesPoint {
                    bin: i as i64,
                    n_ue: c as u32,
                    utilization: 0.0,
                })
                .collect(),
        }
    }

    fn cal() -> Calendar {
        Calendar { epoch_unix_s: 0 }
    }

    #[test]
    fn local_constant_series_rows() {
        // W=1, constant 7, single day, hourly bins; weekday (epoch is a
        // Thursday); hour mapping with one entry keeps h = 0.
        let series = series_from(0, 3600, &[7.0; 10]);
        let spec = FeatureSpec {
            window: 1,
            lookahead: 1,
            bin_s: 3600,
            hour_mapping: HourMapping::Hours((0..24).collect()),
            weekday_flag: true,
        };
        let dm = build_local(&series, cal(), &spec).unwrap();
        assert!(dm.rows() > 0);
        for r in 0..dm.rows() {
            assert_eq!(dm.x[(r, 0)], 7.0);
            assert_eq!(dm.x[(r, 2)], 1.0); // weekday flag
            assert_eq!(dm.y[(r, 0)], 7.0);
        }
    }

    #[test]
    fn local_discard_rule_first_usable_target() {
        // W=2 on [1,2,3,4], L=1, single day: the first anchor must be bin 2
        // (the first W bins of the day never anchor), so the first usable
        // target is bin 3, value 4.
        let series = series_from(0, 300, &[1.0, 2.0, 3.0, 4.0]);
        let spec = FeatureSpec::new(2, 1);
        let dm = build_local(&series, cal(), &spec).unwrap();
        assert_eq!(dm.rows(), 1);
        assert_eq!(dm.target_bin[0], 3);
        assert_eq!(dm.y[(0, 0)], 4.0);
        // Features: counts at bins 1 and 2.
        assert_eq!(dm.x[(0, 0)], 2.0);
        assert_eq!(dm.x[(0, 3)], 3.0);
    }

    #[test]
    fn local_row_width_is_3w() {
        for w in 1..=10 {
            let series = series_from(0, 300, &vec![1.0; 40]);
            let spec = FeatureSpec::new(w, 1);
            let dm = build_local(&series, cal(), &spec).unwrap();
            assert_eq!(dm.x.ncols(), 3 * w);
        }
    }

    #[test]
    fn cluster_of_one_matches_local() {
        let series = series_from(0, 300, &[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]);
        let spec = FeatureSpec::new(2, 2);
        let local = build_local(&series, cal(), &spec).unwrap();
        let cluster = build_cluster(&[&series], cal(), &spec).unwrap();
        assert_eq!(local.x, cluster.x);
        assert_eq!(local.y, cluster.y);
    }

    #[test]
    fn cluster_width_and_column_order() {
        // Two stations, W=2: per step [count_a, count_b, h, w], F=(2+2)*2.
        let a = series_from(0, 300, &[10.0, 11.0, 12.0, 13.0, 14.0, 15.0]);
        let b = series_from(1, 300, &[20.0, 21.0, 22.0, 23.0, 24.0, 25.0]);
        let spec = FeatureSpec::new(2, 1);
        let dm = build_cluster(&[&a, &b], cal(), &spec).unwrap();
        assert_eq!(dm.x.ncols(), (2 + 2) * 2);
        assert_eq!(dm.y.ncols(), 2);
        // First anchor is bin 2 (window bins 1..2), target bin 3.
        let r = 0;
        assert_eq!(dm.x[(r, 0)], 11.0); // a at bin 1
        assert_eq!(dm.x[(r, 1)], 21.0); // b at bin 1
        assert_eq!(dm.x[(r, 4)], 12.0); // a at bin 2
        assert_eq!(dm.x[(r, 5)], 22.0); // b at bin 2
        assert_eq!(dm.y[(r, 0)], 13.0);
        assert_eq!(dm.y[(r, 1)], 23.0);

        // Three stations, W=2: F = (3+2)*2 = 10.
        let c = series_from(2, 300, &[0.0; 6]);
        let dm3 = build_cluster(&[&a, &b, &c], cal(), &spec).unwrap();
        assert_eq!(dm3.x.ncols(), 10);
    }

    #[test]
    fn cluster_rejects_misaligned_members() {
        let a = series_from(0, 300, &[1.0; 6]);
        let mut b = series_from(1, 300, &[1.0; 6]);
        b.values.remove(2);
        let spec = FeatureSpec::new(1, 1);
        assert!(matches!(
            build_cluster(&[&a, &b], cal(), &spec),
            Err(ForecastError::Alignment(_))
        ));
    }

    #[test]
    fn transform_log1p_endpoints_and_zero() {
        // Hand-built matrix so the count column holds exactly {0, e-1}:
        // log1p maps them to {0, 1} and min-max keeps those endpoints.
        let dm = DesignMatrix {
            x: DMatrix::from_column_slice(2, 1, &[0.0, std::f64::consts::E - 1.0]),
            y: DMatrix::from_column_slice(2, 1, &[1.0, 2.0]),
            feature_end_s: vec![0, 300],
            target_s: vec![300, 600],
            target_bin: vec![1, 2],
            x_is_count: vec![true],
            tag: SplitTag::Train,
        };
        let t = fit_transform(&dm).unwrap();
        let count_col = &t.x_cols[0];
        assert!(count_col.log1p);
        assert_eq!(count_col.apply(0.0), 0.0);
        assert!((count_col.apply(std::f64::consts::E - 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_round_trip_inverse() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let counts: Vec<f64> = (0..60).map(|_| rng.gen_range(0..300) as f64).collect();
        let series = series_from(0, 300, &counts);
        let spec = FeatureSpec::new(3, 2);
        let mut dm = build_local(&series, cal(), &spec).unwrap();
        dm.tag = SplitTag::Train;
        let t = fit_transform(&dm).unwrap();
        let scaled = apply_transform(&t, &dm).unwrap();
        let back = t.invert_y(&scaled.y);
        let max_err = (&back - &dm.y).abs().max();
        assert!(max_err < 1e-9, "round-trip error {max_err}");
    }

    #[test]
    fn transform_refuses_test_rows() {
        let series = series_from(0, 300, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let spec = FeatureSpec::new(1, 1);
        let dm = build_local(&series, cal(), &spec).unwrap();
        let (_, test) = dm.split_at_target(2 * 300);
        assert!(matches!(
            fit_transform(&test),
            Err(ForecastError::LeakageGuard)
        ));
    }

    #[test]
    fn split_has_no_temporal_leakage() {
        let counts: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let series = series_from(0, 300, &counts);
        let spec = FeatureSpec::new(4, 3);
        let dm = build_local(&series, cal(), &spec).unwrap();
        let split_s = 30 * 300;
        let (train, test) = dm.split_at_target(split_s);
        assert!(train.rows() > 0 && test.rows() > 0);
        let max_train_feature = train.feature_end_s.iter().max().unwrap();
        let min_test_target = test.target_s.iter().min().unwrap();
        assert!(max_train_feature < min_test_target);
        assert_eq!(train.tag, SplitTag::Train);
        assert_eq!(test.tag, SplitTag::Test);
    }

    #[test]
    fn rmse_hand_values() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let sigma = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((sigma - (25.0f64 / 2.0).sqrt()).abs() < 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rmse_matches_brute_force_on_fixture() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let y: Vec<f64> = (0..40).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let y_hat: Vec<f64> = (0..40).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let direct = rmse(&y, &y_hat).unwrap();
        let mut acc = 0.0;
        for i in 0..40 {
            acc += (y[i] - y_hat[i]).powi(2);
        }
        assert_eq!(direct, (acc / 40.0).sqrt());
    }

    #[test]
    fn expanding_splits_are_ordered_and_disjoint() {
        for n in [8usize, 40, 41, 100] {
            let splits = expanding_window_splits(n, 3).unwrap();
            assert_eq!(splits.len(), 3);
            for (train, val) in &splits {
                assert!(train.end == val.start);
                assert!(val.end <= n);
                assert!(val.start > 0);
                // Every validation index exceeds every training index.
                assert!(train.clone().all(|t| t < val.start));
            }
            // Later folds extend earlier ones.
            assert!(splits[0].0.end < splits[1].0.end);
            assert!(splits[1].0.end < splits[2].0.end);
        }
    }

    #[test]
    fn reference_grids_match_published_values() {
        assert_eq!(reference_grid(Method::Brr).len(), 25);
        assert_eq!(reference_grid(Method::Gpr).len(), 8);
        assert_eq!(
            reference_grid(Method::Rfr),
            vec![
                ModelSpec::Rfr { n_trees: 1000 },
                ModelSpec::Rfr { n_trees: 5000 },
                ModelSpec::Rfr { n_trees: 10000 }
            ]
        );
        assert_eq!(reference_grid(Method::Arma), vec![ModelSpec::Arma { p: 4, q: 2 }]);
    }
}
