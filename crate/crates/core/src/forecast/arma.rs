//! ARMA forecasting on once-differenced series, fitted by the
//! Hannan-Rissanen two-stage method: a long autoregression estimates the
//! innovations, then ordinary least squares regresses the differenced
//! series on its own lags and the estimated innovation lags. Forecasts
//! iterate the one-step recursion with future innovations at zero and
//! integrate the differencing back.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::ForecastError;

/// Coefficients on the differenced series: `z_t = c + sum(ar_i z_{t-i}) +
/// sum(ma_j e_{t-j}) + e_t`.
#[derive(Debug, Clone)]
pub struct ArmaModel {
    pub p: usize,
    pub q: usize,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub intercept: f64,
    pub innovation_var: f64,
}

/// A fitted model bound to a series, ready to forecast from any anchor.
/// Coefficients come from the first `train_len` observations only; the
/// innovation recursion extends over the full series so later anchors can
/// use their own past.
#[derive(Debug, Clone)]
pub struct ArmaForecaster {
    pub model: ArmaModel,
    values: Vec<f64>,
    diffs: Vec<f64>,
    innovations: Vec<f64>,
    /// Set when the fit degenerated and forecasts fall back to persistence.
    pub fallback: bool,
}

/// Ridge-stabilized least squares; the ridge skips column 0 (intercept).
fn solve_ols(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, ForecastError> {
    let d = a.ncols();
    let gram = a.transpose() * a;
    let rhs = a.transpose() * b;
    let mut ridge = 1e-9;
    for _ in 0..4 {
        let mut g = gram.clone();
        for j in 1..d {
            g[(j, j)] += ridge;
        }
        if let Some(chol) = Cholesky::new(g) {
            return Ok(chol.solve(&rhs));
        }
        ridge *= 100.0;
    }
    Err(ForecastError::NonStationary(
        "least-squares stage failed to factorize".into(),
    ))
}

fn difference(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Hannan-Rissanen fit on the once-differenced prefix `values[..train_len]`.
pub fn fit_arma(
    values: &[f64],
    train_len: usize,
    p: usize,
    q: usize,
) -> Result<ArmaModel, ForecastError> {
    if train_len > values.len() {
        return Err(ForecastError::Shape("train_len exceeds series length".into()));
    }
    let z = difference(&values[..train_len]);
    let n = z.len();
    // Long-AR order grows like 2 ln n: long enough for the innovations
    // proxy, short enough not to distort the stage-2 regression.
    let long_ar = (p + q).max((2.0 * (n.max(2) as f64).ln()).ceil() as usize);
    let min_len = 2 * long_ar + q + 10;
    if n < min_len {
        return Err(ForecastError::InsufficientData(format!(
            "{n} differenced samples, need at least {min_len}"
        )));
    }

    // Stage 1: long AR by least squares, innovations as its residuals.
    let rows1 = n - long_ar;
    let mut a1 = DMatrix::zeros(rows1, long_ar + 1);
    let mut b1 = DVector::zeros(rows1);
    for r in 0..rows1 {
        let t = r + long_ar;
        a1[(r, 0)] = 1.0;
        for i in 0..long_ar {
            a1[(r, i + 1)] = z[t - 1 - i];
        }
        b1[r] = z[t];
    }
    let coef1 = solve_ols(&a1, &b1)?;
    let mut innovations = vec![0.0; n];
    for t in long_ar..n {
        let mut pred = coef1[0];
        for i in 0..long_ar {
            pred += coef1[i + 1] * z[t - 1 - i];
        }
        innovations[t] = z[t] - pred;
    }

    // Stage 2: regress z on its own lags and the innovation lags.
    let start = (long_ar + q).max(p);
    let rows2 = n - start;
    let mut a2 = DMatrix::zeros(rows2, 1 + p + q);
    let mut b2 = DVector::zeros(rows2);
    for r in 0..rows2 {
        let t = r + start;
        a2[(r, 0)] = 1.0;
        for i in 0..p {
            a2[(r, 1 + i)] = z[t - 1 - i];
        }
        for j in 0..q {
            a2[(r, 1 + p + j)] = innovations[t - 1 - j];
        }
        b2[r] = z[t];
    }
    let coef2 = solve_ols(&a2, &b2)?;
    let intercept = coef2[0];
    let ar: Vec<f64> = (0..p).map(|i| coef2[1 + i]).collect();
    let ma: Vec<f64> = (0..q).map(|j| coef2[1 + p + j]).collect();

    let mut sse = 0.0;
    for r in 0..rows2 {
        let mut pred = intercept;
        let t = r + start;
        for i in 0..p {
            pred += ar[i] * z[t - 1 - i];
        }
        for j in 0..q {
            pred += ma[j] * innovations[t - 1 - j];
        }
        let e = z[t] - pred;
        sse += e * e;
    }
    Ok(ArmaModel {
        p,
        q,
        ar,
        ma,
        intercept,
        innovation_var: sse / rows2 as f64,
    })
}

impl ArmaForecaster {
    /// Fits on `values[..train_len]` and prepares the innovation recursion
    /// over the whole series. A fit that cannot be stabilized flags the
    /// persistence fallback instead of failing.
    pub fn new(
        values: &[f64],
        train_len: usize,
        p: usize,
        q: usize,
    ) -> Result<ArmaForecaster, ForecastError> {
        let model = match fit_arma(values, train_len, p, q) {
            Ok(m) => m,
            Err(ForecastError::NonStationary(_)) => {
                return Ok(ArmaForecaster {
                    model: ArmaModel {
                        p,
                        q,
                        ar: vec![0.0; p],
                        ma: vec![0.0; q],
                        intercept: 0.0,
                        innovation_var: 0.0,
                    },
                    values: values.to_vec(),
                    diffs: difference(values),
                    innovations: vec![0.0; values.len().saturating_sub(1)],
                    fallback: true,
                })
            }
            Err(e) => return Err(e),
        };
        let diffs = difference(values);
        let mut innovations = vec![0.0; diffs.len()];
        for t in 0..diffs.len() {
            let mut pred = model.intercept;
            for i in 0..p {
                if t > i {
                    pred += model.ar[i] * diffs[t - 1 - i];
                }
            }
            for j in 0..q {
                if t > j {
                    pred += model.ma[j] * innovations[t - 1 - j];
                }
            }
            innovations[t] = diffs[t] - pred;
        }
        Ok(ArmaForecaster {
            model,
            values: values.to_vec(),
            diffs,
            innovations,
            fallback: false,
        })
    }

    /// Forecasts `values[anchor + lookahead]` using observations up to and
    /// including `anchor`: iterated one-step forecasts on the differenced
    /// series with future innovations at zero, integrated back. Falls back
    /// to persistence when the recursion degenerates.
    pub fn forecast_from(&self, anchor: usize, lookahead: usize) -> f64 {
        assert!(anchor < self.values.len(), "anchor out of range");
        assert!(lookahead >= 1, "lookahead must be >= 1");
        let last = self.values[anchor];
        if self.fallback {
            return last;
        }
        let p = self.model.p;
        let q = self.model.q;
        // Differenced indices < anchor are observed history.
        let known = anchor;
        let mut future = Vec::with_capacity(lookahead);
        for h in 0..lookahead {
            let t = known + h;
            let mut pred = self.model.intercept;
            for i in 0..p {
                if t < 1 + i {
                    continue;
                }
                let idx = t - 1 - i;
                pred += self.model.ar[i]
                    * if idx < known {
                        self.diffs[idx]
                    } else {
                        future[idx - known]
                    };
            }
            for j in 0..q {
                if t < 1 + j {
                    continue;
                }
                let idx = t - 1 - j;
                if idx < known {
                    pred += self.model.ma[j] * self.innovations[idx];
                }
            }
            future.push(pred);
        }
        let forecast = last + future.iter().sum::<f64>();
        if !forecast.is_finite() || forecast.abs() > 1e9 * (1.0 + last.abs()) {
            return last;
        }
        forecast
    }
}

/// One-shot forecast of the value `lookahead` steps past the series end.
/// Returns the forecast and whether the persistence fallback engaged.
pub fn arma_forecast(
    values: &[f64],
    p: usize,
    q: usize,
    lookahead: usize,
) -> Result<(f64, bool), ForecastError> {
    let forecaster = ArmaForecaster::new(values, values.len(), p, q)?;
    let forecast = forecaster.forecast_from(values.len() - 1, lookahead);
    Ok((forecast, forecaster.fallback))
}
