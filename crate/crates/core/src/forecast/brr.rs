//! Bayesian ridge regression with fixed precisions: noise precision
//! `alpha` and weight-prior precision `lambda` give the closed-form
//! posterior mean `m = (X'X + (lambda/alpha) I)^-1 X'y` on centered data.
//! The intercept is handled by centering and never penalized.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::ForecastError;

#[derive(Debug, Clone)]
pub struct BrrModel {
    pub weights: DVector<f64>,
    pub x_mean: DVector<f64>,
    pub y_mean: f64,
    /// Set when the normal equations needed the 1e-10 diagonal jitter.
    pub jittered: bool,
}

pub fn brr_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    lambda: f64,
) -> Result<BrrModel, ForecastError> {
    let n = x.nrows();
    let d = x.ncols();
    if y.len() != n {
        return Err(ForecastError::Shape(format!(
            "{n} feature rows vs {} targets",
            y.len()
        )));
    }
    if n == 0 || d == 0 {
        return Err(ForecastError::InsufficientData("empty design".into()));
    }
    if !(alpha > 0.0) || !(lambda >= 0.0) {
        return Err(ForecastError::Config(
            "alpha must be positive and lambda non-negative".into(),
        ));
    }
    let x_mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
    let y_mean = y.sum() / n as f64;
    let xc = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - x_mean[j]);
    let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);

    let ridge = lambda / alpha;
    let gram = xc.transpose() * &xc + DMatrix::<f64>::identity(d, d) * ridge;
    let rhs = xc.transpose() * &yc;
    let (weights, jittered) = match Cholesky::new(gram.clone()) {
        Some(chol) => (chol.solve(&rhs), false),
        None => {
            let jittered_gram = gram + DMatrix::<f64>::identity(d, d) * 1e-10;
            let chol = Cholesky::new(jittered_gram)
                .ok_or(ForecastError::Cholesky(2))?;
            (chol.solve(&rhs), true)
        }
    };
    Ok(BrrModel {
        weights,
        x_mean,
        y_mean,
        jittered,
    })
}

pub fn brr_predict(model: &BrrModel, x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(x.nrows(), |i, _| {
        let mut acc = model.y_mean;
        for j in 0..x.ncols() {
            acc += (x[(i, j)] - model.x_mean[j]) * model.weights[j];
        }
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Closed-form ridge oracle via hand-rolled Gauss-Jordan inversion,
    /// independent of the Cholesky solve path.
    fn ridge_oracle(x: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> DVector<f64> {
        let n = x.nrows();
        let d = x.ncols();
        let x_mean = DVector::from_fn(d, |j, _| x.column(j).sum() / n as f64);
        let y_mean = y.sum() / n as f64;
        let xc = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - x_mean[j]);
        let yc = DVector::from_fn(n, |i, _| y[i] - y_mean);
        let a = xc.transpose() * &xc + DMatrix::<f64>::identity(d, d) * ridge;
        let b = xc.transpose() * &yc;

        // Gauss-Jordan with partial pivoting on [A | b].
        let mut aug = DMatrix::zeros(d, d + 1);
        aug.view_mut((0, 0), (d, d)).copy_from(&a);
        aug.view_mut((0, d), (d, 1)).copy_from(&b);
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&i, &j| aug[(i, col)].abs().total_cmp(&aug[(j, col)].abs()))
                .unwrap();
            aug.swap_rows(col, pivot);
            let p = aug[(col, col)];
            for j in col..=d {
                aug[(col, j)] /= p;
            }
            for i in 0..d {
                if i != col {
                    let factor = aug[(i, col)];
                    for j in col..=d {
                        aug[(i, j)] -= factor * aug[(col, j)];
                    }
                }
            }
        }
        DVector::from_fn(d, |i, _| aug[(i, d)])
    }

    #[test]
    fn matches_closed_form_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = DMatrix::from_fn(5, 2, |_, _| rng.gen_range(-3.0..3.0));
        let y = DVector::from_fn(5, |i, _| 2.0 * x[(i, 0)] - x[(i, 1)] + rng.gen_range(-0.1..0.1));
        for (alpha, lambda) in [(1.0, 1.0), (10.0, 1e-3), (1e-3, 100.0)] {
            let model = brr_fit(&x, &y, alpha, lambda).unwrap();
            let oracle = ridge_oracle(&x, &y, lambda / alpha);
            let err = (&model.weights - &oracle).abs().max();
            assert!(err < 1e-8, "alpha={alpha} lambda={lambda}: {err}");
        }
    }

    #[test]
    fn zero_ridge_on_full_rank_gives_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let x = DMatrix::from_fn(20, 3, |_, _| rng.gen_range(-2.0..2.0));
        let y = DVector::from_fn(20, |i, _| x[(i, 0)] - 3.0 * x[(i, 2)] + 0.5);
        // lambda/alpha -> 0: exact interpolation of a noiseless linear law.
        let model = brr_fit(&x, &y, 1.0, 0.0).unwrap();
        let pred = brr_predict(&model, &x);
        assert!((&pred - &y).abs().max() < 1e-9);
    }

    #[test]
    fn huge_ridge_shrinks_to_train_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let x = DMatrix::from_fn(15, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(15, |i, _| 4.0 * x[(i, 0)] + rng.gen_range(-0.2..0.2));
        let model = brr_fit(&x, &y, 1e-6, 1e9).unwrap();
        assert!(model.weights.abs().max() < 1e-6);
        let pred = brr_predict(&model, &x);
        let mean = y.sum() / 15.0;
        assert!((pred.map(|p| p - mean)).abs().max() < 1e-4);
    }

    #[test]
    fn rank_deficient_design_uses_jitter() {
        // Duplicate column makes X'X singular; with ridge 0 the jitter path
        // must engage and still return finite weights.
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let base = DMatrix::from_fn(10, 1, |_, _| rng.gen_range(-1.0..1.0f64));
        let x = DMatrix::from_fn(10, 2, |i, _| base[(i, 0)]);
        let y = DVector::from_fn(10, |i, _| base[(i, 0)]);
        let model = brr_fit(&x, &y, 1.0, 0.0).unwrap();
        assert!(model.jittered);
        assert!(model.weights.iter().all(|w| w.is_finite()));
    }
}
