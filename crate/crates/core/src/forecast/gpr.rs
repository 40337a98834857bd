//! Gaussian-process regression with the composite kernel
//! `k(a, b) = sigma_k^2 + a.b + (1 + |a-b|^2 / 2)^-1 + delta(a, b)`:
//! a dot-product term for non-stationary trends, a rational-quadratic term
//! (length scale and shape both 1), and a unit white term on the training
//! diagonal. `alpha` adds diagonal jitter on top of the white term; no
//! hyperparameters are optimized at fit time.
//!
//! Multi-output targets share the one kernel: the Cholesky factor is solved
//! jointly against the whole target matrix, which equals independent GPs
//! with a common kernel.

use nalgebra::{Cholesky, DMatrix};

use super::ForecastError;

#[derive(Debug, Clone)]
pub struct GprModel {
    x_train: DMatrix<f64>,
    /// `(K + (1 + alpha) I)^-1 Y`.
    dual: DMatrix<f64>,
    sigma_k: f64,
    /// Jitter that actually factorized (grows by 10x per retry).
    pub alpha_used: f64,
    pub retries: usize,
}

fn kernel_value(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize, sigma_k: f64) -> f64 {
    let mut dot = 0.0;
    let mut d2 = 0.0;
    for c in 0..a.ncols() {
        let av = a[(i, c)];
        let bv = b[(j, c)];
        dot += av * bv;
        let diff = av - bv;
        d2 += diff * diff;
    }
    sigma_k * sigma_k + dot + 1.0 / (1.0 + d2 / 2.0)
}

/// Cross-kernel matrix (no white-noise term).
pub fn kernel_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, sigma_k: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| kernel_value(a, i, b, j, sigma_k))
}

/// Training kernel: cross-kernel of the inputs with themselves plus the
/// unit white term on the diagonal.
pub fn training_kernel(x: &DMatrix<f64>, sigma_k: f64) -> DMatrix<f64> {
    let mut k = kernel_matrix(x, x, sigma_k);
    for i in 0..k.nrows() {
        k[(i, i)] += 1.0;
    }
    k
}

pub fn gpr_fit(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    alpha: f64,
    sigma_k: f64,
) -> Result<GprModel, ForecastError> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(ForecastError::Shape(format!(
            "{n} inputs vs {} target rows",
            y.nrows()
        )));
    }
    if n == 0 {
        return Err(ForecastError::InsufficientData("empty training set".into()));
    }
    if !(alpha > 0.0) {
        return Err(ForecastError::Config("alpha must be positive".into()));
    }
    let base = training_kernel(x, sigma_k);
    let mut jitter = alpha;
    for attempt in 0..4 {
        let mut k = base.clone();
        for i in 0..n {
            k[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            return Ok(GprModel {
                x_train: x.clone(),
                dual: chol.solve(y),
                sigma_k,
                alpha_used: jitter,
                retries: attempt,
            });
        }
        jitter *= 10.0;
    }
    Err(ForecastError::Cholesky(4))
}

/// Posterior mean at new inputs: `K*' (K + (1 + alpha) I)^-1 Y`.
pub fn gpr_predict(model: &GprModel, x_new: &DMatrix<f64>) -> DMatrix<f64> {
    let k_star = kernel_matrix(&model.x_train, x_new, model.sigma_k);
    k_star.transpose() * &model.dual
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(6, 3, |_, _| rng.gen_range(-2.0..2.0));
        let k = kernel_matrix(&x, &x, 0.01);
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
    }

    #[test]
    fn training_kernel_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let n = rng.gen_range(3..12);
            let d = rng.gen_range(1..6);
            let x = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-3.0..3.0));
            let k = training_kernel(&x, 0.001);
            let eigen = SymmetricEigen::new(k);
            let min = eigen.eigenvalues.min();
            assert!(min > -1e-8, "min eigenvalue {min}");
        }
    }

    #[test]
    fn near_interpolation_at_a_training_point() {
        // Single-point fixture: the unit white term makes interpolation
        // inexact by y * (1 + alpha) / (k(x,x) + 1 + alpha), which for this
        // scale sits well under the documented 1e-2 tolerance.
        let x = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let y = DMatrix::from_row_slice(1, 1, &[0.2]);
        let model = gpr_fit(&x, &y, 1e-6, 0.01).unwrap();
        let pred = gpr_predict(&model, &x);
        let err = (pred[(0, 0)] - 0.2f64).abs();
        assert!(err < 1e-2, "training-point error {err}");
    }

    #[test]
    fn duplicated_target_column_duplicates_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(10, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y1 = DMatrix::from_fn(10, 1, |i, _| x[(i, 0)] - x[(i, 1)]);
        let y2 = DMatrix::from_fn(10, 2, |i, _| x[(i, 0)] - x[(i, 1)]);
        let x_new = DMatrix::from_fn(4, 2, |_, _| rng.gen_range(-1.0..1.0));
        let p1 = gpr_predict(&gpr_fit(&x, &y1, 1e-4, 0.01).unwrap(), &x_new);
        let p2 = gpr_predict(&gpr_fit(&x, &y2, 1e-4, 0.01).unwrap(), &x_new);
        for i in 0..4 {
            assert_eq!(p1[(i, 0)], p2[(i, 0)]);
            assert_eq!(p2[(i, 0)], p2[(i, 1)]);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = DMatrix::from_fn(12, 3, |_, _| rng.gen_range(-1.0..1.0));
        let y = DMatrix::from_fn(12, 1, |i, _| x[(i, 2)]);
        let a = gpr_predict(&gpr_fit(&x, &y, 1e-2, 0.001).unwrap(), &x);
        let b = gpr_predict(&gpr_fit(&x, &y, 1e-2, 0.001).unwrap(), &x);
        assert_eq!(a, b);
    }
}
