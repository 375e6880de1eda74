//! Affine denoiser fitted by ridge / minimum-norm least squares, and the
//! Gaussian it generates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{centered, column_means, symmetrized};
use crate::model::{Covariance, GaussianSpec, TrainingSet};
use crate::Scalar;

/// `Y = theta0 + theta1 X`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDenoiser<T: Scalar> {
    pub theta0: DVector<T>,
    pub theta1: DMatrix<T>,
}

impl<T: Scalar> LinearDenoiser<T> {
    /// Apply to every row of `inputs` (samples x dimension).
    pub fn apply(&self, inputs: &DMatrix<T>) -> DMatrix<T> {
        let mut out = inputs * self.theta1.transpose();
        for mut row in out.row_iter_mut() {
            row += self.theta0.transpose();
        }
        out
    }
}

/// Sampling law of the generator input, `N(mu_X, sigma_X^2 I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorInit<T: Scalar> {
    pub mu_x: DVector<T>,
    pub sigma_x_sq: T,
}

/// Fit the denoiser on a training set. See [`fit_regression`].
pub fn fit<T: Scalar>(ts: &TrainingSet<T>, ridge_hat: T) -> Result<LinearDenoiser<T>> {
    fit_regression(&ts.noisy, &ts.clean, ridge_hat)
}

/// Regress `targets` on `inputs` (both n x d) with an intercept.
///
/// With `x`, `y` the column-centred matrices, `theta1^T = (x^T x + n R I)^{-1} x^T y`
/// for `R = ridge_hat > 0`. For `R = 0` the minimum-norm solution is used; it
/// comes from the Cholesky factor of `x^T x` when that is well conditioned and
/// from an SVD of `x` with cutoff `max(n, d) eps s_max` otherwise.
pub fn fit_regression<T: Scalar>(inputs: &DMatrix<T>, targets: &DMatrix<T>, ridge_hat: T) -> Result<LinearDenoiser<T>> {
    let (n, d) = inputs.shape();
    if targets.nrows() != n {
        return Err(Error::ShapeMismatch(format!("{n} inputs but {} targets", targets.nrows())));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { n });
    }
    if !(ridge_hat >= T::zero()) {
        return Err(Error::config("ridge_hat", "must be >= 0"));
    }
    let x_mean = column_means(inputs);
    let y_mean = column_means(targets);
    let x = centered(inputs, &x_mean);
    let y = centered(targets, &y_mean);

    let theta1_t = if ridge_hat > T::zero() {
        let mut gram = x.tr_mul(&x);
        let shift = T::of_usize(n) * ridge_hat;
        for i in 0..d {
            gram[(i, i)] += shift;
        }
        let rhs = x.tr_mul(&y);
        match gram.cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => return Err(Error::NotPositiveDefinite),
        }
    } else {
        ridgeless(&x, &y)?
    };

    let theta1 = theta1_t.transpose();
    let theta0 = &y_mean - &theta1 * &x_mean;
    Ok(LinearDenoiser { theta0, theta1 })
}

fn ridgeless<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<DMatrix<T>> {
    let (n, d) = x.shape();
    if n > d + 1 {
        let gram = x.tr_mul(x);
        if let Some(chol) = gram.cholesky() {
            let l = chol.l_dirty();
            let (lo, hi) = (0..d).fold((T::infinity(), T::zero()), |(lo, hi), i| {
                let v = l[(i, i)].abs();
                (lo.min(v), hi.max(v))
            });
            // cond(x^T x) = (hi/lo)^2; switch to the SVD well before it bites.
            let ratio = lo / hi;
            if ratio * ratio > T::of(1e3) * T::of_usize(n.max(d)) * T::EPSILON {
                return Ok(chol.solve(&x.tr_mul(y)));
            }
        }
    }
    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let cutoff = T::of_usize(n.max(d)) * T::EPSILON * s_max;
    svd.solve(y, cutoff).map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// `mu_X = e^{-T} Y_bar`, `sigma_X^2 = e^{-2T} (1/(n d)) sum_k |Y_k - Y_bar|^2 + Delta_T`.
pub fn generator_init<T: Scalar>(ts: &TrainingSet<T>, t: T) -> GeneratorInit<T> {
    let y_mean = column_means(&ts.clean);
    let y = centered(&ts.clean, &y_mean);
    let nd = T::of_usize(ts.n() * ts.d());
    let spread = y.norm_squared() / nd;
    GeneratorInit { mu_x: &y_mean * (-t).exp(), sigma_x_sq: (-(t + t)).exp() * spread + ts.delta_t }
}

/// Generated law: mean `theta0 + theta1 mu_X`, covariance `sigma_X^2 theta1 theta1^T`
/// (symmetrised before storage).
pub fn generated_distribution<T: Scalar>(den: &LinearDenoiser<T>, init: &GeneratorInit<T>) -> GaussianSpec<T> {
    let mean = &den.theta0 + &den.theta1 * &init.mu_x;
    let cov = &den.theta1 * den.theta1.transpose() * init.sigma_x_sq;
    GaussianSpec { mean, covariance: Covariance::Full(symmetrized(&cov)) }
}

/// `m` draws from `g`. Full covariances are factored by a symmetric
/// eigendecomposition; eigenvalues in `[-1e-10 lambda_max, 0)` are clamped
/// to zero, anything more negative is rejected.
pub fn sample_generated<T: Scalar, R: Rng + ?Sized>(g: &GaussianSpec<T>, m: usize, rng: &mut R) -> Result<DMatrix<T>> {
    let d = g.dim();
    let mut z = DMatrix::<T>::zeros(m, d);
    for i in 0..m {
        for j in 0..d {
            z[(i, j)] = T::standard_normal(rng);
        }
    }
    let mut out = match &g.covariance {
        Covariance::Isotropic(v) => {
            if *v < T::zero() {
                return Err(Error::IndefiniteCovariance { min_eigenvalue: v.as_f64() });
            }
            z * v.sqrt()
        }
        Covariance::Diagonal(v) => {
            if let Some(bad) = v.iter().find(|x| **x < T::zero()) {
                return Err(Error::IndefiniteCovariance { min_eigenvalue: bad.as_f64() });
            }
            let scale = v.map(|x| x.sqrt());
            let mut z = z;
            for (j, mut col) in z.column_iter_mut().enumerate() {
                col *= scale[j];
            }
            z
        }
        Covariance::Full(cov) => {
            let eig = symmetrized(cov).symmetric_eigen();
            let top = eig.eigenvalues.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
            let tol = T::of(1e-10) * top;
            let mut roots = eig.eigenvalues.clone();
            for v in roots.iter_mut() {
                if *v < -tol {
                    return Err(Error::IndefiniteCovariance { min_eigenvalue: v.as_f64() });
                }
                *v = v.max(T::zero()).sqrt();
            }
            // rows: z diag(sqrt(lambda)) Q^T
            let mut factor = eig.eigenvectors.transpose();
            for (i, mut row) in factor.row_iter_mut().enumerate() {
                row *= roots[i];
            }
            z * factor
        }
    };
    for mut row in out.row_iter_mut() {
        row += g.mean.transpose();
    }
    Ok(out)
}
