//! Multi-step linear-denoiser chain on Gaussian-mixture data.
//!
//! The forward pass is the exponential schedule
//! `x_t = sqrt(1 - beta_t) x_{t-1} + sqrt(lambda beta_t) Z` with
//! `beta_t = 1 - exp(-2 beta t / s)`. One affine denoiser is fitted per step
//! on the `(x_t, x_{t-1})` pairs, and generation runs the fitted maps from a
//! Gaussian fitted to `x_s` back down to `x_0`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::denoiser::{fit_regression, sample_generated, LinearDenoiser};
use crate::error::{Error, Result};
use crate::linalg::{centered, column_means, symmetrized};
use crate::model::{Covariance, GaussianSpec};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig<T> {
    /// Number of steps `s`.
    pub steps: usize,
    /// Schedule scale `beta`.
    pub beta: T,
    /// Noise scale `lambda`.
    pub lambda: T,
    /// Mixture components `C`.
    pub components: usize,
    pub mu0: T,
    /// Distance between neighbouring component means.
    pub spacing: T,
    /// Per-component standard deviation.
    pub comp_sigma: T,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for ChainConfig<T> {
    fn default() -> Self {
        Self {
            steps: 10,
            beta: T::of(0.3),
            lambda: T::one(),
            components: 1,
            mu0: T::of(0.5),
            spacing: T::one(),
            comp_sigma: T::of(0.1),
            n: 4000,
            d: 16,
            seed: 0,
        }
    }
}

impl<T: Scalar> ChainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::config("steps", "must be >= 1"));
        }
        if !(self.beta > T::zero()) || !self.beta.is_finite() {
            return Err(Error::config("beta", format!("must be finite and > 0, got {}", self.beta)));
        }
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(Error::config("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        if self.components < 1 {
            return Err(Error::config("components", "must be >= 1"));
        }
        if !(self.spacing > T::zero()) {
            return Err(Error::config("spacing", "must be > 0"));
        }
        if !(self.comp_sigma > T::zero()) {
            return Err(Error::config("comp_sigma", "must be > 0"));
        }
        if !self.mu0.is_finite() {
            return Err(Error::config("mu0", "must be finite"));
        }
        if self.n < 2 {
            return Err(Error::config("n", "must be >= 2"));
        }
        if self.d < 1 {
            return Err(Error::config("d", "must be >= 1"));
        }
        Ok(())
    }

    /// Mean of component `i`: `mu0 + (i - (C - 1)/2) spacing`.
    pub fn component_mean(&self, i: usize) -> T {
        let centre = T::of_usize(self.components - 1) * T::of(0.5);
        self.mu0 + (T::of_usize(i) - centre) * self.spacing
    }
}

/// How a generation step turns the denoiser output into the next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepSampling {
    /// Draw from the Gaussian approximation: denoiser mean plus the step's
    /// residual covariance.
    #[default]
    Gaussian,
    /// Use the denoiser mean only.
    Mean,
}

impl std::str::FromStr for StepSampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gaussian" => Ok(StepSampling::Gaussian),
            "mean" => Ok(StepSampling::Mean),
            other => Err(format!("unknown step sampling `{other}` (expected gaussian|mean)")),
        }
    }
}

/// Fitted chain. `denoisers[t - 1]` maps `x_t` to `x_{t-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel<T: Scalar> {
    pub denoisers: Vec<LinearDenoiser<T>>,
    /// Residual covariance of each step's fit, same indexing.
    pub residuals: Vec<DMatrix<T>>,
    /// Isotropic Gaussian fitted to the training `x_s`.
    pub terminal: GaussianSpec<T>,
}

impl<T: Scalar> ChainModel<T> {
    pub fn steps(&self) -> usize {
        self.denoisers.len()
    }
}

/// `beta_t = 1 - exp(-2 beta t / s)`; `t = 0` gives 0.
pub fn beta_schedule<T: Scalar>(t: usize, s: usize, beta: T) -> Result<T> {
    if s < 1 || t > s {
        return Err(Error::StepOutOfRange { t, s });
    }
    let x = -(beta + beta) * T::of_usize(t) / T::of_usize(s);
    // 1 - e^x without cancellation for small beta.
    Ok(-x.exp_m1())
}

/// `prod_{k <= t} (1 - beta_k) = exp(-beta t (t + 1) / s)`.
pub fn retained_fraction<T: Scalar>(t: usize, s: usize, beta: T) -> Result<T> {
    if s < 1 || t > s {
        return Err(Error::StepOutOfRange { t, s });
    }
    Ok((-beta * T::of_usize(t * (t + 1)) / T::of_usize(s)).exp())
}

/// Per-coordinate variance of `x_t` under the forward process.
pub fn marginal_variance<T: Scalar>(t: usize, config: &ChainConfig<T>) -> Result<T> {
    let p = retained_fraction(t, config.steps, config.beta)?;
    let c = T::of_usize(config.components);
    let v0 = config.comp_sigma * config.comp_sigma + config.spacing * config.spacing * (c * c - T::one()) / T::of(12.0);
    Ok(p * v0 + config.lambda * (T::one() - p))
}

/// `lambda^2 beta_t^2`, the scale of the step-`t` variance error.
pub fn predicted_step_scaling<T: Scalar>(t: usize, s: usize, lambda: T, beta: T) -> Result<T> {
    if t < 1 {
        return Err(Error::StepOutOfRange { t, s });
    }
    let b = beta_schedule(t, s, beta)?;
    Ok(lambda * lambda * b * b)
}

/// `rows` draws from the equal-weight mixture.
pub fn gmm_sample<T: Scalar, R: Rng + ?Sized>(config: &ChainConfig<T>, rows: usize, rng: &mut R) -> Result<DMatrix<T>> {
    config.validate()?;
    let mut out = DMatrix::zeros(rows, config.d);
    for i in 0..rows {
        let k = rng.random_range(0..config.components);
        let mean = config.component_mean(k);
        for j in 0..config.d {
            out[(i, j)] = mean + config.comp_sigma * T::standard_normal(rng);
        }
    }
    Ok(out)
}

/// `x_0, ..., x_s` from the forward recursion.
pub fn forward_trajectory<T: Scalar, R: Rng + ?Sized>(
    x0: &DMatrix<T>,
    config: &ChainConfig<T>,
    rng: &mut R,
) -> Result<Vec<DMatrix<T>>> {
    config.validate()?;
    if x0.ncols() != config.d {
        return Err(Error::ShapeMismatch(format!("x0 has d = {}, config has d = {}", x0.ncols(), config.d)));
    }
    let s = config.steps;
    let mut out = Vec::with_capacity(s + 1);
    out.push(x0.clone());
    for t in 1..=s {
        let b = beta_schedule(t, s, config.beta)?;
        let keep = (T::one() - b).sqrt();
        let scale = (config.lambda * b).sqrt();
        let prev = &out[t - 1];
        let mut next = prev * keep;
        for i in 0..next.nrows() {
            for j in 0..next.ncols() {
                next[(i, j)] += scale * T::standard_normal(rng);
            }
        }
        out.push(next);
    }
    Ok(out)
}

/// Fit one denoiser per step plus the terminal Gaussian.
pub fn fit_chain<T: Scalar>(trajectory: &[DMatrix<T>], ridge_hat: T) -> Result<ChainModel<T>> {
    if trajectory.len() < 2 {
        return Err(Error::config("trajectory", "needs at least x_0 and x_1"));
    }
    let s = trajectory.len() - 1;
    let mut denoisers = Vec::with_capacity(s);
    let mut residuals = Vec::with_capacity(s);
    for t in 1..=s {
        let den = fit_regression(&trajectory[t], &trajectory[t - 1], ridge_hat)?;
        let resid = &trajectory[t - 1] - den.apply(&trajectory[t]);
        let n = T::of_usize(resid.nrows());
        residuals.push(symmetrized(&(resid.tr_mul(&resid) / n)));
        denoisers.push(den);
    }
    let last = &trajectory[s];
    let mean = column_means(last);
    let spread = centered(last, &mean).norm_squared() / T::of_usize(last.nrows() * last.ncols());
    let terminal = GaussianSpec { mean, covariance: Covariance::Isotropic(spread) };
    Ok(ChainModel { denoisers, residuals, terminal })
}

/// Run the reverse pass from `terminal` down to `x_0` for `m` samples.
pub fn generate_chain<T: Scalar, R: Rng + ?Sized>(
    model: &ChainModel<T>,
    m: usize,
    sampling: StepSampling,
    rng: &mut R,
) -> Result<DMatrix<T>> {
    let mut x = sample_generated(&model.terminal, m, rng)?;
    let d = model.terminal.dim();
    for t in (1..=model.steps()).rev() {
        x = model.denoisers[t - 1].apply(&x);
        if sampling == StepSampling::Gaussian {
            let noise =
                GaussianSpec { mean: DVector::zeros(d), covariance: Covariance::Full(model.residuals[t - 1].clone()) };
            x += sample_generated(&noise, m, rng)?;
        }
    }
    Ok(x)
}

/// Law of a step's output when its input is `input`:
/// mean `theta0 + theta1 m`, covariance `theta1 S theta1^T`.
pub fn step_distribution<T: Scalar>(den: &LinearDenoiser<T>, input: &GaussianSpec<T>) -> GaussianSpec<T> {
    let mean = &den.theta0 + &den.theta1 * &input.mean;
    let cov = &den.theta1 * input.covariance_matrix() * den.theta1.transpose();
    GaussianSpec { mean, covariance: Covariance::Full(symmetrized(&cov)) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::column_variances;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn cfg() -> ChainConfig<f64> {
        ChainConfig { n: 3000, d: 4, ..ChainConfig::default() }
    }

    #[test]
    fn schedule_values() {
        assert_eq!(beta_schedule(0, 5, 0.3).unwrap(), 0.0);
        assert_relative_eq!(beta_schedule(7, 7, 0.01).unwrap(), 0.019_801_326_693_244_7, max_relative = 1e-12);
        for s in [1, 3, 10] {
            for t in 1..=s {
                let exact = beta_schedule(t, s, 1e-4).unwrap();
                let linear = 2.0 * 1e-4 * t as f64 / s as f64;
                assert!((exact / linear - 1.0).abs() < 1e-3);
            }
        }
        assert!(matches!(beta_schedule(6, 5, 0.3), Err(Error::StepOutOfRange { t: 6, s: 5 })));
    }

    #[test]
    fn schedule_telescopes() {
        for s in 1..=50 {
            let beta = 0.3;
            let prod: f64 = (1..=s).map(|t| 1.0 - beta_schedule(t, s, beta).unwrap()).product();
            assert!((prod - (-beta * (s as f64 + 1.0)).exp()).abs() < 1e-12);
            assert_relative_eq!(retained_fraction(s, s, beta).unwrap(), prod, max_relative = 1e-12);
        }
    }

    #[test]
    fn step_scaling() {
        let a = predicted_step_scaling(5, 5, 1.0, 0.3).unwrap();
        let b = predicted_step_scaling(11, 11, 1.0, 0.3).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
        assert_relative_eq!(a, (1.0 - (-0.6f64).exp()).powi(2), max_relative = 1e-14);
        let one = predicted_step_scaling(1, 10, 1.0, 1e-3).unwrap();
        let two = predicted_step_scaling(1, 20, 1.0, 1e-3).unwrap();
        assert_relative_eq!(two / one, 0.25, max_relative = 1e-3);
        assert_eq!(predicted_step_scaling(3, 4, 0.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn component_layout() {
        let c = ChainConfig::<f64> { components: 2, ..cfg() };
        assert_eq!(c.component_mean(0), 0.0);
        assert_eq!(c.component_mean(1), 1.0);
        let c = ChainConfig::<f64> { components: 1, ..cfg() };
        assert_eq!(c.component_mean(0), 0.5);
    }

    #[test]
    fn gmm_moments() {
        let c = ChainConfig::<f64> { components: 3, n: 20_000, ..cfg() };
        let x = gmm_sample(&c, c.n, &mut stream(3)).unwrap();
        let v0 = marginal_variance(0, &c).unwrap();
        let se = (v0 / c.n as f64).sqrt();
        for m in column_means(&x).iter() {
            assert!((m - 0.5).abs() < 4.0 * se);
        }
    }

    #[test]
    fn noiseless_trajectory_contracts() {
        let c = ChainConfig::<f64> { lambda: 0.0, steps: 4, ..cfg() };
        let x0 = gmm_sample(&c, 50, &mut stream(1)).unwrap();
        let traj = forward_trajectory(&x0, &c, &mut stream(2)).unwrap();
        assert_eq!(traj.len(), 5);
        let keep = retained_fraction(4, 4, c.beta).unwrap().sqrt();
        assert!((&traj[4] - &x0 * keep).amax() < 1e-12);
    }

    #[test]
    fn noiseless_fit_inverts_each_step() {
        let c = ChainConfig::<f64> { lambda: 0.0, steps: 3, n: 200, ..cfg() };
        let x0 = gmm_sample(&c, c.n, &mut stream(4)).unwrap();
        let traj = forward_trajectory(&x0, &c, &mut stream(5)).unwrap();
        let model = fit_chain(&traj, 0.0).unwrap();
        for t in 1..=3 {
            let inv = 1.0 / (1.0 - beta_schedule(t, 3, c.beta).unwrap()).sqrt();
            let diff = &model.denoisers[t - 1].theta1 - DMatrix::identity(c.d, c.d) * inv;
            assert!(diff.amax() < 1e-5);
        }
        let out = generate_chain(&model, 5000, StepSampling::Mean, &mut stream(6)).unwrap();
        // The terminal law is isotropic, so compare against the coordinate-averaged variance.
        let (m0, v0) = (column_means(&x0), column_variances(&x0).mean());
        let (m1, v1) = (column_means(&out), column_variances(&out));
        for j in 0..c.d {
            let se = (v0 / 5000.0).sqrt();
            assert!((m0[j] - m1[j]).abs() < 4.0 * se);
            assert!((v0 - v1[j]).abs() < 4.0 * v0 * (2.0 / 5000.0f64).sqrt());
        }
    }

    #[test]
    fn terminal_variance_matches_marginal() {
        let c = ChainConfig::<f64> { components: 2, steps: 6, n: 8000, ..cfg() };
        let x0 = gmm_sample(&c, c.n, &mut stream(8)).unwrap();
        let traj = forward_trajectory(&x0, &c, &mut stream(9)).unwrap();
        let model = fit_chain(&traj, 0.0).unwrap();
        let Covariance::Isotropic(v) = model.terminal.covariance else { panic!() };
        let expect = marginal_variance(6, &c).unwrap();
        assert!((v / expect - 1.0).abs() < 0.05, "{v} vs {expect}");
    }

    #[test]
    fn per_step_variance_increment() {
        let c = ChainConfig::<f64> { steps: 5, n: 20_000, d: 2, ..cfg() };
        let x0 = gmm_sample(&c, c.n, &mut stream(10)).unwrap();
        let traj = forward_trajectory(&x0, &c, &mut stream(11)).unwrap();
        for t in 1..=5 {
            let b = beta_schedule(t, 5, c.beta).unwrap();
            let inc = &traj[t] - &traj[t - 1] * (1.0 - b).sqrt();
            let v = column_variances(&inc);
            let se = c.lambda * b * (2.0 / c.n as f64).sqrt();
            for j in 0..c.d {
                assert!((v[j] - c.lambda * b).abs() < 4.0 * se);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let c = ChainConfig::<f64> { steps: 3, n: 300, ..cfg() };
        let x0 = gmm_sample(&c, c.n, &mut stream(12)).unwrap();
        let traj = forward_trajectory(&x0, &c, &mut stream(13)).unwrap();
        let model = fit_chain(&traj, 0.0).unwrap();
        let a = generate_chain(&model, 100, StepSampling::Gaussian, &mut stream(14)).unwrap();
        let b = generate_chain(&model, 100, StepSampling::Gaussian, &mut stream(14)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::<f64> { steps: 0, ..cfg() }.validate().is_err());
        assert!(ChainConfig::<f64> { beta: 0.0, ..cfg() }.validate().is_err());
        assert!(ChainConfig::<f64> { components: 0, ..cfg() }.validate().is_err());
        assert!(ChainConfig::<f64> { comp_sigma: -1.0, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }
}
