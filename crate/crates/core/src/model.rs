//! Experiment parameters, clean-data sampling, forward Ornstein-Uhlenbeck
//! noising and the exact OU marginal of an empirical distribution.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::Scalar;

/// How the (noisy, clean) training pairs are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataModel {
    /// Draw clean rows from N(mu 1, sigma^2 I) and push them through the
    /// forward OU kernel: `X = e^{-T} Y + sqrt(Delta_T) Z`. The generator is
    /// initialised from empirical moments of the clean rows.
    #[default]
    ForwardNoising,
    /// The regression model the closed-form KL is derived under:
    /// `X ~ N(e^{-T} mu, sigma_X^2 I)`, `Y = e^T X + sqrt(Delta_T) Z`, with the
    /// generator initialised from the population `(mu_X, sigma_X^2)`.
    LinearGaussian,
}

impl std::str::FromStr for DataModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "forward" | "forward-noising" => Ok(DataModel::ForwardNoising),
            "linear" | "linear-gaussian" => Ok(DataModel::LinearGaussian),
            other => Err(format!("unknown data model `{other}` (expected forward|linear)")),
        }
    }
}

/// Noise bookkeeping shared by the simulator and the theory engine.
///
/// `lambda = lambda_hat sigma^2 e^{-2T}`, `Delta_T = lambda (1 - e^{-2T})`,
/// `sigma_X^2 = e^{-2T} sigma^2 + Delta_T`. These are always derived from the
/// three stored values, never set independently.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseLevel<T> {
    pub t: T,
    pub lambda_hat: T,
    pub sigma_sq: T,
}

impl<T: Scalar> NoiseLevel<T> {
    pub fn new(t: T, lambda_hat: T, sigma_sq: T) -> Self {
        Self { t, lambda_hat, sigma_sq }
    }

    /// `delta_T = 1 - e^{-2T}`.
    pub fn unit_delta(&self) -> T {
        T::one() - (-(self.t + self.t)).exp()
    }

    pub fn lambda(&self) -> T {
        self.lambda_hat * self.sigma_sq * (-(self.t + self.t)).exp()
    }

    pub fn delta_t(&self) -> T {
        self.lambda() * self.unit_delta()
    }

    pub fn sigma_x_sq(&self) -> T {
        (-(self.t + self.t)).exp() * self.sigma_sq + self.delta_t()
    }
}

/// All scalars defining one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig<T> {
    pub n: usize,
    pub d: usize,
    /// Diffusion time cut-off T.
    pub t: T,
    pub lambda_hat: T,
    pub sigma: T,
    /// Per-coordinate mean; the mean vector is `mu * 1_d`.
    pub mu: T,
    pub ridge_hat: T,
    pub seed: u64,
    pub data_model: DataModel,
}

impl<T: Scalar> ModelConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::config("n", "must be >= 1"));
        }
        if self.d < 1 {
            return Err(Error::config("d", "must be >= 1"));
        }
        if !(self.t >= T::zero()) {
            return Err(Error::config("T", format!("must be >= 0, got {}", self.t)));
        }
        if !(self.lambda_hat >= T::zero()) {
            return Err(Error::config("lambda_hat", format!("must be >= 0, got {}", self.lambda_hat)));
        }
        if !(self.sigma > T::zero()) {
            return Err(Error::config("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        if !(self.ridge_hat >= T::zero()) {
            return Err(Error::config("ridge_hat", format!("must be >= 0, got {}", self.ridge_hat)));
        }
        if !self.mu.is_finite() {
            return Err(Error::config("mu", "must be finite"));
        }
        Ok(())
    }

    /// `alpha = d / n`.
    pub fn alpha(&self) -> T {
        T::of_usize(self.d) / T::of_usize(self.n)
    }

    pub fn noise(&self) -> NoiseLevel<T> {
        NoiseLevel::new(self.t, self.lambda_hat, self.sigma * self.sigma)
    }

    pub fn lambda(&self) -> T {
        self.noise().lambda()
    }

    pub fn delta_t(&self) -> T {
        self.noise().delta_t()
    }

    pub fn mean_vector(&self) -> DVector<T> {
        DVector::from_element(self.d, self.mu)
    }
}

/// Clean matrix Y and noisy matrix X (both n x d) plus the Delta_T used.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T: Scalar> {
    pub clean: DMatrix<T>,
    pub noisy: DMatrix<T>,
    pub delta_t: T,
}

impl<T: Scalar> TrainingSet<T> {
    pub fn n(&self) -> usize {
        self.clean.nrows()
    }

    pub fn d(&self) -> usize {
        self.clean.ncols()
    }
}

/// Covariance of a [`GaussianSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance<T: Scalar> {
    Isotropic(T),
    Diagonal(DVector<T>),
    Full(DMatrix<T>),
}

/// Multivariate normal, used for both the sampling and the generated law.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec<T: Scalar> {
    pub mean: DVector<T>,
    pub covariance: Covariance<T>,
}

impl<T: Scalar> GaussianSpec<T> {
    /// Checked constructor.
    pub fn new(mean: DVector<T>, covariance: Covariance<T>) -> Result<Self> {
        let d = mean.len();
        match &covariance {
            Covariance::Isotropic(v) => {
                if !(*v >= T::zero()) {
                    return Err(Error::config("covariance", "isotropic variance must be >= 0"));
                }
            }
            Covariance::Diagonal(v) => {
                if v.len() != d {
                    return Err(Error::ShapeMismatch(format!("diagonal of length {} for mean of length {d}", v.len())));
                }
                if v.iter().any(|x| !(*x >= T::zero())) {
                    return Err(Error::config("covariance", "diagonal variances must be >= 0"));
                }
            }
            Covariance::Full(m) => {
                if m.nrows() != d || m.ncols() != d {
                    return Err(Error::ShapeMismatch(format!(
                        "{}x{} covariance for mean of length {d}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                let scale = crate::linalg::max_abs(m).max(T::tiny());
                let tol = T::of(1e-8) * scale;
                if crate::linalg::max_abs(&(m - m.transpose())) > tol {
                    return Err(Error::config("covariance", "full covariance is not symmetric"));
                }
                let eig = m.clone().symmetric_eigenvalues();
                let top = eig.max();
                let bottom = eig.min();
                if bottom < -T::of(1e-8) * top.abs().max(T::tiny()) {
                    return Err(Error::IndefiniteCovariance { min_eigenvalue: bottom.as_f64() });
                }
            }
        }
        Ok(Self { mean, covariance })
    }

    pub fn isotropic(mean: DVector<T>, variance: T) -> Self {
        Self { mean, covariance: Covariance::Isotropic(variance) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Dense covariance matrix.
    pub fn covariance_matrix(&self) -> DMatrix<T> {
        let d = self.dim();
        match &self.covariance {
            Covariance::Isotropic(v) => DMatrix::from_diagonal_element(d, d, *v),
            Covariance::Diagonal(v) => DMatrix::from_diagonal(v),
            Covariance::Full(m) => m.clone(),
        }
    }
}

fn normal_matrix<T: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<T> {
    // Row by row so that sample k always consumes the same d draws.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = T::standard_normal(rng);
        }
    }
    m
}

/// n rows drawn i.i.d. from N(mu 1_d, sigma^2 I_d).
pub fn sample_clean<T: Scalar, R: Rng + ?Sized>(config: &ModelConfig<T>, rng: &mut R) -> Result<DMatrix<T>> {
    config.validate()?;
    let mut m = normal_matrix::<T, R>(config.n, config.d, rng);
    m.apply(|v| *v = config.mu + config.sigma * *v);
    Ok(m)
}

/// Forward OU noising: `noisy_k = e^{-T} clean_k + sqrt(Delta_T) z_k`.
pub fn add_noise<T: Scalar, R: Rng + ?Sized>(
    clean: &DMatrix<T>,
    t: T,
    lambda: T,
    rng: &mut R,
) -> Result<TrainingSet<T>> {
    if !(t >= T::zero()) {
        return Err(Error::config("T", "must be >= 0"));
    }
    if !(lambda >= T::zero()) {
        return Err(Error::config("lambda", "must be >= 0"));
    }
    let decay = (-t).exp();
    let delta_t = lambda * (T::one() - (-(t + t)).exp());
    let scale = delta_t.sqrt();
    let z = normal_matrix::<T, R>(clean.nrows(), clean.ncols(), rng);
    let noisy = clean * decay + z * scale;
    Ok(TrainingSet { clean: clean.clone(), noisy, delta_t })
}

/// Draw a training set according to `config.data_model`.
pub fn sample_training_set<T: Scalar, R: Rng + ?Sized>(config: &ModelConfig<T>, rng: &mut R) -> Result<TrainingSet<T>> {
    config.validate()?;
    match config.data_model {
        DataModel::ForwardNoising => {
            let clean = sample_clean(config, rng)?;
            add_noise(&clean, config.t, config.lambda(), rng)
        }
        DataModel::LinearGaussian => {
            let noise = config.noise();
            let delta_t = noise.delta_t();
            let mu_x = (-config.t).exp() * config.mu;
            let sd_x = noise.sigma_x_sq().sqrt();
            let mut noisy = normal_matrix::<T, R>(config.n, config.d, rng);
            noisy.apply(|v| *v = mu_x + sd_x * *v);
            let z = normal_matrix::<T, R>(config.n, config.d, rng);
            let clean = &noisy * config.t.exp() + z * delta_t.sqrt();
            Ok(TrainingSet { clean, noisy, delta_t })
        }
    }
}

/// Exact OU marginal of the empirical measure on `points` (m x d) at time t:
/// `(1/m) sum_k N(x | x_k e^{-t}, (1 - e^{-2t}) I_d)`.
pub fn ou_marginal_density<T: Scalar>(points: &DMatrix<T>, t: T, x: &DVector<T>) -> Result<T> {
    if !(t > T::zero()) {
        return Err(Error::NonPositiveTime { t: t.as_f64() });
    }
    if points.nrows() == 0 {
        return Err(Error::EmptySet);
    }
    if points.ncols() != x.len() {
        return Err(Error::ShapeMismatch(format!("points have d = {}, x has d = {}", points.ncols(), x.len())));
    }
    let d = T::of_usize(x.len());
    let var = T::one() - (-(t + t)).exp();
    let decay = (-t).exp();
    let log_norm = -d * T::of(0.5) * (T::two_pi() * var).ln();
    let exponents: Vec<T> = points
        .row_iter()
        .map(|row| {
            let sq = row.iter().zip(x.iter()).map(|(&p, &xi)| (xi - p * decay).powi(2)).fold(T::zero(), |a, b| a + b);
            -sq / (var + var)
        })
        .collect();
    // log-sum-exp keeps high-dimensional densities from underflowing early.
    let top = exponents.iter().copied().fold(-T::infinity(), T::max);
    if top == -T::infinity() {
        return Ok(T::zero());
    }
    let sum = exponents.iter().map(|&e| (e - top).exp()).fold(T::zero(), |a, b| a + b);
    Ok((log_norm + top + (sum / T::of_usize(points.nrows())).ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{column_means, column_variances};
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn config(n: usize, d: usize) -> ModelConfig<f64> {
        ModelConfig {
            n,
            d,
            t: 2.0,
            lambda_hat: 0.1,
            sigma: 1.0,
            mu: 10.0,
            ridge_hat: 0.0,
            seed: 1,
            data_model: DataModel::ForwardNoising,
        }
    }

    #[test]
    fn derived_noise_quantities() {
        let c = config(10, 5);
        assert_eq!(c.alpha(), 0.5);
        let lambda = 0.1 * (-4.0f64).exp();
        assert_relative_eq!(c.lambda(), lambda, max_relative = 1e-15);
        assert_relative_eq!(c.delta_t(), lambda * (1.0 - (-4.0f64).exp()), max_relative = 1e-15);
        assert_relative_eq!(c.noise().sigma_x_sq(), (-4.0f64).exp() + c.delta_t(), max_relative = 1e-15);
    }

    #[test]
    fn validation() {
        assert!(config(0, 1).validate().is_err());
        assert!(config(1, 0).validate().is_err());
        assert!(ModelConfig { t: -1.0, ..config(2, 2) }.validate().is_err());
        assert!(ModelConfig { sigma: 0.0, ..config(2, 2) }.validate().is_err());
        assert!(ModelConfig { lambda_hat: -0.1, ..config(2, 2) }.validate().is_err());
        assert!(ModelConfig { ridge_hat: f64::NAN, ..config(2, 2) }.validate().is_err());
        assert!(config(1, 1).validate().is_ok());
    }

    #[test]
    fn tiny_sigma_concentrates_on_mean() {
        let c = ModelConfig { sigma: 1e-12, ..config(20, 3) };
        let y = sample_clean(&c, &mut stream(0)).unwrap();
        assert!(y.iter().all(|v| (v - 10.0).abs() < 1e-9));
    }

    #[test]
    fn clean_moments() {
        let c = ModelConfig { n: 1_000_000, d: 1, sigma: 1.0, ..config(1, 1) };
        let y = sample_clean(&c, &mut stream(5)).unwrap();
        let m = column_means(&y)[0];
        let v = column_variances(&y)[0];
        assert!((9.99..=10.01).contains(&m), "{m}");
        assert!((0.99..=1.01).contains(&v), "{v}");
    }

    #[test]
    fn sampling_is_reproducible() {
        let c = config(30, 4);
        let a = sample_training_set(&c, &mut stream(9)).unwrap();
        let b = sample_training_set(&c, &mut stream(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noise_edge_cases() {
        let y = sample_clean(&config(5, 3), &mut stream(2)).unwrap();
        let ts = add_noise(&y, 1.5, 0.0, &mut stream(3)).unwrap();
        assert_eq!(ts.delta_t, 0.0);
        assert_eq!(ts.noisy, &y * (-1.5f64).exp());
        let ts = add_noise(&y, 0.0, 7.0, &mut stream(3)).unwrap();
        assert_eq!(ts.delta_t, 0.0);
        assert_eq!(ts.noisy, y);
        let ts = add_noise(&y, 2.0, 1.0, &mut stream(3)).unwrap();
        assert_relative_eq!(ts.delta_t, 0.981_684_361_111_265_8, max_relative = 1e-12);
        assert!(add_noise(&y, -1.0, 1.0, &mut stream(3)).is_err());
        assert!(add_noise(&y, 1.0, -1.0, &mut stream(3)).is_err());
    }

    #[test]
    fn forward_noising_moments() {
        let c = ModelConfig { n: 20_000, d: 2, t: 0.7, lambda_hat: 0.5, mu: 1.0, sigma: 2.0, ..config(1, 1) };
        let ts = sample_training_set(&c, &mut stream(4)).unwrap();
        let (mc, mn) = (column_means(&ts.clean), column_means(&ts.noisy));
        let vn = column_variances(&ts.noisy);
        let var = (-1.4f64).exp() * 4.0 + ts.delta_t;
        let n = c.n as f64;
        for j in 0..2 {
            // The noisy mean differs from e^{-T} times the clean mean only by the noise average.
            assert!((mn[j] - (-0.7f64).exp() * mc[j]).abs() < 4.0 * (ts.delta_t / n).sqrt());
            assert!((vn[j] - var).abs() < 4.0 * var * (2.0 / n).sqrt());
        }
    }

    #[test]
    fn gaussian_spec_checks() {
        let m = DVector::from_vec(vec![0.0, 0.0]);
        assert!(GaussianSpec::new(m.clone(), Covariance::Isotropic(-1.0)).is_err());
        assert!(GaussianSpec::new(m.clone(), Covariance::Diagonal(DVector::from_vec(vec![1.0]))).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(GaussianSpec::new(m.clone(), Covariance::Full(asym)).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianSpec::new(m.clone(), Covariance::Full(indef)),
            Err(Error::IndefiniteCovariance { .. })
        ));
        let psd = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(GaussianSpec::new(m, Covariance::Full(psd)).is_ok());
    }

    #[test]
    fn ou_single_point() {
        let p = DMatrix::from_row_slice(1, 2, &[1.0, -2.0]);
        let x = DVector::from_vec(vec![0.3, 0.1]);
        let t: f64 = 0.4;
        let var = 1.0 - (-2.0 * t).exp();
        let e = (-t).exp();
        let sq = (0.3 - e).powi(2) + (0.1 + 2.0 * e).powi(2);
        let expect = (-sq / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var);
        assert_relative_eq!(ou_marginal_density(&p, t, &x).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn ou_two_points_by_hand() {
        let p = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let t = std::f64::consts::LN_2;
        // e^{-t} = 1/2, variance 3/4: two equal terms N(0 | +-1/2, 3/4).
        let var: f64 = 0.75;
        let one = (-0.25 / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        let got = ou_marginal_density(&p, t, &DVector::from_vec(vec![0.0])).unwrap();
        assert_relative_eq!(got, one, max_relative = 1e-12);
    }

    #[test]
    fn ou_stationary_limit() {
        let p = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, 0.5, 8.0]);
        let x = DVector::from_vec(vec![0.2, -0.4]);
        let std_normal = (-(0.04 + 0.16) / 2.0f64).exp() / (2.0 * std::f64::consts::PI);
        let got = ou_marginal_density(&p, 50.0, &x).unwrap();
        assert!((got - std_normal).abs() < 1e-10);
    }

    #[test]
    fn ou_integrates_to_one() {
        let p = DMatrix::from_row_slice(3, 1, &[-0.5, 0.2, 2.0]);
        let t = 0.3;
        let h = 1e-3;
        let total: f64 = (-12_000..=12_000)
            .map(|k| ou_marginal_density(&p, t, &DVector::from_vec(vec![k as f64 * h])).unwrap() * h)
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn ou_rejects_bad_input() {
        let p = DMatrix::from_row_slice(1, 1, &[0.0]);
        let x = DVector::from_vec(vec![0.0]);
        assert!(matches!(ou_marginal_density(&p, 0.0, &x), Err(Error::NonPositiveTime { .. })));
        assert!(ou_marginal_density(&DMatrix::<f64>::zeros(0, 1), 1.0, &x).is_err());
        assert!(ou_marginal_density(&p, 1.0, &DVector::from_vec(vec![0.0, 1.0])).is_err());
    }

    #[test]
    fn data_model_names() {
        assert_eq!("forward".parse::<DataModel>().unwrap(), DataModel::ForwardNoising);
        assert_eq!("linear".parse::<DataModel>().unwrap(), DataModel::LinearGaussian);
        assert!("other".parse::<DataModel>().is_err());
    }
}
