//! Monte Carlo estimates of the resolvent traces behind the closed forms.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{mix_seed, stream};
use crate::Scalar;

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

impl McEstimate {
    /// Summarise draws in the given order (fixed order keeps sums bit-stable).
    pub fn from_draws(draws: &[f64]) -> Self {
        let m = draws.len();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let std_err = if m > 1 {
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, std_err, trials: m }
    }
}

/// Eigenvalues of `S = x^T x / n` for `trials` independent draws of
/// `x` (n x d, i.i.d. `N(0, sigma_X^2)` entries).
///
/// Trial `k` uses the stream `mix_seed(seed, 0, k)`, so results do not depend
/// on how rayon schedules the work.
#[derive(Debug, Clone)]
pub struct WishartOracle<T: Scalar> {
    pub n: usize,
    pub d: usize,
    pub ridge_hat: T,
    spectra: Vec<DVector<T>>,
}

impl<T: Scalar> WishartOracle<T> {
    pub fn sample(n: usize, d: usize, sigma_x_sq: T, ridge_hat: T, trials: usize, seed: u64) -> Result<Self> {
        if trials < 1 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        if n < 1 || d < 1 {
            return Err(Error::config("n, d", "must be >= 1"));
        }
        if !(sigma_x_sq > T::zero()) {
            return Err(Error::config("sigma_x_sq", "must be > 0"));
        }
        if !(ridge_hat >= T::zero()) {
            return Err(Error::config("ridge_hat", "must be >= 0"));
        }
        if ridge_hat == T::zero() && n <= d {
            return Err(Error::SingularResolvent);
        }
        let spectra = (0..trials)
            .into_par_iter()
            .map(|k| wishart_spectrum(n, d, sigma_x_sq, mix_seed(seed, 0, k as u64)))
            .collect();
        Ok(Self { n, d, ridge_hat, spectra })
    }

    pub fn trials(&self) -> usize {
        self.spectra.len()
    }

    /// Estimate of `Tr S^a (S + R_hat)^{-(a+b)}`.
    pub fn c_ab(&self, a: u32, b: u32) -> McEstimate {
        let r = self.ridge_hat;
        self.estimate(|ev| ev.powi(a as i32) / (ev + r).powi((a + b) as i32))
    }

    /// Estimate of `Tr R_hat^a (S + R_hat)^{-a}`.
    pub fn b_a(&self, a: u32) -> McEstimate {
        let r = self.ridge_hat;
        self.estimate(|ev| (r / (ev + r)).powi(a as i32))
    }

    fn estimate(&self, f: impl Fn(T) -> T) -> McEstimate {
        let draws: Vec<f64> = self
            .spectra
            .iter()
            .map(|spec| spec.iter().map(|&ev| f(ev)).fold(T::zero(), |acc, v| acc + v).as_f64())
            .collect();
        McEstimate::from_draws(&draws)
    }
}

fn wishart_spectrum<T: Scalar>(n: usize, d: usize, sigma_x_sq: T, seed: u64) -> DVector<T> {
    let mut rng = stream(seed);
    let sd = sigma_x_sq.sqrt();
    let mut x = DMatrix::<T>::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            x[(i, j)] = sd * T::standard_normal(&mut rng);
        }
    }
    let scale = T::one() / T::of_usize(n);
    // The non-zero spectrum of x^T x equals that of x x^T; use the smaller Gram.
    let small = if n < d { &x * x.transpose() } else { x.tr_mul(&x) };
    let mut ev = (small * scale).symmetric_eigenvalues();
    ev.apply(|v| *v = v.max(T::zero()));
    if n < d {
        let mut full = DVector::zeros(d);
        full.rows_mut(0, n).copy_from(&ev);
        full
    } else {
        ev
    }
}

/// Monte Carlo `<Tr S^a (S + R_hat)^{-(a+b)}>` over `trials` Wishart draws.
#[allow(clippy::too_many_arguments)]
pub fn mc_wishart_oracle<T: Scalar>(
    a: u32,
    b: u32,
    ridge_hat: T,
    n: usize,
    d: usize,
    sigma_x_sq: T,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if a < 1 {
        return Err(Error::UnsupportedIndex { what: "C", index: format!("({a},{b})") });
    }
    Ok(WishartOracle::sample(n, d, sigma_x_sq, ridge_hat, trials, seed)?.c_ab(a, b))
}

/// Monte Carlo `<Tr R_hat^a (S + R_hat)^{-a}>`.
pub fn mc_b_oracle<T: Scalar>(
    a: u32,
    ridge_hat: T,
    n: usize,
    d: usize,
    sigma_x_sq: T,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if a < 1 {
        return Err(Error::UnsupportedIndex { what: "B", index: a.to_string() });
    }
    Ok(WishartOracle::sample(n, d, sigma_x_sq, ridge_hat, trials, seed)?.b_a(a))
}
