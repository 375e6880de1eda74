//! Divergences between the generated and the sampling distribution.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::column_variances;
use crate::model::{Covariance, GaussianSpec};
use crate::Scalar;

/// Mean/variance split of the KL between generated and sampling Gaussians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlReport<T> {
    /// `|mu - mu_G|^2 / (2 sigma^2)`.
    pub kl_mean: T,
    /// `Tr((Sigma_G / sigma^2 - I)^2) / 4`.
    pub kl_var: T,
    /// Full `KL(rho_G | rho)`; `+inf` when `Sigma_G` is singular.
    pub kl_exact: T,
    /// `kl_mean + kl_var`.
    pub quadratic_total: T,
}

/// Closed-form `KL(p | q)` for Gaussians.
///
/// `q` must be positive definite. A singular `p` gives `+inf`.
pub fn gaussian_kl<T: Scalar>(p: &GaussianSpec<T>, q: &GaussianSpec<T>) -> Result<T> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::ShapeMismatch(format!("KL between dimensions {d} and {}", q.dim())));
    }
    let gap = &p.mean - &q.mean;

    // Eigenvalues of Sigma_q^{-1} Sigma_p and the Mahalanobis term.
    let (ratios, mahalanobis) = match &q.covariance {
        Covariance::Isotropic(v) => {
            if !(*v > T::zero()) {
                return Err(Error::NotPositiveDefinite);
            }
            let ratios = match &p.covariance {
                Covariance::Isotropic(u) => DVector::from_element(d, *u / *v),
                Covariance::Diagonal(u) => u / *v,
                Covariance::Full(m) => (m / *v).symmetric_eigenvalues(),
            };
            (ratios, gap.norm_squared() / *v)
        }
        _ => {
            let cov_q = q.covariance_matrix();
            let chol = cov_q.cholesky().ok_or(Error::NotPositiveDefinite)?;
            let l = chol.l();
            let cov_p = p.covariance_matrix();
            let left = l.solve_lower_triangular(&cov_p).ok_or(Error::NotPositiveDefinite)?;
            let whitened = l.solve_lower_triangular(&left.transpose()).ok_or(Error::NotPositiveDefinite)?;
            let sym = crate::linalg::symmetrized(&whitened);
            let z = l.solve_lower_triangular(&gap).ok_or(Error::NotPositiveDefinite)?;
            (sym.symmetric_eigenvalues(), z.norm_squared())
        }
    };

    let top = ratios.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let floor = T::of_usize(d.max(1)) * T::EPSILON * top;
    let mut variance_part = T::zero();
    for &r in ratios.iter() {
        if r <= floor {
            return Ok(T::infinity());
        }
        // r - 1 - ln r, summed termwise to avoid cancelling Tr against d.
        variance_part += r - T::one() - r.ln();
    }
    Ok(T::of(0.5) * (variance_part + mahalanobis))
}

/// Split `KL(gen | N(mu, sigma_sq I))` into its mean and variance parts.
pub fn kl_decompose<T: Scalar>(gen: &GaussianSpec<T>, mu: &DVector<T>, sigma_sq: T) -> Result<KlReport<T>> {
    if !(sigma_sq > T::zero()) {
        return Err(Error::config("sigma_sq", "must be > 0"));
    }
    let d = gen.dim();
    if mu.len() != d {
        return Err(Error::ShapeMismatch(format!("mean of length {} for dimension {d}", mu.len())));
    }
    let kl_mean = (mu - &gen.mean).norm_squared() / (sigma_sq + sigma_sq);
    let kl_var = match &gen.covariance {
        Covariance::Isotropic(v) => T::of_usize(d) * (*v / sigma_sq - T::one()).powi(2),
        Covariance::Diagonal(v) => v.iter().map(|&x| (x / sigma_sq - T::one()).powi(2)).fold(T::zero(), |a, b| a + b),
        Covariance::Full(m) => {
            let mut dev = m / sigma_sq;
            for i in 0..d {
                dev[(i, i)] -= T::one();
            }
            // Tr(M^2) = |M|_F^2 for symmetric M.
            dev.norm_squared()
        }
    } * T::of(0.25);
    let reference = GaussianSpec::isotropic(mu.clone(), sigma_sq);
    let kl_exact = gaussian_kl(gen, &reference)?;
    Ok(KlReport { kl_mean, kl_var, kl_exact, quadratic_total: kl_mean + kl_var })
}

/// Squared-L2 distance between per-coordinate Gaussian-smoothed marginals.
///
/// Both mixtures use the bandwidth of the original set,
/// `eps_i^2 = var_O,i / |S_O|^2`, so `e_og(a, b) != e_og(b, a)` in general.
/// The integral is evaluated exactly through
/// `int N(x|a,e^2) N(x|b,e^2) dx = N(a - b | 0, 2 e^2)`; pairs further apart
/// than `sqrt(3000) eps` are skipped because their overlap underflows to
/// zero in double precision anyway.
pub fn e_og<T: Scalar>(set_o: &DMatrix<T>, set_g: &DMatrix<T>) -> Result<T> {
    if set_o.nrows() == 0 || set_g.nrows() == 0 {
        return Err(Error::EmptySet);
    }
    if set_o.ncols() != set_g.ncols() {
        return Err(Error::ShapeMismatch(format!("E_OG between d = {} and d = {}", set_o.ncols(), set_g.ncols())));
    }
    let variances = column_variances(set_o);
    let size_o = T::of_usize(set_o.nrows());
    let size_g = T::of_usize(set_g.nrows());
    let mut total = T::zero();
    for i in 0..set_o.ncols() {
        if !(variances[i] > T::zero()) {
            return Err(Error::DegenerateCoordinate { index: i });
        }
        let eps_sq = variances[i] / (size_o * size_o);
        let mut a: Vec<T> = set_o.column(i).iter().copied().collect();
        let mut b: Vec<T> = set_g.column(i).iter().copied().collect();
        sort(&mut a);
        sort(&mut b);
        let kernel = Overlap::new(eps_sq);
        let oo = kernel.self_sum(&a) / (size_o * size_o);
        let gg = kernel.self_sum(&b) / (size_g * size_g);
        let og = kernel.cross_sum(&a, &b) / (size_o * size_g);
        total += oo + gg - (og + og);
    }
    Ok(total)
}

fn sort<T: Scalar>(v: &mut [T]) {
    v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
}

/// `N(delta | 0, 2 eps^2)` with a support cutoff.
struct Overlap<T> {
    inv_four_eps_sq: T,
    peak: T,
    reach: T,
}

impl<T: Scalar> Overlap<T> {
    fn new(eps_sq: T) -> Self {
        let four = T::of(4.0) * eps_sq;
        Self {
            inv_four_eps_sq: T::one() / four,
            peak: T::one() / (T::pi() * four).sqrt(),
            reach: (T::of(3000.0) * eps_sq).sqrt(),
        }
    }

    #[inline]
    fn at(&self, delta: T) -> T {
        self.peak * (-(delta * delta) * self.inv_four_eps_sq).exp()
    }

    /// `sum_{k,l} N(a_k - a_l)` over a sorted slice.
    fn self_sum(&self, a: &[T]) -> T {
        let mut off = T::zero();
        for (k, &x) in a.iter().enumerate() {
            for &y in &a[k + 1..] {
                if y - x > self.reach {
                    break;
                }
                off += self.at(y - x);
            }
        }
        T::of_usize(a.len()) * self.peak + off + off
    }

    /// `sum_{k,l} N(a_k - b_l)` over two sorted slices.
    fn cross_sum(&self, a: &[T], b: &[T]) -> T {
        let mut total = T::zero();
        let mut start = 0;
        for &x in a {
            while start < b.len() && b[start] < x - self.reach {
                start += 1;
            }
            for &y in &b[start..] {
                if y - x > self.reach {
                    break;
                }
                total += self.at(x - y);
            }
        }
        total
    }
}
