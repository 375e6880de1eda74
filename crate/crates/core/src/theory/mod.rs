//! Deterministic-equivalence predictions for the variance part of the KL.
//!
//! Everything here is closed form except [`oracle`], which estimates the
//! same resolvent traces by sampling Wishart matrices.

mod oracle;
mod tables;

pub use oracle::{mc_b_oracle, mc_wishart_oracle, McEstimate, WishartOracle};

use crate::error::{Error, Result};
use crate::model::NoiseLevel;
use crate::Scalar;

/// Distance from `alpha = 1` inside which the ridgeless engine refuses to
/// evaluate.
pub const POLE_GUARD: f64 = 1e-4;

/// Which closed-form table applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    AlphaBelowOne,
    AlphaAboveOne,
}

impl Branch {
    /// `alpha <= 1` uses the under-parameterised table.
    pub fn of<T: Scalar>(alpha: T) -> Self {
        if alpha > T::one() {
            Branch::AlphaAboveOne
        } else {
            Branch::AlphaBelowOne
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::AlphaBelowOne => "alpha<1",
            Branch::AlphaAboveOne => "alpha>1",
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Explicit ridge `R_hat` and the renormalised ridge `R` it maps to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgePair<T> {
    pub ridge_hat: T,
    pub ridge_renorm: T,
    pub alpha: T,
    pub sigma_x_sq: T,
}

impl<T: Scalar> RidgePair<T> {
    /// Pair for a given `R`, with `R_hat = R (1 - alpha df1(R))`.
    ///
    /// Useful to probe the tables at arbitrary `R`; the result need not be a
    /// physical root.
    pub fn from_renormalized(ridge_renorm: T, alpha: T, sigma_x_sq: T) -> Self {
        let ridge_hat = ridge_renorm * (T::one() - alpha * df1_isotropic(ridge_renorm, sigma_x_sq));
        Self { ridge_hat, ridge_renorm, alpha, sigma_x_sq }
    }

    pub fn branch(&self) -> Branch {
        Branch::of(self.alpha)
    }

    fn args(&self, d: usize) -> (T, T, T, T) {
        (self.ridge_renorm, self.alpha, self.sigma_x_sq, T::of_usize(d))
    }
}

/// Population degrees of freedom `1 / (1 + R / sigma_X^2)`.
pub fn df1_isotropic<T: Scalar>(r: T, sigma_x_sq: T) -> T {
    T::one() / (T::one() + r / sigma_x_sq)
}

/// Solve `R_hat = R (1 - alpha sigma_X^2 / (sigma_X^2 + R))` for the
/// non-negative root `R`.
pub fn solve_renormalized_ridge<T: Scalar>(ridge_hat: T, alpha: T, sigma_x_sq: T) -> Result<RidgePair<T>> {
    if !(ridge_hat >= T::zero()) || !ridge_hat.is_finite() {
        return Err(Error::config("ridge_hat", format!("must be finite and >= 0, got {ridge_hat}")));
    }
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::config("alpha", format!("must be finite and > 0, got {alpha}")));
    }
    if !(sigma_x_sq > T::zero()) || !sigma_x_sq.is_finite() {
        return Err(Error::config("sigma_x_sq", format!("must be finite and > 0, got {sigma_x_sq}")));
    }
    let s = sigma_x_sq;
    let r = if ridge_hat == T::zero() {
        (alpha - T::one()).max(T::zero()) * s
    } else {
        // R^2 + b R - R_hat s = 0. The product of the roots is negative, so
        // exactly one is positive; pick the cancellation-free form.
        let b = s * (T::one() - alpha) - ridge_hat;
        let four = T::of(4.0);
        let root = (b * b + four * ridge_hat * s).sqrt();
        if b > T::zero() {
            (ridge_hat * s * T::of(2.0)) / (b + root)
        } else {
            (root - b) * T::of(0.5)
        }
    };
    assert!(r >= T::zero(), "renormalised ridge must be non-negative");
    Ok(RidgePair { ridge_hat, ridge_renorm: r, alpha, sigma_x_sq })
}

/// `df^k(R) = (sigma_X^2 / (sigma_X^2 + R))^k`, the closed form of the
/// recursion `df^{k+1} = (1 + (R / k) d/dR) df^k` started from `df^1`.
pub fn df_n<T: Scalar>(k: u32, r: T, sigma_x_sq: T) -> Result<T> {
    if !(1..=4).contains(&k) {
        return Err(Error::UnsupportedIndex { what: "df", index: k.to_string() });
    }
    Ok(df1_isotropic(r, sigma_x_sq).powi(k as i32))
}

/// `C_{a,b} = <Tr S^a (S + R_hat)^{-(a+b)}>`.
///
/// `b >= 1` comes from the closed-form tables. For `b = 0`,
/// `S^a (S + R_hat)^{-a} = (I - R_hat (S + R_hat)^{-1})^a` is expanded
/// binomially in the `B_k`, except `C_{1,0} = d df^1(R)`.
pub fn c_ab<T: Scalar>(a: u32, b: u32, pair: &RidgePair<T>, d: usize) -> Result<T> {
    let bad = || Error::UnsupportedIndex { what: "C", index: format!("({a},{b})") };
    if !(1..=3).contains(&a) || b > 3 {
        return Err(bad());
    }
    let (r, alpha, s, dd) = pair.args(d);
    if b == 0 {
        if a == 1 {
            return Ok(dd * df1_isotropic(r, s));
        }
        let mut total = dd;
        let mut binom = T::one();
        for k in 1..=a {
            binom = binom * T::of_usize((a - k + 1) as usize) / T::of_usize(k as usize);
            let sign = if k % 2 == 1 { -T::one() } else { T::one() };
            total += sign * binom * b_a(k, pair, d)?;
        }
        return Ok(total);
    }
    match pair.branch() {
        Branch::AlphaBelowOne => tables::c_below(a, b, r, alpha, s, dd),
        Branch::AlphaAboveOne => tables::c_above(a, b, r, alpha, s, dd),
    }
    .ok_or_else(bad)
}

/// `B_a = <Tr R_hat^a (S + R_hat)^{-a}>` from the closed-form tables.
pub fn b_a<T: Scalar>(a: u32, pair: &RidgePair<T>, d: usize) -> Result<T> {
    let (r, alpha, s, dd) = pair.args(d);
    let value = match pair.branch() {
        Branch::AlphaBelowOne => tables::b_below(a, r, alpha, s, dd),
        Branch::AlphaAboveOne => tables::b_above(a, r, alpha, s, dd),
    }
    .ok_or(Error::UnsupportedIndex { what: "B", index: a.to_string() })?;

    #[cfg(debug_assertions)]
    {
        let physical = r * r + T::of(2.0) * r * s - (alpha - T::one()) * s * s > T::zero();
        if physical && pair.ridge_hat >= T::zero() {
            let recursed = b_by_recursion(a, pair, d)?;
            let scale = value.abs().max(dd);
            debug_assert!(
                ((recursed - value) / scale).abs().as_f64() < 1e2 * T::EPSILON.as_f64().sqrt(),
                "B_{a}: table {value} vs recursion {recursed}"
            );
        }
    }
    Ok(value)
}

/// `B_a = d - sum_{i=1}^{a} R_hat^{a-i} C_{1,a-i}`.
pub fn b_by_recursion<T: Scalar>(a: u32, pair: &RidgePair<T>, d: usize) -> Result<T> {
    if !(1..=4).contains(&a) {
        return Err(Error::UnsupportedIndex { what: "B", index: a.to_string() });
    }
    let mut total = T::of_usize(d);
    for i in 1..=a {
        let k = a - i;
        total -= pair.ridge_hat.powi(k as i32) * c_ab(1, k, pair, d)?;
    }
    Ok(total)
}

/// `<Tr Sigma_theta1> = alpha Delta_T C_{1,1} + e^{2T} (B_2 - 2 B_1)`.
pub fn trace_sigma_theta1<T: Scalar>(pair: &RidgePair<T>, d: usize, t: T, delta_t: T) -> Result<T> {
    let growth = (t + t).exp();
    Ok(pair.alpha * delta_t * c_ab(1, 1, pair, d)? + growth * (b_a(2, pair, d)? - T::of(2.0) * b_a(1, pair, d)?))
}

/// `<Tr Sigma_theta1^2>` at leading order in `d`.
pub fn trace_sigma_theta1_sq<T: Scalar>(pair: &RidgePair<T>, d: usize, t: T, delta_t: T) -> Result<T> {
    let e2 = (t + t).exp();
    let e4 = e2 * e2;
    let ad = pair.alpha * delta_t;
    let rh = pair.ridge_hat;
    let two = T::of(2.0);
    let four = T::of(4.0);
    Ok(ad * ad * c_ab(2, 2, pair, d)?
        + e4 * b_a(4, pair, d)?
        + four * e4 * b_a(2, pair, d)?
        + two * ad * e2 * rh * rh * c_ab(1, 3, pair, d)?
        - four * ad * e2 * rh * c_ab(1, 2, pair, d)?
        - four * e4 * b_a(3, pair, d)?
        + two * ad * e2 * c_ab(1, 1, pair, d)?)
}

/// Expected `KL_var` for a ridge fit, assembled from the two traces.
///
/// `sigma_X^2` is taken from `noise`, never passed separately.
pub fn kl_var_theory<T: Scalar>(ridge_hat: T, alpha: T, d: usize, noise: &NoiseLevel<T>) -> Result<T> {
    if ridge_hat == T::zero() {
        check_pole(alpha)?;
    }
    let pair = solve_renormalized_ridge(ridge_hat, alpha, noise.sigma_x_sq())?;
    let t = noise.t;
    let delta = noise.delta_t();
    let k1 = (-(t + t)).exp() + delta / noise.sigma_sq;
    let k2 = (t + t).exp() * delta / noise.sigma_sq;
    let tr1 = trace_sigma_theta1(&pair, d, t, delta)?;
    let tr2 = trace_sigma_theta1_sq(&pair, d, t, delta)?;
    let q = T::of(0.25);
    Ok(q * k1 * k1 * tr2 + T::of(0.5) * k1 * k2 * tr1 + q * T::of_usize(d) * k2 * k2)
}

/// Ridgeless prediction split into orders of `lambda_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryKl<T> {
    pub order1: T,
    pub order2: T,
    /// `d (alpha - 1) / (4 alpha)`, zero below one.
    pub alpha0_term: T,
    pub total: T,
    pub branch: Branch,
}

fn check_pole<T: Scalar>(alpha: T) -> Result<()> {
    if (alpha - T::one()).abs() < T::of(POLE_GUARD) {
        return Err(Error::NearPole { alpha: alpha.as_f64() });
    }
    Ok(())
}

/// Ridgeless `KL_var` to second order in `lambda_hat`.
pub fn kl_var_ridgeless<T: Scalar>(alpha: T, lambda_hat: T, t: T, d: usize) -> Result<TheoryKl<T>> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::config("alpha", format!("must be finite and > 0, got {alpha}")));
    }
    if !(lambda_hat >= T::zero()) {
        return Err(Error::config("lambda_hat", format!("must be >= 0, got {lambda_hat}")));
    }
    if !(t >= T::zero()) {
        return Err(Error::config("T", format!("must be >= 0, got {t}")));
    }
    check_pole(alpha)?;
    let dd = T::of_usize(d);
    let one = T::one();
    let e2 = (t + t).exp();
    let e4 = e2 * e2;
    let grow = e2 - one;
    let l1 = lambda_hat * (-(t + t) * T::of(2.0)).exp() * grow;
    let l2 = lambda_hat * lambda_hat * (-(t + t) * T::of(4.0)).exp() * grow * grow;
    let branch = Branch::of(alpha);
    let (alpha0_term, order1, order2) = match branch {
        Branch::AlphaBelowOne => {
            let g = one - alpha;
            let order1 = dd * alpha * l1 / (T::of(2.0) * g);
            let poly = alpha * alpha + g.powi(3) * e4 + T::of(4.0) * alpha * g * g * e2;
            let order2 = dd * l2 * poly / (T::of(4.0) * g.powi(3));
            (T::zero(), order1, order2)
        }
        Branch::AlphaAboveOne => {
            let g = alpha - one;
            let alpha0 = dd * g / (T::of(4.0) * alpha);
            let order1 = dd * l1 / (T::of(2.0) * g);
            let poly = alpha.powi(3) + g.powi(3) * e4 + T::of(4.0) * alpha * g * g * e2;
            let order2 = dd * l2 * poly / (T::of(4.0) * g.powi(3) * alpha);
            (alpha0, order1, order2)
        }
    };
    Ok(TheoryKl { order1, order2, alpha0_term, total: alpha0_term + order1 + order2, branch })
}
