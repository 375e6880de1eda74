//! Closed-form expected traces `C_{a,b} = <Tr S^a (S + R_hat)^{-(a+b)}>` and
//! `B_a = <Tr R_hat^a (S + R_hat)^{-a}>` for an isotropic population
//! covariance `sigma_X^2 I`, written in the renormalised ridge `R`.
//!
//! The `alpha > 1` forms carry `sgn`/`|.|` factors and a piecewise split on
//! `R (R + 2 sigma_X^2) < (alpha - 1) sigma_X^4`; they are kept verbatim
//! rather than simplified. On the physical root (`D > 0` below) both tables
//! agree.

use crate::Scalar;

/// Shared subexpressions.
struct Terms<T> {
    r: T,
    s: T,
    a: T,
    d: T,
    /// `R^2 + 2 R sigma_X^2 - (alpha - 1) sigma_X^4`.
    disc: T,
}

impl<T: Scalar> Terms<T> {
    fn new(r: T, alpha: T, s: T, d: T) -> Self {
        let disc = r * r + T::of(2.0) * r * s - (alpha - T::one()) * s * s;
        Self { r, s, a: alpha, d, disc }
    }

    /// `R (R + 2 sigma^2) < (alpha - 1) sigma^4`.
    fn inner(&self) -> bool {
        self.r * (self.r + T::of(2.0) * self.s) < (self.a - T::one()) * self.s * self.s
    }

    fn sgn(&self) -> T {
        if self.disc > T::zero() {
            T::one()
        } else if self.disc < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    }
}

#[inline]
fn k<T: Scalar>(x: f64) -> T {
    T::of(x)
}

pub(super) fn c_below<T: Scalar>(a_idx: u32, b_idx: u32, r: T, alpha: T, s: T, d: T) -> Option<T> {
    let t = Terms::new(r, alpha, s, d);
    let (r, s, a, d, den) = (t.r, t.s, t.a, t.d, t.disc);
    let am1 = a - T::one();
    let rs = r + s;
    let v = match (a_idx, b_idx) {
        (1, 1) => d * s / (r * r + k::<T>(2.0) * r * s - a * s * s + s * s),
        (1, 2) => d * s * rs.powi(3) / den.powi(3),
        (1, 3) => d * s * rs.powi(4) * (r * r + k::<T>(2.0) * r * s + (a + T::one()) * s * s) / den.powi(5),
        (2, 1) => {
            d * s.powi(2)
                * ((a + T::one()) * r.powi(3) + k::<T>(3.0) * r * r * s - k::<T>(3.0) * am1 * r * s * s
                    + am1 * am1 * s.powi(3))
                / den.powi(3)
        }
        (2, 2) => {
            d * s.powi(2) * rs.powi(4) * ((a + T::one()) * r * r - k::<T>(2.0) * am1 * r * s + am1 * am1 * s * s)
                / den.powi(5)
        }
        (2, 3) => {
            d * s.powi(2)
                * rs.powi(5)
                * ((a + T::one()) * r.powi(4) + k::<T>(3.0) * ((a - k::<T>(2.0)) * a + k::<T>(2.0)) * r * r * s * s
                    - (a - k::<T>(4.0)) * r.powi(3) * s
                    + (a - k::<T>(4.0)) * am1 * r * s.powi(3)
                    + am1 * am1 * (a + T::one()) * s.powi(4))
                / den.powi(7)
        }
        (3, 1) => d * s.powi(3) * c31_outer_poly(r, a, s) / den.powi(5),
        (3, 2) => d * s.powi(3) * rs.powi(5) * c32_poly(r, a, s) / den.powi(7),
        (3, 3) => d * s.powi(3) * rs.powi(6) * c33_poly(r, a, s) / den.powi(9),
        _ => return None,
    };
    Some(v)
}

pub(super) fn c_above<T: Scalar>(a_idx: u32, b_idx: u32, r: T, alpha: T, s: T, d: T) -> Option<T> {
    let t = Terms::new(r, alpha, s, d);
    let (r, s, a, d, den) = (t.r, t.s, t.a, t.d, t.disc);
    let am1 = a - T::one();
    let rs = r + s;
    let sgn = t.sgn();
    let abs_den = den.abs();
    let v = match (a_idx, b_idx) {
        (1, 1) => {
            k::<T>(2.0) * d * s * rs * rs / (abs_den * (abs_den + r * r + k::<T>(2.0) * r * s + (a + T::one()) * s * s))
        }
        (1, 2) => d * s * rs.powi(3) / abs_den.powi(3),
        (1, 3) => d * s * rs.powi(4) * (r * r + k::<T>(2.0) * r * s + (a + T::one()) * s * s) * sgn / den.powi(5),
        (2, 1) => {
            if t.inner() {
                d * rs.powi(3)
                    * (k::<T>(3.0) * r * r * s + r.powi(3) - k::<T>(3.0) * am1 * r * s * s + am1 * am1 * s.powi(3))
                    / (a * s * (-den).powi(3))
            } else {
                d * s.powi(2)
                    * ((a + T::one()) * r.powi(3) + k::<T>(3.0) * r * r * s - k::<T>(3.0) * am1 * r * s * s
                        + am1 * am1 * s.powi(3))
                    / den.powi(3)
            }
        }
        (2, 2) => {
            d * s.powi(2) * rs.powi(4) * ((a + T::one()) * r * r - k::<T>(2.0) * am1 * r * s + am1 * am1 * s * s) * sgn
                / den.powi(5)
        }
        (2, 3) => {
            d * s.powi(2)
                * rs.powi(5)
                * ((a + T::one()) * r.powi(4) + k::<T>(3.0) * ((a - k::<T>(2.0)) * a + k::<T>(2.0)) * r * r * s * s
                    - (a - k::<T>(4.0)) * r.powi(3) * s
                    + (a - k::<T>(4.0)) * am1 * r * s.powi(3)
                    + am1 * am1 * (a + T::one()) * s.powi(4))
                * sgn
                / den.powi(7)
        }
        (3, 1) => {
            if t.inner() {
                d * rs.powi(4)
                    * (am1 * am1 * (a + k::<T>(15.0)) * r * r * s.powi(4)
                        - k::<T>(20.0) * am1 * r.powi(3) * s.powi(3)
                        - k::<T>(5.0) * (a - k::<T>(3.0)) * r.powi(4) * s * s
                        + k::<T>(6.0) * r.powi(5) * s
                        + r.powi(6)
                        - k::<T>(6.0) * am1.powi(3) * r * s.powi(5)
                        + am1.powi(4) * s.powi(6))
                    / (a * s * (-den).powi(5))
            } else {
                d * s.powi(3) * c31_outer_poly(r, a, s) / den.powi(5)
            }
        }
        (3, 2) => d * s.powi(3) * rs.powi(5) * c32_poly(r, a, s) * sgn / den.powi(7),
        (3, 3) => d * s.powi(3) * rs.powi(6) * c33_poly(r, a, s) * sgn / den.powi(9),
        _ => return None,
    };
    Some(v)
}

fn c31_outer_poly<T: Scalar>(r: T, a: T, s: T) -> T {
    let am1 = a - T::one();
    (a * (a + k::<T>(3.0)) + T::one()) * r.powi(6)
        + am1 * am1 * (a + k::<T>(15.0)) * r * r * s.powi(4)
        + k::<T>(4.0) * am1 * (am1 * a - k::<T>(5.0)) * r.powi(3) * s.powi(3)
        + (a * ((a - k::<T>(12.0)) * a + k::<T>(6.0)) + k::<T>(15.0)) * r.powi(4) * s * s
        - k::<T>(2.0) * ((a - k::<T>(5.0)) * a - k::<T>(3.0)) * r.powi(5) * s
        - k::<T>(6.0) * am1.powi(3) * r * s.powi(5)
        + am1.powi(4) * s.powi(6)
}

fn c32_poly<T: Scalar>(r: T, a: T, s: T) -> T {
    let am1 = a - T::one();
    (a * (a + k::<T>(3.0)) + T::one()) * r.powi(4)
        + k::<T>(3.0) * (a.powi(3) - k::<T>(3.0) * a + k::<T>(2.0)) * r * r * s * s
        + k::<T>(2.0) * (-k::<T>(3.0) * a * a + a + k::<T>(2.0)) * r.powi(3) * s
        - k::<T>(4.0) * am1.powi(3) * r * s.powi(3)
        + am1.powi(4) * s.powi(4)
}

fn c33_poly<T: Scalar>(r: T, a: T, s: T) -> T {
    let am1 = a - T::one();
    (a * (a + k::<T>(3.0)) + T::one()) * r.powi(6)
        + k::<T>(6.0) * (-a * a + a + T::one()) * r.powi(5) * s
        + k::<T>(3.0) * am1 * am1 * (a * (k::<T>(2.0) * a - k::<T>(3.0)) + k::<T>(5.0)) * r * r * s.powi(4)
        - k::<T>(4.0) * am1 * (k::<T>(2.0) * (a - k::<T>(2.0)) * a + k::<T>(5.0)) * r.powi(3) * s.powi(3)
        + k::<T>(3.0) * (a * (k::<T>(2.0) * am1 * a - k::<T>(3.0)) + k::<T>(5.0)) * r.powi(4) * s * s
        - k::<T>(6.0) * am1.powi(3) * r * s.powi(5)
        + am1.powi(4) * (a + T::one()) * s.powi(6)
}

fn b_outer<T: Scalar>(a_idx: u32, t: &Terms<T>) -> Option<T> {
    let (r, s, a, d, den) = (t.r, t.s, t.a, t.d, t.disc);
    let v = match a_idx {
        1 => d * r / (r + s),
        2 => d * r * r / (r * r + k::<T>(2.0) * r * s - a * s * s + s * s),
        3 => {
            d * r.powi(3)
                * (k::<T>(3.0) * r * r * s + r.powi(3) + k::<T>(3.0) * r * s * s - (a * a - T::one()) * s.powi(3))
                / den.powi(3)
        }
        4 => {
            d * r.powi(4)
                * (k::<T>(4.0) * (-a * a + a + k::<T>(5.0)) * r.powi(3) * s.powi(3)
                    + (a * ((a - k::<T>(12.0)) * a + k::<T>(6.0)) + k::<T>(15.0)) * r * r * s.powi(4)
                    + (a + k::<T>(15.0)) * r.powi(4) * s * s
                    + k::<T>(6.0) * r.powi(5) * s
                    + r.powi(6)
                    + k::<T>(2.0) * (a * ((a - k::<T>(6.0)) * a + k::<T>(2.0)) + k::<T>(3.0)) * r * s.powi(5)
                    + (a - T::one()).powi(2) * (a * (a + k::<T>(3.0)) + T::one()) * s.powi(6))
                / den.powi(5)
        }
        _ => return None,
    };
    Some(v)
}

pub(super) fn b_below<T: Scalar>(a_idx: u32, r: T, alpha: T, s: T, d: T) -> Option<T> {
    b_outer(a_idx, &Terms::new(r, alpha, s, d))
}

pub(super) fn b_above<T: Scalar>(a_idx: u32, r: T, alpha: T, s: T, d: T) -> Option<T> {
    let t = Terms::new(r, alpha, s, d);
    if !t.inner() {
        return b_outer(a_idx, &t);
    }
    let (r, s, a, d, den) = (t.r, t.s, t.a, t.d, t.disc);
    let am1 = a - T::one();
    let v = match a_idx {
        1 => d - d * (r / s + T::one()) / a,
        2 => d * (-T::one() / a - r * r / (r * r + k::<T>(2.0) * r * s - a * s * s + s * s) + T::one()),
        3 => {
            d * (r - am1 * s).powi(3)
                * (k::<T>(3.0) * r * r * s + r.powi(3) + k::<T>(3.0) * r * s * s - am1 * s.powi(3))
                / (a * (-den).powi(3))
        }
        4 => {
            d * (r - am1 * s).powi(4)
                * (-k::<T>(5.0) * (a - k::<T>(3.0)) * r * r * s.powi(4)
                    + (a + k::<T>(15.0)) * r.powi(4) * s * s
                    + k::<T>(20.0) * r.powi(3) * s.powi(3)
                    + k::<T>(6.0) * r.powi(5) * s
                    + r.powi(6)
                    - k::<T>(6.0) * am1 * r * s.powi(5)
                    + am1 * am1 * s.powi(6))
                / (a * (-den).powi(5))
        }
        _ => return None,
    };
    Some(v)
}
