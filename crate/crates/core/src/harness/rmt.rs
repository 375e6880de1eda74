use crate::error::Result;
use crate::theory::{b_a, c_ab, solve_renormalized_ridge, WishartOracle};

/// Closed form against Monte Carlo for one tabulated trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RmtRow {
    /// `"C"` or `"B"`.
    pub quantity: &'static str,
    pub a: u32,
    pub b: Option<u32>,
    pub n: usize,
    pub d: usize,
    pub ridge_hat: f64,
    pub closed_form: f64,
    pub mc_mean: f64,
    pub mc_std_err: f64,
}

impl RmtRow {
    pub fn rel_gap(&self) -> f64 {
        (self.closed_form - self.mc_mean) / self.mc_mean
    }

    pub fn label(&self) -> String {
        match self.b {
            Some(b) => format!("{}{}{}", self.quantity, self.a, b),
            None => format!("{}{}", self.quantity, self.a),
        }
    }
}

/// Every tabulated `C_{a,b}` (`a, b` in 1..=3) and `B_a` (`a` in 1..=4) at
/// one `(n, d, R_hat)`, with `sigma_X^2` the population variance of the rows.
pub fn rmt_validation(
    n: usize,
    d: usize,
    ridge_hat: f64,
    sigma_x_sq: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<RmtRow>> {
    let alpha = d as f64 / n as f64;
    let pair = solve_renormalized_ridge(ridge_hat, alpha, sigma_x_sq)?;
    let oracle = WishartOracle::sample(n, d, sigma_x_sq, ridge_hat, trials, seed)?;
    let mut rows = Vec::with_capacity(13);
    for a in 1..=3 {
        for b in 1..=3 {
            let mc = oracle.c_ab(a, b);
            rows.push(RmtRow {
                quantity: "C",
                a,
                b: Some(b),
                n,
                d,
                ridge_hat,
                closed_form: c_ab(a, b, &pair, d)?,
                mc_mean: mc.mean,
                mc_std_err: mc.std_err,
            });
        }
    }
    for a in 1..=4 {
        let mc = oracle.b_a(a);
        rows.push(RmtRow {
            quantity: "B",
            a,
            b: None,
            n,
            d,
            ridge_hat,
            closed_form: b_a(a, &pair, d)?,
            mc_mean: mc.mean,
            mc_std_err: mc.std_err,
        });
    }
    Ok(rows)
}
