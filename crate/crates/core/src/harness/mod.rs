//! Seeded trials, parameter sweeps and their flat-file output.

mod chain_runs;
mod config;
mod output;
mod rmt;

pub use chain_runs::{run_chain_sweep, run_chain_trial, ChainRow, ChainSweep, EVAL_CAP};
pub use config::{parse_config, worker_threads};
pub use output::{format_float, write_chain_csv, write_csv, write_rmt_csv, write_rows, CHAIN_HEADER, RESULT_HEADER};
pub use rmt::{rmt_validation, RmtRow};

use std::time::Instant;

use rayon::prelude::*;

use crate::denoiser::{fit, generated_distribution, generator_init, GeneratorInit};
use crate::error::{Error, Result};
use crate::metrics::kl_decompose;
use crate::model::{sample_training_set, DataModel, ModelConfig};
use crate::rng::{mix_seed, stream};
use crate::theory::{kl_var_ridgeless, kl_var_theory};

/// Sweepable parameters, in the order grids are nested (last varies fastest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SweepParam {
    Alpha,
    LambdaHat,
    T,
    D,
    N,
    RidgeHat,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] =
        [SweepParam::Alpha, SweepParam::LambdaHat, SweepParam::T, SweepParam::D, SweepParam::N, SweepParam::RidgeHat];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::LambdaHat => "lambda_hat",
            SweepParam::T => "T",
            SweepParam::D => "d",
            SweepParam::N => "n",
            SweepParam::RidgeHat => "ridge_hat",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        SweepParam::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown sweep parameter `{s}`"))
    }
}

/// A Cartesian grid of experiments around `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub grids: Vec<(SweepParam, Vec<f64>)>,
    pub trials: usize,
    pub base: ModelConfig<f64>,
    /// Record wall-clock time per trial. Off by default so that reruns are
    /// byte-identical.
    pub timing: bool,
}

impl SweepSpec {
    pub fn new(base: ModelConfig<f64>, trials: usize) -> Self {
        Self { grids: Vec::new(), trials, base, timing: false }
    }

    pub fn with_grid(mut self, param: SweepParam, values: Vec<f64>) -> Self {
        self.grids.retain(|(p, _)| *p != param);
        self.grids.push((param, values));
        self.grids.sort_by_key(|(p, _)| *p);
        self
    }

    fn values(&self, param: SweepParam) -> Option<&[f64]> {
        self.grids.iter().find(|(p, _)| *p == param).map(|(_, v)| v.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::config("trials", "must be >= 1"));
        }
        for (p, v) in &self.grids {
            if v.is_empty() {
                return Err(Error::config("grid", format!("`{}` has no values", p.name())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("grid", format!("`{}` has a non-finite value", p.name())));
            }
        }
        if self.values(SweepParam::Alpha).is_some()
            && self.values(SweepParam::D).is_some()
            && self.values(SweepParam::N).is_some()
        {
            return Err(Error::config("grid", "alpha, d and n cannot all be swept"));
        }
        self.base.validate()
    }

    /// Number of grid points.
    pub fn points(&self) -> usize {
        self.grids.iter().map(|(_, v)| v.len()).product()
    }

    /// Configuration at grid index `index` (seed still the base seed).
    pub fn point(&self, index: usize) -> Result<ModelConfig<f64>> {
        let mut cfg = self.base.clone();
        let mut rest = index;
        let mut chosen = Vec::with_capacity(self.grids.len());
        for (p, v) in self.grids.iter().rev() {
            chosen.push((*p, v[rest % v.len()]));
            rest /= v.len();
        }
        let mut alpha = None;
        for &(p, x) in chosen.iter().rev() {
            match p {
                SweepParam::Alpha => alpha = Some(x),
                SweepParam::LambdaHat => cfg.lambda_hat = x,
                SweepParam::T => cfg.t = x,
                SweepParam::D => cfg.d = to_count("d", x)?,
                SweepParam::N => cfg.n = to_count("n", x)?,
                SweepParam::RidgeHat => cfg.ridge_hat = x,
            }
        }
        if let Some(a) = alpha {
            if !(a > 0.0) {
                return Err(Error::config("alpha", format!("must be > 0, got {a}")));
            }
            // n swept alone: derive d; otherwise hold d and round n.
            if self.values(SweepParam::N).is_some() {
                cfg.d = to_count("d", (a * cfg.n as f64).round())?;
            } else {
                cfg.n = to_count("n", (cfg.d as f64 / a).round())?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn to_count(field: &'static str, x: f64) -> Result<usize> {
    if x >= 1.0 && x.fract() == 0.0 && x < 1e12 {
        Ok(x as usize)
    } else {
        Err(Error::config(field, format!("must be a positive integer, got {x}")))
    }
}

/// One trial's measurements and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub alpha: f64,
    pub lambda_hat: f64,
    pub t: f64,
    pub d: usize,
    pub n: usize,
    pub ridge_hat: f64,
    pub trial_index: usize,
    pub seed: u64,
    pub kl_mean: f64,
    pub kl_var: f64,
    pub kl_exact: f64,
    pub theory_order1: f64,
    pub theory_order2: f64,
    pub theory_total: f64,
    pub wall_time_ms: f64,
    /// Set when the trial failed; the numeric fields are then NaN.
    pub error: Option<String>,
}

impl ResultRow {
    fn blank(config: &ModelConfig<f64>, trial_index: usize) -> Self {
        Self {
            alpha: config.alpha(),
            lambda_hat: config.lambda_hat,
            t: config.t,
            d: config.d,
            n: config.n,
            ridge_hat: config.ridge_hat,
            trial_index,
            seed: config.seed,
            kl_mean: f64::NAN,
            kl_var: f64::NAN,
            kl_exact: f64::NAN,
            theory_order1: f64::NAN,
            theory_order2: f64::NAN,
            theory_total: f64::NAN,
            wall_time_ms: 0.0,
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Theory columns for a configuration: `(order1, order2, total)`.
///
/// The order split only exists for the ridgeless prediction; with a ridge the
/// first two are NaN.
pub fn theory_columns(config: &ModelConfig<f64>) -> Result<(f64, f64, f64)> {
    let alpha = config.alpha();
    if config.ridge_hat == 0.0 {
        let k = kl_var_ridgeless(alpha, config.lambda_hat, config.t, config.d)?;
        Ok((k.order1, k.order2, k.total))
    } else {
        let total = kl_var_theory(config.ridge_hat, alpha, config.d, &config.noise())?;
        Ok((f64::NAN, f64::NAN, total))
    }
}

/// Sample, fit, generate and measure once, using `config.seed` as the stream seed.
pub fn try_run_trial(config: &ModelConfig<f64>, trial_index: usize) -> Result<ResultRow> {
    config.validate()?;
    let mut row = ResultRow::blank(config, trial_index);
    let mut rng = stream(config.seed);
    let ts = sample_training_set(config, &mut rng)?;
    let den = fit(&ts, config.ridge_hat)?;
    let init = match config.data_model {
        DataModel::ForwardNoising => generator_init(&ts, config.t),
        DataModel::LinearGaussian => {
            GeneratorInit { mu_x: config.mean_vector() * (-config.t).exp(), sigma_x_sq: config.noise().sigma_x_sq() }
        }
    };
    let gen = generated_distribution(&den, &init);
    let kl = kl_decompose(&gen, &config.mean_vector(), config.sigma * config.sigma)?;
    row.kl_mean = kl.kl_mean;
    row.kl_var = kl.kl_var;
    row.kl_exact = kl.kl_exact;
    let (o1, o2, total) = theory_columns(config)?;
    row.theory_order1 = o1;
    row.theory_order2 = o2;
    row.theory_total = total;
    Ok(row)
}

/// [`try_run_trial`] that turns failures into an error row.
pub fn run_trial(config: &ModelConfig<f64>, trial_index: usize, timing: bool) -> ResultRow {
    let start = Instant::now();
    let mut row = match try_run_trial(config, trial_index) {
        Ok(row) => row,
        Err(e) => error_row(config, trial_index, &e),
    };
    if timing {
        row.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    row
}

fn error_row(config: &ModelConfig<f64>, trial_index: usize, e: &Error) -> ResultRow {
    log::warn!("trial {trial_index} at alpha={} lambda_hat={} failed: {e}", config.alpha(), config.lambda_hat);
    ResultRow { error: Some(e.to_string()), ..ResultRow::blank(config, trial_index) }
}

/// Build a pool with `threads` workers, or rayon's default when `None`.
pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::ThreadPool(e.to_string()))
}

/// Run every (grid point, trial) pair. Rows come back in grid-major order
/// whatever the worker count.
pub fn run_sweep(spec: &SweepSpec, threads: Option<usize>) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.points()).flat_map(|g| (0..spec.trials).map(move |k| (g, k))).collect();
    let pool = thread_pool(threads)?;
    let rows = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, k)| {
                let seed = mix_seed(spec.base.seed, g as u64, k as u64);
                match spec.point(g) {
                    Ok(mut cfg) => {
                        cfg.seed = seed;
                        run_trial(&cfg, k, spec.timing)
                    }
                    Err(e) => {
                        let mut cfg = spec.base.clone();
                        cfg.seed = seed;
                        error_row(&cfg, k, &e)
                    }
                }
            })
            .collect()
    });
    Ok(rows)
}

#[cfg(test)]
mod tests;
