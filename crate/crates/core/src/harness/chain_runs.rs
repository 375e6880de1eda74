use std::time::Instant;

use rayon::prelude::*;

use crate::chain::{fit_chain, forward_trajectory, generate_chain, gmm_sample, ChainConfig, StepSampling};
use crate::error::{Error, Result};
use crate::metrics::e_og;
use crate::rng::{mix_seed, stream};

use super::thread_pool;

/// Largest held-out and generated set used for E_OG.
pub const EVAL_CAP: usize = 2000;

/// Step counts x component counts x trials around a base chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSweep {
    pub steps: Vec<usize>,
    pub components: Vec<usize>,
    pub trials: usize,
    pub base: ChainConfig<f64>,
    pub ridge_hat: f64,
    pub sampling: StepSampling,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRow {
    pub s: usize,
    pub beta: f64,
    pub lambda: f64,
    pub components: usize,
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub e_og: f64,
    pub wall_time_ms: f64,
    pub error: Option<String>,
}

/// Train a chain on fresh mixture data and score it against a held-out draw.
///
/// The training `x_0` and the held-out set depend only on
/// `(seed, C, trial)`, so runs that differ only in `s` see the same data.
pub fn run_chain_trial(config: &ChainConfig<f64>, trial: usize, ridge_hat: f64, sampling: StepSampling) -> Result<f64> {
    config.validate()?;
    let trial_seed = mix_seed(config.seed, config.components as u64, trial as u64);
    let s = config.steps as u64;
    let m = config.n.min(EVAL_CAP);

    let mut data = stream(mix_seed(trial_seed, 0, 0));
    let x0 = gmm_sample(config, config.n, &mut data)?;
    let held_out = gmm_sample(config, m, &mut data)?;

    let trajectory = forward_trajectory(&x0, config, &mut stream(mix_seed(trial_seed, s, 1)))?;
    let model = fit_chain(&trajectory, ridge_hat)?;
    drop(trajectory);
    let generated = generate_chain(&model, m, sampling, &mut stream(mix_seed(trial_seed, s, 2)))?;
    e_og(&held_out, &generated)
}

pub fn run_chain_sweep(spec: &ChainSweep, threads: Option<usize>) -> Result<Vec<ChainRow>> {
    if spec.trials < 1 {
        return Err(Error::config("trials", "must be >= 1"));
    }
    if spec.steps.is_empty() || spec.components.is_empty() {
        return Err(Error::config("grid", "steps and components need at least one value"));
    }
    spec.base.validate()?;
    let mut jobs = Vec::new();
    for &s in &spec.steps {
        for &c in &spec.components {
            for k in 0..spec.trials {
                jobs.push((s, c, k));
            }
        }
    }
    let pool = thread_pool(threads)?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|&(s, c, k)| {
                let cfg = ChainConfig { steps: s, components: c, ..spec.base.clone() };
                let start = Instant::now();
                let result = run_chain_trial(&cfg, k, spec.ridge_hat, spec.sampling);
                let wall = if spec.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
                let (e, error) = match result {
                    Ok(v) => (v, None),
                    Err(err) => {
                        log::warn!("chain s={s} C={c} trial {k} failed: {err}");
                        (f64::NAN, Some(err.to_string()))
                    }
                };
                ChainRow {
                    s,
                    beta: cfg.beta,
                    lambda: cfg.lambda,
                    components: c,
                    d: cfg.d,
                    n: cfg.n,
                    trial: k,
                    e_og: e,
                    wall_time_ms: wall,
                    error,
                }
            })
            .collect()
    }))
}
