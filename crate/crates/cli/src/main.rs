use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lindiff::harness::{
    parse_config, rmt_validation, run_chain_sweep, run_sweep, worker_threads, write_chain_csv, write_rmt_csv,
    write_rows, ChainSweep, SweepParam, SweepSpec,
};
use lindiff::theory::{kl_var_ridgeless, kl_var_theory, Branch};
use lindiff::{ChainConfig, DataModel, Error, ModelConfig, NoiseLevel, StepSampling};

/// Linear-denoiser diffusion laboratory.
#[derive(Debug, Parser)]
#[command(name = "lindiff", version, args_override_self = true)]
struct Cli {
    /// Read `key = value` defaults from a file; flags on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form KL_var prediction as JSON.
    Theory(TheoryArgs),
    /// Monte Carlo trials at one configuration, as CSV.
    Simulate(SimulateArgs),
    /// Cartesian parameter sweep, as CSV.
    Sweep(SweepArgs),
    /// Closed-form resolvent traces against Wishart Monte Carlo, as CSV.
    ValidateRmt(RmtArgs),
    /// Multi-step chain quality (E_OG) over step and component counts, as CSV.
    Chain(ChainArgs),
}

#[derive(Debug, Args)]
struct TheoryArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long = "lambda-hat")]
    lambda_hat: f64,
    #[arg(long = "T", alias = "time", default_value_t = 2.0)]
    t: f64,
    /// Explicit ridge; 0 gives the ridgeless order split.
    #[arg(long = "ridge-hat", default_value_t = 0.0)]
    ridge_hat: f64,
    /// Sampling standard deviation (matters only with a ridge).
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long = "lambda-hat", default_value_t = 0.05)]
    lambda_hat: f64,
    #[arg(long = "T", alias = "time", default_value_t = 2.0)]
    t: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    mu: f64,
    #[arg(long = "ridge-hat", default_value_t = 0.0)]
    ridge_hat: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `forward` (OU noising of sampled data) or `linear` (regression model
    /// with population generator init).
    #[arg(long = "data-model", default_value = "forward")]
    data_model: DataModel,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
    /// Record per-trial wall time (makes the output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 128)]
    d: usize,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Comma-separated grid of alpha = d/n (n is rounded).
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long = "lambda-hat", value_delimiter = ',', default_value = "0.05")]
    lambda_hat: Vec<f64>,
    #[arg(long = "T", alias = "time", value_delimiter = ',', default_value = "2")]
    t: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "128")]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "256")]
    n: Vec<usize>,
    #[arg(long = "ridge-hat", value_delimiter = ',', default_value = "0")]
    ridge_hat: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 10.0)]
    mu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "data-model", default_value = "forward")]
    data_model: DataModel,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct RmtArgs {
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 256)]
    d: usize,
    #[arg(long = "ridge-hat", value_delimiter = ',', default_value = "0.05,0.5")]
    ridge_hat: Vec<f64>,
    #[arg(long = "sigma-x-sq", default_value_t = 1.0)]
    sigma_x_sq: f64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChainArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,5,10,20")]
    steps: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    components: Vec<usize>,
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    mu0: f64,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    #[arg(long = "comp-sigma", default_value_t = 0.1)]
    comp_sigma: f64,
    #[arg(long, default_value_t = 4000)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "ridge-hat", default_value_t = 0.0)]
    ridge_hat: f64,
    /// `gaussian` (sample each step's residual) or `mean`.
    #[arg(long, default_value = "gaussian")]
    sampling: StepSampling,
    #[command(flatten)]
    out: OutputArgs,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_invalid_input() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<OsString> = std::env::args_os().collect();
    let argv = match with_config_defaults(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Splice `--key value` pairs from the `--config` file in right after the
/// subcommand, so anything given explicitly later on the line overrides them.
fn with_config_defaults(argv: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut path = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    rest.extend(it.next());
    while let Some(arg) = it.next() {
        let s = arg.to_string_lossy();
        if s == "--config" {
            path = Some(it.next().ok_or("--config needs a path")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(OsString::from(p));
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let path = PathBuf::from(path);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let pairs = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;

    let sub = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|i| i + 1);
    let Some(sub) = sub else { return Ok(rest) };
    let mut injected = Vec::new();
    for (k, v) in pairs {
        let flag = format!("--{}", k.replace('_', "-"));
        let flag = if k == "T" { "--T".to_string() } else { flag };
        match v.as_str() {
            "true" => injected.push(OsString::from(flag)),
            "false" => {}
            _ => {
                injected.push(OsString::from(flag));
                injected.push(OsString::from(v));
            }
        }
    }
    let mut out = rest[..=sub].to_vec();
    out.extend(injected);
    out.extend_from_slice(&rest[sub + 1..]);
    Ok(out)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Theory(a) => theory(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::ValidateRmt(a) => validate_rmt(a),
        Command::Chain(a) => chain(a),
    }
}

fn json_number(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null)
}

fn theory(a: TheoryArgs) -> Result<(), Failure> {
    let (branch, o1, o2, total) = if a.ridge_hat == 0.0 {
        let k = kl_var_ridgeless(a.alpha, a.lambda_hat, a.t, 1)?;
        (k.branch, k.order1, k.order2, k.total)
    } else {
        if a.sigma.is_nan() || a.sigma <= 0.0 {
            return Err(Failure::Usage("--sigma must be > 0".into()));
        }
        let noise = NoiseLevel::new(a.t, a.lambda_hat, a.sigma * a.sigma);
        let total = kl_var_theory(a.ridge_hat, a.alpha, 1, &noise)?;
        (Branch::of(a.alpha), f64::NAN, f64::NAN, total)
    };
    let out = json!({
        "alpha": a.alpha,
        "lambda_hat": a.lambda_hat,
        "T": a.t,
        "branch": branch.as_str(),
        "order1_per_d": json_number(o1),
        "order2_per_d": json_number(o2),
        "total_per_d": json_number(total),
    });
    println!("{out}");
    Ok(())
}

fn base_config(n: usize, d: usize, m: &ModelArgs) -> ModelConfig<f64> {
    ModelConfig {
        n,
        d,
        t: m.t,
        lambda_hat: m.lambda_hat,
        sigma: m.sigma,
        mu: m.mu,
        ridge_hat: m.ridge_hat,
        seed: m.seed,
        data_model: m.data_model,
    }
}

fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> lindiff::Result<()>) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            let mut w = std::io::BufWriter::new(file);
            write(&mut w).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            w.flush().map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| Failure::Runtime(e.to_string()))
        }
    }
}

fn report_failures(failed: usize, total: usize) {
    if failed > 0 {
        log::warn!("{failed} of {total} trials failed; their rows hold NaN");
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let threads = worker_threads()?;
    let mut spec = SweepSpec::new(base_config(a.n, a.d, &a.model), a.trials);
    spec.timing = a.out.timing;
    let rows = run_sweep(&spec, threads)?;
    report_failures(rows.iter().filter(|r| !r.is_ok()).count(), rows.len());
    emit(a.out.output.as_deref(), |w| write_rows(&rows, w))
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let threads = worker_threads()?;
    let model = ModelArgs {
        lambda_hat: a.lambda_hat[0],
        t: a.t[0],
        sigma: a.sigma,
        mu: a.mu,
        ridge_hat: a.ridge_hat[0],
        seed: a.seed,
        data_model: a.data_model,
    };
    let mut spec = SweepSpec::new(base_config(a.n[0], a.d[0], &model), a.trials);
    spec.timing = a.out.timing;
    let counts = |v: &[usize]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    if !a.alpha.is_empty() {
        spec = spec.with_grid(SweepParam::Alpha, a.alpha.clone());
        if a.n.len() > 1 && a.d.len() > 1 {
            return Err(Failure::Usage("with --alpha, sweep at most one of --d and --n".into()));
        }
    }
    for (p, v) in [
        (SweepParam::LambdaHat, a.lambda_hat.clone()),
        (SweepParam::T, a.t.clone()),
        (SweepParam::RidgeHat, a.ridge_hat.clone()),
        (SweepParam::D, counts(&a.d)),
        (SweepParam::N, counts(&a.n)),
    ] {
        if v.len() > 1 {
            spec = spec.with_grid(p, v);
        }
    }
    let rows = run_sweep(&spec, threads)?;
    report_failures(rows.iter().filter(|r| !r.is_ok()).count(), rows.len());
    emit(a.out.output.as_deref(), |w| write_rows(&rows, w))
}

fn validate_rmt(a: RmtArgs) -> Result<(), Failure> {
    let threads = worker_threads()?;
    let pool = lindiff::harness::thread_pool(threads)?;
    let mut rows = Vec::new();
    for &rh in &a.ridge_hat {
        rows.extend(pool.install(|| rmt_validation(a.n, a.d, rh, a.sigma_x_sq, a.trials, a.seed))?);
    }
    emit(a.output.as_deref(), |w| write_rmt_csv(&rows, w))
}

fn chain(a: ChainArgs) -> Result<(), Failure> {
    let threads = worker_threads()?;
    let base = ChainConfig {
        steps: a.steps.first().copied().unwrap_or(1),
        beta: a.beta,
        lambda: a.lambda,
        components: a.components.first().copied().unwrap_or(1),
        mu0: a.mu0,
        spacing: a.spacing,
        comp_sigma: a.comp_sigma,
        n: a.n,
        d: a.d,
        seed: a.seed,
    };
    let spec = ChainSweep {
        steps: a.steps,
        components: a.components,
        trials: a.trials,
        base,
        ridge_hat: a.ridge_hat,
        sampling: a.sampling,
        timing: a.out.timing,
    };
    let rows = run_chain_sweep(&spec, threads)?;
    report_failures(rows.iter().filter(|r| r.error.is_some()).count(), rows.len());
    emit(a.out.output.as_deref(), |w| write_chain_csv(&rows, w))
}
