//! Sweeps end to end: output bytes, seeding and agreement with theory.

use lindiff::harness::{run_sweep, write_rows, SweepParam, SweepSpec, RESULT_HEADER};
use lindiff::{DataModel, ModelConfig};

fn base(d: usize, lambda_hat: f64) -> ModelConfig<f64> {
    ModelConfig {
        n: 2 * d,
        d,
        t: 2.0,
        lambda_hat,
        sigma: 1.0,
        mu: 0.0,
        ridge_hat: 0.0,
        seed: 42,
        data_model: DataModel::ForwardNoising,
    }
}

fn csv(spec: &SweepSpec, threads: usize) -> Vec<u8> {
    let rows = run_sweep(spec, Some(threads)).unwrap();
    let mut out = Vec::new();
    write_rows(&rows, &mut out).unwrap();
    out
}

#[test]
fn csv_identical_across_worker_counts() {
    let spec = SweepSpec::new(base(24, 0.05), 3)
        .with_grid(SweepParam::Alpha, vec![0.25, 0.5, 2.0])
        .with_grid(SweepParam::LambdaHat, vec![0.02, 0.05]);
    let one = csv(&spec, 1);
    assert_eq!(one, csv(&spec, 8));
    assert_eq!(one, csv(&spec, 3));
    let text = String::from_utf8(one).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), RESULT_HEADER.join(","));
    assert_eq!(lines.count(), 18);
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn changing_the_base_seed_changes_the_draws() {
    let spec = SweepSpec::new(base(16, 0.05), 2);
    let mut other = spec.clone();
    other.base.seed = 43;
    assert_ne!(csv(&spec, 1), csv(&other, 1));
}

#[test]
fn linear_model_trial_mean_near_theory() {
    // d=128, n=256, lambda_hat=0.1, T=2: theory 3.487e-3 per dimension.
    let mut b = base(128, 0.1);
    b.data_model = DataModel::LinearGaussian;
    let rows = run_sweep(&SweepSpec::new(b, 100), None).unwrap();
    let per_d: Vec<f64> = rows.iter().map(|r| r.kl_var / r.d as f64).collect();
    let mean = per_d.iter().sum::<f64>() / per_d.len() as f64;
    let sd = (per_d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (per_d.len() - 1) as f64).sqrt();
    let theory = rows[0].theory_total / 128.0;
    assert!((theory - 3.4863942873123465e-3).abs() < 1e-12);
    assert!((mean - theory).abs() <= 3.0 * sd, "mean {mean} sd {sd} theory {theory}");
}
