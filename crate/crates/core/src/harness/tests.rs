use super::*;
use crate::model::DataModel;

fn base() -> ModelConfig<f64> {
    ModelConfig {
        n: 64,
        d: 16,
        t: 2.0,
        lambda_hat: 0.05,
        sigma: 1.0,
        mu: 10.0,
        ridge_hat: 0.0,
        seed: 11,
        data_model: DataModel::ForwardNoising,
    }
}

fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_rows(rows, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn alpha_grid_rounds_n() {
    let spec = SweepSpec::new(ModelConfig { d: 128, ..base() }, 1).with_grid(SweepParam::Alpha, vec![0.25, 0.5, 0.75]);
    let ns: Vec<usize> = (0..3).map(|i| spec.point(i).unwrap().n).collect();
    assert_eq!(ns, vec![512, 256, 171]);
    assert_eq!(spec.point(2).unwrap().alpha(), 128.0 / 171.0);
}

#[test]
fn alpha_with_n_derives_d() {
    let spec =
        SweepSpec::new(base(), 1).with_grid(SweepParam::N, vec![100.0]).with_grid(SweepParam::Alpha, vec![0.333]);
    let p = spec.point(0).unwrap();
    assert_eq!((p.n, p.d), (100, 33));
}

#[test]
fn grid_order_is_nested() {
    let spec = SweepSpec::new(base(), 1)
        .with_grid(SweepParam::T, vec![1.0, 2.0])
        .with_grid(SweepParam::LambdaHat, vec![0.1, 0.2, 0.3]);
    assert_eq!(spec.points(), 6);
    let pts: Vec<(f64, f64)> = (0..6).map(|i| spec.point(i).map(|c| (c.lambda_hat, c.t)).unwrap()).collect();
    assert_eq!(pts, vec![(0.1, 1.0), (0.1, 2.0), (0.2, 1.0), (0.2, 2.0), (0.3, 1.0), (0.3, 2.0)]);
}

#[test]
fn spec_validation() {
    assert!(SweepSpec::new(base(), 0).validate().is_err());
    let bad = SweepSpec::new(base(), 1)
        .with_grid(SweepParam::Alpha, vec![0.5])
        .with_grid(SweepParam::D, vec![8.0])
        .with_grid(SweepParam::N, vec![8.0]);
    assert!(bad.validate().is_err());
    assert!(SweepSpec::new(base(), 1).with_grid(SweepParam::D, vec![]).validate().is_err());
    assert!(SweepSpec::new(base(), 1).with_grid(SweepParam::D, vec![2.5]).point(0).is_err());
    assert!("lambda_hat".parse::<SweepParam>().is_ok());
    assert!("sigma".parse::<SweepParam>().is_err());
}

#[test]
fn noiseless_trial() {
    let cfg = ModelConfig { lambda_hat: 0.0, ..base() };
    let row = run_trial(&cfg, 0, false);
    assert!(row.is_ok(), "{:?}", row.error);
    // Without noise the generated covariance is the isotropicised empirical
    // clean variance, so kl_var reduces to its finite-sample deviation.
    let clean = crate::model::sample_clean(&cfg, &mut stream(cfg.seed)).unwrap();
    let spread = crate::linalg::column_variances(&clean).sum() / cfg.d as f64;
    let expect = 0.25 * cfg.d as f64 * (spread - 1.0).powi(2);
    assert!((row.kl_var - expect).abs() <= 1e-8 * expect.max(1e-8));
    assert_eq!(row.theory_total, 0.0);
}

#[test]
fn ridge_trial_has_total_only() {
    let cfg = ModelConfig { ridge_hat: 0.1, ..base() };
    let row = run_trial(&cfg, 0, false);
    assert!(row.is_ok());
    assert!(row.theory_order1.is_nan() && row.theory_order2.is_nan());
    assert!(row.theory_total.is_finite() && row.theory_total > 0.0);
}

#[test]
fn trial_is_reproducible() {
    let a = run_trial(&base(), 3, false);
    let b = run_trial(&base(), 3, false);
    assert_eq!(csv_string(&[a]), csv_string(&[b]));
}

#[test]
fn single_point_sweep_is_a_trial() {
    let spec = SweepSpec::new(base(), 1);
    let rows = run_sweep(&spec, Some(1)).unwrap();
    let mut cfg = base();
    cfg.seed = mix_seed(base().seed, 0, 0);
    assert_eq!(rows, vec![run_trial(&cfg, 0, false)]);
}

#[test]
fn theory_identical_across_trials() {
    let spec = SweepSpec::new(base(), 3).with_grid(SweepParam::Alpha, vec![0.25, 2.0]);
    let rows = run_sweep(&spec, Some(2)).unwrap();
    assert_eq!(rows.len(), 6);
    for chunk in rows.chunks(3) {
        assert!(chunk.iter().all(|r| r.theory_total == chunk[0].theory_total));
        assert_eq!(chunk.iter().map(|r| r.trial_index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(chunk[0].seed != chunk[1].seed);
    }
}

#[test]
fn failing_point_is_isolated() {
    let spec = SweepSpec::new(base(), 1).with_grid(SweepParam::Alpha, vec![0.5, 1.0, 2.0]);
    let rows = run_sweep(&spec, Some(2)).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].is_ok() && rows[2].is_ok());
    assert!(rows[1].error.as_deref().unwrap().contains("pole"));
    assert!(rows[1].kl_var.is_nan());
    assert_eq!(rows[1].alpha, 1.0);
}

#[test]
fn sweep_independent_of_threads() {
    let spec = SweepSpec::new(base(), 2).with_grid(SweepParam::LambdaHat, vec![0.02, 0.1]);
    let a = csv_string(&run_sweep(&spec, Some(1)).unwrap());
    let b = csv_string(&run_sweep(&spec, Some(3)).unwrap());
    assert_eq!(a, b);
}

#[test]
fn csv_header_and_empty() {
    assert_eq!(csv_string(&[]), format!("{}\n", RESULT_HEADER.join(",")));
    assert_eq!(
        RESULT_HEADER.join(","),
        "alpha,lambda_hat,T,d,n,ridge_hat,trial_index,seed,kl_mean,kl_var,kl_exact,theory_order1,theory_order2,theory_total,wall_time_ms"
    );
}

fn fixture_row() -> ResultRow {
    ResultRow {
        alpha: 0.5,
        lambda_hat: 0.1,
        t: 2.0,
        d: 128,
        n: 256,
        ridge_hat: 0.0,
        trial_index: 7,
        seed: 42,
        kl_mean: 1.0 / 3.0,
        kl_var: 0.446_258_468_775_981_9,
        kl_exact: f64::INFINITY,
        theory_order1: 0.115_075,
        theory_order2: 0.331_264,
        theory_total: f64::NAN,
        wall_time_ms: 0.0,
        error: None,
    }
}

#[test]
fn csv_golden_row() {
    let text = csv_string(&[fixture_row()]);
    let line = text.lines().nth(1).unwrap();
    assert_eq!(
        line,
        "5.0000000000000000e-1,1.0000000000000001e-1,2.0000000000000000e0,128,256,0.0000000000000000e0,7,42,\
         3.3333333333333331e-1,4.4625846877598191e-1,inf,1.1507500000000000e-1,3.3126400000000000e-1,NaN,\
         0.0000000000000000e0"
    );
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn csv_round_trips_bit_exactly() {
    let row = fixture_row();
    let text = csv_string(std::slice::from_ref(&row));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rec = rdr.records().next().unwrap().unwrap();
    let parse = |i: usize| rec[i].parse::<f64>().unwrap();
    assert_eq!(parse(0).to_bits(), row.alpha.to_bits());
    assert_eq!(parse(1).to_bits(), row.lambda_hat.to_bits());
    assert_eq!(parse(8).to_bits(), row.kl_mean.to_bits());
    assert_eq!(parse(9).to_bits(), row.kl_var.to_bits());
    assert_eq!(parse(10), f64::INFINITY);
    assert!(parse(13).is_nan());
}

#[test]
fn csv_file_errors_carry_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("out.csv");
    let err = write_csv(&[], &path).unwrap_err();
    assert!(err.to_string().contains("out.csv"));
    assert!(!err.is_invalid_input());
    let ok = dir.path().join("out.csv");
    write_csv(&[fixture_row()], &ok).unwrap();
    assert_eq!(std::fs::read_to_string(ok).unwrap(), csv_string(&[fixture_row()]));
}

#[test]
fn linear_model_uses_population_init() {
    let cfg = ModelConfig { data_model: DataModel::LinearGaussian, ..base() };
    let row = run_trial(&cfg, 0, false);
    assert!(row.is_ok());
    assert!(row.kl_var > 0.0);
}

#[test]
fn chain_rows_share_data_across_steps() {
    let base = crate::chain::ChainConfig { n: 400, d: 2, seed: 5, ..Default::default() };
    let spec = ChainSweep {
        steps: vec![1, 3],
        components: vec![1, 2],
        trials: 2,
        base,
        ridge_hat: 0.0,
        sampling: crate::chain::StepSampling::Gaussian,
        timing: false,
    };
    let rows = run_chain_sweep(&spec, Some(2)).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.error.is_none() && r.e_og > 0.0));
    assert_eq!((rows[0].s, rows[0].components, rows[0].trial), (1, 1, 0));
    assert_eq!((rows[7].s, rows[7].components, rows[7].trial), (3, 2, 1));
    let again = run_chain_sweep(&spec, Some(1)).unwrap();
    assert_eq!(rows, again);
    let mut buf = Vec::new();
    write_chain_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("s,beta,lambda,C,d,n,trial,e_og,wall_time_ms\n"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn rmt_rows_cover_tables() {
    let rows = rmt_validation(40, 20, 0.1, 1.0, 3, 1).unwrap();
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[0].label(), "C11");
    assert_eq!(rows[12].label(), "B4");
    assert!(rmt_validation(10, 20, 0.0, 1.0, 3, 1).is_err());
}
