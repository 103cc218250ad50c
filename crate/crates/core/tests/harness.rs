use mom_core::calibration::{block_count_subgaussian, AlphaMapping};
use mom_core::contamination::{ContaminationSpec, InlierDist, OutlierRule, Placement};
use mom_core::harness::{
    binomial_upper_tail, read_csv_dataset, read_results, run, run_break_experiment, run_coverage, run_learning,
    write_outputs, write_results, BoundPath, Command, ExperimentConfig, ResultTable, Value, BREAK_COLUMNS,
    COVERAGE_COLUMNS,
};
use mom_core::learning::{pairwise_risk, PairwiseLoss};
use mom_core::Error;

fn f(t: &ResultTable, row: usize, col: &str) -> f64 {
    t.get(row, col).and_then(Value::as_f64).unwrap()
}

#[test]
fn break_mean_is_byte_identical_across_calls() {
    let cfg = ExperimentConfig::preset(Command::BreakMean, 400, 1);
    let a = run_break_experiment(&cfg).unwrap().to_csv_string();
    let b = run_break_experiment(&cfg).unwrap().to_csv_string();
    assert_eq!(a, b);
    let other = ExperimentConfig { seed: 1, ..cfg };
    assert_ne!(a, run_break_experiment(&other).unwrap().to_csv_string());
}

#[test]
fn break_rows_are_self_describing() {
    let mut cfg = ExperimentConfig::preset(Command::BreakMean, 100, 20);
    cfg.n_grid = vec![100, 400];
    let t = run_break_experiment(&cfg).unwrap();
    assert_eq!(t.columns(), BREAK_COLUMNS);
    assert_eq!(t.len(), 8);
    // n = 100: n_O = 10, ε = 0.1, Harmonic α = 1/3, K = ⌈100/3⌉ = 34
    let mom = t.rows().iter().position(|r| r[1].as_str() == Some("mom")).unwrap();
    assert_eq!(f(&t, mom, "k"), 34.0);
    assert!((f(&t, mom, "epsilon") - 0.1).abs() < 1e-15);
    assert!((f(&t, mom, "ln_delta") + 400.0 / 3.0).abs() < 1e-9);
    assert_eq!(t.get(mom, "mapping").unwrap().as_str(), Some("Harmonic"));
    assert_eq!(t.get(0, "ln_delta"), Some(&Value::Empty));
}

#[test]
fn break_mean_error_tracks_outlier_mass() {
    // E[θ̂_avg] = (√n · √n)/n = 1
    let cfg = ExperimentConfig::preset(Command::BreakMean, 2500, 40);
    let t = run_break_experiment(&cfg).unwrap();
    assert!((f(&t, 0, "mean_abs_error") - 1.0).abs() < 0.1);
    assert!(f(&t, 3, "mean_abs_error") < 0.2);
}

#[test]
fn break_variance_targets_one_twelfth() {
    let mut cfg = ExperimentConfig::preset(Command::BreakVariance, 1000, 5);
    cfg.contamination = Some(ContaminationSpec::sqrt_n(
        InlierDist::Uniform { lo: 0.0, hi: 1.0 },
        OutlierRule::DiracAt { value: 0.5 },
        Placement::Append,
    ));
    // outliers at the mean only shrink the variance slightly
    let t = run_break_experiment(&cfg).unwrap();
    assert!(f(&t, 0, "mean_abs_error") < 0.01);
}

#[test]
fn mann_whitney_rejects_discrete_inliers() {
    let mut cfg = ExperimentConfig::preset(Command::MannWhitney, 100, 1);
    cfg.contamination = Some(ContaminationSpec::sqrt_n(
        InlierDist::Bernoulli { p: 0.5 },
        OutlierRule::DiracAt { value: 1.0 },
        Placement::Append,
    ));
    let e = run_break_experiment(&cfg).unwrap_err();
    assert!(e.is_config_error(), "{e}");
    assert!(e.to_string().contains("n = 100"), "{e}");
}

#[test]
fn breakdown_is_reported_with_context() {
    let mut cfg = ExperimentConfig::preset(Command::BreakMean, 4, 1);
    cfg.n_grid = vec![4];
    let e = run_break_experiment(&cfg).unwrap_err();
    assert!(matches!(e.root(), Error::BreakdownExceeded(_)), "{e}");
    assert!(!e.is_config_error());
}

#[test]
fn coverage_gaussian_subgaussian_path() {
    let mut cfg = ExperimentConfig::preset(Command::Coverage, 200, 1000);
    cfg.contamination = Some(ContaminationSpec::sqrt_n(
        InlierDist::Gaussian { mean: 0.0, sd: 1.0 },
        OutlierRule::DiracPower { exponent: 0.5 },
        Placement::Append,
    ));
    cfg.coverage.epsilons = vec![0.0];
    cfg.coverage.path = BoundPath::SubGaussian;
    cfg.coverage.ln_deltas = Some(vec![-5.0]);
    let t = run_coverage(&cfg).unwrap();
    assert_eq!(t.columns(), COVERAGE_COLUMNS);
    assert_eq!(t.len(), 1);
    let delta = (-5.0f64).exp();
    let sd = (delta * (1.0 - delta) / 1000.0).sqrt();
    assert!(f(&t, 0, "failure_fraction") <= delta + 3.0 * sd);
    assert_eq!(f(&t, 0, "k"), 1.0);
    assert_eq!(t.get(0, "status").unwrap().as_str(), Some("ok"));
}

#[test]
fn coverage_student_t_chebyshev() {
    let mut cfg = ExperimentConfig::preset(Command::Coverage, 300, 200);
    cfg.coverage.epsilons = vec![0.05];
    cfg.coverage.points = 3;
    let t = run_coverage(&cfg).unwrap();
    assert_eq!(t.len(), 3);
    for r in 0..3 {
        assert!(f(&t, r, "failure_fraction") <= f(&t, r, "delta") + 1e-12);
        assert_eq!(t.get(r, "status").unwrap().as_str(), Some("ok"));
    }
}

#[test]
fn coverage_impossible_delta_gives_error_row() {
    let mut cfg = ExperimentConfig::preset(Command::Coverage, 100, 10);
    cfg.coverage.epsilons = vec![0.1];
    cfg.coverage.ln_deltas = Some(vec![-2.0, -10.0]);
    let t = run_coverage(&cfg).unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(t.get(0, "status").unwrap().as_str(), Some("error"));
    assert!(t
        .get(0, "message")
        .unwrap()
        .as_str()
        .unwrap()
        .contains("outside admissible range"));
    assert_eq!(t.get(0, "failures"), Some(&Value::Empty));
    assert_eq!(t.get(1, "status").unwrap().as_str(), Some("ok"));
}

#[test]
fn binomial_tail_values() {
    assert_eq!(binomial_upper_tail(10, 0.1, 0), 1.0);
    assert!((binomial_upper_tail(1, 0.3, 1) - 0.3).abs() < 1e-12);
    // P(Bin(2, 1/2) ≥ 1) = 3/4
    assert!((binomial_upper_tail(2, 0.5, 1) - 0.75).abs() < 1e-12);
    assert_eq!(binomial_upper_tail(5, 0.0, 1), 0.0);
}

#[test]
fn learning_zero_epochs_all_cells_equal_initial_risk() {
    let mut cfg = ExperimentConfig::preset(Command::LearnRanking, 40, 2);
    cfg.learning.epochs = 0;
    cfg.learning.n_test = 30;
    let out = run_learning(&cfg).unwrap();
    assert_eq!(out.summary.len(), 4);
    assert!(out.traces.is_empty());
    let first = f(&out.summary, 0, "mean_test_risk");
    for r in 1..4 {
        assert_eq!(f(&out.summary, r, "mean_test_risk"), first);
    }
}

#[test]
fn learning_metric_runs_and_is_deterministic() {
    let mut cfg = ExperimentConfig::preset(Command::LearnMetric, 60, 2);
    cfg.learning.epochs = 5;
    cfg.learning.n_test = 30;
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a, b);
    let traces = &a.tables[1].1;
    assert_eq!(traces.len(), 4 * 5);
    // 6 outliers on 66 rows
    let k = block_count_subgaussian(&AlphaMapping::Harmonic, 6.0 / 66.0, 66).unwrap();
    assert_eq!(f(&a.tables[0].1, 1, "k"), k as f64);
}

#[test]
fn sane_mou_gd_close_to_gd_on_planted_ranking() {
    let cfg = ExperimentConfig::preset(Command::LearnRanking, 200, 8);
    let out = run_learning(&cfg).unwrap();
    let sane_gd = f(&out.summary, 0, "mean_test_risk");
    let sane_mou = f(&out.summary, 1, "mean_test_risk");
    let cont_gd = f(&out.summary, 2, "mean_test_risk");
    assert!(sane_mou <= 1.15 * sane_gd, "{sane_mou} vs {sane_gd}");
    assert!(cont_gd > sane_gd.max(sane_mou));
}

#[test]
fn calibrate_table_flags_breakdown() {
    let mut cfg = ExperimentConfig::preset(Command::Calibrate, 100, 1);
    cfg.calibrate.epsilons = vec![0.0, 0.1, 0.5];
    let t = run(&cfg).unwrap().tables.remove(0).1;
    assert_eq!(t.len(), 3);
    assert_eq!(f(&t, 1, "beta"), 5.0);
    assert_eq!(f(&t, 1, "k_subgaussian"), 34.0);
    assert_eq!(t.get(2, "status").unwrap().as_str(), Some("error"));
}

#[test]
fn results_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::preset(Command::BreakMedian, 300, 3);
    let t = run_break_experiment(&cfg).unwrap();
    let path = dir.path().join("r.csv");
    write_results(&path, &t).unwrap();
    let back = read_results(&path).unwrap();
    assert_eq!(back.columns(), t.columns());
    for (a, b) in back.rows().iter().zip(t.rows()) {
        for (x, y) in a.iter().zip(b) {
            match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0)),
                _ => assert_eq!(x, y),
            }
        }
    }
    let bytes = std::fs::read(&path).unwrap();
    assert!(!bytes.contains(&b'\r'));
}

#[test]
fn write_outputs_places_siblings() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset(Command::LearnRanking, 30, 1);
    cfg.learning.epochs = 2;
    cfg.learning.n_test = 10;
    let out = run(&cfg).unwrap();
    let path = dir.path().join("rank.csv");
    let written = write_outputs(&path, &cfg, &out).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["rank.csv", "rank.traces.csv", "rank.config.json"]);
    let echo = std::fs::read_to_string(dir.path().join("rank.config.json")).unwrap();
    assert_eq!(ExperimentConfig::from_json(&echo).unwrap(), cfg);
}

#[test]
fn csv_dataset_feeds_the_risk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "x1,x2,label\n0,0,1\n1,1,1\n2,0,0\n").unwrap();
    let ds = read_csv_dataset(&path).unwrap();
    assert_eq!((ds.n(), ds.p()), (3, 2));
    let r = pairwise_risk(&[1.0, 0.0, 0.0, 1.0], &ds, &PairwiseLoss::metric()).unwrap();
    // same pair d² = 2 → 1; different pairs d² = 4 and 2 → 0 and 1
    assert!((r - 2.0 / 3.0).abs() < 1e-12);

    std::fs::write(&path, "x1,label\n1,0\nabc,1\n").unwrap();
    match read_csv_dataset(&path).unwrap_err() {
        Error::Parse { line, column, .. } => assert_eq!((line, column.as_str()), (3, "x1")),
        e => panic!("{e:?}"),
    }
    assert!(matches!(
        read_csv_dataset(&dir.path().join("missing.csv")),
        Err(Error::Io(_))
    ));
}
