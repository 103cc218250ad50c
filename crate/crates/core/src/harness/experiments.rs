use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{Binomial, DiscreteCDF};

use super::config::{BoundPath, Command, ExperimentConfig};
use super::io::{ResultTable, Value};
use crate::bounds::{mom_bound_chebyshev, mom_bound_subgaussian};
use crate::calibration::{
    block_count_chebyshev, block_count_subgaussian, delta_range_chebyshev, delta_range_subgaussian, derived_constants,
    AlphaMapping, Delta, DeltaRange,
};
use crate::contamination::{epsilon_of, generate, generate_with_count, n_outliers, InlierDist};
use crate::error::{Error, Result};
use crate::estimators::{
    empirical_mean, empirical_median, empirical_variance, mann_whitney, mom, mou, mou2_diag, trimmed_mean, CrossKernel,
    UKernel,
};
use crate::learning::{
    contaminate_box, contaminate_pairwise, full_batch_gd, mou_gd, pairwise_risk, planted_metric, planted_ranking,
    GDConfig, GDResult, PairwiseLoss, StepSchedule,
};
use crate::numeric::{derive_seed, mean_and_std_err, KahanSum};
use crate::partitioning::{diagonal_pairing, partition_random};

pub const BREAK_COLUMNS: [&str; 9] = [
    "n",
    "estimator",
    "mean_abs_error",
    "std_err",
    "k",
    "epsilon",
    "mapping",
    "ln_delta",
    "runs",
];

struct EstimatorSpec {
    name: &'static str,
    k: Option<usize>,
}

fn context<T>(r: Result<T>, what: impl FnOnce() -> String) -> Result<T> {
    r.map_err(|e| e.context(what()))
}

/// Mean absolute error of each estimator against the known target, per
/// sample size. MoM/MoU use `K = ⌈α(ε)n⌉` and carry the upper end of the
/// matching sub-Gaussian δ-range.
pub fn run_break_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    if !config.command.is_break() {
        return Err(Error::Config(format!("{:?} is not a break experiment", config.command)));
    }
    let mut table = ResultTable::new(BREAK_COLUMNS);
    for &n in &config.n_grid {
        let what = || format!("{:?} at n = {n}", config.command);
        context(break_at(config, n, &mut table), what)?;
    }
    Ok(table)
}

fn break_at(config: &ExperimentConfig, n: usize, table: &mut ResultTable) -> Result<()> {
    let spec = config.contamination_spec();
    let mapping = config.alpha_mapping();
    let eps = epsilon_of(&spec, n);
    let trim = config.break_params.trim;
    let inlier = &spec.inlier_dist;

    let (theta, calib_eps) = match config.command {
        Command::BreakMean | Command::BreakMedian => (required(inlier.mean(), "mean")?, eps),
        Command::BreakVariance => (required(inlier.variance(), "variance")?, eps),
        Command::MannWhitney => {
            if matches!(inlier, InlierDist::Bernoulli { .. } | InlierDist::Empirical { .. }) {
                return Err(Error::Config(
                    "Mann-Whitney needs a continuous inlier distribution".into(),
                ));
            }
            if 2.0 * eps >= 0.5 {
                return Err(Error::SumBreakdownExceeded(2.0 * eps));
            }
            (0.5, 2.0 * eps)
        }
        _ => unreachable!("checked by caller"),
    };
    let k = block_count_subgaussian(&mapping, calib_eps, n)?;
    let ln_delta = delta_range_subgaussian(&mapping, calib_eps, n)?.ln_upper;

    let estimators: Vec<EstimatorSpec> = match config.command {
        Command::BreakMean | Command::BreakMedian => vec![
            EstimatorSpec {
                name: "mean",
                k: Some(1),
            },
            EstimatorSpec {
                name: "median",
                k: Some(n),
            },
            EstimatorSpec {
                name: "trimmed_mean",
                k: None,
            },
            EstimatorSpec {
                name: "mom",
                k: Some(k),
            },
        ],
        Command::BreakVariance => vec![
            EstimatorSpec {
                name: "u_stat",
                k: Some(1),
            },
            EstimatorSpec {
                name: "mou",
                k: Some(k),
            },
        ],
        _ => {
            // smallest K the diagonal estimator admits: 2(n_O + m_O) < K
            let k_min = (4 * n_outliers(&spec, n) + 1).min(n);
            vec![
                EstimatorSpec {
                    name: "u_stat",
                    k: Some(1),
                },
                EstimatorSpec {
                    name: "mou2_diag",
                    k: Some(k),
                },
                EstimatorSpec {
                    name: "mou2_diag_min_k",
                    k: Some(k_min),
                },
            ]
        }
    };

    let errors: Vec<Vec<f64>> = (0..config.runs)
        .into_par_iter()
        .map(|run| -> Result<Vec<f64>> {
            let seed = derive_seed(config.seed, &[n as u64, run as u64]);
            let estimates = match config.command {
                Command::MannWhitney => {
                    let x = generate(&spec, n, derive_seed(seed, &[2]))?.into_values();
                    let y = generate(&spec, n, derive_seed(seed, &[3]))?.into_values();
                    let mw = CrossKernel::mann_whitney();
                    let mut out = vec![mann_whitney(&x, &y)?];
                    for (i, e) in estimators.iter().enumerate().skip(1) {
                        let pairing = diagonal_pairing(n, n, e.k.expect("set"), Some(derive_seed(seed, &[i as u64])))?;
                        out.push(mou2_diag(&x, &y, &mw, &pairing)?);
                    }
                    out
                }
                _ => {
                    let sample = generate(&spec, n, seed)?;
                    let x = sample.values();
                    let partition = partition_random(n, k, derive_seed(seed, &[1]))?;
                    match config.command {
                        Command::BreakVariance => {
                            vec![empirical_variance(x)?, mou(x, &UKernel::variance(), &partition)?]
                        }
                        _ => vec![
                            empirical_mean(x)?,
                            empirical_median(x)?,
                            trimmed_mean(x, trim)?,
                            mom(x, &partition)?,
                        ],
                    }
                }
            };
            Ok(estimates.into_iter().map(|est| (est - theta).abs()).collect())
        })
        .collect::<Result<_>>()?;

    for (i, e) in estimators.iter().enumerate() {
        let column: Vec<f64> = errors.iter().map(|r| r[i]).collect();
        let (mean, se) = mean_and_std_err(&column);
        let robust = e.k.is_some_and(|k| k > 1 && e.name != "median");
        table.push(vec![
            n.into(),
            e.name.into(),
            mean.into(),
            se.into(),
            e.k.into(),
            calib_eps.into(),
            config.mapping.as_str().into(),
            robust.then_some(ln_delta).into(),
            config.runs.into(),
        ]);
    }
    Ok(())
}

fn required(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("inlier distribution has no finite {what}")))
}

pub const COVERAGE_COLUMNS: [&str; 14] = [
    "n",
    "epsilon",
    "mapping",
    "path",
    "ln_delta",
    "delta",
    "k",
    "bound",
    "runs",
    "failures",
    "failure_fraction",
    "p_value",
    "status",
    "message",
];

/// Scale for the sub-Gaussian bound: the standard deviation for Gaussians,
/// half the range for bounded laws.
fn subgaussian_scale(d: &InlierDist) -> Option<f64> {
    match d {
        InlierDist::Gaussian { sd, .. } => Some(*sd),
        InlierDist::Uniform { lo, hi } => Some(0.5 * (hi - lo)),
        InlierDist::Bernoulli { .. } => Some(0.5),
        InlierDist::Empirical { values } => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Some(0.5 * (hi - lo))
        }
        InlierDist::StudentT { .. } => None,
    }
}

/// `P(Bin(runs, δ) ≥ failures)`.
pub fn binomial_upper_tail(runs: usize, delta: f64, failures: usize) -> f64 {
    if failures == 0 {
        return 1.0;
    }
    if delta <= 0.0 {
        return 0.0;
    }
    let b = Binomial::new(delta.min(1.0), runs as u64).expect("valid binomial");
    b.sf(failures as u64 - 1)
}

/// Empirical failure rates of the MoM deviation bound: for every `(n, ε, δ)`
/// the fraction of runs with `|θ̂ − θ|` above the bound, tested one-sided
/// against the nominal `δ`. Unusable levels produce `status = error` rows.
pub fn run_coverage(config: &ExperimentConfig) -> Result<ResultTable> {
    let mut table = ResultTable::new(COVERAGE_COLUMNS);
    let spec = config.contamination_spec();
    let mapping = config.alpha_mapping();
    let params = &config.coverage;
    let theta = required(spec.inlier_dist.mean(), "mean")?;
    let scale = match params.path {
        BoundPath::Chebyshev => required(spec.inlier_dist.variance(), "variance")?.sqrt(),
        BoundPath::SubGaussian => subgaussian_scale(&spec.inlier_dist)
            .ok_or_else(|| Error::Config("sub-Gaussian path needs a Gaussian or bounded inlier law".into()))?,
    };
    let path_name = match params.path {
        BoundPath::Chebyshev => "Chebyshev",
        BoundPath::SubGaussian => "SubGaussian",
    };

    for &n in &config.n_grid {
        for &eps_target in &params.epsilons {
            let n_o = (eps_target * n as f64).round() as usize;
            let eps = n_o as f64 / n as f64;
            let base_row = |ln_delta: Option<f64>| -> Vec<Value> {
                vec![
                    n.into(),
                    eps.into(),
                    config.mapping.as_str().into(),
                    path_name.into(),
                    ln_delta.into(),
                    ln_delta.map(f64::exp).into(),
                ]
            };
            let error_row = |ln_delta: Option<f64>, e: &Error| -> Vec<Value> {
                let mut row = base_row(ln_delta);
                row.extend([
                    Value::Empty,
                    Value::Empty,
                    config.runs.into(),
                    Value::Empty,
                    Value::Empty,
                    Value::Empty,
                ]);
                row.extend(["error".into(), e.to_string().into()]);
                row
            };
            let range = match params.path {
                BoundPath::Chebyshev => delta_range_chebyshev(&mapping, eps, n),
                BoundPath::SubGaussian => delta_range_subgaussian(&mapping, eps, n),
            };
            let deltas: Vec<std::result::Result<Delta, (f64, Error)>> = match (&params.ln_deltas, &range) {
                (Some(list), _) => list.iter().map(|&l| Delta::exp_neg(-l).map_err(|e| (l, e))).collect(),
                (None, Ok(r)) => default_levels(r, params.points, params.path)
                    .into_iter()
                    .map(Ok)
                    .collect(),
                (None, Err(e)) => {
                    table.push(error_row(None, e));
                    continue;
                }
            };
            for d in deltas {
                let delta = match d {
                    Ok(d) => d,
                    Err((l, e)) => {
                        table.push(error_row(Some(l), &e));
                        continue;
                    }
                };
                let calibrated = match params.path {
                    BoundPath::Chebyshev => block_count_chebyshev(&mapping, eps, delta, n)
                        .and_then(|k| Ok((k, mom_bound_chebyshev(scale, n, delta, eps, &mapping)?))),
                    BoundPath::SubGaussian => block_count_subgaussian(&mapping, eps, n)
                        .and_then(|k| Ok((k, mom_bound_subgaussian(scale, n, delta, eps, &mapping)?))),
                };
                let (k, bound) = match calibrated {
                    Ok(v) => v,
                    Err(e) => {
                        table.push(error_row(Some(delta.ln()), &e));
                        continue;
                    }
                };
                let point_seed = derive_seed(config.seed, &[n as u64, eps.to_bits(), delta.ln_inv().to_bits()]);
                let failed: Vec<bool> = (0..config.runs)
                    .into_par_iter()
                    .map(|run| -> Result<bool> {
                        let seed = derive_seed(point_seed, &[run as u64]);
                        let sample = generate_with_count(&spec, n, n_o, seed)?;
                        let partition = partition_random(n, k, derive_seed(seed, &[1]))?;
                        Ok((mom(sample.values(), &partition)? - theta).abs() > bound)
                    })
                    .collect::<Result<_>>()
                    .map_err(|e| e.context(format!("coverage at n = {n}, ε = {eps}")))?;
                let failures = failed.iter().filter(|f| **f).count();
                let p_value = binomial_upper_tail(config.runs, delta.value(), failures);
                let mut row = base_row(Some(delta.ln()));
                row.extend([
                    k.into(),
                    bound.into(),
                    config.runs.into(),
                    failures.into(),
                    (failures as f64 / config.runs as f64).into(),
                    p_value.into(),
                    if p_value >= params.test_level { "ok" } else { "exceeds" }.into(),
                    Value::Empty,
                ]);
                table.push(row);
            }
        }
    }
    Ok(table)
}

fn default_levels(range: &DeltaRange, points: usize, path: BoundPath) -> Vec<Delta> {
    match (path, range.interior_points(points)) {
        (BoundPath::Chebyshev, Some(v)) => v,
        // open below: multiples of the upper end
        _ => (1..=points)
            .filter_map(|i| Delta::exp_neg(-range.ln_upper * i as f64).ok())
            .collect(),
    }
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "n",
    "data",
    "method",
    "mean_test_risk",
    "std_err",
    "mean_train_risk",
    "k",
    "epsilon",
    "mapping",
    "ln_delta",
    "runs",
];

pub const TRACE_COLUMNS: [&str; 7] = [
    "n",
    "data",
    "method",
    "epoch",
    "median_block_risk",
    "train_risk",
    "test_risk",
];

#[derive(Debug, Clone, PartialEq)]
pub struct LearningOutput {
    /// Final test risk per cell of sane/contaminated × GD/MoU-GD.
    pub summary: ResultTable,
    /// Per-epoch risks averaged over runs.
    pub traces: ResultTable,
}

const CELLS: [(&str, &str); 4] = [
    ("sane", "GD"),
    ("sane", "MoU-GD"),
    ("contaminated", "GD"),
    ("contaminated", "MoU-GD"),
];

struct RunOutcome {
    fits: [GDResult; 4],
    final_test: [f64; 4],
    final_train: [f64; 4],
    k: usize,
    epsilon: f64,
}

/// Sane and contaminated training sets, each fitted by full-batch GD and by
/// MoU-GD with the block count of the contaminated set.
pub fn run_learning(config: &ExperimentConfig) -> Result<LearningOutput> {
    let metric = match config.command {
        Command::LearnRanking => false,
        Command::LearnMetric => true,
        c => return Err(Error::Config(format!("{c:?} is not a learning experiment"))),
    };
    let mut summary = ResultTable::new(SUMMARY_COLUMNS);
    let mut traces = ResultTable::new(TRACE_COLUMNS);
    for &n in &config.n_grid {
        let outcomes: Vec<RunOutcome> = (0..config.runs)
            .into_par_iter()
            .map(|run| learning_run(config, n, run, metric))
            .collect::<Result<_>>()
            .map_err(|e| e.context(format!("{:?} at n = {n}", config.command)))?;
        let k = outcomes[0].k;
        let eps = outcomes[0].epsilon;
        let mapping = config.alpha_mapping();
        let ln_delta = delta_range_subgaussian(&mapping, eps, n).map(|r| r.ln_upper).ok();
        for (c, (data, method)) in CELLS.iter().enumerate() {
            let test: Vec<f64> = outcomes.iter().map(|o| o.final_test[c]).collect();
            let train: Vec<f64> = outcomes.iter().map(|o| o.final_train[c]).collect();
            let (mean, se) = mean_and_std_err(&test);
            let mou = *method == "MoU-GD";
            summary.push(vec![
                n.into(),
                (*data).into(),
                (*method).into(),
                mean.into(),
                se.into(),
                mean_and_std_err(&train).0.into(),
                if mou { k } else { 1 }.into(),
                if *data == "sane" { 0.0 } else { eps }.into(),
                config.mapping.as_str().into(),
                mou.then_some(ln_delta).flatten().into(),
                config.runs.into(),
            ]);
            for epoch in 0..config.learning.epochs {
                let avg = |f: &dyn Fn(&GDResult) -> f64| -> f64 {
                    let s: KahanSum = outcomes.iter().map(|o| f(&o.fits[c])).collect();
                    s.value() / outcomes.len() as f64
                };
                traces.push(vec![
                    n.into(),
                    (*data).into(),
                    (*method).into(),
                    epoch.into(),
                    avg(&|r| r.trace[epoch].median_block_risk).into(),
                    avg(&|r| r.trace[epoch].train_risk).into(),
                    avg(&|r| r.trace[epoch].test_risk.unwrap_or(f64::NAN)).into(),
                ]);
            }
        }
    }
    Ok(LearningOutput { summary, traces })
}

fn learning_run(config: &ExperimentConfig, n: usize, run: usize, metric: bool) -> Result<RunOutcome> {
    let params = &config.learning;
    let seed = derive_seed(config.seed, &[n as u64, run as u64]);
    let total = n + params.n_test;
    let (loss, all, u0) = if metric {
        let per_class = total.div_ceil(params.classes);
        let ds = planted_metric(
            per_class,
            params.q,
            params.classes,
            params.spread,
            derive_seed(seed, &[1]),
        )?;
        let mut eye = vec![0.0; params.q * params.q];
        for i in 0..params.q {
            eye[i * params.q + i] = 1.0;
        }
        (PairwiseLoss::metric(), ds, eye)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0]));
        let w_star: Vec<f64> = (0..params.p)
            .map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        let ds = planted_ranking(total, &w_star, params.noise_sd, derive_seed(seed, &[1]))?;
        let w0 = (0..params.p)
            .map(|_| params.init_scale * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        (PairwiseLoss::ranking(), ds, w0)
    };
    let train = all.subset(&(0..n).collect::<Vec<_>>());
    let test = all.subset(&(n..total).collect::<Vec<_>>());
    let base = GDConfig {
        k: 1,
        epochs: params.epochs,
        step: StepSchedule::Decaying {
            gamma0: params.gamma0.unwrap_or(if metric { 0.3 } else { 0.03 }),
        },
        u0: u0.clone(),
        seed: derive_seed(seed, &[3]),
        psd_project: metric,
    };

    let sane_gd = full_batch_gd(&train, &loss, &base, Some(&test))?;
    let fraction = params.outlier_fraction.unwrap_or(if metric { 0.1 } else { 0.05 });
    let contaminated = if metric {
        let count = (fraction * n as f64).ceil() as usize;
        contaminate_box(
            &train,
            count,
            params.box_lo,
            params.box_hi,
            params.box_label,
            derive_seed(seed, &[2]),
        )?
    } else {
        contaminate_pairwise(
            &train,
            fraction,
            params.lambda,
            &sane_gd.u,
            params.box_width,
            derive_seed(seed, &[2]),
        )?
    };
    let epsilon = contaminated.outlier_count() as f64 / contaminated.n() as f64;
    let k = match params.k {
        Some(k) => k,
        None => block_count_subgaussian(&config.alpha_mapping(), epsilon, contaminated.n())?,
    };
    let mou_cfg = GDConfig { k, ..base.clone() };
    let sane_mou = mou_gd(&train, &loss, &mou_cfg, Some(&test))?;
    let cont_gd = full_batch_gd(&contaminated, &loss, &base, Some(&test))?;
    let cont_mou = mou_gd(
        &contaminated,
        &loss,
        &GDConfig {
            seed: derive_seed(seed, &[4]),
            ..mou_cfg
        },
        Some(&test),
    )?;

    let fits = [sane_gd, sane_mou, cont_gd, cont_mou];
    let train_sets = [&train, &train, &contaminated, &contaminated];
    let mut final_test = [0.0; 4];
    let mut final_train = [0.0; 4];
    for (c, fit) in fits.iter().enumerate() {
        (final_test[c], final_train[c]) = match fit.trace.last() {
            Some(r) => (r.test_risk.expect("test set given"), r.train_risk),
            None => (
                pairwise_risk(&u0, &test, &loss)?,
                pairwise_risk(&u0, train_sets[c], &loss)?,
            ),
        };
    }
    Ok(RunOutcome {
        fits,
        final_test,
        final_train,
        k,
        epsilon,
    })
}

pub const CALIBRATE_COLUMNS: [&str; 15] = [
    "n",
    "epsilon",
    "mapping",
    "alpha",
    "beta",
    "gamma",
    "cap_gamma",
    "delta_const",
    "eta",
    "cheb_ln_lower",
    "cheb_ln_upper",
    "subg_ln_upper",
    "k_subgaussian",
    "status",
    "message",
];

/// Derived constants, δ-ranges and block counts on an ε-grid.
pub fn run_calibrate(config: &ExperimentConfig) -> Result<ResultTable> {
    let mapping = config.alpha_mapping();
    let mut table = ResultTable::new(CALIBRATE_COLUMNS);
    for &n in &config.n_grid {
        for &eps in &config.calibrate.epsilons {
            let head: Vec<Value> = vec![n.into(), eps.into(), config.mapping.as_str().into()];
            match calibrate_row(&mapping, eps, n) {
                Ok(mut rest) => {
                    let mut row = head;
                    row.append(&mut rest);
                    row.extend(["ok".into(), Value::Empty]);
                    table.push(row);
                }
                Err(e) => {
                    let mut row = head;
                    row.extend(std::iter::repeat_n(Value::Empty, 10));
                    row.extend(["error".into(), e.to_string().into()]);
                    table.push(row);
                }
            }
        }
    }
    Ok(table)
}

fn calibrate_row(mapping: &AlphaMapping, eps: f64, n: usize) -> Result<Vec<Value>> {
    let c = derived_constants(mapping, eps)?;
    let cheb = delta_range_chebyshev(mapping, eps, n);
    let subg = delta_range_subgaussian(mapping, eps, n)?;
    let k = block_count_subgaussian(mapping, eps, n)?;
    let (lo, hi) = match cheb {
        Ok(r) => (Value::from(r.ln_lower), Value::from(r.ln_upper)),
        Err(_) => (Value::Empty, Value::Empty),
    };
    Ok(vec![
        c.alpha.into(),
        c.beta.into(),
        c.gamma.into(),
        c.cap_gamma.into(),
        c.delta_const.into(),
        c.eta.into(),
        lo,
        hi,
        subg.ln_upper.into(),
        k.into(),
    ])
}
