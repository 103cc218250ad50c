//! Pairwise losses and gradient descent on the median-of-U-statistics risk.
//!
//! Parameters are flat `Vec<f64>`: a weight vector `w ∈ ℝ^p` for ranking,
//! a row-major `q × q` matrix `M` for metric learning.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Tag;
use crate::numeric::{ceil_snapped, lower_median_index, median_in_place, KahanSum};
use crate::partitioning::{partition_random_with, BlockPartition};

/// `n` rows of `p` features with a real label each.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDataset {
    p: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    mask: Option<Vec<Tag>>,
}

impl PairwiseDataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidParameter("ragged feature rows".into()));
        }
        let features: Vec<f64> = rows.into_iter().flatten().collect();
        Self::from_flat(p, features, labels)
    }

    /// Row-major features.
    pub fn from_flat(p: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != p * labels.len() {
            return Err(Error::InvalidParameter("feature buffer does not match n·p".into()));
        }
        if features.iter().chain(&labels).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(PairwiseDataset {
            p,
            features,
            labels,
            mask: None,
        })
    }

    pub fn with_mask(mut self, mask: Vec<Tag>) -> Result<Self> {
        if mask.len() != self.n() {
            return Err(Error::MaskMismatch {
                mask: mask.len(),
                values: self.n(),
            });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn mask(&self) -> Option<&[Tag]> {
        self.mask.as_deref()
    }

    pub fn outlier_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(0, |m| m.iter().filter(|t| **t == Tag::Outlier).count())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> PairwiseDataset {
        PairwiseDataset {
            p: self.p,
            features: indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            mask: self.mask.as_ref().map(|m| indices.iter().map(|&i| m[i]).collect()),
        }
    }

    /// Appends rows tagged as outliers; existing rows keep their tag
    /// (inlier when no mask was set).
    fn append_outliers(&self, rows: Vec<f64>, labels: Vec<f64>) -> Result<PairwiseDataset> {
        let added = labels.len();
        let mut mask = self.mask.clone().unwrap_or_else(|| vec![Tag::Inlier; self.n()]);
        mask.extend(std::iter::repeat_n(Tag::Outlier, added));
        let mut features = self.features.clone();
        features.extend(rows);
        let mut all_labels = self.labels.clone();
        all_labels.extend(labels);
        PairwiseDataset::from_flat(self.p, features, all_labels)?.with_mask(mask)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(x − x')ᵀ M (x − x')` for row-major `M`.
fn mahalanobis_sq(m: &[f64], x: &[f64], xp: &[f64]) -> f64 {
    let q = x.len();
    let mut total = 0.0;
    for a in 0..q {
        let da = x[a] - xp[a];
        let mut row = 0.0;
        for b in 0..q {
            row += m[a * q + b] * (x[b] - xp[b]);
        }
        total += da * row;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PairwiseLoss {
    /// `max(0, 1 − g_w(x, x')(y − y'))` with `g_w = 2·1{s(x) ≥ s(x')} − 1`
    /// and `s = sigmoid(wᵀx)`. Training replaces `g_w` by
    /// `tanh(κ(s(x) − s(x')))`.
    RankingHinge { kappa: f64 },
    /// `max(0, margin + y_ij(d²_M(x_i, x_j) − center))` with
    /// `y_ij = 2·1{y_i = y_j} − 1`.
    MetricHinge { margin: f64, center: f64 },
}

impl PairwiseLoss {
    pub fn ranking() -> Self {
        PairwiseLoss::RankingHinge { kappa: 4.0 }
    }

    pub fn metric() -> Self {
        PairwiseLoss::MetricHinge {
            margin: 1.0,
            center: 2.0,
        }
    }

    /// Length of the flat parameter for `p` features.
    pub fn param_dim(&self, p: usize) -> usize {
        match self {
            PairwiseLoss::RankingHinge { .. } => p,
            PairwiseLoss::MetricHinge { .. } => p * p,
        }
    }

    /// The loss used for evaluation (hard decision rule for ranking).
    pub fn eval(&self, u: &[f64], xi: &[f64], yi: f64, xj: &[f64], yj: f64) -> f64 {
        match *self {
            PairwiseLoss::RankingHinge { .. } => ranking_exact(sigmoid(dot(u, xi)), yi, sigmoid(dot(u, xj)), yj),
            PairwiseLoss::MetricHinge { margin, center } => {
                metric_loss(margin, center, mahalanobis_sq(u, xi, xj), yi, yj)
            }
        }
    }

    /// The loss gradient steps descend (smooth surrogate for ranking).
    pub fn train_eval(&self, u: &[f64], xi: &[f64], yi: f64, xj: &[f64], yj: f64) -> f64 {
        match *self {
            PairwiseLoss::RankingHinge { kappa } => {
                ranking_surrogate(kappa, sigmoid(dot(u, xi)), yi, sigmoid(dot(u, xj)), yj)
            }
            PairwiseLoss::MetricHinge { .. } => self.eval(u, xi, yi, xj, yj),
        }
    }

    /// Adds `scale · ∇_u train_eval` to `out`.
    #[allow(clippy::too_many_arguments)]
    pub fn grad(&self, u: &[f64], xi: &[f64], yi: f64, xj: &[f64], yj: f64, scale: f64, out: &mut [f64]) {
        match *self {
            PairwiseLoss::RankingHinge { kappa } => {
                let si = sigmoid(dot(u, xi));
                let sj = sigmoid(dot(u, xj));
                ranking_grad(kappa, xi, si, yi, xj, sj, yj, scale, out);
            }
            PairwiseLoss::MetricHinge { margin, center } => {
                metric_grad(margin, center, u, xi, yi, xj, yj, scale, out);
            }
        }
    }
}

fn ranking_exact(si: f64, yi: f64, sj: f64, yj: f64) -> f64 {
    let g = if si >= sj { 1.0 } else { -1.0 };
    // symmetric under swapping the pair, ties aside
    (1.0 - g * (yi - yj)).max(0.0)
}

fn ranking_surrogate(kappa: f64, si: f64, yi: f64, sj: f64, yj: f64) -> f64 {
    (1.0 - (kappa * (si - sj)).tanh() * (yi - yj)).max(0.0)
}

#[allow(clippy::too_many_arguments)]
fn ranking_grad(kappa: f64, xi: &[f64], si: f64, yi: f64, xj: &[f64], sj: f64, yj: f64, scale: f64, out: &mut [f64]) {
    let t = (kappa * (si - sj)).tanh();
    let dy = yi - yj;
    if 1.0 - t * dy <= 0.0 {
        return;
    }
    let c = -scale * dy * kappa * (1.0 - t * t);
    let (ci, cj) = (c * si * (1.0 - si), c * sj * (1.0 - sj));
    for ((o, a), b) in out.iter_mut().zip(xi).zip(xj) {
        *o += ci * a - cj * b;
    }
}

fn same_class(yi: f64, yj: f64) -> f64 {
    if yi == yj {
        1.0
    } else {
        -1.0
    }
}

fn metric_loss(margin: f64, center: f64, d2: f64, yi: f64, yj: f64) -> f64 {
    (margin + same_class(yi, yj) * (d2 - center)).max(0.0)
}

#[allow(clippy::too_many_arguments)]
fn metric_grad(
    margin: f64,
    center: f64,
    m: &[f64],
    xi: &[f64],
    yi: f64,
    xj: &[f64],
    yj: f64,
    scale: f64,
    out: &mut [f64],
) {
    let d2 = mahalanobis_sq(m, xi, xj);
    let y = same_class(yi, yj);
    if margin + y * (d2 - center) <= 0.0 {
        return;
    }
    let q = xi.len();
    let c = scale * y;
    for a in 0..q {
        let da = xi[a] - xj[a];
        for b in 0..q {
            out[a * q + b] += c * da * (xi[b] - xj[b]);
        }
    }
}

/// Per-row quantities cached for one parameter value.
struct Prepared<'a> {
    loss: PairwiseLoss,
    u: &'a [f64],
    ds: &'a PairwiseDataset,
    scores: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(loss: PairwiseLoss, u: &'a [f64], ds: &'a PairwiseDataset) -> Self {
        let scores = match loss {
            PairwiseLoss::RankingHinge { .. } => (0..ds.n()).map(|i| sigmoid(dot(u, ds.row(i)))).collect(),
            PairwiseLoss::MetricHinge { .. } => Vec::new(),
        };
        Prepared { loss, u, ds, scores }
    }

    fn exact(&self, i: usize, j: usize) -> f64 {
        let ds = self.ds;
        match self.loss {
            PairwiseLoss::RankingHinge { .. } => {
                ranking_exact(self.scores[i], ds.label(i), self.scores[j], ds.label(j))
            }
            PairwiseLoss::MetricHinge { .. } => self.loss.eval(self.u, ds.row(i), ds.label(i), ds.row(j), ds.label(j)),
        }
    }

    fn surrogate(&self, i: usize, j: usize) -> f64 {
        let ds = self.ds;
        match self.loss {
            PairwiseLoss::RankingHinge { kappa } => {
                ranking_surrogate(kappa, self.scores[i], ds.label(i), self.scores[j], ds.label(j))
            }
            PairwiseLoss::MetricHinge { .. } => self.exact(i, j),
        }
    }

    fn add_grad(&self, i: usize, j: usize, scale: f64, out: &mut [f64]) {
        let ds = self.ds;
        match self.loss {
            PairwiseLoss::RankingHinge { kappa } => ranking_grad(
                kappa,
                ds.row(i),
                self.scores[i],
                ds.label(i),
                ds.row(j),
                self.scores[j],
                ds.label(j),
                scale,
                out,
            ),
            PairwiseLoss::MetricHinge { margin, center } => metric_grad(
                margin,
                center,
                self.u,
                ds.row(i),
                ds.label(i),
                ds.row(j),
                ds.label(j),
                scale,
                out,
            ),
        }
    }

    /// Mean of `f` over unordered pairs of `idx`, visited in sorted order.
    fn pair_mean(&self, idx: &[usize], f: impl Fn(&Self, usize, usize) -> f64) -> f64 {
        let mut acc = KahanSum::new();
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                acc.add(f(self, i, j));
            }
        }
        let b = idx.len() as f64;
        acc.value() / (b * (b - 1.0) / 2.0)
    }

    fn grad_mean(&self, idx: &[usize], dim: usize) -> Vec<f64> {
        let b = idx.len() as f64;
        let scale = 1.0 / (b * (b - 1.0) / 2.0);
        let mut g = vec![0.0; dim];
        for (a, &i) in idx.iter().enumerate() {
            for &j in &idx[a + 1..] {
                self.add_grad(i, j, scale, &mut g);
            }
        }
        g
    }
}

fn check_param(u: &[f64], ds: &PairwiseDataset, loss: &PairwiseLoss) -> Result<()> {
    let want = loss.param_dim(ds.p());
    if u.len() != want {
        return Err(Error::InvalidParameter(format!(
            "parameter has length {}, expected {want}",
            u.len()
        )));
    }
    Ok(())
}

/// Mean evaluation loss over all `n(n−1)/2` pairs.
pub fn pairwise_risk(u: &[f64], ds: &PairwiseDataset, loss: &PairwiseLoss) -> Result<f64> {
    if ds.n() < 2 {
        return Err(Error::DatasetTooSmall(ds.n()));
    }
    check_param(u, ds, loss)?;
    let all: Vec<usize> = (0..ds.n()).collect();
    Ok(Prepared::new(*loss, u, ds).pair_mean(&all, Prepared::exact))
}

fn check_blocks(ds: &PairwiseDataset, partition: &BlockPartition) -> Result<()> {
    partition.check_len(ds.n())?;
    if partition.block_size() < 2 {
        return Err(Error::BlockTooSmall {
            block_size: partition.block_size(),
            required: 2,
        });
    }
    Ok(())
}

fn sorted_blocks(partition: &BlockPartition) -> Vec<Vec<usize>> {
    partition
        .blocks()
        .iter()
        .map(|b| {
            let mut b = b.clone();
            b.sort_unstable();
            b
        })
        .collect()
}

/// Median over blocks of the per-block mean pair loss.
pub fn mou_risk(u: &[f64], ds: &PairwiseDataset, loss: &PairwiseLoss, partition: &BlockPartition) -> Result<f64> {
    check_blocks(ds, partition)?;
    check_param(u, ds, loss)?;
    let prep = Prepared::new(*loss, u, ds);
    let mut risks: Vec<f64> = sorted_blocks(partition)
        .iter()
        .map(|b| prep.pair_mean(b, Prepared::exact))
        .collect();
    Ok(median_in_place(&mut risks).expect("K >= 1"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    /// `γ_t = γ₀ / (1 + t)`
    Decaying {
        gamma0: f64,
    },
    Constant {
        gamma: f64,
    },
}

impl StepSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Decaying { gamma0 } => gamma0 / (1.0 + t as f64),
            StepSchedule::Constant { gamma } => gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GDConfig {
    pub k: usize,
    pub epochs: usize,
    pub step: StepSchedule,
    pub u0: Vec<f64>,
    pub seed: u64,
    /// Project `M` onto the PSD cone after every step (metric learning).
    pub psd_project: bool,
}

/// One epoch of a descent. Risks are taken at the parameter before the step,
/// except `train_risk`/`test_risk` which are at the parameter after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Midpoint median of the per-block training (surrogate) risks.
    pub median_block_risk: f64,
    pub train_risk: f64,
    pub test_risk: Option<f64>,
    pub block_risks: Vec<f64>,
    /// Index of the block stepped on: the lower-central order statistic.
    pub selected_block: usize,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GDResult {
    pub u: Vec<f64>,
    pub trace: Vec<EpochRecord>,
}

fn validate_config(ds: &PairwiseDataset, loss: &PairwiseLoss, cfg: &GDConfig) -> Result<()> {
    if ds.n() < 2 {
        return Err(Error::DatasetTooSmall(ds.n()));
    }
    check_param(&cfg.u0, ds, loss)?;
    if cfg.k < 1 || cfg.k > ds.n() {
        return Err(Error::InvalidBlockCount { k: cfg.k, n: ds.n() });
    }
    if ds.n() / cfg.k < 2 {
        return Err(Error::BlockTooSmall {
            block_size: ds.n() / cfg.k,
            required: 2,
        });
    }
    if cfg.psd_project && !matches!(loss, PairwiseLoss::MetricHinge { .. }) {
        return Err(Error::InvalidParameter(
            "PSD projection applies to metric learning only".into(),
        ));
    }
    Ok(())
}

fn take_step(u: &mut [f64], grad: &[f64], gamma: f64, psd: bool, epoch: usize) -> Result<()> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(epoch));
    }
    for (w, g) in u.iter_mut().zip(grad) {
        *w -= gamma * g;
    }
    if psd {
        let q = (u.len() as f64).sqrt().round() as usize;
        let m = DMatrix::from_row_slice(q, q, u);
        let p = psd_project(&m)?;
        for a in 0..q {
            for b in 0..q {
                u[a * q + b] = p[(a, b)];
            }
        }
    }
    Ok(())
}

fn risks_after(
    u: &[f64],
    train: &PairwiseDataset,
    test: Option<&PairwiseDataset>,
    loss: &PairwiseLoss,
) -> Result<(f64, Option<f64>)> {
    let train_risk = pairwise_risk(u, train, loss)?;
    let test_risk = test.map(|t| pairwise_risk(u, t, loss)).transpose()?;
    Ok((train_risk, test_risk))
}

/// MoU gradient descent.
///
/// Each epoch draws a fresh random partition into `k` blocks, evaluates the
/// training risk on every block, and steps along the mean pair gradient of
/// the median block. With `k = 1` this is exactly [`full_batch_gd`].
pub fn mou_gd(
    train: &PairwiseDataset,
    loss: &PairwiseLoss,
    config: &GDConfig,
    test: Option<&PairwiseDataset>,
) -> Result<GDResult> {
    validate_config(train, loss, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut u = config.u0.clone();
    let dim = u.len();
    let mut trace = Vec::with_capacity(config.epochs);
    for t in 0..config.epochs {
        let partition = partition_random_with(train.n(), config.k, &mut rng)?;
        let blocks = sorted_blocks(&partition);
        let prep = Prepared::new(*loss, &u, train);
        let block_risks: Vec<f64> = blocks.iter().map(|b| prep.pair_mean(b, Prepared::surrogate)).collect();
        let selected = lower_median_index(&block_risks).expect("K >= 1");
        let median = median_in_place(&mut block_risks.clone()).expect("K >= 1");
        let grad = prep.grad_mean(&blocks[selected], dim);
        let gamma = config.step.at(t);
        take_step(&mut u, &grad, gamma, config.psd_project, t)?;
        let (train_risk, test_risk) = risks_after(&u, train, test, loss)?;
        trace.push(EpochRecord {
            epoch: t,
            median_block_risk: median,
            train_risk,
            test_risk,
            block_risks,
            selected_block: selected,
            step: gamma,
        });
    }
    Ok(GDResult { u, trace })
}

/// Plain gradient descent on the full pairwise risk; `config.k` is ignored.
pub fn full_batch_gd(
    train: &PairwiseDataset,
    loss: &PairwiseLoss,
    config: &GDConfig,
    test: Option<&PairwiseDataset>,
) -> Result<GDResult> {
    validate_config(train, loss, &GDConfig { k: 1, ..config.clone() })?;
    let all: Vec<usize> = (0..train.n()).collect();
    let mut u = config.u0.clone();
    let dim = u.len();
    let mut trace = Vec::with_capacity(config.epochs);
    for t in 0..config.epochs {
        let prep = Prepared::new(*loss, &u, train);
        let risk = prep.pair_mean(&all, Prepared::surrogate);
        let grad = prep.grad_mean(&all, dim);
        let gamma = config.step.at(t);
        take_step(&mut u, &grad, gamma, config.psd_project, t)?;
        let (train_risk, test_risk) = risks_after(&u, train, test, loss)?;
        trace.push(EpochRecord {
            epoch: t,
            median_block_risk: risk,
            train_risk,
            test_risk,
            block_risks: vec![risk],
            selected_block: 0,
            step: gamma,
        });
    }
    Ok(GDResult { u, trace })
}

/// Nearest positive semi-definite matrix in Frobenius norm: symmetrize,
/// then clamp negative eigenvalues to zero.
pub fn psd_project(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !matrix.is_square() {
        return Err(Error::InvalidParameter("PSD projection needs a square matrix".into()));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let p = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    // remove rounding asymmetry
    Ok((&p + p.transpose()) * 0.5)
}

/// Appends `⌈fraction·n⌉` adversarial rows drawn uniformly in a box of side
/// `box_width` (default `0.1|λ|`) centred on features `−λŵ` and label `λ`.
pub fn contaminate_pairwise(
    ds: &PairwiseDataset,
    fraction: f64,
    lambda: f64,
    sane_model: &[f64],
    box_width: Option<f64>,
    seed: u64,
) -> Result<PairwiseDataset> {
    if !(fraction.is_finite() && (0.0..0.5).contains(&fraction)) {
        return Err(Error::BreakdownExceeded(fraction));
    }
    if sane_model.len() != ds.p() {
        return Err(Error::InvalidParameter(format!(
            "sane model has length {}, dataset has {} features",
            sane_model.len(),
            ds.p()
        )));
    }
    let count = ceil_snapped(fraction * ds.n() as f64) as usize;
    if 2 * (ds.outlier_count() + count) >= ds.n() + count {
        return Err(Error::BreakdownExceeded(
            (ds.outlier_count() + count) as f64 / (ds.n() + count) as f64,
        ));
    }
    let width = box_width.unwrap_or(0.1 * lambda.abs());
    if !(width.is_finite() && width >= 0.0) {
        return Err(Error::InvalidParameter(format!("box width {width}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = move || (rng.random::<f64>() - 0.5) * width;
    let mut rows = Vec::with_capacity(count * ds.p());
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        rows.extend(sane_model.iter().map(|w| -lambda * w + jitter()));
        labels.push(lambda + jitter());
    }
    ds.append_outliers(rows, labels)
}

/// Appends `count` rows uniform on `[lo, hi]^p`, all carrying `label`.
pub fn contaminate_box(
    ds: &PairwiseDataset,
    count: usize,
    lo: f64,
    hi: f64,
    label: f64,
    seed: u64,
) -> Result<PairwiseDataset> {
    if 2 * (ds.outlier_count() + count) >= ds.n() + count {
        return Err(Error::BreakdownExceeded(
            (ds.outlier_count() + count) as f64 / (ds.n() + count) as f64,
        ));
    }
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::InvalidParameter(format!("invalid box [{lo}, {hi}]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..count * ds.p())
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect();
    ds.append_outliers(rows, vec![label; count])
}

/// `X ~ N(0, I_p)`, `Y = w*ᵀX + N(0, noise_sd²)`.
pub fn planted_ranking(n: usize, w_star: &[f64], noise_sd: f64, seed: u64) -> Result<PairwiseDataset> {
    let p = w_star.len();
    let noise = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        labels.push(dot(w_star, &x) + noise.sample(&mut rng));
        features.extend(x);
    }
    PairwiseDataset::from_flat(p, features, labels)
}

/// `classes` Gaussian clusters in `ℝ^q` with unit-variance noise around
/// centres drawn from `N(0, spread² I)`; labels are `0, 1, …`.
pub fn planted_metric(n_per_class: usize, q: usize, classes: usize, spread: f64, seed: u64) -> Result<PairwiseDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            (0..q)
                .map(|_| spread * Distribution::<f64>::sample(&StandardNormal, &mut rng))
                .collect()
        })
        .collect();
    let mut features = Vec::with_capacity(n_per_class * classes * q);
    let mut labels = Vec::with_capacity(n_per_class * classes);
    for _ in 0..n_per_class {
        for (c, centre) in centres.iter().enumerate() {
            features.extend(
                centre
                    .iter()
                    .map(|m| m + Distribution::<f64>::sample(&StandardNormal, &mut rng)),
            );
            labels.push(c as f64);
        }
    }
    PairwiseDataset::from_flat(q, features, labels)
}
