//! Empirical baselines and the median-of-block estimators.
//!
//! Estimators take plain `&[f64]` slices: a [`Sample`]'s ground-truth mask
//! exists only for simulation bookkeeping and is never visible here.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{median_in_place, sample_variance, KahanSum};
use crate::partitioning::{BlockPartition, DiagonalPairing};

/// Ground-truth label of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag {
    Inlier,
    Outlier,
}

/// Finite scalar observations with an optional inlier/outlier mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    mask: Option<Vec<Tag>>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        Ok(Sample { values, mask: None })
    }

    pub fn with_mask(values: Vec<f64>, mask: Vec<Tag>) -> Result<Self> {
        if mask.len() != values.len() {
            return Err(Error::MaskMismatch {
                mask: mask.len(),
                values: values.len(),
            });
        }
        let mut s = Sample::new(values)?;
        s.mask = Some(mask);
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> Option<&[Tag]> {
        self.mask.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn outlier_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(0, |m| m.iter().filter(|t| **t == Tag::Outlier).count())
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type CrossFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A symmetric kernel `h: ℝ^d → ℝ`.
#[derive(Clone)]
pub struct UKernel {
    name: String,
    degree: usize,
    eval: KernelFn,
}

impl fmt::Debug for UKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UKernel({}, d={})", self.name, self.degree)
    }
}

impl UKernel {
    pub fn new(
        name: impl Into<String>,
        degree: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter("kernel degree must be >= 1".into()));
        }
        Ok(UKernel {
            name: name.into(),
            degree,
            eval: Arc::new(eval),
        })
    }

    /// `h(z) = z`; the U-statistic is the sample mean.
    pub fn identity() -> Self {
        UKernel::new("identity", 1, |z| z[0]).expect("degree 1")
    }

    /// `h(z, z') = (z − z')²/2`; the U-statistic is the unbiased variance.
    pub fn variance() -> Self {
        UKernel::new("variance", 2, |z| 0.5 * (z[0] - z[1]) * (z[0] - z[1])).expect("degree 2")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Evaluates `h`; errors on a non-finite result.
    pub fn eval(&self, args: &[f64]) -> Result<f64> {
        debug_assert_eq!(args.len(), self.degree);
        let v = (self.eval)(args);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteKernel)
        }
    }
}

/// A two-sample kernel `H: ℝ² → ℝ`.
#[derive(Clone)]
pub struct CrossKernel {
    name: String,
    eval: CrossFn,
}

impl fmt::Debug for CrossKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CrossKernel({})", self.name)
    }
}

impl CrossKernel {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        CrossKernel {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// `H(x, y) = 1{x ≤ y}`.
    pub fn mann_whitney() -> Self {
        CrossKernel::new("mann-whitney", |x, y| if x <= y { 1.0 } else { 0.0 })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let v = (self.eval)(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteKernel)
        }
    }
}

fn non_empty(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        Err(Error::EmptySample)
    } else {
        Ok(())
    }
}

pub fn empirical_mean(values: &[f64]) -> Result<f64> {
    non_empty(values)?;
    Ok(values.iter().copied().collect::<KahanSum>().value() / values.len() as f64)
}

/// Median, averaging the two central order statistics for even sizes.
pub fn empirical_median(values: &[f64]) -> Result<f64> {
    non_empty(values)?;
    let mut buf = values.to_vec();
    Ok(median_in_place(&mut buf).expect("non-empty"))
}

/// Mean after dropping the `⌊trim·n⌋` smallest and largest values.
pub fn trimmed_mean(values: &[f64], trim: f64) -> Result<f64> {
    non_empty(values)?;
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::InvalidParameter(format!(
            "trim fraction {trim} outside [0, 0.5)"
        )));
    }
    let cut = (trim * values.len() as f64).floor() as usize;
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    empirical_mean(&sorted[cut..sorted.len() - cut])
}

/// Unbiased sample variance in O(n). Equal to [`u_stat`] with
/// [`UKernel::variance`].
pub fn empirical_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::SampleTooSmall {
            size: values.len(),
            degree: 2,
        });
    }
    Ok(sample_variance(values))
}

/// Median of the `K` block means.
pub fn mom(values: &[f64], partition: &BlockPartition) -> Result<f64> {
    non_empty(values)?;
    partition.check_len(values.len())?;
    let mut means: Vec<f64> = partition
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&i| values[i]).collect::<KahanSum>().value() / b.len() as f64)
        .collect();
    Ok(median_in_place(&mut means).expect("K >= 1"))
}

/// U-statistic of `kernel` over the observations at `indices`.
///
/// Averages `h` over every size-`d` subset of `indices`, for `d ≤ 3`.
pub fn u_stat_indexed(values: &[f64], indices: &[usize], kernel: &UKernel) -> Result<f64> {
    let d = kernel.degree();
    let b = indices.len();
    if b < d {
        return Err(Error::SampleTooSmall { size: b, degree: d });
    }
    let mut acc = KahanSum::new();
    let mut count = 0usize;
    match d {
        1 => {
            for &i in indices {
                acc.add(kernel.eval(&[values[i]])?);
                count += 1;
            }
        }
        2 => {
            for (a, &i) in indices.iter().enumerate() {
                for &j in &indices[a + 1..] {
                    acc.add(kernel.eval(&[values[i], values[j]])?);
                    count += 1;
                }
            }
        }
        3 => {
            for (a, &i) in indices.iter().enumerate() {
                for (c, &j) in indices.iter().enumerate().skip(a + 1) {
                    for &l in &indices[c + 1..] {
                        acc.add(kernel.eval(&[values[i], values[j], values[l]])?);
                        count += 1;
                    }
                }
            }
        }
        _ => return Err(Error::DegreeUnsupported(d)),
    }
    Ok(acc.value() / count as f64)
}

/// `Ū_n(h)`, the average of `h` over all size-`d` subsets of the sample.
pub fn u_stat(values: &[f64], kernel: &UKernel) -> Result<f64> {
    if kernel.degree() > 3 {
        return Err(Error::DegreeUnsupported(kernel.degree()));
    }
    let all: Vec<usize> = (0..values.len()).collect();
    u_stat_indexed(values, &all, kernel)
}

/// Median of the per-block U-statistics.
pub fn mou(values: &[f64], kernel: &UKernel, partition: &BlockPartition) -> Result<f64> {
    partition.check_len(values.len())?;
    if kernel.degree() > 3 {
        return Err(Error::DegreeUnsupported(kernel.degree()));
    }
    if partition.block_size() < kernel.degree() {
        return Err(Error::BlockTooSmall {
            block_size: partition.block_size(),
            required: kernel.degree(),
        });
    }
    let mut stats = partition
        .blocks()
        .iter()
        .map(|b| u_stat_indexed(values, b, kernel))
        .collect::<Result<Vec<_>>>()?;
    Ok(median_in_place(&mut stats).expect("K >= 1"))
}

fn cross_block(x: &[f64], y: &[f64], xi: &[usize], yi: &[usize], kernel: &CrossKernel) -> Result<f64> {
    let mut acc = KahanSum::new();
    for &i in xi {
        for &j in yi {
            acc.add(kernel.eval(x[i], y[j])?);
        }
    }
    Ok(acc.value() / (xi.len() * yi.len()) as f64)
}

/// `Ū_{n,m}(H) = (1/nm) Σ_i Σ_j H(X_i, Y_j)`.
pub fn u_stat_two_sample(x: &[f64], y: &[f64], kernel: &CrossKernel) -> Result<f64> {
    non_empty(x)?;
    non_empty(y)?;
    let xi: Vec<usize> = (0..x.len()).collect();
    let yi: Vec<usize> = (0..y.len()).collect();
    cross_block(x, y, &xi, &yi, kernel)
}

/// Fraction of pairs with `X_i ≤ Y_j`, in `O((n + m) log m)`.
///
/// Same value as [`u_stat_two_sample`] with [`CrossKernel::mann_whitney`].
pub fn mann_whitney(x: &[f64], y: &[f64]) -> Result<f64> {
    non_empty(x)?;
    non_empty(y)?;
    let mut ys = y.to_vec();
    ys.sort_unstable_by(f64::total_cmp);
    let mut pairs = 0u64;
    for &xv in x {
        // count of y >= xv
        let below = ys.partition_point(|&v| v < xv);
        pairs += (ys.len() - below) as u64;
    }
    Ok(pairs as f64 / (x.len() as f64 * y.len() as f64))
}

/// Median over all `K_X·K_Y` cross-block U-statistics.
pub fn mou2(x: &[f64], y: &[f64], kernel: &CrossKernel, px: &BlockPartition, py: &BlockPartition) -> Result<f64> {
    non_empty(x)?;
    non_empty(y)?;
    px.check_len(x.len())?;
    py.check_len(y.len())?;
    let mut grid = Vec::with_capacity(px.k() * py.k());
    for bx in px.blocks() {
        for by in py.blocks() {
            grid.push(cross_block(x, y, bx, by, kernel)?);
        }
    }
    Ok(median_in_place(&mut grid).expect("K_X, K_Y >= 1"))
}

/// Median over the `K` diagonal block U-statistics `Û_{k,k}`.
pub fn mou2_diag(x: &[f64], y: &[f64], kernel: &CrossKernel, pairing: &DiagonalPairing) -> Result<f64> {
    non_empty(x)?;
    non_empty(y)?;
    pairing.x_partition().check_len(x.len())?;
    pairing.y_partition().check_len(y.len())?;
    let mut diag = pairing
        .pairs()
        .map(|(bx, by)| cross_block(x, y, bx, by, kernel))
        .collect::<Result<Vec<_>>>()?;
    Ok(median_in_place(&mut diag).expect("K >= 1"))
}
