//! Outlier-aware calibration of the block count.
//!
//! A mapping `α: [0, 1/2] → [0, 1]` with `2ε < α(ε) < 1` fixes how many
//! blocks to use relative to the outlier fraction `ε`. From it follow the
//! constants `β, γ, Γ, Δ, η` that scale every deviation bound, the block
//! count rules and the admissible confidence ranges.
//!
//! Confidence levels routinely fall below `f64::MIN_POSITIVE` (for example
//! `e^{-4nα}` with `n` in the thousands), so every range and every [`Delta`]
//! is carried as a natural logarithm.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, LogInterval, Result};
use crate::numeric::ceil_snapped;

/// Name of an α-mapping, as used in configs and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MappingKind {
    Arithmetic,
    Geometric,
    Harmonic,
    Polynomial,
    Custom,
}

impl MappingKind {
    pub const NAMED: [MappingKind; 4] = [
        MappingKind::Arithmetic,
        MappingKind::Geometric,
        MappingKind::Harmonic,
        MappingKind::Polynomial,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MappingKind::Arithmetic => "Arithmetic",
            MappingKind::Geometric => "Geometric",
            MappingKind::Harmonic => "Harmonic",
            MappingKind::Polynomial => "Polynomial",
            MappingKind::Custom => "Custom",
        }
    }
}

impl fmt::Display for MappingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

type AlphaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An upper bound `α(ε)` of `ε ↦ 2ε`.
///
/// The four named mappings are the arithmetic, geometric and harmonic means
/// of `2ε` and `1`, plus the polynomial `ε(5/2 − ε)`. `Custom` mappings are
/// validated pointwise on every call.
#[derive(Clone)]
pub enum AlphaMapping {
    Arithmetic,
    Geometric,
    Harmonic,
    Polynomial,
    Custom { name: String, alpha: AlphaFn },
}

impl fmt::Debug for AlphaMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaMapping::Custom { name, .. } => write!(f, "Custom({name})"),
            other => write!(f, "{}", other.kind()),
        }
    }
}

impl AlphaMapping {
    pub fn custom(name: impl Into<String>, alpha: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        AlphaMapping::Custom {
            name: name.into(),
            alpha: Arc::new(alpha),
        }
    }

    pub fn kind(&self) -> MappingKind {
        match self {
            AlphaMapping::Arithmetic => MappingKind::Arithmetic,
            AlphaMapping::Geometric => MappingKind::Geometric,
            AlphaMapping::Harmonic => MappingKind::Harmonic,
            AlphaMapping::Polynomial => MappingKind::Polynomial,
            AlphaMapping::Custom { .. } => MappingKind::Custom,
        }
    }

    /// The named mapping for `kind`; `None` for [`MappingKind::Custom`].
    pub fn named(kind: MappingKind) -> Option<Self> {
        match kind {
            MappingKind::Arithmetic => Some(AlphaMapping::Arithmetic),
            MappingKind::Geometric => Some(AlphaMapping::Geometric),
            MappingKind::Harmonic => Some(AlphaMapping::Harmonic),
            MappingKind::Polynomial => Some(AlphaMapping::Polynomial),
            MappingKind::Custom => None,
        }
    }

    fn raw(&self, eps: f64) -> f64 {
        match self {
            AlphaMapping::Arithmetic => (1.0 + 2.0 * eps) / 2.0,
            AlphaMapping::Geometric => (2.0 * eps).sqrt(),
            AlphaMapping::Harmonic => 4.0 * eps / (1.0 + 2.0 * eps),
            AlphaMapping::Polynomial => eps * (2.5 - eps),
            AlphaMapping::Custom { alpha, .. } => alpha(eps),
        }
    }
}

/// The constants derived from `α` at a given `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub epsilon: f64,
    pub alpha: f64,
    /// `2α / (α − 2ε)`
    pub beta: f64,
    /// `√α (α − ε) / (α − 2ε)^{3/2}`
    pub gamma: f64,
    /// `√(α / (α − 2ε))`
    pub cap_gamma: f64,
    /// `√(α / ε)`; not defined at `ε = 0`.
    pub delta_const: Option<f64>,
    /// `(α − ε) / α`, the guaranteed fraction of sane blocks.
    pub eta: f64,
}

fn check_epsilon(eps: f64) -> Result<()> {
    if eps.is_finite() && (0.0..=0.5).contains(&eps) {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange(eps))
    }
}

fn check_below_breakdown(eps: f64) -> Result<()> {
    check_epsilon(eps)?;
    if eps >= 0.5 {
        return Err(Error::BreakdownExceeded(eps));
    }
    Ok(())
}

/// `α(ε)` for the mapping.
pub fn alpha_value(mapping: &AlphaMapping, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let alpha = mapping.raw(epsilon);
    if let AlphaMapping::Custom { .. } = mapping {
        let interior = epsilon > 0.0 && epsilon < 0.5;
        let ok =
            alpha.is_finite() && (0.0..=1.0).contains(&alpha) && (!interior || (2.0 * epsilon < alpha && alpha < 1.0));
        if !ok {
            return Err(Error::InvalidMapping { epsilon, alpha });
        }
    }
    Ok(alpha)
}

/// Constants from the generic formulas in `α`. No validation.
pub fn generic_constants(alpha: f64, epsilon: f64) -> DerivedConstants {
    let gap = alpha - 2.0 * epsilon;
    DerivedConstants {
        epsilon,
        alpha,
        beta: 2.0 * alpha / gap,
        gamma: alpha.sqrt() * (alpha - epsilon) / gap.powf(1.5),
        cap_gamma: (alpha / gap).sqrt(),
        delta_const: (epsilon > 0.0).then(|| (alpha / epsilon).sqrt()),
        eta: (alpha - epsilon) / alpha,
    }
}

/// Closed forms of the constants for a named mapping, simplified in `ε`.
///
/// These stay finite at `ε = 0` where the generic formulas are `0/0`
/// (harmonic, geometric and polynomial mappings all have `α(0) = 0`).
pub fn tabulated_constants(kind: MappingKind, epsilon: f64) -> Option<DerivedConstants> {
    let e = epsilon;
    let d = 1.0 - 2.0 * e;
    let c = match kind {
        MappingKind::Arithmetic => DerivedConstants {
            epsilon: e,
            alpha: (1.0 + 2.0 * e) / 2.0,
            beta: 2.0 * (1.0 + 2.0 * e) / d,
            gamma: (1.0 + 2.0 * e).sqrt() / d.powf(1.5),
            cap_gamma: (1.0 + 2.0 * e).sqrt() / d.sqrt(),
            delta_const: (e > 0.0).then(|| ((1.0 + 2.0 * e) / (2.0 * e)).sqrt()),
            eta: 1.0 / (1.0 + 2.0 * e),
        },
        MappingKind::Geometric => {
            let s = (2.0 * e).sqrt();
            DerivedConstants {
                epsilon: e,
                alpha: s,
                beta: 2.0 * (1.0 + s) / d,
                gamma: (2.0 - s) * (1.0 + s).powf(1.5) / (2.0 * d.powf(1.5)),
                cap_gamma: (1.0 + s).sqrt() / d.sqrt(),
                delta_const: (e > 0.0).then(|| (2.0 / e).powf(0.25)),
                eta: (2.0 - s) / 2.0,
            }
        }
        MappingKind::Harmonic => DerivedConstants {
            epsilon: e,
            alpha: 4.0 * e / (1.0 + 2.0 * e),
            beta: 4.0 / d,
            gamma: (3.0 - 2.0 * e) / (std::f64::consts::SQRT_2 * d.powf(1.5)),
            cap_gamma: std::f64::consts::SQRT_2 / d.sqrt(),
            delta_const: (e > 0.0).then(|| (4.0 / (1.0 + 2.0 * e)).sqrt()),
            eta: (3.0 - 2.0 * e) / 4.0,
        },
        MappingKind::Polynomial => DerivedConstants {
            epsilon: e,
            alpha: e * (2.5 - e),
            beta: 2.0 * (5.0 - 2.0 * e) / d,
            gamma: (3.0 - 2.0 * e) * (5.0 - 2.0 * e).sqrt() / d.powf(1.5),
            cap_gamma: (5.0 - 2.0 * e).sqrt() / d.sqrt(),
            delta_const: (e > 0.0).then(|| ((5.0 - 2.0 * e) / 2.0).sqrt()),
            eta: (3.0 - 2.0 * e) / (5.0 - 2.0 * e),
        },
        MappingKind::Custom => return None,
    };
    Some(c)
}

/// `α, β, γ, Γ, Δ, η` at `ε`.
///
/// Named mappings use their closed forms, so `ε = 0` is covered by the
/// limits. Custom mappings go through the generic formulas and need
/// `α(0) > 0` there.
pub fn derived_constants(mapping: &AlphaMapping, epsilon: f64) -> Result<DerivedConstants> {
    check_below_breakdown(epsilon)?;
    let alpha = alpha_value(mapping, epsilon)?;
    match mapping {
        AlphaMapping::Custom { .. } => {
            if alpha <= 2.0 * epsilon {
                return Err(Error::InvalidMapping { epsilon, alpha });
            }
            Ok(generic_constants(alpha, epsilon))
        }
        named => Ok(tabulated_constants(named.kind(), epsilon).expect("named mapping")),
    }
}

/// A confidence level `δ ∈ (0, 1)`, stored as `ln(1/δ)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Delta {
    ln_inv: f64,
}

impl Delta {
    pub fn new(probability: f64) -> Result<Self> {
        if probability > 0.0 && probability < 1.0 {
            Ok(Delta {
                ln_inv: -probability.ln(),
            })
        } else {
            Err(Error::InvalidProbability(probability))
        }
    }

    /// `δ = e^{-x}` for `x > 0`.
    pub fn exp_neg(x: f64) -> Result<Self> {
        if x.is_finite() && x > 0.0 {
            Ok(Delta { ln_inv: x })
        } else {
            Err(Error::InvalidProbability((-x).exp()))
        }
    }

    /// `ln(1/δ)`.
    pub fn ln_inv(&self) -> f64 {
        self.ln_inv
    }

    /// `ln δ`.
    pub fn ln(&self) -> f64 {
        -self.ln_inv
    }

    /// `δ` itself; underflows to `0` below `f64::MIN_POSITIVE`.
    pub fn value(&self) -> f64 {
        (-self.ln_inv).exp()
    }
}

/// Admissible confidence levels `[lower, upper]`, in log-space.
///
/// An open lower end (sub-Gaussian bounds) has `ln_lower = -∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaRange {
    pub ln_lower: f64,
    pub ln_upper: f64,
}

impl DeltaRange {
    fn new(ln_lower: f64, ln_upper: f64) -> Result<Self> {
        let ln_upper = ln_upper.min(0.0);
        if ln_lower > ln_upper || ln_upper.is_nan() || ln_lower.is_nan() {
            return Err(Error::DegenerateRange(LogInterval { ln_lower, ln_upper }));
        }
        Ok(DeltaRange { ln_lower, ln_upper })
    }

    /// Lower end; the smallest positive `f64` when the range is open below.
    pub fn lower(&self) -> f64 {
        self.ln_lower.exp().max(f64::MIN_POSITIVE)
    }

    pub fn upper(&self) -> f64 {
        self.ln_upper.exp()
    }

    pub fn contains(&self, delta: Delta) -> bool {
        let ln = delta.ln();
        let tol = |b: f64| 1e-12 * b.abs().max(1.0);
        ln >= self.ln_lower - tol(self.ln_lower) && ln <= self.ln_upper + tol(self.ln_upper) && ln < 0.0
    }

    /// `log(upper) − log(lower)`.
    pub fn log_size(&self) -> f64 {
        self.ln_upper - self.ln_lower
    }

    pub fn as_interval(&self) -> LogInterval {
        LogInterval {
            ln_lower: self.ln_lower,
            ln_upper: self.ln_upper,
        }
    }

    pub fn check(&self, delta: Delta) -> Result<()> {
        if self.contains(delta) {
            Ok(())
        } else {
            Err(Error::DeltaOutOfRange {
                ln_delta: delta.ln(),
                range: self.as_interval(),
            })
        }
    }

    /// `count` confidence levels evenly spaced in log-space strictly inside
    /// the range. `None` for an open lower end.
    pub fn interior_points(&self, count: usize) -> Option<Vec<Delta>> {
        if !self.ln_lower.is_finite() {
            return None;
        }
        let hi = if self.ln_upper >= 0.0 {
            // open at δ = 1
            self.ln_lower * 1e-3
        } else {
            self.ln_upper
        };
        let step = (hi - self.ln_lower) / (count + 1) as f64;
        (1..=count)
            .map(|i| Delta::exp_neg(-(self.ln_lower + step * i as f64)).ok())
            .collect()
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("sample size must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// `[e^{-n/β}, e^{-nα/β}]`, the levels for which the Chebyshev-type bound holds.
pub fn delta_range_chebyshev(mapping: &AlphaMapping, epsilon: f64, n: usize) -> Result<DeltaRange> {
    check_n(n)?;
    let c = derived_constants(mapping, epsilon)?;
    let n = n as f64;
    DeltaRange::new(-n / c.beta, -n * c.alpha / c.beta)
}

/// `]0, e^{-4nα}]`, or `]0, e^{-1}]` without outliers.
pub fn delta_range_subgaussian(mapping: &AlphaMapping, epsilon: f64, n: usize) -> Result<DeltaRange> {
    check_n(n)?;
    let c = derived_constants(mapping, epsilon)?;
    let ln_upper = if epsilon == 0.0 {
        -1.0
    } else {
        -4.0 * n as f64 * c.alpha
    };
    DeltaRange::new(f64::NEG_INFINITY, ln_upper)
}

/// `K = ⌈β(ε) log(1/δ)⌉`, for `δ` inside [`delta_range_chebyshev`].
pub fn block_count_chebyshev(mapping: &AlphaMapping, epsilon: f64, delta: Delta, n: usize) -> Result<usize> {
    let range = delta_range_chebyshev(mapping, epsilon, n)?;
    range.check(delta)?;
    let c = derived_constants(mapping, epsilon)?;
    let k = ceil_snapped(c.beta * delta.ln_inv()) as usize;
    debug_assert!(k <= n, "in-range δ keeps K <= n");
    Ok(k.clamp(1, n))
}

/// `K = ⌈α(ε) n⌉`, or `K = 1` without outliers.
pub fn block_count_subgaussian(mapping: &AlphaMapping, epsilon: f64, n: usize) -> Result<usize> {
    check_n(n)?;
    let c = derived_constants(mapping, epsilon)?;
    if epsilon == 0.0 {
        return Ok(1);
    }
    Ok((ceil_snapped(c.alpha * n as f64) as usize).clamp(1, n))
}

/// Constants for two contaminated samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSampleConstants {
    pub eps_x: f64,
    pub eps_y: f64,
    /// `ε_X + ε_Y − ε_X ε_Y`
    pub epsilon_tilde: f64,
    /// `α(ε̃)`
    pub alpha_tilde: f64,
    /// `η(ε̃)`
    pub eta_xy: f64,
    pub eta_x: f64,
    pub eta_y: f64,
    pub beta_x: f64,
    pub beta_y: f64,
}

/// Constants for the cross-block estimator, with `η_Z = 1 − ε_Z/√α(ε̃)`
/// and `β_Z = 18 η²(ε̃) / (η_Z (2η(ε̃) − 1)²)`.
pub fn two_sample_constants(mapping: &AlphaMapping, eps_x: f64, eps_y: f64) -> Result<TwoSampleConstants> {
    check_epsilon(eps_x)?;
    check_epsilon(eps_y)?;
    let epsilon_tilde = eps_x + eps_y - eps_x * eps_y;
    if epsilon_tilde >= 0.5 {
        return Err(Error::JointBreakdownExceeded(epsilon_tilde));
    }
    let c = derived_constants(mapping, epsilon_tilde)?;
    let root_alpha = c.alpha.sqrt();
    let eta_of = |eps: f64| if eps == 0.0 { 1.0 } else { 1.0 - eps / root_alpha };
    let eta_x = eta_of(eps_x);
    let eta_y = eta_of(eps_y);
    let spread = (2.0 * c.eta - 1.0).powi(2);
    let beta_of = |eta_z: f64| 18.0 * c.eta * c.eta / (eta_z * spread);
    Ok(TwoSampleConstants {
        eps_x,
        eps_y,
        epsilon_tilde,
        alpha_tilde: c.alpha,
        eta_xy: c.eta,
        eta_x,
        eta_y,
        beta_x: beta_of(eta_x),
        beta_y: beta_of(eta_y),
    })
}

/// Levels for which `√α(ε̃)·n ≤ K_X ≤ n` and `√α(ε̃)·m ≤ K_Y ≤ m` both hold:
/// `[2 max(e^{-n/β_X}, e^{-m/β_Y}), 2 min(e^{-n√α/β_X}, e^{-m√α/β_Y})]`.
pub fn two_sample_delta_range(constants: &TwoSampleConstants, n: usize, m: usize) -> Result<DeltaRange> {
    check_n(n)?;
    check_n(m)?;
    let ln2 = std::f64::consts::LN_2;
    let (n, m) = (n as f64, m as f64);
    let root_alpha = constants.alpha_tilde.sqrt();
    let ln_lower = ln2 + (-n / constants.beta_x).max(-m / constants.beta_y);
    let ln_upper = ln2 + (-n * root_alpha / constants.beta_x).min(-m * root_alpha / constants.beta_y);
    DeltaRange::new(ln_lower, ln_upper)
}

/// `K_X = ⌈β_X log(2/δ)⌉`, `K_Y = ⌈β_Y log(2/δ)⌉`.
pub fn two_sample_block_counts(
    constants: &TwoSampleConstants,
    delta: Delta,
    n: usize,
    m: usize,
) -> Result<(usize, usize)> {
    let range = match two_sample_delta_range(constants, n, m) {
        Ok(r) => r,
        Err(Error::DegenerateRange(range)) => {
            return Err(Error::DeltaOutOfRange {
                ln_delta: delta.ln(),
                range,
            })
        }
        Err(e) => return Err(e),
    };
    range.check(delta)?;
    let log_factor = std::f64::consts::LN_2 + delta.ln_inv();
    let kx = ceil_snapped(constants.beta_x * log_factor) as usize;
    let ky = ceil_snapped(constants.beta_y * log_factor) as usize;
    Ok((kx.clamp(1, n), ky.clamp(1, m)))
}
