//! Deviation, expectation and generalization bounds, and plug-in variance
//! proxies to instantiate them.
//!
//! Each bound comes in two layers. [`formulas`] evaluates the closed form
//! for given constants with no admissibility checks. The top-level
//! functions calibrate the constants from a mapping and refuse confidence
//! levels outside the range for which the bound is proved.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    delta_range_chebyshev, delta_range_subgaussian, derived_constants, two_sample_constants, two_sample_delta_range,
    AlphaMapping, Delta, DerivedConstants, MappingKind,
};
use crate::error::{Error, Result};
use crate::estimators::{CrossKernel, UKernel};
use crate::numeric::{sample_variance, KahanSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    Chebyshev,
    SubGaussian,
    Expectation,
    Generalization,
}

/// An estimate together with the calibration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub k_used: usize,
    /// `ln δ`; `None` for expectation bounds.
    pub ln_delta: Option<f64>,
    pub bound_width: f64,
    pub bound_kind: BoundKind,
    pub mapping: MappingKind,
    pub epsilon: f64,
}

/// Closed-form bound displays, unchecked.
pub mod formulas {
    use std::f64::consts::{E, PI, SQRT_2};

    /// `4√e · scale · γ · √((1 + ln(1/δ))/n)`
    pub fn chebyshev(scale: f64, gamma: f64, ln_inv_delta: f64, n: f64) -> f64 {
        4.0 * E.sqrt() * scale * gamma * ((1.0 + ln_inv_delta) / n).sqrt()
    }

    /// `4 · scale · Γ · √(ln(1/δ)/n)`
    pub fn subgaussian(scale: f64, cap_gamma: f64, ln_inv_delta: f64, n: f64) -> f64 {
        4.0 * scale * cap_gamma * (ln_inv_delta / n).sqrt()
    }

    /// `2 · scale · Γ · (4 C_O Δ / n^{(1−α_O)/2} + √(π/n))`
    pub fn expectation(scale: f64, cap_gamma: f64, delta_const: f64, c_o: f64, alpha_o: f64, n: f64) -> f64 {
        2.0 * scale * cap_gamma * (4.0 * c_o * delta_const / n.powf((1.0 - alpha_o) / 2.0) + (PI / n).sqrt())
    }

    /// `2 · scale · Γ · √(π/n)`, the outlier-free expectation bound.
    pub fn expectation_uncontaminated(scale: f64, cap_gamma: f64, n: f64) -> f64 {
        2.0 * scale * cap_gamma * (PI / n).sqrt()
    }

    /// `12√3 · Σ(H) · γ(ε̃) · √((1 + ln(2/δ))/(n ∧ m))`
    pub fn cross_block(sigma: f64, gamma_tilde: f64, ln_inv_delta: f64, n_min: f64) -> f64 {
        12.0 * 3f64.sqrt() * sigma * gamma_tilde * ((1.0 + std::f64::consts::LN_2 + ln_inv_delta) / n_min).sqrt()
    }

    /// `4M · Γ · (4√2 C_O Δ / n^{(1−α_O)/2} + √(π/n))`
    pub fn diagonal_expectation(m: f64, cap_gamma: f64, delta_const: f64, c_o: f64, alpha_o: f64, n: f64) -> f64 {
        4.0 * m * cap_gamma * (4.0 * SQRT_2 * c_o * delta_const / n.powf((1.0 - alpha_o) / 2.0) + (PI / n).sqrt())
    }

    /// `8√2 · M · Γ · √((VC(1 + ln n) + ln(1/δ))/n)`
    pub fn generalization(m: f64, cap_gamma: f64, vc_dim: f64, ln_inv_delta: f64, n: f64) -> f64 {
        8.0 * SQRT_2 * m * cap_gamma * ((vc_dim * (1.0 + n.ln()) + ln_inv_delta) / n).sqrt()
    }
}

fn check_scale(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and >= 0, got {value}"
        )))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be >= 1".into()));
    }
    Ok(())
}

fn check_outlier_growth(c_o: f64, alpha_o: f64) -> Result<()> {
    if !(c_o.is_finite() && c_o >= 1.0) {
        return Err(Error::InvalidParameter(format!("C_O must be >= 1, got {c_o}")));
    }
    if !(0.0..1.0).contains(&alpha_o) {
        return Err(Error::InvalidParameter(format!(
            "α_O must lie in [0, 1), got {alpha_o}"
        )));
    }
    Ok(())
}

fn delta_const(c: &DerivedConstants) -> Result<f64> {
    c.delta_const.ok_or(Error::EpsilonZero)
}

/// Half-width of the MoM deviation bound from a standard deviation `σ`.
pub fn mom_bound_chebyshev(sigma: f64, n: usize, delta: Delta, epsilon: f64, mapping: &AlphaMapping) -> Result<f64> {
    check_scale("σ", sigma)?;
    delta_range_chebyshev(mapping, epsilon, n)?.check(delta)?;
    let c = derived_constants(mapping, epsilon)?;
    Ok(formulas::chebyshev(sigma, c.gamma, delta.ln_inv(), n as f64))
}

/// Half-width of the MoM deviation bound for `ρ`-sub-Gaussian inliers.
pub fn mom_bound_subgaussian(rho: f64, n: usize, delta: Delta, epsilon: f64, mapping: &AlphaMapping) -> Result<f64> {
    check_scale("ρ", rho)?;
    delta_range_subgaussian(mapping, epsilon, n)?.check(delta)?;
    let c = derived_constants(mapping, epsilon)?;
    Ok(formulas::subgaussian(rho, c.cap_gamma, delta.ln_inv(), n as f64))
}

/// Bound on `E|θ̂_MoM − θ|` when `n_O ≤ C_O² n^{α_O}`.
///
/// Undefined at `ε = 0`; see [`mom_expectation_bound_uncontaminated`].
pub fn mom_expectation_bound(
    rho: f64,
    n: usize,
    epsilon: f64,
    c_o: f64,
    alpha_o: f64,
    mapping: &AlphaMapping,
) -> Result<f64> {
    check_scale("ρ", rho)?;
    check_n(n)?;
    check_outlier_growth(c_o, alpha_o)?;
    let c = derived_constants(mapping, epsilon)?;
    let dc = delta_const(&c)?;
    Ok(formulas::expectation(rho, c.cap_gamma, dc, c_o, alpha_o, n as f64))
}

/// `2ρΓ(0)√(π/n)`, the expectation bound without outliers.
pub fn mom_expectation_bound_uncontaminated(rho: f64, n: usize, mapping: &AlphaMapping) -> Result<f64> {
    check_scale("ρ", rho)?;
    check_n(n)?;
    let c = derived_constants(mapping, 0.0)?;
    Ok(formulas::expectation_uncontaminated(rho, c.cap_gamma, n as f64))
}

/// MoU deviation bound from the variance proxy `Σ(h)`.
pub fn mou_bound_chebyshev(sigma_h: f64, n: usize, delta: Delta, epsilon: f64, mapping: &AlphaMapping) -> Result<f64> {
    mom_bound_chebyshev(sigma_h, n, delta, epsilon, mapping)
}

/// MoU deviation bound for a kernel bounded by `M`: `4√d M Γ(ε) √(ln(1/δ)/n)`.
pub fn mou_bound_bounded(
    degree: usize,
    m: f64,
    n: usize,
    delta: Delta,
    epsilon: f64,
    mapping: &AlphaMapping,
) -> Result<f64> {
    check_scale("M", m)?;
    mom_bound_subgaussian((degree as f64).sqrt() * m, n, delta, epsilon, mapping)
}

/// Bound on `E|θ̂_MoU − θ|` for a kernel bounded by `M`.
pub fn mou_expectation_bound(
    degree: usize,
    m: f64,
    n: usize,
    epsilon: f64,
    c_o: f64,
    alpha_o: f64,
    mapping: &AlphaMapping,
) -> Result<f64> {
    check_scale("M", m)?;
    mom_expectation_bound((degree as f64).sqrt() * m, n, epsilon, c_o, alpha_o, mapping)
}

/// Half-width of the cross-block MoU₂ bound, `γ` taken at `ε̃`.
#[allow(clippy::too_many_arguments)]
pub fn mou2_bound(
    sigma_h: f64,
    n: usize,
    m: usize,
    delta: Delta,
    eps_x: f64,
    eps_y: f64,
    mapping: &AlphaMapping,
) -> Result<f64> {
    check_scale("Σ(H)", sigma_h)?;
    let tc = two_sample_constants(mapping, eps_x, eps_y)?;
    match two_sample_delta_range(&tc, n, m) {
        Ok(r) => r.check(delta)?,
        Err(Error::DegenerateRange(range)) => {
            return Err(Error::DeltaOutOfRange {
                ln_delta: delta.ln(),
                range,
            })
        }
        Err(e) => return Err(e),
    }
    let c = derived_constants(mapping, tc.epsilon_tilde)?;
    Ok(formulas::cross_block(sigma_h, c.gamma, delta.ln_inv(), n.min(m) as f64))
}

/// Validates the diagonal setting and returns `(ε_X + ε_Y, n ∧ m)`.
///
/// Unequal sizes are accepted as long as `2(n_O + m_O) ≤ n ∧ m`.
fn diagonal_setting(n: usize, m: usize, eps_x: f64, eps_y: f64) -> Result<(f64, usize)> {
    check_n(n)?;
    check_n(m)?;
    for e in [eps_x, eps_y] {
        if !(e.is_finite() && (0.0..=0.5).contains(&e)) {
            return Err(Error::EpsilonOutOfRange(e));
        }
    }
    let sum = eps_x + eps_y;
    if sum >= 0.5 {
        return Err(Error::SumBreakdownExceeded(sum));
    }
    let n_min = n.min(m);
    if n != m {
        let outliers = (eps_x * n as f64).round() + (eps_y * m as f64).round();
        if 2.0 * outliers > n_min as f64 {
            return Err(Error::InvalidParameter(format!(
                "unequal sizes need 2(n_O + m_O) <= min(n, m); got 2·{outliers} > {n_min}"
            )));
        }
    }
    Ok((sum, n_min))
}

/// MoU₂-diag deviation bound from `Σ(H)`, constants at `ε_X + ε_Y`.
pub fn mou2_diag_bound_chebyshev(
    sigma_h: f64,
    n: usize,
    m: usize,
    delta: Delta,
    eps_x: f64,
    eps_y: f64,
    mapping: &AlphaMapping,
) -> Result<f64> {
    let (eps, n_min) = diagonal_setting(n, m, eps_x, eps_y)?;
    mom_bound_chebyshev(sigma_h, n_min, delta, eps, mapping)
}

/// MoU₂-diag deviation bound for `|H| ≤ M`: `8M Γ(ε_X + ε_Y) √(ln(1/δ)/n)`.
pub fn mou2_diag_bound_bounded(
    m_sup: f64,
    n: usize,
    m: usize,
    delta: Delta,
    eps_x: f64,
    eps_y: f64,
    mapping: &AlphaMapping,
) -> Result<f64> {
    check_scale("M", m_sup)?;
    let (eps, n_min) = diagonal_setting(n, m, eps_x, eps_y)?;
    mom_bound_subgaussian(2.0 * m_sup, n_min, delta, eps, mapping)
}

/// Bound on `E|θ̂_diag − θ|` for `|H| ≤ M`.
#[allow(clippy::too_many_arguments)]
pub fn mou2_diag_expectation_bound(
    m_sup: f64,
    n: usize,
    m: usize,
    eps_x: f64,
    eps_y: f64,
    c_o: f64,
    alpha_o: f64,
    mapping: &AlphaMapping,
) -> Result<f64> {
    check_scale("M", m_sup)?;
    check_outlier_growth(c_o, alpha_o)?;
    let (eps, n_min) = diagonal_setting(n, m, eps_x, eps_y)?;
    let c = derived_constants(mapping, eps)?;
    let dc = delta_const(&c)?;
    Ok(formulas::diagonal_expectation(
        m_sup,
        c.cap_gamma,
        dc,
        c_o,
        alpha_o,
        n_min as f64,
    ))
}

/// Excess-risk bound of the MoU minimizer over a class of VC dimension
/// `vc_dim` with losses bounded by `M`, for `δ ≤ e^{−4nα(ε)}`.
pub fn generalization_bound(
    m: f64,
    vc_dim: usize,
    n: usize,
    delta: Delta,
    epsilon: f64,
    mapping: &AlphaMapping,
) -> Result<f64> {
    check_scale("M", m)?;
    delta_range_subgaussian(mapping, epsilon, n)?.check(delta)?;
    let c = derived_constants(mapping, epsilon)?;
    Ok(formulas::generalization(
        m,
        c.cap_gamma,
        vc_dim as f64,
        delta.ln_inv(),
        n as f64,
    ))
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|i| i as f64).product()
}

/// `Σ²(h) = d! Σ_c C(d, c) ζ_c` from `ζ_1, …, ζ_d`.
pub fn sigma_sq_cap(zetas: &[f64]) -> f64 {
    let d = zetas.len();
    factorial(d)
        * zetas
            .iter()
            .enumerate()
            .map(|(i, z)| binomial(d, i + 1) * z)
            .sum::<f64>()
}

/// Exact `Var(Ū_B(h)) = C(B,d)⁻¹ Σ_c C(d,c) C(B−d, d−c) ζ_c`.
pub fn one_sample_u_variance(zetas: &[f64], b: usize) -> Result<f64> {
    let d = zetas.len();
    if d == 0 || b < d {
        return Err(Error::SampleTooSmall { size: b, degree: d });
    }
    let total: f64 = zetas
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let c = i + 1;
            binomial(d, c) * binomial(b - d, d - c) * z
        })
        .sum();
    Ok(total / binomial(b, d))
}

/// `Var(Ū_{n,m}(H)) = σ²/(nm) + (m−1)σ₁²/(nm) + (n−1)σ₂²/(nm)`.
pub fn two_sample_u_variance(sigma_sq: f64, sigma1_sq: f64, sigma2_sq: f64, n: usize, m: usize) -> f64 {
    let nm = (n * m) as f64;
    (sigma_sq + (m as f64 - 1.0) * sigma1_sq + (n as f64 - 1.0) * sigma2_sq) / nm
}

/// `ζ_1, …, ζ_d` and `Σ²(h)` for a one-sample kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSampleProxy {
    pub zetas: Vec<f64>,
    pub sigma_sq: f64,
}

/// `σ², σ₁², σ₂²` and `Σ²(H) = σ² + σ₁² + σ₂²` for a cross kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleProxy {
    pub sigma_sq: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub cap_sigma_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VarianceProxy {
    OneSample(OneSampleProxy),
    TwoSample(TwoSampleProxy),
}

impl VarianceProxy {
    /// `Σ²` of either kind.
    pub fn cap_sigma_sq(&self) -> f64 {
        match self {
            VarianceProxy::OneSample(p) => p.sigma_sq,
            VarianceProxy::TwoSample(p) => p.cap_sigma_sq,
        }
    }
}

/// Monte Carlo sizes for the plug-in proxies: `anchors` draws of the
/// conditioning arguments, each averaged over `completions` draws of the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyConfig {
    pub anchors: usize,
    pub completions: usize,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            anchors: 2000,
            completions: 50,
        }
    }
}

fn clamp_component(name: &str, v: f64) -> f64 {
    if v < 0.0 {
        log::warn!("negative plug-in estimate {v:.3e} for {name}, clamped to 0");
        0.0
    } else {
        v
    }
}

/// Variance of conditional means, debiased for the finite number of
/// completions: `Var(row means) − mean(row variances)/L`, plus the total
/// variance `mean(row variances) + Var(conditional mean)`.
fn between_within(rows: &[Vec<f64>]) -> (f64, f64) {
    let l = rows[0].len() as f64;
    let means: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().copied().collect::<KahanSum>().value() / l)
        .collect();
    let within = if l >= 2.0 {
        rows.iter().map(|r| sample_variance(r)).collect::<KahanSum>().value() / rows.len() as f64
    } else {
        0.0
    };
    let between = sample_variance(&means) - within / l;
    (between, within + between)
}

/// Plug-in `ζ_c` estimates from a clean calibration sample.
///
/// `h_c(z_1..z_c)` is estimated by averaging `h` over random completions
/// drawn without replacement from the remaining observations.
pub fn estimate_variance_proxy<R: Rng + ?Sized>(
    values: &[f64],
    kernel: &UKernel,
    config: ProxyConfig,
    rng: &mut R,
) -> Result<OneSampleProxy> {
    let d = kernel.degree();
    if d > 3 {
        return Err(Error::DegreeUnsupported(d));
    }
    let n = values.len();
    if n < 2 * d {
        return Err(Error::SampleTooSmall { size: n, degree: d });
    }
    if config.anchors < 2 || config.completions < 1 {
        return Err(Error::InvalidParameter(
            "proxy needs >= 2 anchors and >= 1 completion".into(),
        ));
    }
    let mut zetas = Vec::with_capacity(d);
    let mut args = vec![0.0; d];
    for c in 1..=d {
        let zeta = if c == d {
            let draws = config.anchors * config.completions;
            let mut evals = Vec::with_capacity(draws);
            for _ in 0..draws {
                for (slot, i) in args.iter_mut().zip(sample_indices(rng, n, d)) {
                    *slot = values[i];
                }
                evals.push(kernel.eval(&args)?);
            }
            sample_variance(&evals)
        } else {
            let mut rows = Vec::with_capacity(config.anchors);
            for _ in 0..config.anchors {
                let idx = sample_indices(rng, n, c).into_vec();
                let mut row = Vec::with_capacity(config.completions);
                for _ in 0..config.completions {
                    let mut chosen = idx.clone();
                    while chosen.len() < d {
                        let j = rng.random_range(0..n);
                        if !chosen.contains(&j) {
                            chosen.push(j);
                        }
                    }
                    for (slot, &i) in args.iter_mut().zip(&chosen) {
                        *slot = values[i];
                    }
                    row.push(kernel.eval(&args)?);
                }
                rows.push(row);
            }
            between_within(&rows).0
        };
        zetas.push(clamp_component(&format!("ζ_{c}"), zeta));
    }
    let sigma_sq = sigma_sq_cap(&zetas);
    Ok(OneSampleProxy { zetas, sigma_sq })
}

/// Plug-in `σ², σ₁², σ₂²` for a cross kernel from clean samples.
pub fn estimate_cross_variance_proxy<R: Rng + ?Sized>(
    x: &[f64],
    y: &[f64],
    kernel: &CrossKernel,
    config: ProxyConfig,
    rng: &mut R,
) -> Result<TwoSampleProxy> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::SampleTooSmall {
            size: x.len().min(y.len()),
            degree: 2,
        });
    }
    if config.anchors < 2 || config.completions < 2 {
        return Err(Error::InvalidParameter(
            "proxy needs >= 2 anchors and >= 2 completions".into(),
        ));
    }
    let mut rows_x = Vec::with_capacity(config.anchors);
    for _ in 0..config.anchors {
        let xv = x[rng.random_range(0..x.len())];
        let row = (0..config.completions)
            .map(|_| kernel.eval(xv, y[rng.random_range(0..y.len())]))
            .collect::<Result<Vec<_>>>()?;
        rows_x.push(row);
    }
    let mut rows_y = Vec::with_capacity(config.anchors);
    for _ in 0..config.anchors {
        let yv = y[rng.random_range(0..y.len())];
        let row = (0..config.completions)
            .map(|_| kernel.eval(x[rng.random_range(0..x.len())], yv))
            .collect::<Result<Vec<_>>>()?;
        rows_y.push(row);
    }
    let (s1, total_x) = between_within(&rows_x);
    let (s2, total_y) = between_within(&rows_y);
    let sigma1_sq = clamp_component("σ₁²", s1);
    let sigma2_sq = clamp_component("σ₂²", s2);
    let sigma_sq = clamp_component("σ²", 0.5 * (total_x + total_y));
    Ok(TwoSampleProxy {
        sigma_sq,
        sigma1_sq,
        sigma2_sq,
        cap_sigma_sq: sigma_sq + sigma1_sq + sigma2_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{u_stat, u_stat_two_sample};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const H: AlphaMapping = AlphaMapping::Harmonic;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn chebyshev_display_value() {
        let c = derived_constants(&H, 0.1).unwrap();
        let v = formulas::chebyshev(1.0, c.gamma, 4.0, 100.0);
        assert!((v - 4.081).abs() < 1e-3, "{v}");
        // e^{-4} lies above the admissible [e^-20, e^-20/3]
        let err = mom_bound_chebyshev(1.0, 100, Delta::exp_neg(4.0).unwrap(), 0.1, &H).unwrap_err();
        assert!(matches!(err, Error::DeltaOutOfRange { .. }));
        let inside = Delta::exp_neg(10.0).unwrap();
        let g = mom_bound_chebyshev(1.0, 100, inside, 0.1, &H).unwrap();
        assert!(close(g, formulas::chebyshev(1.0, c.gamma, 10.0, 100.0), 1e-15));
        assert_eq!(mom_bound_chebyshev(0.0, 100, inside, 0.1, &H).unwrap(), 0.0);
        let d400 = Delta::exp_neg(30.0).unwrap();
        let a = mom_bound_chebyshev(1.0, 100, Delta::exp_neg(10.0).unwrap(), 0.1, &H).unwrap();
        let b = mom_bound_chebyshev(1.0, 400, Delta::exp_neg(10.0).unwrap(), 0.1, &H);
        // e^-10 is above the n = 400 range, compare through the display instead
        assert!(b.is_err());
        assert!(close(formulas::chebyshev(1.0, c.gamma, 10.0, 400.0) / a, 0.5, 1e-14));
        assert!(mom_bound_chebyshev(1.0, 400, d400, 0.1, &H).is_ok());
    }

    #[test]
    fn subgaussian_display_value() {
        let c = derived_constants(&H, 0.1).unwrap();
        let v = formulas::subgaussian(1.0, c.cap_gamma, 10.0, 1000.0);
        assert!((v - 0.632).abs() < 1e-3, "{v}");
        let err = mom_bound_subgaussian(1.0, 1000, Delta::exp_neg(10.0).unwrap(), 0.1, &H).unwrap_err();
        assert!(matches!(err, Error::DeltaOutOfRange { .. }));
        // at the upper limit e^{-4nα}: 8ρΓ√α
        let n = 30;
        let at = Delta::exp_neg(4.0 * n as f64 * c.alpha).unwrap();
        let v = mom_bound_subgaussian(1.0, n, at, 0.1, &H).unwrap();
        assert!(close(v, 8.0 * c.cap_gamma * c.alpha.sqrt(), 1e-12));
        assert_eq!(mom_bound_subgaussian(0.0, n, at, 0.1, &H).unwrap(), 0.0);
    }

    #[test]
    fn expectation_display_value() {
        let v = mom_expectation_bound(1.0, 10_000, 0.1, 1.0, 0.5, &H).unwrap();
        assert!((v - 2.365).abs() < 1e-3, "{v}");
        assert_eq!(mom_expectation_bound(0.0, 10_000, 0.1, 1.0, 0.5, &H).unwrap(), 0.0);
        assert!(mom_expectation_bound(1.0, 10_000, 0.1, 2.0, 0.5, &H).unwrap() > v);
        assert!(matches!(
            mom_expectation_bound(1.0, 100, 0.0, 1.0, 0.5, &H),
            Err(Error::EpsilonZero)
        ));
        let u = mom_expectation_bound_uncontaminated(1.0, 100, &AlphaMapping::Arithmetic).unwrap();
        assert!(close(u, 2.0 * (std::f64::consts::PI / 100.0).sqrt(), 1e-14));
        assert!(matches!(
            mom_expectation_bound(1.0, 100, 0.5, 1.0, 0.5, &H),
            Err(Error::BreakdownExceeded(_))
        ));
    }

    #[test]
    fn mou_bounds_reduce_and_scale() {
        let n = 10_000;
        let eps = 0.01;
        let c = derived_constants(&H, eps).unwrap();
        let at = Delta::exp_neg(4.0 * n as f64 * c.alpha).unwrap();
        assert_eq!(
            mou_bound_bounded(1, 0.7, n, at, eps, &H).unwrap(),
            mom_bound_subgaussian(0.7, n, at, eps, &H).unwrap()
        );
        let v = mou_bound_bounded(2, 0.5, n, at, eps, &H).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(close(
            v,
            4.0 * 2f64.sqrt() * 0.5 * c.cap_gamma * (4.0 * c.alpha).sqrt(),
            1e-12
        ));
        let r = delta_range_chebyshev(&H, eps, n).unwrap();
        let mid = r.interior_points(1).unwrap()[0];
        assert_eq!(mou_bound_chebyshev(0.0, n, mid, eps, &H).unwrap(), 0.0);
        let a = mou_bound_chebyshev(1.0, n, mid, eps, &H).unwrap();
        let b = mou_bound_chebyshev(3.0, n, mid, eps, &H).unwrap();
        assert!(close(b, 3.0 * a, 1e-14));
        let e = mou_expectation_bound(2, 1.0, n, eps, 1.0, 0.5, &H).unwrap();
        assert!(close(
            e,
            mom_expectation_bound(2f64.sqrt(), n, eps, 1.0, 0.5, &H).unwrap(),
            1e-14
        ));
    }

    fn mid_two_sample(eps: f64, n: usize, m: usize) -> Delta {
        let tc = two_sample_constants(&H, eps, eps).unwrap();
        two_sample_delta_range(&tc, n, m).unwrap().interior_points(1).unwrap()[0]
    }

    #[test]
    fn mou2_bound_symmetric_and_linear() {
        let d = mid_two_sample(0.05, 10_000, 10_000);
        let v = mou2_bound(1.0, 10_000, 10_000, d, 0.05, 0.05, &H).unwrap();
        let g = derived_constants(&H, 0.0975).unwrap().gamma;
        assert!(close(v, formulas::cross_block(1.0, g, d.ln_inv(), 1e4), 1e-12));
        assert_eq!(mou2_bound(0.0, 10_000, 10_000, d, 0.05, 0.05, &H).unwrap(), 0.0);
        let d = mid_two_sample(0.01, 20_000, 40_000);
        let a = mou2_bound(1.0, 20_000, 40_000, d, 0.01, 0.01, &H).unwrap();
        let b = mou2_bound(1.0, 40_000, 20_000, d, 0.01, 0.01, &H).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            mou2_bound(1.0, 100, 100, d, 0.3, 0.3, &H),
            Err(Error::JointBreakdownExceeded(_))
        ));
        assert!(matches!(
            mou2_bound(1.0, 100, 100, Delta::new(0.1).unwrap(), 0.0, 0.0, &H),
            Err(Error::DeltaOutOfRange { .. })
        ));
    }

    #[test]
    fn diagonal_bounds() {
        let a = AlphaMapping::Arithmetic;
        let d = Delta::exp_neg(3.0).unwrap();
        let v = mou2_diag_bound_bounded(1.0, 100, 100, d, 0.0, 0.0, &a).unwrap();
        assert!(close(v, 8.0 * (3.0f64 / 100.0).sqrt(), 1e-14));
        assert_eq!(mou2_diag_bound_bounded(0.0, 100, 100, d, 0.0, 0.0, &a).unwrap(), 0.0);
        assert!(matches!(
            mou2_diag_bound_bounded(1.0, 100, 100, d, 0.3, 0.25, &a),
            Err(Error::SumBreakdownExceeded(_))
        ));
        // 2(n_O + m_O) = 2(10 + 10) > 30
        assert!(matches!(
            mou2_diag_bound_bounded(1.0, 100, 30, d, 0.1, 1.0 / 3.0, &a),
            Err(Error::InvalidParameter(_))
        ));
        let r = delta_range_chebyshev(&H, 0.1, 500).unwrap();
        let mid = r.interior_points(1).unwrap()[0];
        let c = mou2_diag_bound_chebyshev(2.0, 500, 900, mid, 0.05, 0.05, &H).unwrap();
        assert!(close(c, mom_bound_chebyshev(2.0, 500, mid, 0.1, &H).unwrap(), 1e-14));
        let e = mou2_diag_expectation_bound(1.0, 10_000, 10_000, 0.05, 0.05, 1.0, 0.5, &H).unwrap();
        let k = derived_constants(&H, 0.1).unwrap();
        let want = 4.0
            * k.cap_gamma
            * (4.0 * 2f64.sqrt() * k.delta_const.unwrap() / 10.0 + (std::f64::consts::PI / 1e4).sqrt());
        assert!(close(e, want, 1e-14));
    }

    #[test]
    fn generalization_display_value() {
        let c = derived_constants(&H, 0.1).unwrap();
        let v = formulas::generalization(1.0, c.cap_gamma, 5.0, 10.0, 1000.0);
        assert!((v - 3.98).abs() < 5e-3, "{v}");
        assert!(generalization_bound(1.0, 5, 1000, Delta::exp_neg(10.0).unwrap(), 0.1, &H).is_err());
        let n = 1000;
        let deep = Delta::exp_neg(4.0 * 4.0 * n as f64 * c.alpha).unwrap();
        let a = generalization_bound(1.0, 5, n, deep, 0.1, &H).unwrap();
        let b = generalization_bound(1.0, 5, 4 * n, deep, 0.1, &H).unwrap();
        assert!(b < a);
        assert_eq!(generalization_bound(0.0, 5, n, deep, 0.1, &H).unwrap(), 0.0);
    }

    #[test]
    fn variance_formulas() {
        // variance kernel under N(0,1): ζ_1 = 1/2, ζ_2 = 2
        assert_eq!(sigma_sq_cap(&[0.5, 2.0]), 6.0);
        let v = one_sample_u_variance(&[0.5, 2.0], 50).unwrap();
        assert!(close(v, 2.0 / 49.0, 1e-12));
        assert!(v <= 6.0 / 50.0);
        assert!(one_sample_u_variance(&[0.5, 2.0], 1).is_err());
        assert!(close(two_sample_u_variance(1.0, 0.0, 0.0, 4, 5), 1.0 / 20.0, 1e-15));
    }

    /// Exact moments of a kernel under a finite distribution, by enumeration.
    fn enumerate<F: FnMut(&[usize], f64)>(support: usize, probs: &[f64], len: usize, mut f: F) {
        let total = support.pow(len as u32);
        let mut idx = vec![0usize; len];
        for code in 0..total {
            let mut c = code;
            let mut p = 1.0;
            for slot in idx.iter_mut() {
                *slot = c % support;
                c /= support;
                p *= probs[*slot];
            }
            f(&idx, p);
        }
    }

    #[test]
    fn two_sample_variance_identity_small() {
        let xs = [0.0, 1.0, 2.5];
        let px = [0.2, 0.5, 0.3];
        let ys = [-1.0, 2.0];
        let py = [0.6, 0.4];
        let h = |x: f64, y: f64| x * x * y + x - 0.5 * y * y;
        let e_h: f64 = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| px[i] * py[j] * h(xs[i], ys[j]))
            .sum();
        let e_h2: f64 = (0..3)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| px[i] * py[j] * h(xs[i], ys[j]).powi(2))
            .sum();
        let h1 = |i: usize| (0..2).map(|j| py[j] * h(xs[i], ys[j])).sum::<f64>();
        let h2 = |j: usize| (0..3).map(|i| px[i] * h(xs[i], ys[j])).sum::<f64>();
        let s = e_h2 - e_h * e_h;
        let s1 = (0..3).map(|i| px[i] * h1(i).powi(2)).sum::<f64>() - e_h * e_h;
        let s2 = (0..2).map(|j| py[j] * h2(j).powi(2)).sum::<f64>() - e_h * e_h;
        let kernel = CrossKernel::new("poly", h);
        for (n, m) in [(1, 1), (2, 3), (3, 2), (3, 3)] {
            let (mut m1, mut m2) = (0.0, 0.0);
            enumerate(3, &px, n, |ix, p| {
                let x: Vec<f64> = ix.iter().map(|&i| xs[i]).collect();
                enumerate(2, &py, m, |iy, q| {
                    let y: Vec<f64> = iy.iter().map(|&j| ys[j]).collect();
                    let u = u_stat_two_sample(&x, &y, &kernel).unwrap();
                    m1 += p * q * u;
                    m2 += p * q * u * u;
                });
            });
            let var = m2 - m1 * m1;
            assert!((var - two_sample_u_variance(s, s1, s2, n, m)).abs() < 1e-10);
        }
    }

    #[test]
    fn one_sample_variance_matches_enumeration() {
        let zs = [0.0, 1.0, 3.0];
        let pz = [0.3, 0.3, 0.4];
        let k = UKernel::variance();
        let hf = |a: f64, b: f64| 0.5 * (a - b) * (a - b);
        let mut theta = 0.0;
        let mut e2 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let w = pz[i] * pz[j];
                theta += w * hf(zs[i], zs[j]);
                e2 += w * hf(zs[i], zs[j]).powi(2);
            }
        }
        let h1 = |i: usize| (0..3).map(|j| pz[j] * hf(zs[i], zs[j])).sum::<f64>();
        let zeta1 = (0..3).map(|i| pz[i] * h1(i).powi(2)).sum::<f64>() - theta * theta;
        let zeta2 = e2 - theta * theta;
        for b in 2..=5 {
            let (mut m1, mut m2) = (0.0, 0.0);
            enumerate(3, &pz, b, |ix, p| {
                let v: Vec<f64> = ix.iter().map(|&i| zs[i]).collect();
                let u = u_stat(&v, &k).unwrap();
                m1 += p * u;
                m2 += p * u * u;
            });
            let var = m2 - m1 * m1;
            assert!((m1 - theta).abs() < 1e-12);
            assert!((var - one_sample_u_variance(&[zeta1, zeta2], b).unwrap()).abs() < 1e-10);
            assert!(var <= sigma_sq_cap(&[zeta1, zeta2]) / b as f64 + 1e-12);
        }
    }

    #[test]
    fn proxy_constant_kernel_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let k = UKernel::new("const", 2, |_| 3.0).unwrap();
        let p = estimate_variance_proxy(
            &v,
            &k,
            ProxyConfig {
                anchors: 100,
                completions: 10,
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(p.zetas, vec![0.0, 0.0]);
        assert_eq!(p.sigma_sq, 0.0);
        assert!(matches!(
            estimate_variance_proxy(&v[..3], &k, ProxyConfig::default(), &mut rng),
            Err(Error::SampleTooSmall { .. })
        ));
    }

    #[test]
    fn proxy_variance_kernel_gaussian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = estimate_variance_proxy(
            &v,
            &UKernel::variance(),
            ProxyConfig {
                anchors: 4000,
                completions: 50,
            },
            &mut rng,
        )
        .unwrap();
        assert!((p.zetas[0] - 0.5).abs() < 0.05, "{:?}", p.zetas);
        assert!((p.zetas[1] - 2.0).abs() < 0.2, "{:?}", p.zetas);
        // Hoeffding variance with the plug-in ζ against simulated blocks of 50
        let b = 50;
        let sims: Vec<f64> = (0..4000)
            .map(|_| {
                let blk: Vec<f64> = (0..b).map(|_| StandardNormal.sample(&mut rng)).collect();
                crate::estimators::empirical_variance(&blk).unwrap()
            })
            .collect();
        let simulated = sample_variance(&sims);
        let predicted = one_sample_u_variance(&p.zetas, b).unwrap();
        assert!(
            (predicted - simulated).abs() < 0.1 * simulated,
            "{predicted} vs {simulated}"
        );
        assert!(p.sigma_sq / b as f64 >= simulated);
    }

    #[test]
    fn proxy_mann_whitney_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let p = estimate_cross_variance_proxy(
            &x,
            &y,
            &CrossKernel::mann_whitney(),
            ProxyConfig {
                anchors: 4000,
                completions: 50,
            },
            &mut rng,
        )
        .unwrap();
        assert!((p.sigma1_sq - 1.0 / 12.0).abs() < 0.01, "{p:?}");
        assert!((p.sigma2_sq - 1.0 / 12.0).abs() < 0.01, "{p:?}");
        assert!((p.sigma_sq - 0.25).abs() < 0.02, "{p:?}");
    }

    #[test]
    fn gated_bounds_never_return_outside_range() {
        for eps in [0.0, 0.05, 0.2] {
            for n in [10usize, 100, 1000] {
                let r = delta_range_chebyshev(&H, eps, n).unwrap();
                let above = -(r.ln_upper + 0.5);
                if above > 0.0 {
                    let d = Delta::exp_neg(above).unwrap();
                    assert!(mom_bound_chebyshev(1.0, n, d, eps, &H).is_err());
                }
                let below = Delta::exp_neg(-(r.ln_lower - 1.0)).unwrap();
                assert!(mom_bound_chebyshev(1.0, n, below, eps, &H).is_err());
                let s = delta_range_subgaussian(&H, eps, n).unwrap();
                let above = -(s.ln_upper + 0.5);
                if above > 0.0 {
                    let d = Delta::exp_neg(above).unwrap();
                    assert!(mom_bound_subgaussian(1.0, n, d, eps, &H).is_err());
                    assert!(generalization_bound(1.0, 3, n, d, eps, &H).is_err());
                }
            }
        }
    }
}
