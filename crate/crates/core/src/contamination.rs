//! Seeded generators for contaminated scalar samples.
//!
//! A sample of size `n` holds `n − n_O` i.i.d. inliers and
//! `n_O = ⌈C_O² n^{α_O}⌉` outliers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Sample, Tag};
use crate::numeric::{ceil_snapped, derive_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InlierDist {
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Bernoulli {
        p: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    StudentT {
        dof: f64,
    },
    /// Resampled uniformly with replacement.
    Empirical {
        values: Vec<f64>,
    },
}

type Sampler<'a> = Box<dyn FnMut(&mut ChaCha8Rng) -> f64 + 'a>;

impl InlierDist {
    pub fn mean(&self) -> Option<f64> {
        match self {
            InlierDist::Gaussian { mean, .. } => Some(*mean),
            InlierDist::Bernoulli { p } => Some(*p),
            InlierDist::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            InlierDist::StudentT { dof } => (*dof > 1.0).then_some(0.0),
            InlierDist::Empirical { values } => {
                (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
            }
        }
    }

    /// `None` when infinite or undefined.
    pub fn variance(&self) -> Option<f64> {
        match self {
            InlierDist::Gaussian { sd, .. } => Some(sd * sd),
            InlierDist::Bernoulli { p } => Some(p * (1.0 - p)),
            InlierDist::Uniform { lo, hi } => Some((hi - lo).powi(2) / 12.0),
            InlierDist::StudentT { dof } => (*dof > 2.0).then(|| dof / (dof - 2.0)),
            InlierDist::Empirical { values } => {
                let m = self.mean()?;
                Some(values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64)
            }
        }
    }

    /// The median, where it has a simple closed form.
    pub fn median(&self) -> Option<f64> {
        match self {
            InlierDist::Gaussian { mean, .. } => Some(*mean),
            InlierDist::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            InlierDist::StudentT { .. } => Some(0.0),
            InlierDist::Bernoulli { .. } | InlierDist::Empirical { .. } => None,
        }
    }

    fn sampler(&self) -> Result<Sampler<'_>> {
        let bad = |what: &str| Error::InvalidParameter(format!("invalid inlier distribution: {what}"));
        Ok(match self {
            InlierDist::Gaussian { mean, sd } => {
                let d = Normal::new(*mean, *sd).map_err(|e| bad(&e.to_string()))?;
                Box::new(move |r| d.sample(r))
            }
            InlierDist::Bernoulli { p } => {
                let d = Bernoulli::new(*p).map_err(|e| bad(&e.to_string()))?;
                Box::new(move |r| if d.sample(r) { 1.0 } else { 0.0 })
            }
            InlierDist::Uniform { lo, hi } => {
                let d = Uniform::new(*lo, *hi).map_err(|e| bad(&e.to_string()))?;
                Box::new(move |r| d.sample(r))
            }
            InlierDist::StudentT { dof } => {
                let d = StudentT::new(*dof).map_err(|e| bad(&e.to_string()))?;
                Box::new(move |r| d.sample(r))
            }
            InlierDist::Empirical { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(bad("empirical values must be non-empty and finite"));
                }
                Box::new(move |r| values[r.random_range(0..values.len())])
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OutlierRule {
    /// Point mass at `n^exponent`.
    DiracPower {
        exponent: f64,
    },
    DiracAt {
        value: f64,
    },
    UniformBox {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// Outliers occupy the last `n_O` positions.
    Append,
    /// Uniformly random positions. The permutation depends on both this
    /// seed and the generation seed, never on the values.
    Shuffle { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub inlier_dist: InlierDist,
    pub outlier_rule: OutlierRule,
    pub c_o: f64,
    pub alpha_o: f64,
    pub placement: Placement,
}

impl ContaminationSpec {
    /// `n_O = √n` outliers at `value`, i.e. `C_O = 1`, `α_O = 1/2`.
    pub fn sqrt_n(inlier_dist: InlierDist, outlier_rule: OutlierRule, placement: Placement) -> Self {
        ContaminationSpec {
            inlier_dist,
            outlier_rule,
            c_o: 1.0,
            alpha_o: 0.5,
            placement,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c_o.is_finite() && self.c_o >= 1.0) {
            return Err(Error::InvalidParameter(format!("c_o must be >= 1, got {}", self.c_o)));
        }
        if !(0.0..1.0).contains(&self.alpha_o) {
            return Err(Error::InvalidParameter(format!(
                "alpha_o must lie in [0, 1), got {}",
                self.alpha_o
            )));
        }
        Ok(())
    }
}

/// `⌈C_O² n^{α_O}⌉`.
pub fn n_outliers(spec: &ContaminationSpec, n: usize) -> usize {
    ceil_snapped(spec.c_o * spec.c_o * (n as f64).powf(spec.alpha_o)) as usize
}

/// `ε = n_O / n`.
pub fn epsilon_of(spec: &ContaminationSpec, n: usize) -> f64 {
    n_outliers(spec, n) as f64 / n as f64
}

/// `n` observations with the ground-truth mask, fully determined by `seed`.
pub fn generate(spec: &ContaminationSpec, n: usize, seed: u64) -> Result<Sample> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::EmptySample);
    }
    generate_with_count(spec, n, n_outliers(spec, n), seed)
}

/// Like [`generate`] but with an explicit outlier count; `c_o` and `α_O`
/// are ignored.
pub fn generate_with_count(spec: &ContaminationSpec, n: usize, n_o: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let eps = n_o as f64 / n as f64;
    if 2 * n_o >= n {
        return Err(Error::BreakdownExceeded(eps));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = spec.inlier_dist.sampler()?;
    let mut values: Vec<f64> = (0..n - n_o).map(|_| draw(&mut rng)).collect();
    match spec.outlier_rule {
        OutlierRule::DiracPower { exponent } => values.extend(std::iter::repeat_n((n as f64).powf(exponent), n_o)),
        OutlierRule::DiracAt { value } => values.extend(std::iter::repeat_n(value, n_o)),
        OutlierRule::UniformBox { lo, hi } => {
            let d = Uniform::new_inclusive(lo, hi)
                .map_err(|e| Error::InvalidParameter(format!("invalid outlier box: {e}")))?;
            values.extend((0..n_o).map(|_| d.sample(&mut rng)));
        }
    }
    let mut mask: Vec<Tag> = std::iter::repeat_n(Tag::Inlier, n - n_o)
        .chain(std::iter::repeat_n(Tag::Outlier, n_o))
        .collect();
    if let Placement::Shuffle { seed: s } = spec.placement {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(s, &[seed])));
        values = perm.iter().map(|&i| values[i]).collect();
        mask = perm.iter().map(|&i| mask[i]).collect();
    }
    Sample::with_mask(values, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(inlier: InlierDist, rule: OutlierRule, alpha_o: f64) -> ContaminationSpec {
        ContaminationSpec {
            inlier_dist: inlier,
            outlier_rule: rule,
            c_o: 1.0,
            alpha_o,
            placement: Placement::Append,
        }
    }

    #[test]
    fn gaussian_sqrt_n_outliers() {
        let s = spec(
            InlierDist::Gaussian { mean: 0.0, sd: 1.0 },
            OutlierRule::DiracPower { exponent: 0.5 },
            0.5,
        );
        let x = generate(&s, 100, 1).unwrap();
        assert_eq!(x.outlier_count(), 10);
        let mask = x.mask().unwrap();
        for (v, t) in x.values().iter().zip(mask) {
            if *t == Tag::Outlier {
                assert_eq!(*v, 10.0);
            }
        }
    }

    #[test]
    fn bernoulli_dirac_one() {
        let s = spec(
            InlierDist::Bernoulli { p: 0.5 },
            OutlierRule::DiracAt { value: 1.0 },
            0.5,
        );
        let x = generate(&s, 100, 2).unwrap();
        assert_eq!(x.outlier_count(), 10);
        assert!(x.values().iter().all(|v| *v == 0.0 || *v == 1.0));
        assert!(x.values()[90..].iter().all(|v| *v == 1.0));
    }

    #[test]
    fn uniform_quarter_power() {
        let s = spec(
            InlierDist::Uniform { lo: 0.0, hi: 1.0 },
            OutlierRule::DiracPower { exponent: 0.25 },
            0.5,
        );
        let x = generate(&s, 10_000, 3).unwrap();
        assert_eq!(x.outlier_count(), 100);
        assert_eq!(x.values().iter().filter(|v| **v == 10.0).count(), 100);
    }

    #[test]
    fn epsilon_examples() {
        let g = InlierDist::Gaussian { mean: 0.0, sd: 1.0 };
        let r = OutlierRule::DiracAt { value: 0.0 };
        assert_eq!(epsilon_of(&spec(g.clone(), r.clone(), 0.5), 100), 0.1);
        assert_eq!(epsilon_of(&spec(g.clone(), r.clone(), 0.0), 50), 1.0 / 50.0);
        assert_eq!(epsilon_of(&spec(g, r, 0.5), 10_000), 0.01);
    }

    #[test]
    fn outlier_count_is_exact_across_sizes() {
        let mut s = spec(
            InlierDist::StudentT { dof: 3.0 },
            OutlierRule::UniformBox { lo: 5.0, hi: 6.0 },
            0.6,
        );
        s.c_o = 1.3;
        for n in [33usize, 100, 999, 4096] {
            let x = generate(&s, n, n as u64).unwrap();
            let want = (1.69 * (n as f64).powf(0.6)).ceil() as usize;
            assert_eq!(x.outlier_count(), want, "n = {n}");
            assert_eq!(x.len(), n);
        }
    }

    #[test]
    fn breakdown_rejected() {
        let s = spec(
            InlierDist::Bernoulli { p: 0.5 },
            OutlierRule::DiracAt { value: 1.0 },
            0.5,
        );
        assert!(matches!(generate(&s, 4, 0), Err(Error::BreakdownExceeded(_))));
    }

    #[test]
    fn deterministic_and_shuffle_preserves_multiset() {
        let mut s = spec(
            InlierDist::Gaussian { mean: 1.0, sd: 2.0 },
            OutlierRule::DiracAt { value: 50.0 },
            0.5,
        );
        let a = generate(&s, 400, 9).unwrap();
        assert_eq!(a, generate(&s, 400, 9).unwrap());
        let sorted = |x: &Sample| {
            let mut v = x.values().to_vec();
            v.sort_by(f64::total_cmp);
            v
        };
        s.placement = Placement::Shuffle { seed: 1 };
        let b = generate(&s, 400, 9).unwrap();
        s.placement = Placement::Shuffle { seed: 2 };
        let c = generate(&s, 400, 9).unwrap();
        assert_ne!(b.values(), c.values());
        assert_eq!(sorted(&a), sorted(&b));
        assert_eq!(sorted(&b), sorted(&c));
        for (v, t) in c.values().iter().zip(c.mask().unwrap()) {
            assert_eq!(*t == Tag::Outlier, *v == 50.0);
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = ContaminationSpec::sqrt_n(
            InlierDist::Empirical { values: vec![1.0, 2.0] },
            OutlierRule::UniformBox { lo: 0.0, hi: 1.0 },
            Placement::Shuffle { seed: 4 },
        );
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ContaminationSpec>(&j).unwrap(), s);
    }

    #[test]
    fn explicit_outlier_count() {
        let s = spec(
            InlierDist::Gaussian { mean: 0.0, sd: 1.0 },
            OutlierRule::DiracAt { value: 9.0 },
            0.5,
        );
        let z = generate_with_count(&s, 50, 0, 3).unwrap();
        assert!(z.mask().unwrap().iter().all(|t| *t == Tag::Inlier));
        let x = generate_with_count(&s, 50, 7, 3).unwrap();
        assert_eq!(x.values().iter().filter(|v| **v == 9.0).count(), 7);
        assert!(matches!(
            generate_with_count(&s, 50, 25, 3),
            Err(Error::BreakdownExceeded(_))
        ));
    }
}
