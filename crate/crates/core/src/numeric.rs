//! Small numeric helpers shared across modules.

use std::cmp::Ordering;

/// Relative slack under which a real is treated as the nearby integer
/// before taking a ceiling. Products like `5.0 * 2.0000000000000004`
/// would otherwise round up a whole block.
const INTEGER_SNAP: f64 = 1e-9;

/// `⌈x⌉`, treating values within a relative `1e-9` of an integer as that integer.
pub fn ceil_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= INTEGER_SNAP * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Median with the midpoint convention for even counts.
///
/// Reorders `values` in place. Returns `None` on empty input.
pub fn median_in_place(values: &mut [f64]) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mid = n / 2;
    let (lower, upper_mid, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper_mid = *upper_mid;
    if n % 2 == 1 {
        Some(upper_mid)
    } else {
        let lower_mid = lower
            .iter()
            .copied()
            .max_by(f64::total_cmp)
            .expect("even n >= 2 leaves a non-empty lower half");
        Some(0.5 * (lower_mid + upper_mid))
    }
}

/// Index of the lower-central order statistic (ties broken by index).
pub fn lower_median_index(values: &[f64]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| match values[a].total_cmp(&values[b]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    Some(order[(values.len() - 1) / 2])
}

/// Kahan-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Mean and standard error of the mean (compensated sums).
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<KahanSum>().value() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<KahanSum>()
        .value();
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance; `0` for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().copied().collect::<KahanSum>().value() / n as f64;
    let ss = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<KahanSum>()
        .value();
    ss / (n - 1) as f64
}

/// SplitMix64 finalizer, used to derive independent seeds from a base seed.
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    let mut state = base;
    for &s in stream {
        state = splitmix(state ^ splitmix(s.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    splitmix(state)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
