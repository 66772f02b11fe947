//! Statistical helpers for the Monte Carlo acceptance checks.

use num_traits::Float;
use serde::Serialize;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval<F: Float>(successes: u64, trials: u64, z: F) -> (F, F) {
    assert!(trials > 0, "wilson interval needs at least one trial");
    assert!(successes <= trials);
    let n = F::from(trials).unwrap();
    let p = F::from(successes).unwrap() / n;
    let two = F::from(2.0).unwrap();
    let four = F::from(4.0).unwrap();
    let z2 = z * z;
    let denom = F::one() + z2 / n;
    let centre = p + z2 / (two * n);
    let half = z * (p * (F::one() - p) / n + z2 / (four * n * n)).sqrt();
    let lo = ((centre - half) / denom).max(F::zero());
    let hi = ((centre + half) / denom).min(F::one());
    (lo, hi)
}

/// Kolmogorov-Smirnov statistic of `samples` against Uniform[0, 1).
/// Sorts the slice in place.
pub fn ks_uniform_statistic<F: Float>(samples: &mut [F]) -> F {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("samples are not NaN"));
    let n = F::from(samples.len()).unwrap();
    samples
        .iter()
        .enumerate()
        .fold(F::zero(), |d, (i, &x)| {
            let i = F::from(i).unwrap();
            let above = (i + F::one()) / n - x;
            let below = x - i / n;
            d.max(above).max(below)
        })
}

/// Asymptotic critical value `sqrt(-ln(alpha/2) / 2) / sqrt(n)`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof).expect("positive degrees of freedom").sf(statistic)
}

/// Goodness of fit of `observed` counts against category probabilities.
pub fn chi_square_goodness_of_fit(observed: &[u64], probabilities: &[f64]) -> ChiSquareTest {
    assert_eq!(observed.len(), probabilities.len());
    let total: u64 = observed.iter().sum();
    let statistic = observed
        .iter()
        .zip(probabilities)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = (observed.len() - 1) as f64;
    ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

/// Two-sample chi-square test of homogeneity on the histograms of two
/// integer samples. Adjacent values are pooled until every cell expects at
/// least 5 observations in both samples.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareTest {
    use std::collections::BTreeMap;
    let mut hist: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for &x in a {
        hist.entry(x).or_default().0 += 1;
    }
    for &x in b {
        hist.entry(x).or_default().1 += 1;
    }
    let na = a.len() as f64;
    let nb = b.len() as f64;
    let share_a = na / (na + nb);
    let share_b = nb / (na + nb);
    let enough = |ca: u64, cb: u64| {
        let tot = (ca + cb) as f64;
        tot * share_a >= 5.0 && tot * share_b >= 5.0
    };
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut acc = (0u64, 0u64);
    for (_, (ca, cb)) in hist {
        acc.0 += ca;
        acc.1 += cb;
        if enough(acc.0, acc.1) {
            cells.push(acc);
            acc = (0, 0);
        }
    }
    if acc.0 + acc.1 > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    let statistic = cells
        .iter()
        .map(|&(ca, cb)| {
            let tot = (ca + cb) as f64;
            let ea = tot * share_a;
            let eb = tot * share_b;
            (ca as f64 - ea).powi(2) / ea + (cb as f64 - eb).powi(2) / eb
        })
        .sum();
    let dof = cells.len().saturating_sub(1) as f64;
    ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

/// `P(X ≥ k)` for `X ~ Binomial(trials, p)`.
pub fn binomial_upper_tail(k: u64, trials: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > trials {
        return 0.0;
    }
    Binomial::new(p, trials).expect("valid binomial").sf(k - 1)
}

/// One-sided test that event count `a` is not higher than `b` when both come
/// from equally long exposures: the p-value of observing at least `a` of the
/// `a + b` events on the first side under equal rates.
pub fn rate_not_higher_p_value(a: u64, b: u64) -> f64 {
    binomial_upper_tail(a, a + b, 0.5)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Pearson correlation of paired samples.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (mx, my) = (mean(xs), mean(ys));
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_zero_successes() {
        let (lo, hi) = wilson_interval(0, 1_000_000, Z_95);
        assert!(lo.abs() < 1e-15);
        // z^2 / (n + z^2)
        let expected = Z_95 * Z_95 / (1e6 + Z_95 * Z_95);
        assert!((hi - expected).abs() < 1e-12);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, Z_95);
        assert!(lo < 0.3 && 0.3 < hi);
        // textbook value for 30/100
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
        let (lo32, hi32) = wilson_interval(30u64, 100, Z_95 as f32);
        assert!((lo32 as f64 - lo).abs() < 1e-5 && (hi32 as f64 - hi).abs() < 1e-5);
    }

    #[test]
    fn ks_of_perfect_grid_is_small() {
        let n = 1000;
        let mut xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_uniform_statistic(&mut xs);
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
        let mut skewed: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64).powi(2)).collect();
        assert!(ks_uniform_statistic(&mut skewed) > ks_critical_value(n, 0.01));
    }

    #[test]
    fn ks_critical_one_percent() {
        assert!((ks_critical_value(1, 0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn chi_square_identical_samples() {
        let a: Vec<u64> = (0..2000).map(|i| i % 7).collect();
        let t = chi_square_two_sample(&a, &a);
        assert!(t.statistic.abs() < 1e-12);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        assert_eq!(t.dof, 6.0);
    }

    #[test]
    fn chi_square_detects_shift() {
        let a: Vec<u64> = (0..2000).map(|i| i % 7).collect();
        let b: Vec<u64> = (0..2000).map(|i| i % 7 + 2).collect();
        assert!(chi_square_two_sample(&a, &b).p_value < 1e-6);
    }

    #[test]
    fn goodness_of_fit_reference() {
        // 3 dof, statistic 7.815 is the 5% critical value
        let t = chi_square_goodness_of_fit(&[10, 10, 10, 10], &[0.25; 4]);
        assert_eq!(t.statistic, 0.0);
        assert!((chi_square_p(7.814_727_903, 3.0) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn binomial_tail_reference() {
        // P(X >= 2), X ~ Bin(3, 1/2) = 4/8
        assert!((binomial_upper_tail(2, 3, 0.5) - 0.5).abs() < 1e-12);
        assert_eq!(binomial_upper_tail(0, 3, 0.5), 1.0);
        assert_eq!(rate_not_higher_p_value(0, 0), 1.0);
        assert!(rate_not_higher_p_value(30, 5) < 0.001);
        assert!(rate_not_higher_p_value(5, 30) > 0.99);
    }
}
