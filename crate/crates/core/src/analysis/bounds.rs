//! Chernoff-style failure bounds for the balls-into-bins model.
//!
//! With `3n/4` honest and `n/4` Byzantine nodes thrown uniformly into `m`
//! shards, one shard's honest count falls to `2.5n/4m` with probability at
//! most `e^{-n/96m}` and its Byzantine count reaches `1.25n/4m` with
//! probability at most `e^{-n/144m}`. Outside both events the shard's
//! Byzantine ratio stays below 1/3, so a union bound over the shards gives
//! `Pr(failure) < 2m·e^{-n/144m}` per round.

use num_traits::Float;
use serde::Serialize;

/// One round per minute for a million years.
pub const MILLION_YEAR_ROUNDS: f64 = 5.26e11;

fn lit<F: Float>(x: f64) -> F {
    F::from(x).expect("constant is representable")
}

/// `e^{-n/96m}`: a shard's honest count at or below `2.5n/4m`.
pub fn honest_tail<F: Float>(n: F, m: F) -> F {
    (-n / (lit::<F>(96.0) * m)).exp()
}

/// `e^{-n/144m}`: a shard's Byzantine count at or above `1.25n/4m`.
pub fn byzantine_tail<F: Float>(n: F, m: F) -> F {
    (-n / (lit::<F>(144.0) * m)).exp()
}

/// `ln(2m·e^{-n/144m})`, finite even where the bound itself underflows.
pub fn ln_failure_bound<F: Float>(n: F, m: F) -> F {
    lit::<F>(2.0).ln() + m.ln() - n / (lit::<F>(144.0) * m)
}

/// Per-round failure bound `2m·e^{-n/144m}`.
pub fn failure_bound<F: Float>(n: F, m: F) -> F {
    ln_failure_bound(n, m).exp()
}

/// Union bound of a per-round bound over [`MILLION_YEAR_ROUNDS`]. Values at
/// or above 1 are vacuous but returned as computed.
pub fn million_year_bound<F: Float>(per_round: F) -> F {
    per_round * lit::<F>(MILLION_YEAR_ROUNDS)
}

/// The bound together with its companion tail terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FailureBound<F> {
    pub n: u64,
    pub m: u64,
    pub per_round: F,
    pub ln_per_round: F,
    pub honest_tail: F,
    pub byzantine_tail: F,
    pub million_year: F,
    pub ln_million_year: F,
}

pub fn analytic_failure_bound<F: Float>(n: u64, m: u64) -> FailureBound<F> {
    assert!(n >= 1 && m >= 1, "n and m must be positive");
    let nf = F::from(n).expect("n is representable");
    let mf = F::from(m).expect("m is representable");
    let ln_per_round = ln_failure_bound(nf, mf);
    let ln_million_year = ln_per_round + lit::<F>(MILLION_YEAR_ROUNDS).ln();
    FailureBound {
        n,
        m,
        per_round: ln_per_round.exp(),
        ln_per_round,
        honest_tail: honest_tail(nf, mf),
        byzantine_tail: byzantine_tail(nf, mf),
        million_year: ln_million_year.exp(),
        ln_million_year,
    }
}

/// Bounds over the grid `m × (n/m)`.
pub fn bound_table<F: Float>(shard_counts: &[u64], nodes_per_shard: &[u64]) -> Vec<FailureBound<F>> {
    shard_counts
        .iter()
        .flat_map(|&m| nodes_per_shard.iter().map(move |&k| analytic_failure_bound(k * m, m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_network_value() {
        // 8 · e^{-6000/576}
        let b = analytic_failure_bound::<f64>(6000, 4);
        let expected = 8.0 * (-6000.0f64 / 576.0).exp();
        assert!((b.per_round - expected).abs() < 1e-15);
        assert!((b.per_round - 2.4e-4).abs() < 0.01e-4);
        assert!(b.per_round < 2.4e-4);
    }

    #[test]
    fn single_shard_row() {
        let b = analytic_failure_bound::<f64>(1440, 1);
        assert!((b.per_round - 2.0 * (-10.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn tails_bracket_the_bound() {
        let b = analytic_failure_bound::<f64>(40_000, 10);
        assert!(b.honest_tail < b.byzantine_tail);
        assert!(b.honest_tail + b.byzantine_tail < 2.0 * b.byzantine_tail);
        assert!((b.per_round - 2.0 * 10.0 * b.byzantine_tail).abs() / b.per_round < 1e-12);
    }

    #[test]
    fn million_years() {
        assert_eq!(million_year_bound(0.0f64), 0.0);
        assert!((million_year_bound(1e-27f64) - 5.26e-16).abs() < 1e-28);
        assert!(million_year_bound(1e-40f64) <= 5.26e-29 * (1.0 + 1e-12));
    }

    #[test]
    fn generic_over_precision() {
        let single = analytic_failure_bound::<f32>(6000, 4);
        let double = analytic_failure_bound::<f64>(6000, 4);
        assert!(((single.per_round as f64) - double.per_round).abs() / double.per_round < 1e-5);
        // the log form stays finite where f32 underflows
        let far = analytic_failure_bound::<f32>(15_000 * 10_000, 10_000);
        assert!(far.ln_per_round.is_finite());
    }

    #[test]
    fn table_is_grid() {
        let t = bound_table::<f64>(&[1, 4], &[100, 1000, 1500]);
        assert_eq!(t.len(), 6);
        assert_eq!((t[4].n, t[4].m), (4000, 4));
    }
}
