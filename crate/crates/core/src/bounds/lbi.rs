//! LBI parameter calculus: per-query parameters, composition over `k`
//! rounds, the variance-based Θ bounds, and conversion to Bayes stability.

use serde::Serialize;
use std::f64::consts::E;

use super::{NoiseKind, Regime};
use crate::error::{invalid, Error, Result};
use crate::oracle::LbiParams;

/// Per-query LBI parameters of a noise mechanism on a dataset of size `n`.
/// `delta` is only used by the Gaussian mechanism.
pub fn lbi_per_query(kind: NoiseKind, n: u64, eta: f64, delta: f64) -> Result<LbiParams> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(eta > 0.0) {
        return Err(invalid(format!("eta must be positive, got {eta}")));
    }
    let ne = n as f64 * eta;
    match kind {
        NoiseKind::Laplace => Ok(LbiParams {
            gamma1: 1.0 / ne,
            gamma2: 0.0,
            delta: 0.0,
        }),
        NoiseKind::Gaussian => {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
            }
            Ok(LbiParams {
                gamma1: (2.0 * (1.0 / delta).ln()).sqrt() / ne,
                gamma2: 1.0 / (2.0 * ne * ne),
                delta,
            })
        }
    }
}

/// Composition over `k` adaptive rounds with failure slack `δ′`:
/// `(γ₁√(2 ln(1/δ′)), γ₂ + γ₁²/2; kδ + δ′)`.
pub fn compose_lbi(per_query: &LbiParams, k: u64, delta_prime: f64) -> Result<LbiParams> {
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(invalid(format!("delta' must lie in (0, 1), got {delta_prime}")));
    }
    let g1 = per_query.gamma1;
    Ok(LbiParams {
        gamma1: g1 * (2.0 * (1.0 / delta_prime).ln()).sqrt(),
        gamma2: per_query.gamma2 + g1 * g1 / 2.0,
        delta: k as f64 * per_query.delta + delta_prime,
    })
}

/// Admissible `[lo, hi]` window for `δ′` in the Θ bound.
pub fn theta_window(regime: Regime, gamma1: f64, sigma: f64, k: u64, d: usize, range: f64) -> (f64, f64) {
    let kf = k as f64;
    match regime {
        Regime::Bounded => ((-1.0 / (4.0 * kf * gamma1 * gamma1 * range * range)).exp(), 1.0 / E),
        Regime::SubGaussian => (
            (-1.0 / (156.0 * kf * d as f64 * gamma1 * gamma1 * sigma * sigma)).exp(),
            (-4.0f64).exp(),
        ),
    }
}

pub(crate) fn check_window(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if lo > hi {
        return Err(Error::Infeasible(format!(
            "{what} window [{lo}, {hi}] is empty"
        )));
    }
    if !(value >= lo && value <= hi) {
        return Err(Error::Validity { what, value, lo, hi });
    }
    Ok(())
}

/// Variance-based upper bound ε on the Θ term for `k` queries with per-query
/// `γ₁`, element std at most `σ` and (bounded regime) range at most `range`.
///
/// Bounded: `2γ₁σ²√(3k ln(1/δ′))`. Sub-Gaussian: `29γ₁σ²√(kd ln(1/δ′))`.
pub fn theta_bound(
    regime: Regime,
    gamma1: f64,
    sigma: f64,
    k: u64,
    d: usize,
    delta_prime: f64,
    range: f64,
) -> Result<f64> {
    if k == 0 || d == 0 {
        return Err(invalid("k and d must be at least 1"));
    }
    for (name, v) in [("gamma1", gamma1), ("sigma", sigma), ("range", range)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let (lo, hi) = theta_window(regime, gamma1, sigma, k, d, range);
    check_window("delta_prime", delta_prime, lo, hi)?;
    let ln_inv = (1.0 / delta_prime).ln();
    let kf = k as f64;
    Ok(match regime {
        Regime::Bounded => 2.0 * gamma1 * sigma * sigma * (3.0 * kf * ln_inv).sqrt(),
        Regime::SubGaussian => 29.0 * gamma1 * sigma * sigma * (kf * d as f64 * ln_inv).sqrt(),
    })
}

/// Free parameters of the LBI-to-Bayes-stability conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityBudget {
    /// Composed LBI parameters.
    pub lbi: LbiParams,
    /// Upper bound on Θ, e.g. from [`theta_bound`].
    pub theta_eps: f64,
    pub slack_b: f64,
    pub slack_c: f64,
    pub delta_prime: f64,
}

impl StabilityBudget {
    pub fn new(lbi: LbiParams, theta_eps: f64, slack_b: f64, slack_c: f64, delta_prime: f64) -> Result<Self> {
        if !(slack_b > 0.0 && slack_c > 0.0) {
            return Err(invalid("slack parameters must be strictly positive"));
        }
        if !(delta_prime > 0.0 && delta_prime < 1.0) {
            return Err(invalid(format!("delta' must lie in (0, 1), got {delta_prime}")));
        }
        Ok(Self {
            lbi,
            theta_eps,
            slack_b,
            slack_c,
            delta_prime,
        })
    }
}

/// Bayes stability `(Θ + c, σ(kδ + δ′)/c)` of an LBI mechanism.
pub fn lbi_to_bayes(
    budget: &StabilityBudget,
    theta: f64,
    sigma1: f64,
    k: u64,
    per_query_delta: f64,
) -> (f64, f64) {
    let c = budget.slack_c;
    let mass = k as f64 * per_query_delta + budget.delta_prime;
    (theta + c, sigma1 * mass / c)
}

/// Bayes stability `(σ(ε + c), δ/c)` of a mechanism with stability loss
/// bounded by `(ε, δ)`.
pub fn lss_to_bayes(eps: f64, delta: f64, sigma1: f64, c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0) {
        return Err(invalid("slack c must be positive"));
    }
    Ok((sigma1 * (eps + c), delta / c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn per_query_examples() {
        let l = lbi_per_query(NoiseKind::Laplace, 100, 0.05, 0.0).unwrap();
        assert!((l.gamma1 - 0.2).abs() < 1e-15);
        assert_eq!((l.gamma2, l.delta), (0.0, 0.0));
        let g = lbi_per_query(NoiseKind::Gaussian, 100, 0.1, 0.01).unwrap();
        assert!((g.gamma1 - 0.303_485_425_877_029_3).abs() < 1e-12);
        assert!((g.gamma2 - 0.005).abs() < 1e-15);
        assert_eq!(g.delta, 0.01);
        let far = lbi_per_query(NoiseKind::Laplace, 100, 1e12, 0.0).unwrap();
        assert!(far.gamma1 < 1e-13);
        assert!(lbi_per_query(NoiseKind::Gaussian, 100, 0.1, 0.0).is_err());
        assert!(lbi_per_query(NoiseKind::Gaussian, 100, 0.1, 1.5).is_err());
    }

    #[test]
    fn composition_examples() {
        let p = LbiParams { gamma1: 0.1, gamma2: 0.0, delta: 0.0 };
        let c = compose_lbi(&p, 5, (-2.0f64).exp()).unwrap();
        assert!((c.gamma1 - 0.2).abs() < 1e-15);
        assert!((c.gamma2 - 0.005).abs() < 1e-15);
        assert!((c.delta - (-2.0f64).exp()).abs() < 1e-15);
        let z = compose_lbi(&LbiParams { gamma1: 0.0, gamma2: 0.0, delta: 0.002 }, 3, 0.1).unwrap();
        assert_eq!((z.gamma1, z.gamma2), (0.0, 0.0));
        assert!((z.delta - 0.106).abs() < 1e-15);
        let f = compose_lbi(&LbiParams { gamma1: 0.0, gamma2: 0.0, delta: 0.001 }, 7, 0.003).unwrap();
        assert!((f.delta - 0.01).abs() < 1e-15);
        assert!(compose_lbi(&p, 1, 0.0).is_err());
        assert!(compose_lbi(&p, 1, 1.0).is_err());
    }

    #[test]
    fn theta_examples() {
        let b = theta_bound(Regime::Bounded, 0.01, 1.0, 100, 1, 1.0 / E, 1.0).unwrap();
        assert!((b - 0.346_410_161_513_775_5).abs() < 1e-12);
        assert_eq!(theta_bound(Regime::Bounded, 0.0, 1.0, 100, 1, 0.2, 1.0).unwrap(), 0.0);
        let s = theta_bound(Regime::SubGaussian, 0.001, 1.0, 100, 1, (-4.0f64).exp(), 1.0).unwrap();
        assert!((s - 0.58).abs() < 1e-12);
    }

    #[test]
    fn theta_window_errors() {
        // 4kγ²Δ² = 4·100·0.01 = 4: floor e^{-1/4} ≈ 0.78 > 1/e.
        assert!(matches!(
            theta_bound(Regime::Bounded, 0.1, 1.0, 100, 1, 0.3, 1.0),
            Err(Error::Infeasible(_))
        ));
        match theta_bound(Regime::Bounded, 0.01, 1.0, 100, 1, 0.5, 1.0) {
            Err(Error::Validity { lo, hi, .. }) => {
                assert!((hi - 1.0 / E).abs() < 1e-15);
                assert!((lo - (-25.0f64).exp()).abs() < 1e-20);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            theta_bound(Regime::SubGaussian, 0.001, 1.0, 100, 1, 0.1, 1.0),
            Err(Error::Validity { .. })
        ));
    }

    #[test]
    fn bayes_conversion_examples() {
        let budget = StabilityBudget::new(LbiParams::ZERO, 0.3, 1.0, 0.1, 0.01).unwrap();
        let (e, d) = lbi_to_bayes(&budget, 0.3, 1.0, 10, 0.0);
        assert!((e - 0.4).abs() < 1e-15 && (d - 0.1).abs() < 1e-15);
        let (_, d0) = lbi_to_bayes(&budget, 0.3, 0.0, 10, 0.0);
        assert_eq!(d0, 0.0);
        let (e, d) = lss_to_bayes(0.2, 0.01, 0.5, 0.05).unwrap();
        assert!((e - 0.125).abs() < 1e-15 && (d - 0.2).abs() < 1e-15);
        assert!(StabilityBudget::new(LbiParams::ZERO, 0.3, 0.0, 0.1, 0.01).is_err());
    }

    proptest! {
        #[test]
        fn composition_is_monotone(g in 0.0f64..1.0, k1 in 1u64..100, dk in 0u64..100, dp in 1e-9f64..0.9, f in 0.01f64..1.0) {
            let p = LbiParams { gamma1: g, gamma2: 0.0, delta: 1e-6 };
            let a = compose_lbi(&p, k1, dp).unwrap();
            let b = compose_lbi(&p, k1 + dk, dp * f).unwrap();
            prop_assert!(b.gamma1 >= a.gamma1);
            prop_assert!(b.delta + 1e-18 >= k1 as f64 * 1e-6 + dp * f);
        }
    }
}
