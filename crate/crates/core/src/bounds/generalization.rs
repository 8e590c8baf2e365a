//! Distribution-accuracy tails of the Laplace and Gaussian mechanisms and
//! the sample sizes that make them `(α, β)`-accurate.

use serde::Serialize;
use std::f64::consts::{E, SQRT_2};

use super::lbi::check_window;
use super::tail::{ComposedTail, TailFunction};
use super::{NoiseKind, Regime};
use crate::error::{invalid, Error, Result};

/// Inputs of [`distribution_tail`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistTailSpec {
    pub kind: NoiseKind,
    pub regime: Regime,
    pub n: u64,
    pub eta: f64,
    pub k: u64,
    /// Query dimension (sub-Gaussian regime).
    pub d: usize,
    /// Bound on the element-level standard deviation (or sub-Gaussian parameter).
    pub sigma: f64,
    /// Bound on the query range Δ (bounded regime).
    pub range: f64,
    /// Per-query LBI slack of the Gaussian mechanism; ignored for Laplace.
    pub delta: f64,
    pub delta_prime: f64,
}

impl DistTailSpec {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.d == 0 {
            return Err(invalid("n, k and d must be at least 1"));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(invalid(format!("eta must be positive, got {}", self.eta)));
        }
        for (name, v) in [("sigma", self.sigma), ("range", self.range)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.kind == NoiseKind::Gaussian && !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.delta_prime > 0.0 && self.delta_prime < 1.0) {
            return Err(invalid(format!("delta' must lie in (0, 1), got {}", self.delta_prime)));
        }
        Ok(())
    }

    /// The stability offset ε, after checking `δ′` against its window.
    pub fn eps(&self) -> Result<f64> {
        self.validate()?;
        let ne = self.n as f64 * self.eta;
        let k = self.k as f64;
        let kd = k * self.d as f64;
        let s2 = self.sigma * self.sigma;
        let d2 = self.range * self.range;
        let lp = (1.0 / self.delta_prime).ln();
        let (lo, hi, eps) = match (self.kind, self.regime) {
            (NoiseKind::Laplace, Regime::Bounded) => (
                (-ne * ne / (4.0 * k * d2)).exp(),
                1.0 / E,
                2.0 * s2 / ne * (3.0 * k * lp).sqrt(),
            ),
            (NoiseKind::Laplace, Regime::SubGaussian) => (
                (-ne * ne / (156.0 * kd * s2)).exp(),
                (-4.0f64).exp(),
                29.0 * s2 / ne * (kd * lp).sqrt(),
            ),
            (NoiseKind::Gaussian, Regime::Bounded) => {
                let l = (1.0 / self.delta).ln();
                (
                    (-ne * ne / (8.0 * k * d2 * l)).exp(),
                    1.0 / E,
                    2.0 * s2 / ne * (6.0 * k * l * lp).sqrt(),
                )
            }
            (NoiseKind::Gaussian, Regime::SubGaussian) => (
                (-ne * ne / (312.0 * kd * s2)).exp(),
                (-4.0f64).exp(),
                29.0 * s2 / ne * (2.0 * kd * lp).sqrt(),
            ),
        };
        check_window("delta_prime", self.delta_prime, lo, hi)?;
        Ok(eps)
    }

    /// Additive failure mass divided by `c` in the tail: `σδ′` or `σ(kδ + δ′)`.
    pub fn slack(&self) -> f64 {
        match self.kind {
            NoiseKind::Laplace => self.sigma * self.delta_prime,
            NoiseKind::Gaussian => self.sigma * (self.k as f64 * self.delta + self.delta_prime),
        }
    }
}

/// Distribution-accuracy tail `Φ(α) = inf_c [P(α − ε − c) + slack/c]`, with
/// `P` the posterior tail of the mechanism.
pub fn distribution_tail(spec: &DistTailSpec) -> Result<TailFunction> {
    let eps = spec.eps()?;
    Ok(TailFunction::Composed(ComposedTail {
        kind: spec.kind,
        k: spec.k as f64,
        eta: spec.eta,
        eps,
        slack: spec.slack(),
    }))
}

/// Inputs of the sample-size calculators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationInputs {
    pub alpha: f64,
    pub beta: f64,
    pub k: u64,
    pub sigma: f64,
    /// Query range Δ (bounded regime and splitting).
    pub range: f64,
    pub regime: Regime,
}

/// A calibrated sample size together with the noise scale and the free
/// parameters that certify it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub n: u64,
    pub eta: Option<f64>,
    pub method: &'static str,
    pub inputs: CalibrationInputs,
    /// Per-query LBI slack δ (Gaussian).
    pub delta: Option<f64>,
    /// Composition slack δ′ used by the certificate.
    pub delta_prime: Option<f64>,
}

impl CalibrationInputs {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("k must be at least 1"));
        }
        for (name, v) in [("alpha", self.alpha), ("sigma", self.sigma)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.range > 0.0) || !self.range.is_finite() {
            return Err(invalid(format!("range must be positive and finite, got {}", self.range)));
        }
        if !(self.beta > 0.0 && self.beta <= 0.125) {
            return Err(Error::OutOfRange(format!(
                "beta = {} must lie in (0, 1/8]",
                self.beta
            )));
        }
        Ok(())
    }

    /// `min{σ, α} β² / σ`, the numerator shared by every certificate slack.
    fn base(&self) -> f64 {
        self.sigma.min(self.alpha) * self.beta * self.beta / self.sigma
    }

    fn ratio2(&self) -> f64 {
        (self.sigma / self.alpha).powi(2)
    }
}

fn ceil_count(x: f64) -> Result<u64> {
    if !x.is_finite() || x >= u64::MAX as f64 {
        return Err(Error::Infeasible(format!("sample size {x} is not representable")));
    }
    Ok(x.ceil().max(1.0) as u64)
}

/// Laplace noise scale and sample size for `(α, β)`-distribution accuracy.
pub fn laplace_sample_size(inputs: CalibrationInputs) -> Result<Calibration> {
    inputs.validate()?;
    let k = inputs.k as f64;
    let delta_prime = inputs.base() / k;
    let l = (1.0 / delta_prime).ln();
    let eta = inputs.alpha / (2.0 * l);
    let n = match inputs.regime {
        Regime::Bounded => {
            2.0 * l.powf(1.5)
                * k.sqrt()
                * (inputs.range / inputs.alpha).max(8.0 * 3f64.sqrt() * inputs.ratio2())
        }
        Regime::SubGaussian => 232.0 * l.powf(1.5) * k.sqrt() * inputs.ratio2(),
    };
    Ok(Calibration {
        n: ceil_count(n)?,
        eta: Some(eta),
        method: "laplace",
        inputs,
        delta: None,
        delta_prime: Some(delta_prime),
    })
}

/// Gaussian noise scale and sample size for `(α, β)`-distribution accuracy.
pub fn gaussian_sample_size(inputs: CalibrationInputs) -> Result<Calibration> {
    inputs.validate()?;
    let k = inputs.k as f64;
    let delta = inputs.base() / (k + 1.0);
    let l1 = (1.0 / delta).ln();
    let eta = inputs.alpha / (3.0 * (2.0 * l1).sqrt());
    let n = match inputs.regime {
        Regime::Bounded => {
            2.0 * SQRT_2
                * l1.powf(1.5)
                * k.sqrt()
                * (inputs.range / inputs.alpha).max(12.0 * 6f64.sqrt() * inputs.ratio2())
        }
        Regime::SubGaussian => {
            // The sub-Gaussian branch is stated with k rather than k + 1.
            let l0 = (k / inputs.base()).ln();
            696.0 * l0.powf(1.5) * k.sqrt() * inputs.ratio2()
        }
    };
    Ok(Calibration {
        n: ceil_count(n)?,
        eta: Some(eta),
        method: "gaussian",
        inputs,
        delta: Some(delta),
        delta_prime: Some(delta),
    })
}

/// Baseline: answer each query on its own chunk of `n/k` fresh samples, with
/// a Bernstein bound per chunk and a union bound over chunks.
/// `n = k·⌈(2/3)·ln(2k/β)·(3σ²/α² + Δ/α)⌉`.
pub fn splitting_sample_size(inputs: CalibrationInputs) -> Result<Calibration> {
    if !(inputs.beta > 0.0 && inputs.beta < 1.0) {
        return Err(invalid(format!("beta must lie in (0, 1), got {}", inputs.beta)));
    }
    if inputs.k == 0 || !(inputs.alpha > 0.0) || !(inputs.sigma >= 0.0) || !(inputs.range >= 0.0) {
        return Err(invalid("k >= 1, alpha > 0, sigma >= 0 and range >= 0 required"));
    }
    let k = inputs.k as f64;
    let chunk = (2.0 / 3.0)
        * (2.0 * k / inputs.beta).ln()
        * (3.0 * inputs.ratio2() + inputs.range / inputs.alpha);
    let chunk = ceil_count(chunk)?;
    let n = chunk
        .checked_mul(inputs.k)
        .ok_or_else(|| Error::Infeasible("splitting sample size overflows".into()))?;
    Ok(Calibration {
        n,
        eta: None,
        method: "splitting",
        inputs,
        delta: None,
        delta_prime: None,
    })
}

impl Calibration {
    /// The distribution tail certified by this calibration, or `None` for
    /// the splitting baseline.
    pub fn certificate(&self, d: usize) -> Option<Result<TailFunction>> {
        let kind = match self.method {
            "laplace" => NoiseKind::Laplace,
            "gaussian" => NoiseKind::Gaussian,
            _ => return None,
        };
        let spec = DistTailSpec {
            kind,
            regime: self.inputs.regime,
            n: self.n,
            eta: self.eta?,
            k: self.inputs.k,
            d,
            sigma: self.inputs.sigma,
            range: self.inputs.range,
            delta: self.delta.unwrap_or(0.5),
            delta_prime: self.delta_prime?,
        };
        Some(distribution_tail(&spec))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::lbi::{lbi_per_query, theta_bound};
    use proptest::prelude::*;

    fn inputs(alpha: f64, beta: f64, k: u64, sigma: f64, range: f64, regime: Regime) -> CalibrationInputs {
        CalibrationInputs { alpha, beta, k, sigma, range, regime }
    }

    #[test]
    fn laplace_reference_calibration() {
        let c = laplace_sample_size(inputs(1.0, 0.125, 100, 1.0, 1.0, Regime::Bounded)).unwrap();
        // ln(6400) = 8.764053269347762, n ≥ 2·ln^{3/2}(6400)·10·8√3 ≈ 7190.15.
        let l = 6400f64.ln();
        assert!((l - 8.764_053_269_347_762).abs() < 1e-12);
        assert!((c.eta.unwrap() - 1.0 / (2.0 * l)).abs() < 1e-15);
        assert!((c.eta.unwrap() - 0.057_051_227_854_667_17).abs() < 1e-12);
        assert_eq!(c.n, 7191);
        assert!((c.delta_prime.unwrap() - 1.5625e-4).abs() < 1e-18);
    }

    #[test]
    fn laplace_sub_gaussian_calibration() {
        let c = laplace_sample_size(inputs(1.0, 0.125, 100, 1.0, 1.0, Regime::SubGaussian)).unwrap();
        // 232·ln^{3/2}(6400)·10 = 232·25.945229278351235·10 = 60192.93
        assert_eq!(c.n, 60193);
    }

    #[test]
    fn gaussian_reference_calibration() {
        let c = gaussian_sample_size(inputs(1.0, 0.125, 100, 1.0, 1.0, Regime::Bounded)).unwrap();
        let l = 6464f64.ln();
        assert!((c.eta.unwrap() - 1.0 / (3.0 * (2.0 * l).sqrt())).abs() < 1e-15);
        assert!((c.eta.unwrap() - 0.079_572_837_207_223_07).abs() < 1e-12);
        assert_eq!(c.n, 21608);
        assert_eq!(c.delta, c.delta_prime);
    }

    #[test]
    fn splitting_reference() {
        let c = splitting_sample_size(inputs(1.0, 0.05, 1, 1.0, 1.0, Regime::Bounded)).unwrap();
        assert_eq!(c.n, 10);
        assert_eq!(c.eta, None);
        let c3 = splitting_sample_size(inputs(1.0, 0.05, 3, 1.0, 1.0, Regime::Bounded)).unwrap();
        assert_eq!(c3.n % 3, 0);
    }

    #[test]
    fn beta_outside_valid_range_rejected() {
        for f in [laplace_sample_size, gaussian_sample_size] {
            assert!(matches!(f(inputs(1.0, 0.2, 10, 1.0, 1.0, Regime::Bounded)), Err(Error::OutOfRange(_))));
            assert!(matches!(f(inputs(1.0, 0.0, 10, 1.0, 1.0, Regime::Bounded)), Err(Error::OutOfRange(_))));
        }
    }

    #[test]
    fn range_branch_dominates_for_small_sigma() {
        let a = gaussian_sample_size(inputs(1.0, 0.125, 100, 1e-3, 1.0, Regime::Bounded)).unwrap();
        let l1 = (101.0 / (0.125f64 * 0.125)).ln();
        let expect = (2.0 * SQRT_2 * l1.powf(1.5) * 10.0).ceil() as u64;
        assert_eq!(a.n, expect);
    }

    #[test]
    fn laplace_certificate_at_reference_point() {
        let c = laplace_sample_size(inputs(1.0, 0.125, 100, 1.0, 1.0, Regime::Bounded)).unwrap();
        let tail = c.certificate(1).unwrap().unwrap();
        let v = tail.eval(1.0);
        assert!(v.valid);
        assert!(v.value <= 0.125, "{}", v.value);
        // The hand-picked slack c = 2β already gives 100·e^{1−0.5/η} + σδ′/0.25.
        let TailFunction::Composed(ct) = &tail else { panic!() };
        assert!((ct.eps - 0.25).abs() < 2e-4, "{}", ct.eps);
        let eta = c.eta.unwrap();
        let hand = 100.0 * (1.0 - (1.0 - ct.eps - 0.25) / eta).exp() + 1.5625e-4 / 0.25;
        assert!(v.value <= hand + 1e-12);
    }

    #[test]
    fn eps_agrees_with_theta_bound() {
        let spec = DistTailSpec {
            kind: NoiseKind::Laplace, regime: Regime::Bounded, n: 2000, eta: 0.05, k: 20, d: 1,
            sigma: 0.4, range: 1.0, delta: 0.0, delta_prime: 0.01,
        };
        let g1 = lbi_per_query(NoiseKind::Laplace, 2000, 0.05, 0.0).unwrap().gamma1;
        let t = theta_bound(Regime::Bounded, g1, 0.4, 20, 1, 0.01, 1.0).unwrap();
        assert!((spec.eps().unwrap() - t).abs() < 1e-15);

        let g = DistTailSpec { kind: NoiseKind::Gaussian, delta: 1e-3, ..spec };
        let g1 = lbi_per_query(NoiseKind::Gaussian, 2000, 0.05, 1e-3).unwrap().gamma1;
        let t = theta_bound(Regime::Bounded, g1, 0.4, 20, 1, 0.01, 1.0).unwrap();
        assert!((g.eps().unwrap() - t).abs() < 1e-12);

        let s = DistTailSpec { regime: Regime::SubGaussian, delta_prime: 0.01, ..spec };
        let g1 = 1.0 / (2000.0 * 0.05);
        let t = theta_bound(Regime::SubGaussian, g1, 0.4, 20, 1, 0.01, 1.0).unwrap();
        assert!((s.eps().unwrap() - t).abs() < 1e-15);
    }

    #[test]
    fn below_offset_is_vacuous() {
        let c = laplace_sample_size(inputs(1.0, 0.125, 100, 1.0, 1.0, Regime::Bounded)).unwrap();
        let tail = c.certificate(1).unwrap().unwrap();
        let floor = tail.validity_floor();
        assert!(floor > 0.25);
        assert_eq!(tail.eval(floor * 0.99).valid, false);
        assert_eq!(tail.eval(floor * 0.99).value, 1.0);
    }

    #[test]
    fn zero_variance_reduces_to_posterior_tail() {
        // σ → 0: ε → 0 and the slack vanishes, leaving inf_c k e^{1−(α−c)/η},
        // attained as c → 0.
        let spec = DistTailSpec {
            kind: NoiseKind::Laplace, regime: Regime::Bounded, n: 100, eta: 0.2, k: 3, d: 1,
            sigma: 1e-12, range: 1.0, delta: 0.0, delta_prime: 0.1,
        };
        let tail = distribution_tail(&spec).unwrap();
        for alpha in [0.8, 1.2, 2.0] {
            let post = 3.0 * (1.0 - alpha / 0.2f64).exp();
            let v = tail.value(alpha);
            assert!(v >= post.min(1.0) - 1e-12);
            assert!((v - post.min(1.0)).abs() < 1e-4 * post.min(1.0), "{v} vs {post}");
        }
    }

    #[test]
    fn window_excludes_calibrated_slack_for_small_sigma() {
        // Sub-Gaussian: nη = 116·√L·σ²/α, so the floor exponent is
        // 86.3·L·(σ/α)², which drops below L once σ/α < 0.108.
        let c = laplace_sample_size(inputs(1.0, 0.125, 100, 0.1, 1.0, Regime::SubGaussian)).unwrap();
        assert!(matches!(c.certificate(1).unwrap(), Err(Error::Validity { .. })));
        let c = laplace_sample_size(inputs(1.0, 0.125, 100, 0.2, 1.0, Regime::SubGaussian)).unwrap();
        assert!(c.certificate(1).unwrap().is_ok());
    }

    #[test]
    fn window_excludes_calibrated_slack_in_range_branch() {
        // When Δ/α dominates the max, nη = √(kL)·Δ and the window floor is
        // e^{−L/4}, above the certificate's δ′ = e^{−L}.
        let c = laplace_sample_size(inputs(1.0, 0.125, 100, 0.05, 1.0, Regime::Bounded)).unwrap();
        assert!(matches!(c.certificate(1).unwrap(), Err(Error::Validity { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sample_sizes_are_monotone(k in 1u64..5000, dk in 0u64..5000, alpha in 0.05f64..5.0, f in 1.0f64..3.0, sigma in 0.05f64..3.0) {
            for regime in [Regime::Bounded, Regime::SubGaussian] {
                for calc in [laplace_sample_size, gaussian_sample_size, splitting_sample_size] {
                    let a = calc(inputs(alpha, 0.1, k, sigma, 1.0, regime)).unwrap();
                    let more_k = calc(inputs(alpha, 0.1, k + dk, sigma, 1.0, regime)).unwrap();
                    let more_alpha = calc(inputs(alpha * f, 0.1, k, sigma, 1.0, regime)).unwrap();
                    prop_assert!(more_k.n >= a.n);
                    prop_assert!(more_alpha.n <= a.n);
                }
            }
        }

        #[test]
        fn calibrated_tails_meet_target(k in 1u64..2000, alpha in 0.1f64..3.0, beta in 0.001f64..0.125, sigma in 0.3f64..3.0) {
            for regime in [Regime::Bounded, Regime::SubGaussian] {
                for calc in [laplace_sample_size, gaussian_sample_size] {
                    let c = calc(inputs(alpha, beta, k, sigma, 2.0 * sigma, regime)).unwrap();
                    match c.certificate(1).unwrap() {
                        Ok(tail) => {
                            let v = tail.eval(alpha);
                            prop_assert!(v.valid);
                            prop_assert!(v.value <= beta, "{} {:?}: {} > {}", c.method, regime, v.value, beta);
                        }
                        Err(Error::Validity { .. }) => {
                            // The certificate's δ′ falls below the window floor when
                            // σ/α is small; see the dedicated window tests.
                            prop_assert!(sigma / alpha < 1.0);
                        }
                        Err(e) => prop_assert!(false, "{}", e),
                    }
                }
            }
        }
    }
}
