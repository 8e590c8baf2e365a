use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

use super::search::inf_over_c;
use super::NoiseKind;
use crate::error::{invalid, Error, Result};

/// Smallest admissible slack `c` as a fraction of α.
pub const C_FLOOR_FRAC: f64 = 1e-6;

/// A tail bound evaluated at one α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailValue {
    pub value: f64,
    /// False when α lies below the formula's validity floor; `value` is then 1.
    pub valid: bool,
}

impl TailValue {
    fn vacuous() -> Self {
        Self {
            value: 1.0,
            valid: false,
        }
    }

    fn clamped(v: f64) -> Self {
        Self {
            value: if v.is_nan() { 1.0 } else { v.clamp(0.0, 1.0) },
            valid: true,
        }
    }
}

/// Which closed form (or table) a [`TailFunction`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailFamily {
    LaplaceSample,
    LaplacePosterior,
    GaussianSample,
    GaussianPosterior,
    Composed,
    Tabulated,
}

/// `inf_c [P(α − ε − c) + slack / c]`, where `P` is the posterior tail of the
/// noise family and `c` ranges over `(0, α − ε − floor]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComposedTail {
    pub kind: NoiseKind,
    pub k: f64,
    pub eta: f64,
    pub eps: f64,
    pub slack: f64,
}

/// A right-continuous step function: `values[i]` on `[alphas[i], alphas[i+1])`,
/// 1 below `alphas[0]`, `values.last()` beyond the last point.
///
/// For a non-increasing true tail this is an upper bound between grid
/// points, and its integral is exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedTail {
    alphas: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedTail {
    /// Strict constructor for user-supplied tables: α strictly increasing,
    /// values in `[0, 1]` and non-increasing.
    pub fn new(alphas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() || alphas.len() != values.len() {
            return Err(invalid("tabulated tail needs equal, non-empty alpha and value lists"));
        }
        if alphas.iter().any(|a| !a.is_finite()) || alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("tabulated alphas must be finite and strictly increasing"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("tabulated values must lie in [0, 1]"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("tabulated values must be non-increasing"));
        }
        Ok(Self { alphas, values })
    }

    /// Builds a table from pointwise upper bounds. A bound at α also bounds
    /// every larger α, so the running minimum is taken.
    pub fn from_bounds(alphas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut run = 1.0_f64;
        let values = values
            .into_iter()
            .map(|v| {
                run = run.min(if v.is_nan() { 1.0 } else { v.clamp(0.0, 1.0) });
                run
            })
            .collect();
        Self::new(alphas, values)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn eval(&self, alpha: f64) -> f64 {
        match self.alphas.partition_point(|a| *a <= alpha) {
            0 => 1.0,
            i => self.values[i - 1],
        }
    }

    /// `∫_a^∞` of the step function.
    fn integral_from(&self, a: f64) -> Result<f64> {
        if *self.values.last().expect("non-empty") > 0.0 {
            return Err(Error::Unsupported(
                "tail integral diverges: table does not reach zero".into(),
            ));
        }
        let mut total = 0.0;
        if a < self.alphas[0] {
            total += self.alphas[0] - a;
        }
        for i in 0..self.alphas.len() - 1 {
            let (lo, hi) = (self.alphas[i].max(a), self.alphas[i + 1]);
            if hi > lo {
                total += (hi - lo) * self.values[i];
            }
        }
        Ok(total)
    }
}

/// A non-increasing map from error threshold α to failure probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TailFunction {
    /// `k e^{−α/η}`.
    LaplaceSample { k: f64, eta: f64 },
    /// `k e^{1−α/η}`, valid for `α ≥ η`.
    LaplacePosterior { k: f64, eta: f64 },
    /// `(k/2) erfc(α/(√2 η))`.
    GaussianSample { k: f64, eta: f64 },
    /// `(kα/(√(2π) η)) e^{1−α²/(2η²)}`, valid for `α ≥ √2 η`.
    GaussianPosterior { k: f64, eta: f64 },
    Composed(ComposedTail),
    Tabulated(TabulatedTail),
}

fn check_k_eta(k: f64, eta: f64) -> Result<()> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(invalid(format!("k must be >= 1, got {k}")));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(invalid(format!("eta must be positive and finite, got {eta}")));
    }
    Ok(())
}

/// Unclamped posterior-tail formula of a noise family.
pub(crate) fn posterior_raw(kind: NoiseKind, k: f64, eta: f64, a: f64) -> f64 {
    match kind {
        NoiseKind::Laplace => k * (1.0 - a / eta).exp(),
        NoiseKind::Gaussian => {
            k * a / ((2.0 * PI).sqrt() * eta) * (1.0 - a * a / (2.0 * eta * eta)).exp()
        }
    }
}

/// Smallest α at which the posterior-tail formula holds.
pub fn posterior_floor(kind: NoiseKind, eta: f64) -> f64 {
    match kind {
        NoiseKind::Laplace => eta,
        NoiseKind::Gaussian => SQRT_2 * eta,
    }
}

impl TailFunction {
    pub fn laplace_sample(k: f64, eta: f64) -> Result<Self> {
        check_k_eta(k, eta)?;
        Ok(Self::LaplaceSample { k, eta })
    }

    pub fn laplace_posterior(k: f64, eta: f64) -> Result<Self> {
        check_k_eta(k, eta)?;
        Ok(Self::LaplacePosterior { k, eta })
    }

    pub fn gaussian_sample(k: f64, eta: f64) -> Result<Self> {
        check_k_eta(k, eta)?;
        Ok(Self::GaussianSample { k, eta })
    }

    pub fn gaussian_posterior(k: f64, eta: f64) -> Result<Self> {
        check_k_eta(k, eta)?;
        Ok(Self::GaussianPosterior { k, eta })
    }

    /// `ψ(ε) = δ` for `ε ≥ ε₀`, 1 below: a point stability guarantee.
    pub fn step(eps0: f64, delta: f64) -> Result<Self> {
        Ok(Self::Tabulated(TabulatedTail::new(vec![eps0], vec![delta])?))
    }

    /// The zero tail (α ≥ 0).
    pub fn zero() -> Self {
        Self::Tabulated(TabulatedTail {
            alphas: vec![0.0],
            values: vec![0.0],
        })
    }

    pub fn family(&self) -> TailFamily {
        match self {
            Self::LaplaceSample { .. } => TailFamily::LaplaceSample,
            Self::LaplacePosterior { .. } => TailFamily::LaplacePosterior,
            Self::GaussianSample { .. } => TailFamily::GaussianSample,
            Self::GaussianPosterior { .. } => TailFamily::GaussianPosterior,
            Self::Composed(_) => TailFamily::Composed,
            Self::Tabulated(_) => TailFamily::Tabulated,
        }
    }

    /// Minimum α at which the formula is valid.
    pub fn validity_floor(&self) -> f64 {
        match self {
            Self::LaplaceSample { .. } | Self::GaussianSample { .. } => 0.0,
            Self::LaplacePosterior { eta, .. } => posterior_floor(NoiseKind::Laplace, *eta),
            Self::GaussianPosterior { eta, .. } => posterior_floor(NoiseKind::Gaussian, *eta),
            Self::Composed(c) => c.eps + posterior_floor(c.kind, c.eta),
            Self::Tabulated(t) => t.alphas[0].max(0.0),
        }
    }

    pub fn eval(&self, alpha: f64) -> TailValue {
        if alpha.is_nan() {
            return TailValue::vacuous();
        }
        match self {
            Self::LaplaceSample { .. } | Self::GaussianSample { .. } if alpha < 0.0 => {
                TailValue::clamped(1.0)
            }
            Self::LaplaceSample { k, eta } => TailValue::clamped(k * (-alpha / eta).exp()),
            Self::GaussianSample { k, eta } => {
                TailValue::clamped(0.5 * k * erfc(alpha / (SQRT_2 * eta)))
            }
            Self::LaplacePosterior { k, eta } => {
                if alpha < self.validity_floor() {
                    TailValue::vacuous()
                } else {
                    TailValue::clamped(posterior_raw(NoiseKind::Laplace, *k, *eta, alpha))
                }
            }
            Self::GaussianPosterior { k, eta } => {
                if alpha < self.validity_floor() {
                    TailValue::vacuous()
                } else {
                    TailValue::clamped(posterior_raw(NoiseKind::Gaussian, *k, *eta, alpha))
                }
            }
            Self::Composed(c) => c.eval(alpha),
            Self::Tabulated(t) => {
                if alpha < 0.0 {
                    TailValue::clamped(1.0)
                } else {
                    TailValue {
                        value: t.eval(alpha),
                        valid: true,
                    }
                }
            }
        }
    }

    pub fn value(&self, alpha: f64) -> f64 {
        self.eval(alpha).value
    }

    /// `∫_a^∞ φ(t) dt` of the unclamped formula (exact step integral for
    /// tables). Only sample-accuracy style tails are integrable here.
    pub fn integral_from(&self, a: f64) -> Result<f64> {
        match self {
            Self::LaplaceSample { k, eta } => Ok(k * eta * (-a / eta).exp()),
            Self::GaussianSample { k, eta } => {
                let s = SQRT_2 * eta;
                let x = a / s;
                Ok(0.5 * k * s * ((-x * x).exp() / PI.sqrt() - x * erfc(x)))
            }
            Self::Tabulated(t) => t.integral_from(a),
            _ => Err(Error::Unsupported(format!(
                "no tail integral for the {:?} family",
                self.family()
            ))),
        }
    }
}

impl ComposedTail {
    pub fn eval(&self, alpha: f64) -> TailValue {
        let floor = posterior_floor(self.kind, self.eta);
        let lo = C_FLOOR_FRAC * alpha;
        let hi = alpha - self.eps - floor;
        let obj = |c: f64| posterior_raw(self.kind, self.k, self.eta, alpha - self.eps - c) + self.slack / c;
        match inf_over_c(obj, lo, hi) {
            Some((_, v)) => TailValue::clamped(v),
            None => TailValue::vacuous(),
        }
    }
}

/// Sample-accuracy and posterior-accuracy tails of a noise mechanism
/// answering `k` queries.
pub fn mechanism_tails(kind: NoiseKind, k: u64, eta: f64) -> Result<(TailFunction, TailFunction)> {
    let kf = k as f64;
    Ok(match kind {
        NoiseKind::Laplace => (
            TailFunction::laplace_sample(kf, eta)?,
            TailFunction::laplace_posterior(kf, eta)?,
        ),
        NoiseKind::Gaussian => (
            TailFunction::gaussian_sample(kf, eta)?,
            TailFunction::gaussian_posterior(kf, eta)?,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Simpson's rule, independent of the closed-form integrals.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn closed_form_examples() {
        let (phi, _) = mechanism_tails(NoiseKind::Laplace, 10, 0.5).unwrap();
        assert!((phi.value(2.0) - 0.183_156_388_887_341_8).abs() < 1e-12);
        let (phi_g, _) = mechanism_tails(NoiseKind::Gaussian, 1, 1.0).unwrap();
        assert_eq!(phi_g.value(0.0), 0.5);
        assert_eq!(phi_g.value(-1.0), 1.0);
        let (_, post) = mechanism_tails(NoiseKind::Laplace, 1, 1.0).unwrap();
        assert_eq!(post.eval(1.0), TailValue { value: 1.0, valid: true });
        assert_eq!(post.eval(0.99), TailValue { value: 1.0, valid: false });
    }

    #[test]
    fn gaussian_posterior_floor() {
        let (_, post) = mechanism_tails(NoiseKind::Gaussian, 3, 0.5).unwrap();
        assert!(!post.eval(0.7).valid);
        assert!(post.eval(SQRT_2 * 0.5).valid);
    }

    #[test]
    fn integrals_match_quadrature() {
        for tail in [
            TailFunction::laplace_sample(3.0, 0.7).unwrap(),
            TailFunction::gaussian_sample(3.0, 0.7).unwrap(),
        ] {
            for a in [-0.5, 0.0, 0.3, 2.0] {
                let raw = |t: f64| match &tail {
                    TailFunction::LaplaceSample { k, eta } => k * (-t / eta).exp(),
                    TailFunction::GaussianSample { k, eta } => 0.5 * k * erfc(t / (SQRT_2 * eta)),
                    _ => unreachable!(),
                };
                let q = simpson(raw, a, a + 40.0, 200_000);
                let c = tail.integral_from(a).unwrap();
                assert!((q - c).abs() < 1e-8 * c.max(1.0), "{:?} a={a}: {q} vs {c}", tail.family());
            }
        }
    }

    #[test]
    fn tabulated_step_semantics() {
        let t = TabulatedTail::new(vec![1.0, 2.0, 3.0], vec![0.5, 0.25, 0.0]).unwrap();
        let f = TailFunction::Tabulated(t);
        assert_eq!(f.value(0.5), 1.0);
        assert_eq!(f.value(1.0), 0.5);
        assert_eq!(f.value(2.5), 0.25);
        assert_eq!(f.value(10.0), 0.0);
        // 1·(1 − 0) + 0.5·1 + 0.25·1
        assert!((f.integral_from(0.0).unwrap() - 1.75).abs() < 1e-15);
        assert!((f.integral_from(2.5).unwrap() - 0.125).abs() < 1e-15);
        let g = TailFunction::step(0.5, 0.01).unwrap();
        assert!(matches!(g.integral_from(0.0), Err(Error::Unsupported(_))));
        assert!(TabulatedTail::new(vec![1.0, 2.0], vec![0.1, 0.2]).is_err());
        assert!(TabulatedTail::new(vec![2.0, 1.0], vec![0.2, 0.1]).is_err());
        let r = TabulatedTail::from_bounds(vec![1.0, 2.0, 3.0], vec![0.4, 0.6, f64::NAN]).unwrap();
        assert_eq!(r.values(), &[0.4, 0.4, 0.4]);
    }

    #[test]
    fn posterior_tails_dominate_sample_tails_beyond_floor() {
        for kind in [NoiseKind::Laplace, NoiseKind::Gaussian] {
            let (phi, post) = mechanism_tails(kind, 5, 0.3).unwrap();
            let floor = post.validity_floor();
            for i in 0..100 {
                let a = floor * (1.0 + i as f64 * 0.1);
                assert!(post.value(a) >= phi.value(a) - 1e-15);
            }
        }
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(mechanism_tails(NoiseKind::Laplace, 0, 1.0).is_err());
        assert!(mechanism_tails(NoiseKind::Gaussian, 1, 0.0).is_err());
        assert!(mechanism_tails(NoiseKind::Gaussian, 1, f64::INFINITY).is_err());
    }
}
