//! Response mechanisms and the adaptive session loop.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysts::AnalystSpec;
use crate::error::{Error, Result};
use crate::model::{Dataset, DomainDistribution, LinearQuery, View};
use crate::rng::{child_rng, derive_seed, round_stream, COIN_STREAM};

/// How a mechanism answers a query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSpec {
    /// Returns `q(s)` exactly.
    Empirical,
    /// `q(s)` plus iid Laplace noise of scale `eta` per coordinate.
    Laplace { eta: f64 },
    /// `q(s)` plus iid `N(0, eta²)` noise per coordinate.
    Gaussian { eta: f64 },
    /// Round `i` is answered exactly on the `i`-th of `chunks` disjoint
    /// contiguous parts of the dataset.
    Splitting { chunks: usize },
}

impl MechanismSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MechanismSpec::Laplace { eta } | MechanismSpec::Gaussian { eta } => {
                if !(eta > 0.0 && eta.is_finite()) {
                    return Err(Error::Config(format!(
                        "noise scale must be positive and finite, got {eta}"
                    )));
                }
            }
            MechanismSpec::Splitting { chunks } if chunks == 0 => {
                return Err(Error::Config("splitting needs at least one chunk".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            MechanismSpec::Empirical => "empirical",
            MechanismSpec::Laplace { .. } => "laplace",
            MechanismSpec::Gaussian { .. } => "gaussian",
            MechanismSpec::Splitting { .. } => "splitting",
        }
    }

    pub fn eta(&self) -> Option<f64> {
        match *self {
            MechanismSpec::Laplace { eta } | MechanismSpec::Gaussian { eta } => Some(eta),
            _ => None,
        }
    }

    pub fn has_noise_density(&self) -> bool {
        matches!(
            self,
            MechanismSpec::Laplace { .. } | MechanismSpec::Gaussian { .. }
        )
    }
}

/// Index range of chunk `i` when `n` elements are cut into `chunks` near-equal
/// contiguous parts.
pub fn chunk_range(n: usize, chunks: usize, i: usize) -> std::ops::Range<usize> {
    (i * n / chunks)..((i + 1) * n / chunks)
}

/// One mechanism response to `q` on `s` at 0-based `round`.
pub fn respond<R: Rng + ?Sized>(
    spec: &MechanismSpec,
    s: &Dataset,
    q: &LinearQuery,
    round: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.validate()?;
    match *spec {
        MechanismSpec::Empirical => q.evaluate(s),
        MechanismSpec::Laplace { eta } => {
            let mut r = q.evaluate(s)?;
            for v in r.iter_mut() {
                let mag: f64 = Exp1.sample(rng);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *v += sign * eta * mag;
            }
            Ok(r)
        }
        MechanismSpec::Gaussian { eta } => {
            let mut r = q.evaluate(s)?;
            for v in r.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += eta * z;
            }
            Ok(r)
        }
        MechanismSpec::Splitting { chunks } => {
            if chunks > s.len() {
                return Err(Error::Config(format!(
                    "cannot cut {} elements into {chunks} non-empty chunks",
                    s.len()
                )));
            }
            if round >= chunks {
                return Err(Error::Config(format!(
                    "round {} exceeds the {chunks} available chunks",
                    round + 1
                )));
            }
            q.evaluate(&s.slice(chunk_range(s.len(), chunks, round))?)
        }
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln` of the product of per-coordinate noise densities at `offset`.
pub fn noise_log_density(spec: &MechanismSpec, offset: &[f64]) -> Result<f64> {
    spec.validate()?;
    match *spec {
        MechanismSpec::Laplace { eta } => Ok(offset
            .iter()
            .map(|x| -(2.0 * eta).ln() - x.abs() / eta)
            .sum()),
        MechanismSpec::Gaussian { eta } => Ok(offset
            .iter()
            .map(|x| -0.5 * LN_2PI - eta.ln() - x * x / (2.0 * eta * eta))
            .sum()),
        other => Err(Error::Unsupported(format!(
            "{} mechanism has no noise density",
            other.name()
        ))),
    }
}

/// Everything a session produced: the view and the queries it induced.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub view: View,
    pub queries: Vec<LinearQuery>,
}

/// Runs `k` rounds of `q_i ← A(v_{i−1}); r_i ← M(s, q_i)`.
///
/// The analyst coin seed is `derive_seed(seed, COIN_STREAM)` and round `i`
/// noise comes from `child_rng(seed, round_stream(i))`.
pub fn run_session(
    mech: &MechanismSpec,
    analyst: &AnalystSpec,
    prior: &DomainDistribution,
    s: &Dataset,
    k: usize,
    seed: u64,
) -> Result<Session> {
    if k == 0 {
        return Err(Error::Config("a session needs at least one round".into()));
    }
    mech.validate()?;
    analyst.validate(k)?;
    let mut view = View::new(derive_seed(seed, COIN_STREAM));
    let mut queries = Vec::with_capacity(k);
    for i in 0..k {
        let q = analyst.next_query(&view, prior)?;
        if q.domain_size() != prior.len() || q.domain_size() != s.domain_size() {
            return Err(Error::Protocol(format!(
                "round {}: analyst emitted a query over {} elements, domain has {}",
                i + 1,
                q.domain_size(),
                prior.len()
            )));
        }
        let mut rng = child_rng(seed, round_stream(i));
        let r = respond(mech, s, &q, i, &mut rng)?;
        view.responses.push(r);
        queries.push(q);
    }
    Ok(Session { view, queries })
}

/// Reconstructs the queries a view induces by replaying the analyst.
pub fn replay_queries(
    analyst: &AnalystSpec,
    view: &View,
    prior: &DomainDistribution,
) -> Result<Vec<LinearQuery>> {
    (0..view.rounds())
        .map(|i| analyst.next_query(&view.prefix(i), prior))
        .collect()
}
