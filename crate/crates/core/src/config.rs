//! JSON documents: domains, experiment configs and oracle instances.
//!
//! All parsers reject unknown fields and validate semantics after decoding,
//! so every accepted document can be run without further checks.

use serde::{Deserialize, Serialize};

use crate::analysts::AnalystSpec;
use crate::bounds::Regime;
use crate::error::{Error, Result};
use crate::mechanisms::MechanismSpec;
use crate::model::{DomainDistribution, LinearQuery};
use crate::oracle::check_enumerable;

/// Tolerance on `Σ probs = 1` for user-supplied domains.
pub const DOMAIN_SUM_TOL: f64 = 1e-9;

/// Largest `{"uniform": m}` domain accepted.
pub const MAX_UNIFORM_DOMAIN: usize = 1 << 20;

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// `{"labels": [...], "probs": [...], "queries": [{"values": [[...], ...]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainDocument {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub queries: Vec<LinearQuery>,
}

impl DomainDocument {
    pub fn distribution(&self) -> Result<DomainDistribution> {
        DomainDistribution::normalized(self.labels.clone(), self.probs.clone(), DOMAIN_SUM_TOL)
            .map_err(config_err)
    }

    fn validate(&self) -> Result<()> {
        let d = self.distribution()?;
        for (i, q) in self.queries.iter().enumerate() {
            if q.domain_size() != d.len() {
                return Err(Error::Config(format!(
                    "query {i} has {} rows for a domain of {} elements",
                    q.domain_size(),
                    d.len()
                )));
            }
        }
        Ok(())
    }
}

/// Parses and validates a domain document.
pub fn parse_domain(json: &str) -> Result<DomainDocument> {
    let doc: DomainDocument = serde_json::from_str(json).map_err(config_err)?;
    doc.validate()?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformDomain {
    pub uniform: usize,
}

/// Either an explicit domain document or `{"uniform": m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainSpec {
    Uniform(UniformDomain),
    Document(DomainDocument),
}

impl DomainSpec {
    pub fn distribution(&self) -> Result<DomainDistribution> {
        match self {
            DomainSpec::Uniform(u) if u.uniform > MAX_UNIFORM_DOMAIN => Err(Error::Config(format!(
                "uniform domain of {} elements exceeds {MAX_UNIFORM_DOMAIN}",
                u.uniform
            ))),
            DomainSpec::Uniform(u) => DomainDistribution::uniform(u.uniform).map_err(config_err),
            DomainSpec::Document(d) => {
                d.validate()?;
                d.distribution()
            }
        }
    }
}

/// Assumptions under which the distribution-accuracy bound is attached to an
/// experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub regime: Regime,
    /// Bound on every query's element std (or sub-Gaussian parameter).
    pub sigma: f64,
    /// Bound on every query's range Δ.
    pub range: f64,
    pub delta_prime: f64,
    /// Per-query slack of the Gaussian mechanism; defaults to `delta_prime`.
    #[serde(default)]
    pub delta: Option<f64>,
}

/// A Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub mechanism: MechanismSpec,
    pub analyst: AnalystSpec,
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub seed: u64,
    pub alpha_grid: Vec<f64>,
    #[serde(default)]
    pub oracle_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundSpec>,
}

fn check_session_shape(
    domain: &DomainSpec,
    mechanism: &MechanismSpec,
    analyst: &AnalystSpec,
    n: usize,
    k: usize,
) -> Result<DomainDistribution> {
    let prior = domain.distribution()?;
    if n == 0 || k == 0 {
        return Err(Error::Config("n and k must be at least 1".into()));
    }
    mechanism.validate().map_err(config_err)?;
    if let MechanismSpec::Splitting { chunks } = *mechanism {
        if chunks > n {
            return Err(Error::Config(format!("{chunks} chunks exceed n = {n}")));
        }
        if k > chunks {
            return Err(Error::Config(format!("{k} rounds exceed {chunks} chunks")));
        }
    }
    analyst.validate(k).map_err(config_err)?;
    if let AnalystSpec::FixedPool { pool } = analyst {
        if pool.iter().any(|q| q.domain_size() != prior.len()) {
            return Err(Error::Config("pool query over a different domain".into()));
        }
    }
    Ok(prior)
}

impl ExperimentConfig {
    /// Checks every invariant and returns the prior.
    pub fn validate(&self) -> Result<DomainDistribution> {
        let prior = check_session_shape(&self.domain, &self.mechanism, &self.analyst, self.n, self.k)?;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::Config("alpha_grid must not be empty".into()));
        }
        if self.alpha_grid.iter().any(|a| !a.is_finite())
            || self.alpha_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config("alpha_grid must be finite and strictly increasing".into()));
        }
        if self.oracle_enabled {
            if !self.mechanism.has_noise_density() && self.mechanism != MechanismSpec::Empirical {
                return Err(Error::Config(format!(
                    "the oracle does not support the {} mechanism",
                    self.mechanism.name()
                )));
            }
            check_enumerable(self.n, prior.len()).map_err(config_err)?;
        }
        if let Some(b) = &self.bound {
            if !(b.sigma >= 0.0 && b.range >= 0.0) || !(b.delta_prime > 0.0 && b.delta_prime < 1.0) {
                return Err(Error::Config("bound needs sigma, range >= 0 and delta_prime in (0, 1)".into()));
            }
        }
        Ok(prior)
    }
}

/// Parses and validates an experiment config.
pub fn parse_experiment(json: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(json).map_err(config_err)?;
    cfg.validate()?;
    Ok(cfg)
}

fn one() -> u64 {
    1
}

/// An exact-oracle verification run: `sessions` real sessions on a small
/// instance, each checked against the covariance identity and TV dominance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub domain: DomainSpec,
    pub mechanism: MechanismSpec,
    pub analyst: AnalystSpec,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub sessions: u64,
}

impl InstanceConfig {
    pub fn validate(&self) -> Result<DomainDistribution> {
        let prior = check_session_shape(&self.domain, &self.mechanism, &self.analyst, self.n, self.k)?;
        if matches!(self.mechanism, MechanismSpec::Splitting { .. }) {
            return Err(Error::Config("the oracle does not support the splitting mechanism".into()));
        }
        if self.sessions == 0 {
            return Err(Error::Config("sessions must be at least 1".into()));
        }
        check_enumerable(self.n, prior.len()).map_err(config_err)?;
        Ok(prior)
    }
}

/// Parses and validates an oracle instance config.
pub fn parse_instance(json: &str) -> Result<InstanceConfig> {
    let cfg: InstanceConfig = serde_json::from_str(json).map_err(config_err)?;
    cfg.validate()?;
    Ok(cfg)
}
