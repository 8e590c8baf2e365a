//! Monte Carlo experiments and their comparison against the closed-form
//! bounds.
//!
//! Trial `i` uses seed `derive_seed(master, i)`. Within a trial the dataset is
//! drawn from `child_rng(trial_seed, DATASET_STREAM)` and the session runs with
//! `run_session(.., trial_seed)`. Trials run in parallel and are collected in
//! trial order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

use crate::bounds::{distribution_tail, mechanism_tails, DistTailSpec, NoiseKind, TailValue};
use crate::config::{ExperimentConfig, InstanceConfig};
use crate::error::{Error, Result};
use crate::mechanisms::{run_session, MechanismSpec};
use crate::model::{compute_errors, DomainDistribution, ErrorRecord};
use crate::oracle::{covariance_check, posterior_prefixes, stability_loss};
use crate::rng::{child_rng, derive_seed, DATASET_STREAM};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at 95% for `hits` out of `trials`.
pub fn wilson_interval(hits: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = p + z2 / (2.0 * n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if hits == 0 { 0.0 } else { ((centre - half) / denom).clamp(0.0, 1.0) };
    let hi = if hits == trials { 1.0 } else { ((centre + half) / denom).clamp(0.0, 1.0) };
    (lo, hi)
}

/// Empirical `P(err > α)` with its Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub hits: u64,
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TailEstimate {
    pub fn from_errors(errors: impl Iterator<Item = f64>, alpha: f64) -> Self {
        let (mut hits, mut total) = (0u64, 0u64);
        for e in errors {
            total += 1;
            if e > alpha {
                hits += 1;
            }
        }
        let (lo, hi) = wilson_interval(hits, total);
        Self {
            hits,
            p: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
            lo,
            hi,
        }
    }
}

/// Tails and bounds at one α.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub alpha: f64,
    pub sample: TailEstimate,
    pub dist: TailEstimate,
    pub posterior: Option<TailEstimate>,
    pub bound_sample: TailValue,
    pub bound_dist: TailValue,
    pub bound_posterior: Option<TailValue>,
}

impl TailRow {
    /// Whether every attached bound is inside its validity range.
    pub fn validity_flag(&self) -> bool {
        self.bound_sample.valid
            && self.bound_dist.valid
            && self.bound_posterior.is_none_or(|b| b.valid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub records: Vec<ErrorRecord>,
    pub rows: Vec<TailRow>,
    pub metadata: Metadata,
}

/// SHA-256 of the config's canonical JSON encoding.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serialises");
    Sha256::digest(&bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Runs trial `index` of an experiment.
pub fn run_trial(cfg: &ExperimentConfig, prior: &DomainDistribution, index: u64) -> Result<ErrorRecord> {
    let seed = derive_seed(cfg.seed, index);
    let s = prior.sample_dataset(cfg.n, &mut child_rng(seed, DATASET_STREAM))?;
    let sess = run_session(&cfg.mechanism, &cfg.analyst, prior, &s, cfg.k, seed)?;
    let posts = if cfg.oracle_enabled {
        let reports = posterior_prefixes(prior, &cfg.mechanism, &sess.queries, &sess.view, cfg.n)?;
        Some(
            reports
                .into_iter()
                .take(cfg.k)
                .map(|r| r.posterior)
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    compute_errors(&s, &sess.view, &sess.queries, prior, posts.as_deref())
}

fn noise_kind(mech: &MechanismSpec) -> Option<(NoiseKind, f64)> {
    match *mech {
        MechanismSpec::Laplace { eta } => Some((NoiseKind::Laplace, eta)),
        MechanismSpec::Gaussian { eta } => Some((NoiseKind::Gaussian, eta)),
        _ => None,
    }
}

const VACUOUS: TailValue = TailValue {
    value: 1.0,
    valid: false,
};

/// Sample, distribution and posterior bound curves for a config.
struct Bounds {
    sample: Box<dyn Fn(f64) -> TailValue + Send + Sync>,
    dist: Box<dyn Fn(f64) -> TailValue + Send + Sync>,
    posterior: Box<dyn Fn(f64) -> TailValue + Send + Sync>,
}

fn bounds_for(cfg: &ExperimentConfig) -> Result<Bounds> {
    let k = cfg.k as u64;
    match noise_kind(&cfg.mechanism) {
        Some((kind, eta)) => {
            let (phi, post) = mechanism_tails(kind, k, eta)?;
            let dist: Box<dyn Fn(f64) -> TailValue + Send + Sync> = match cfg.bound {
                Some(b) => {
                    let spec = DistTailSpec {
                        kind,
                        regime: b.regime,
                        n: cfg.n as u64,
                        eta,
                        k,
                        d: 1,
                        sigma: b.sigma,
                        range: b.range,
                        delta: b.delta.unwrap_or(b.delta_prime),
                        delta_prime: b.delta_prime,
                    };
                    match distribution_tail(&spec) {
                        Ok(tail) => Box::new(move |a| tail.eval(a)),
                        Err(Error::Validity { .. }) | Err(Error::Infeasible(_)) => {
                            Box::new(|_| VACUOUS)
                        }
                        Err(e) => return Err(Error::Config(e.to_string())),
                    }
                }
                None => Box::new(|_| VACUOUS),
            };
            Ok(Bounds {
                sample: Box::new(move |a| phi.eval(a)),
                dist,
                posterior: Box::new(move |a| post.eval(a)),
            })
        }
        None if cfg.mechanism == MechanismSpec::Empirical => {
            let zero = |_| TailValue {
                value: 0.0,
                valid: true,
            };
            Ok(Bounds {
                sample: Box::new(zero),
                dist: Box::new(|_| VACUOUS),
                posterior: Box::new(|_| VACUOUS),
            })
        }
        None => Ok(Bounds {
            sample: Box::new(|_| VACUOUS),
            dist: Box::new(|_| VACUOUS),
            posterior: Box::new(|_| VACUOUS),
        }),
    }
}

/// Empirical tails and bounds on the config's α grid.
pub fn tail_rows(cfg: &ExperimentConfig, records: &[ErrorRecord]) -> Result<Vec<TailRow>> {
    let b = bounds_for(cfg)?;
    Ok(cfg
        .alpha_grid
        .iter()
        .map(|&alpha| TailRow {
            alpha,
            sample: TailEstimate::from_errors(records.iter().map(|r| r.err_sample), alpha),
            dist: TailEstimate::from_errors(records.iter().map(|r| r.err_dist), alpha),
            posterior: cfg.oracle_enabled.then(|| {
                TailEstimate::from_errors(
                    records.iter().map(|r| r.err_posterior.unwrap_or(f64::INFINITY)),
                    alpha,
                )
            }),
            bound_sample: (b.sample)(alpha),
            bound_dist: (b.dist)(alpha),
            bound_posterior: cfg.oracle_enabled.then(|| (b.posterior)(alpha)),
        })
        .collect())
}

/// Runs every trial of an experiment and attaches the bound curves.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let prior = cfg.validate()?;
    let records = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &prior, i))
        .collect::<Result<Vec<_>>>()?;
    let rows = tail_rows(cfg, &records)?;
    Ok(ExperimentResult {
        records,
        rows,
        metadata: Metadata {
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: config_hash(cfg),
            seed: cfg.seed,
            trials: cfg.trials,
        },
    })
}

/// One empirical-vs-bound comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub wilson_lo: f64,
    pub bound: f64,
    pub valid: bool,
    pub pass: bool,
}

impl Check {
    fn new(est: &TailEstimate, bound: &TailValue) -> Self {
        Self {
            wilson_lo: est.lo,
            bound: bound.value,
            valid: bound.valid,
            pass: est.lo <= bound.value,
        }
    }

    /// Whether this check counts against the overall verdict.
    pub fn fails(&self) -> bool {
        self.valid && !self.pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRow {
    pub alpha: f64,
    pub sample: Check,
    pub dist: Check,
    pub posterior: Option<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub rows: Vec<VerdictRow>,
    /// AND of every check whose bound is inside its validity range.
    pub pass: bool,
}

/// PASS at α when the Wilson lower edge of the empirical tail is at most the
/// bound.
pub fn compare_bound(result: &ExperimentResult) -> Verdict {
    let rows: Vec<VerdictRow> = result
        .rows
        .iter()
        .map(|r| VerdictRow {
            alpha: r.alpha,
            sample: Check::new(&r.sample, &r.bound_sample),
            dist: Check::new(&r.dist, &r.bound_dist),
            posterior: r
                .posterior
                .as_ref()
                .zip(r.bound_posterior.as_ref())
                .map(|(e, b)| Check::new(e, b)),
        })
        .collect();
    let pass = rows.iter().all(|r| {
        !r.sample.fails() && !r.dist.fails() && !r.posterior.is_some_and(|c| c.fails())
    });
    Verdict { rows, pass }
}

/// CSV table: a `#` metadata line, a header, then one row per α. Posterior
/// columns are appended when the oracle ran.
pub fn to_csv(result: &ExperimentResult) -> String {
    let m = &result.metadata;
    let with_post = result.rows.iter().any(|r| r.posterior.is_some());
    let mut out = format!(
        "# adacov {} config_sha256={} seed={} trials={}\n",
        m.version, m.config_sha256, m.seed, m.trials
    );
    out.push_str(
        "alpha,tail_sample,tail_sample_wilson_lo,tail_sample_wilson_hi,\
         tail_dist,tail_dist_wilson_lo,tail_dist_wilson_hi,bound_sample,bound_dist,validity_flag",
    );
    if with_post {
        out.push_str(",tail_post,tail_post_wilson_lo,tail_post_wilson_hi,bound_post");
    }
    out.push('\n');
    for r in &result.rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.alpha,
            r.sample.p,
            r.sample.lo,
            r.sample.hi,
            r.dist.p,
            r.dist.lo,
            r.dist.hi,
            r.bound_sample.value,
            r.bound_dist.value,
            u8::from(r.validity_flag()),
        );
        if let (Some(p), Some(b)) = (&r.posterior, &r.bound_posterior) {
            let _ = write!(out, ",{},{},{},{}", p.p, p.lo, p.hi, b.value);
        }
        out.push('\n');
    }
    out
}

/// Tolerance of the exact-oracle checks.
pub const ORACLE_TOL: f64 = 1e-9;

/// Oracle checks for one query against the posterior after one view prefix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryCheck {
    pub round: usize,
    pub query: usize,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub gap: f64,
    /// `‖q(D^v) − q(D)‖`.
    pub drift: f64,
    /// `Δ·TV(D^v, D)`.
    pub tv_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionCheck {
    pub seed: u64,
    pub posterior: Vec<f64>,
    pub bayes_factor_mean: f64,
    pub checks: Vec<QueryCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceReport {
    pub sessions: Vec<SessionCheck>,
    pub max_gap: f64,
    pub max_tv_excess: f64,
    pub max_unit_mean_error: f64,
    pub pass: bool,
}

/// Runs real sessions on a small instance and checks, for every view prefix
/// and every issued query, the covariance identity, TV dominance and the unit
/// mean of the Bayes factors.
pub fn verify_instance(cfg: &InstanceConfig) -> Result<InstanceReport> {
    let prior = cfg.validate()?;
    let sessions = (0..cfg.sessions)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(cfg.seed, i);
            let s = prior.sample_dataset(cfg.n, &mut child_rng(seed, DATASET_STREAM))?;
            let sess = run_session(&cfg.mechanism, &cfg.analyst, &prior, &s, cfg.k, seed)?;
            let reports = posterior_prefixes(&prior, &cfg.mechanism, &sess.queries, &sess.view, cfg.n)?;
            let mut checks = Vec::new();
            for (round, report) in reports.iter().enumerate() {
                let tv = stability_loss(&prior, report)?;
                for (j, q) in sess.queries.iter().enumerate() {
                    let c = covariance_check(&prior, q, report)?;
                    checks.push(QueryCheck {
                        round,
                        query: j,
                        drift: c.lhs.iter().map(|v| v * v).sum::<f64>().sqrt(),
                        tv_bound: q.range() * tv,
                        lhs: c.lhs,
                        rhs: c.rhs,
                        gap: c.gap,
                    });
                }
            }
            let last = reports.last().expect("k + 1 reports");
            let mean = last
                .bayes_factors
                .iter()
                .zip(prior.probs())
                .map(|(t, p)| t * p)
                .sum();
            Ok(SessionCheck {
                seed,
                posterior: last.posterior.probs().to_vec(),
                bayes_factor_mean: mean,
                checks,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all = || sessions.iter().flat_map(|s| &s.checks);
    let max_gap = all().map(|c| c.gap).fold(0.0, f64::max);
    let max_tv_excess = all().map(|c| c.drift - c.tv_bound).fold(f64::NEG_INFINITY, f64::max);
    let max_unit_mean_error = sessions
        .iter()
        .map(|s| (s.bayes_factor_mean - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(InstanceReport {
        pass: max_gap <= ORACLE_TOL && max_tv_excess <= ORACLE_TOL && max_unit_mean_error <= ORACLE_TOL,
        sessions,
        max_gap,
        max_tv_excess,
        max_unit_mean_error,
    })
}
