//! Exact Bayesian computations on small instances.
//!
//! The posterior over elements after a view is obtained by enumerating every
//! dataset multiset `c` (counts summing to `n`) with prior weight
//! `n!/Π c_x! · Π D(x)^{c_x}` and likelihood `Π_i p_noise(r_i − q_i(c))`.
//! All accumulation happens in log space.

pub mod multiset;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::mechanisms::{noise_log_density, MechanismSpec};
use crate::model::{l2_dist, l2_norm, DomainDistribution, LinearQuery, View};
use multiset::{ln_factorials, ln_multinomial, multiset_count, for_each_composition};

/// Largest number of dataset multisets the oracle will enumerate.
pub const MULTISET_CAP: u128 = 1_000_000;

/// Two responses closer than this count as equal for the empirical mechanism.
const EXACT_MATCH_TOL: f64 = 1e-9;

/// Posterior over elements after a view, with its Bayes factors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorReport {
    pub posterior: DomainDistribution,
    /// `T(x|v) = D^v(x) / D(x)`; 1 where the prior vanishes.
    pub bayes_factors: Vec<f64>,
    /// `ln` of the marginal density (or mass, for the empirical mechanism) of
    /// the observed responses.
    pub log_evidence: f64,
}

/// Per-query and composed LBI parameters `(γ₁, γ₂; δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct LbiParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta: f64,
}

impl LbiParams {
    pub fn new(gamma1: f64, gamma2: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("gamma1", gamma1), ("gamma2", gamma2), ("delta", delta)] {
            if !(v >= 0.0) || v.is_nan() {
                return Err(invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if delta > 1.0 {
            return Err(invalid(format!("delta must be <= 1, got {delta}")));
        }
        Ok(Self {
            gamma1,
            gamma2,
            delta,
        })
    }

    pub const ZERO: LbiParams = LbiParams {
        gamma1: 0.0,
        gamma2: 0.0,
        delta: 0.0,
    };
}

/// Checks that the oracle can handle an instance of this size.
pub fn check_enumerable(n: usize, m: usize) -> Result<u128> {
    let count = multiset_count(n, m);
    if count > MULTISET_CAP {
        return Err(Error::InstanceTooLarge {
            multisets: count,
            cap: MULTISET_CAP,
        });
    }
    Ok(count)
}

/// Log-sum-exp accumulator for `Σ w` and `Σ w·c_x` over one block.
#[derive(Debug, Clone)]
struct Partial {
    max: f64,
    total: f64,
    by_elem: Vec<f64>,
}

impl Partial {
    fn empty(m: usize) -> Self {
        Self {
            max: f64::NEG_INFINITY,
            total: 0.0,
            by_elem: vec![0.0; m],
        }
    }

    fn add(&mut self, lw: f64, counts: &[usize]) {
        if lw == f64::NEG_INFINITY {
            return;
        }
        if lw > self.max {
            let scale = (self.max - lw).exp();
            self.total *= scale;
            self.by_elem.iter_mut().for_each(|v| *v *= scale);
            self.max = lw;
        }
        let w = (lw - self.max).exp();
        self.total += w;
        for (acc, &c) in self.by_elem.iter_mut().zip(counts) {
            *acc += w * c as f64;
        }
    }

    fn merge(mut self, other: &Partial) -> Self {
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        if other.max > self.max {
            let scale = (self.max - other.max).exp();
            self.total *= scale;
            self.by_elem.iter_mut().for_each(|v| *v *= scale);
            self.max = other.max;
        }
        let s = (other.max - self.max).exp();
        self.total += s * other.total;
        for (a, b) in self.by_elem.iter_mut().zip(&other.by_elem) {
            *a += s * b;
        }
        self
    }
}

fn response_log_lik(
    mech: &MechanismSpec,
    q: &LinearQuery,
    counts: &[usize],
    r: &[f64],
) -> Result<f64> {
    let qc = q.evaluate_counts(counts)?;
    match mech {
        MechanismSpec::Empirical => {
            let scale = 1.0_f64.max(l2_norm(r));
            Ok(if l2_dist(&qc, r) <= EXACT_MATCH_TOL * scale {
                0.0
            } else {
                f64::NEG_INFINITY
            })
        }
        MechanismSpec::Laplace { .. } | MechanismSpec::Gaussian { .. } => {
            let off: Vec<f64> = r.iter().zip(&qc).map(|(a, b)| a - b).collect();
            noise_log_density(mech, &off)
        }
        MechanismSpec::Splitting { .. } => Err(Error::Unsupported(
            "the splitting mechanism has no per-dataset likelihood".into(),
        )),
    }
}

fn check_inputs(
    prior: &DomainDistribution,
    mech: &MechanismSpec,
    queries: &[LinearQuery],
    view: &View,
    n: usize,
) -> Result<()> {
    mech.validate()?;
    if matches!(mech, MechanismSpec::Splitting { .. }) {
        return Err(Error::Unsupported(
            "the oracle needs a noise density or exact responses".into(),
        ));
    }
    if n == 0 {
        return Err(invalid("dataset size must be at least 1"));
    }
    if queries.len() != view.rounds() {
        return Err(invalid(format!(
            "{} queries for {} responses",
            queries.len(),
            view.rounds()
        )));
    }
    for (i, (q, r)) in queries.iter().zip(&view.responses).enumerate() {
        if q.domain_size() != prior.len() {
            return Err(invalid(format!("query {i} is over a different domain")));
        }
        if q.dim() != r.len() {
            return Err(invalid(format!("response {i} has the wrong dimension")));
        }
    }
    check_enumerable(n, prior.len())?;
    Ok(())
}

/// Posteriors `D^{v_0}, D^{v_1}, ..., D^{v_k}` for every prefix of the view,
/// from a single enumeration pass.
pub fn posterior_prefixes(
    prior: &DomainDistribution,
    mech: &MechanismSpec,
    queries: &[LinearQuery],
    view: &View,
    n: usize,
) -> Result<Vec<PosteriorReport>> {
    check_inputs(prior, mech, queries, view, n)?;
    let m = prior.len();
    let k = queries.len();
    let lf = ln_factorials(n);
    let ln_p: Vec<f64> = prior.probs().iter().map(|p| p.ln()).collect();

    // Blocks are indexed by the count of element 0 and merged in index order,
    // which fixes the floating-point reduction order.
    let blocks: Vec<Result<Vec<Partial>>> = (0..=n)
        .into_par_iter()
        .map(|first| {
            let mut parts = vec![Partial::empty(m); k + 1];
            let mut counts = vec![0usize; m];
            let mut err = None;
            let rest = n - first;
            let mut visit = |tail: &[usize]| {
                if err.is_some() {
                    return;
                }
                counts[0] = first;
                counts[1..].copy_from_slice(tail);
                let mut lw = ln_multinomial(&counts, &lf);
                for (c, lp) in counts.iter().zip(&ln_p) {
                    if *c > 0 {
                        lw += *c as f64 * lp;
                    }
                }
                if lw.is_nan() {
                    lw = f64::NEG_INFINITY;
                }
                parts[0].add(lw, &counts);
                for (i, (q, r)) in queries.iter().zip(&view.responses).enumerate() {
                    if lw == f64::NEG_INFINITY {
                        break;
                    }
                    match response_log_lik(mech, q, &counts, r) {
                        Ok(ll) => lw += ll,
                        Err(e) => {
                            err = Some(e);
                            return;
                        }
                    }
                    parts[i + 1].add(lw, &counts);
                }
            };
            if m == 1 {
                if rest == 0 {
                    visit(&[]);
                }
            } else {
                for_each_composition(rest, m - 1, &mut visit);
            }
            match err {
                Some(e) => Err(e),
                None => Ok(parts),
            }
        })
        .collect();

    let mut acc = vec![Partial::empty(m); k + 1];
    for block in blocks {
        let block = block?;
        acc = acc
            .into_iter()
            .zip(&block)
            .map(|(a, b)| a.merge(b))
            .collect();
    }
    acc.into_iter().map(|p| finish(prior, p, n)).collect()
}

fn finish(prior: &DomainDistribution, p: Partial, n: usize) -> Result<PosteriorReport> {
    if p.max == f64::NEG_INFINITY || p.total <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    let nf = n as f64;
    let probs: Vec<f64> = p.by_elem.iter().map(|v| v / (p.total * nf)).collect();
    let posterior = DomainDistribution::normalized(prior.labels().to_vec(), probs, 1e-9)?;
    let bayes_factors = posterior
        .probs()
        .iter()
        .zip(prior.probs())
        .map(|(post, pr)| if *pr > 0.0 { post / pr } else { 1.0 })
        .collect();
    Ok(PosteriorReport {
        posterior,
        bayes_factors,
        log_evidence: p.max + p.total.ln(),
    })
}

/// Posterior over elements after the full view.
pub fn posterior_over_elements(
    prior: &DomainDistribution,
    mech: &MechanismSpec,
    queries: &[LinearQuery],
    view: &View,
    n: usize,
) -> Result<PosteriorReport> {
    let mut all = posterior_prefixes(prior, mech, queries, view, n)?;
    Ok(all.pop().expect("prefix list holds k + 1 reports"))
}

/// Both sides of the covariance identity `q(D^v) − q(D) = Cov_D(q(X), T(X|v))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceCheck {
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub gap: f64,
}

pub fn covariance_check(
    prior: &DomainDistribution,
    q: &LinearQuery,
    report: &PosteriorReport,
) -> Result<CovarianceCheck> {
    if report.posterior.len() != prior.len() {
        return Err(invalid("report is over a different domain"));
    }
    let q_prior = q.mean(prior)?;
    let q_post = q.mean(&report.posterior)?;
    let lhs: Vec<f64> = q_post.iter().zip(&q_prior).map(|(a, b)| a - b).collect();
    let mut rhs = vec![0.0; q.dim()];
    for ((row, p), t) in q.rows().zip(prior.probs()).zip(&report.bayes_factors) {
        for ((acc, v), mu) in rhs.iter_mut().zip(row).zip(&q_prior) {
            *acc += p * (v - mu) * (t - 1.0);
        }
    }
    let gap = l2_dist(&lhs, &rhs);
    Ok(CovarianceCheck { lhs, rhs, gap })
}

/// Total variation distance between prior and posterior.
pub fn stability_loss(prior: &DomainDistribution, report: &PosteriorReport) -> Result<f64> {
    prior.tv_distance(&report.posterior)
}

/// `‖q̄(x) − q̄(y)‖` with all query value vectors stacked.
pub fn stacked_gap(queries: &[LinearQuery], x: usize, y: usize) -> f64 {
    queries
        .iter()
        .map(|q| {
            let d = l2_dist(q.value(x), q.value(y));
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// `γ₁‖q̄(x) − q̄(y)‖ + γ₂‖q̄(x) − q̄(y)‖²`.
pub fn lbi_loss(params: &LbiParams, queries: &[LinearQuery], x: usize, y: usize) -> f64 {
    let g = stacked_gap(queries, x, y);
    params.gamma1 * g + params.gamma2 * g * g
}

/// One term of the Θ maximum: a query together with the queries asked
/// before it.
#[derive(Debug, Clone, Copy)]
pub struct ThetaPrefix<'a> {
    pub before: &'a [LinearQuery],
    pub current: &'a LinearQuery,
}

/// The prefixes visited by a session: `(q_1..q_{i−1}, q_i)` for every `i`.
pub fn session_prefixes(queries: &[LinearQuery]) -> Vec<ThetaPrefix<'_>> {
    (0..queries.len())
        .map(|i| ThetaPrefix {
            before: &queries[..i],
            current: &queries[i],
        })
        .collect()
}

/// Exact `max_i Σ_{x,y} D(x)D(y) ‖q_i(x) − q_i(D)‖ (exp(ℓ(prefix_i; x, y)) − 1)`
/// over the supplied prefixes. Returns `+∞` if an exponential overflows.
///
/// This is the maximum over the visited prefixes only, so it can be smaller
/// than the maximum over every possible view.
pub fn theta_exact(
    params: &LbiParams,
    prior: &DomainDistribution,
    prefixes: &[ThetaPrefix<'_>],
) -> Result<f64> {
    let m = prior.len();
    let p = prior.probs();
    let mut best = 0.0_f64;
    for pre in prefixes {
        let mu = pre.current.mean(prior)?;
        for q in pre.before {
            if q.domain_size() != m {
                return Err(invalid("prefix query over a different domain"));
            }
        }
        let mut total = 0.0;
        for x in 0..m {
            let dev = l2_dist(pre.current.value(x), &mu);
            if p[x] == 0.0 || dev == 0.0 {
                continue;
            }
            for y in 0..m {
                if p[y] == 0.0 {
                    continue;
                }
                let loss = lbi_loss(params, pre.before, x, y);
                let e = loss.exp_m1();
                if e.is_infinite() {
                    return Ok(f64::INFINITY);
                }
                total += p[x] * p[y] * dev * e;
            }
        }
        best = best.max(total);
    }
    Ok(best)
}
