//! Domain, dataset, query, and view types, plus the three error measures
//! (sample, distribution, posterior) of an adaptive session.

use rand::distr::{Distribution, weighted::WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Tolerance on the probability mass of a constructed distribution.
pub const PROB_SUM_TOL: f64 = 1e-12;

pub(crate) fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn l2_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Finite prior over data elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainDistribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl DomainDistribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        Self::check_shape(&labels, &probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(invalid(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(Self { labels, probs })
    }

    /// Accepts probabilities whose sum is within `tol` of one and renormalizes
    /// them so the constructed invariant holds.
    pub fn normalized(labels: Vec<String>, probs: Vec<f64>, tol: f64) -> Result<Self> {
        Self::check_shape(&labels, &probs)?;
        let sum: f64 = probs.iter().sum();
        if !((sum - 1.0).abs() <= tol) {
            return Err(invalid(format!(
                "probabilities sum to {sum}, not 1 within {tol}"
            )));
        }
        let probs = probs.into_iter().map(|p| p / sum).collect();
        Ok(Self { labels, probs })
    }

    fn check_shape(labels: &[String], probs: &[f64]) -> Result<()> {
        if labels.is_empty() {
            return Err(invalid("domain must contain at least one element"));
        }
        if labels.len() != probs.len() {
            return Err(invalid(format!(
                "{} labels but {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(invalid(format!("probability {p} is negative or not finite")));
        }
        let mut seen = std::collections::HashSet::with_capacity(labels.len());
        for l in labels {
            if !seen.insert(l.as_str()) {
                return Err(invalid(format!("duplicate label {l:?}")));
            }
        }
        Ok(())
    }

    /// Uniform prior over `m` elements labelled `x0, x1, ...`.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("domain must contain at least one element"));
        }
        let labels = (0..m).map(|i| format!("x{i}")).collect();
        let probs = vec![1.0 / m as f64; m];
        Self::normalized(labels, probs, 1e-9)
    }

    /// Prior with default labels `x0, x1, ...`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let labels = (0..probs.len()).map(|i| format!("x{i}")).collect();
        Self::new(labels, probs)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: usize) -> f64 {
        self.probs[x]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Total variation distance `(1/2) Σ |p(x) − q(x)|`.
    pub fn tv_distance(&self, other: &DomainDistribution) -> Result<f64> {
        if self.len() != other.len() {
            return Err(invalid("distributions over different domains"));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    /// Draws `n` iid elements.
    pub fn sample_dataset<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(invalid("dataset size must be at least 1"));
        }
        let index = WeightedIndex::new(&self.probs)
            .map_err(|e| invalid(format!("cannot sample from prior: {e}")))?;
        let elems = (0..n).map(|_| index.sample(rng)).collect();
        Ok(Dataset {
            elems,
            domain_size: self.len(),
        })
    }
}

/// Ordered list of element indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    elems: Vec<usize>,
    domain_size: usize,
}

impl Dataset {
    pub fn new(elems: Vec<usize>, domain_size: usize) -> Result<Self> {
        if elems.is_empty() {
            return Err(invalid("dataset must contain at least one element"));
        }
        if let Some(&bad) = elems.iter().find(|&&e| e >= domain_size) {
            return Err(invalid(format!(
                "element index {bad} outside domain of size {domain_size}"
            )));
        }
        Ok(Self { elems, domain_size })
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elems(&self) -> &[usize] {
        &self.elems
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    /// Occurrence count of every domain element.
    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.domain_size];
        for &e in &self.elems {
            c[e] += 1;
        }
        c
    }

    /// Contiguous sub-dataset `elems[range]`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Dataset> {
        if range.start >= range.end || range.end > self.len() {
            return Err(invalid(format!(
                "slice {range:?} invalid for dataset of size {}",
                self.len()
            )));
        }
        Ok(Dataset {
            elems: self.elems[range].to_vec(),
            domain_size: self.domain_size,
        })
    }

    /// Returns a copy with `range` replaced by `replacement`.
    pub fn with_replaced(&self, start: usize, replacement: &[usize]) -> Result<Dataset> {
        if start + replacement.len() > self.len() {
            return Err(invalid("replacement runs past the end of the dataset"));
        }
        let mut elems = self.elems.clone();
        elems[start..start + replacement.len()].copy_from_slice(replacement);
        Dataset::new(elems, self.domain_size)
    }
}

/// Element-level spread of a query under a prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryStats {
    /// `sqrt(E_{X~D} ‖q(X) − q(D)‖²)`.
    pub sigma1: f64,
    /// `max_{x,y} ‖q(x) − q(y)‖`.
    pub delta: f64,
}

/// A linear query given by its per-element value table (`m` rows of width `d`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QueryRows", into = "QueryRows")]
pub struct LinearQuery {
    values: Vec<f64>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct QueryRows {
    values: Vec<Vec<f64>>,
}

impl TryFrom<QueryRows> for LinearQuery {
    type Error = crate::Error;
    fn try_from(r: QueryRows) -> Result<Self> {
        LinearQuery::new(r.values)
    }
}

impl From<LinearQuery> for QueryRows {
    fn from(q: LinearQuery) -> Self {
        QueryRows {
            values: q.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl LinearQuery {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| invalid("query must have at least one row"))?;
        if dim == 0 {
            return Err(invalid("query dimension must be at least 1"));
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(invalid(format!(
                    "row {i} has dimension {}, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("row {i} has a non-finite value")));
            }
            values.extend_from_slice(row);
        }
        Ok(Self { values, dim })
    }

    /// One-dimensional query from per-element values.
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("query must have at least one row"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("query has a non-finite value"));
        }
        Ok(Self { values, dim: 1 })
    }

    pub fn constant(m: usize, c: f64) -> Result<Self> {
        Self::scalar(vec![c; m])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain_size(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn value(&self, x: usize) -> &[f64] {
        &self.values[x * self.dim..(x + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    fn check_domain(&self, m: usize) -> Result<()> {
        if self.domain_size() != m {
            return Err(invalid(format!(
                "query defined on {} elements, domain has {m}",
                self.domain_size()
            )));
        }
        Ok(())
    }

    /// `q(s) = (1/n) Σ_i q(s_i)`.
    pub fn evaluate(&self, s: &Dataset) -> Result<Vec<f64>> {
        self.check_domain(s.domain_size())?;
        let mut acc = vec![0.0; self.dim];
        for &e in s.elems() {
            for (a, v) in acc.iter_mut().zip(self.value(e)) {
                *a += v;
            }
        }
        let n = s.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }

    /// Query value of a dataset given only its element counts.
    pub fn evaluate_counts(&self, counts: &[usize]) -> Result<Vec<f64>> {
        self.check_domain(counts.len())?;
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Err(invalid("empty count vector"));
        }
        Ok(self.weighted_mean(counts.iter().map(|&c| c as f64 / n as f64)))
    }

    fn weighted_mean(&self, weights: impl Iterator<Item = f64>) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for (w, row) in weights.zip(self.rows()) {
            if w != 0.0 {
                for (a, v) in acc.iter_mut().zip(row) {
                    *a += w * v;
                }
            }
        }
        acc
    }

    /// `q(D) = Σ_x D(x) q(x)`, which for iid datasets equals `E[q(S)]`.
    pub fn mean(&self, d: &DomainDistribution) -> Result<Vec<f64>> {
        self.check_domain(d.len())?;
        Ok(self.weighted_mean(d.probs().iter().copied()))
    }

    /// Element-level standard deviation and range.
    pub fn stats(&self, d: &DomainDistribution) -> Result<QueryStats> {
        let mu = self.mean(d)?;
        let var: f64 = self
            .rows()
            .zip(d.probs())
            .map(|(row, p)| {
                let dd = l2_dist(row, &mu);
                p * dd * dd
            })
            .sum();
        Ok(QueryStats {
            sigma1: var.max(0.0).sqrt(),
            delta: self.range(),
        })
    }

    /// `max_{x,y} ‖q(x) − q(y)‖` over the whole domain.
    pub fn range(&self) -> f64 {
        if self.dim == 1 {
            let (lo, hi) = self
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            return hi - lo;
        }
        let rows: Vec<&[f64]> = self.rows().collect();
        let mut best = 0.0_f64;
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                best = best.max(l2_dist(a, b));
            }
        }
        best
    }
}

/// Transcript of one adaptive session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct View {
    pub coin_seed: u64,
    pub responses: Vec<Vec<f64>>,
}

impl View {
    pub fn new(coin_seed: u64) -> Self {
        Self {
            coin_seed,
            responses: Vec::new(),
        }
    }

    pub fn rounds(&self) -> usize {
        self.responses.len()
    }

    /// The view after the first `i` rounds.
    pub fn prefix(&self, i: usize) -> View {
        View {
            coin_seed: self.coin_seed,
            responses: self.responses[..i.min(self.responses.len())].to_vec(),
        }
    }
}

/// Sample, distribution, and (optionally) posterior error of a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub err_sample: f64,
    pub err_dist: f64,
    pub err_posterior: Option<f64>,
}

/// Per-round distances behind an [`ErrorRecord`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoundErrors {
    pub sample: Vec<f64>,
    pub dist: Vec<f64>,
    pub posterior: Option<Vec<f64>>,
}

impl RoundErrors {
    pub fn record(&self) -> ErrorRecord {
        let max = |v: &[f64]| v.iter().copied().fold(0.0_f64, f64::max);
        ErrorRecord {
            err_sample: max(&self.sample),
            err_dist: max(&self.dist),
            err_posterior: self.posterior.as_deref().map(max),
        }
    }
}

/// Round-by-round `‖r_i − q_i(s)‖`, `‖r_i − q_i(D)‖` and, when
/// `posteriors[i]` holds `D^{v_{i}}` (the posterior before round `i+1`),
/// `‖r_i − q_i(D^{v_{i−1}})‖`.
pub fn round_errors(
    s: &Dataset,
    view: &View,
    queries: &[LinearQuery],
    prior: &DomainDistribution,
    posteriors: Option<&[DomainDistribution]>,
) -> Result<RoundErrors> {
    if queries.len() != view.rounds() {
        return Err(invalid(format!(
            "{} queries for {} responses",
            queries.len(),
            view.rounds()
        )));
    }
    if let Some(p) = posteriors {
        if p.len() != queries.len() {
            return Err(invalid(format!(
                "{} posteriors for {} rounds",
                p.len(),
                queries.len()
            )));
        }
    }
    let mut sample = Vec::with_capacity(queries.len());
    let mut dist = Vec::with_capacity(queries.len());
    let mut post = posteriors.map(|_| Vec::with_capacity(queries.len()));
    for (i, (q, r)) in queries.iter().zip(&view.responses).enumerate() {
        if r.len() != q.dim() {
            return Err(invalid(format!(
                "response {i} has dimension {}, query has {}",
                r.len(),
                q.dim()
            )));
        }
        sample.push(l2_dist(r, &q.evaluate(s)?));
        dist.push(l2_dist(r, &q.mean(prior)?));
        if let (Some(acc), Some(ps)) = (post.as_mut(), posteriors) {
            acc.push(l2_dist(r, &q.mean(&ps[i])?));
        }
    }
    Ok(RoundErrors {
        sample,
        dist,
        posterior: post,
    })
}

/// Max-over-rounds sample, distribution and posterior error.
pub fn compute_errors(
    s: &Dataset,
    view: &View,
    queries: &[LinearQuery],
    prior: &DomainDistribution,
    posteriors: Option<&[DomainDistribution]>,
) -> Result<ErrorRecord> {
    Ok(round_errors(s, view, queries, prior, posteriors)?.record())
}
