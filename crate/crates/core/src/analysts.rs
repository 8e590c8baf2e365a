//! Query-generating analysts.
//!
//! An analyst is a deterministic function of the view prefix: the coins for
//! round `i` (0-based) come from `child_rng(view.coin_seed, i)`, so replaying
//! a view reproduces every query it induced.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DomainDistribution, LinearQuery, View};
use crate::rng::child_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalystSpec {
    /// Issues the pool in order.
    FixedPool { pool: Vec<LinearQuery> },
    /// Sign-correlation attacker. Rounds `1..=k_probe` ask iid random
    /// `±delta/2` queries; every later round asks
    /// `q(x) = clamp(Σ_j sign(r_j − q_j(D)) q_j(x), −delta/2, delta/2)`,
    /// i.e. a majority vote over the probes that came back above their mean.
    RandomSignAttacker { k_probe: usize, delta: f64 },
    /// Fresh random scalar queries with element std `sigma1` and range
    /// `delta`, centred so that `q(D) = 0`.
    VarianceControlled { sigma1: f64, delta: f64 },
}

impl AnalystSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AnalystSpec::FixedPool { .. } => "fixed_pool",
            AnalystSpec::RandomSignAttacker { .. } => "random_sign_attacker",
            AnalystSpec::VarianceControlled { .. } => "variance_controlled",
        }
    }

    /// Checks the analyst settings against a session of `k` rounds.
    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            AnalystSpec::FixedPool { pool } => {
                if pool.len() != k {
                    return Err(Error::Config(format!(
                        "fixed pool holds {} queries for {k} rounds",
                        pool.len()
                    )));
                }
            }
            AnalystSpec::RandomSignAttacker { k_probe, delta } => {
                if *k_probe == 0 || k_probe + 1 > k {
                    return Err(Error::Config(format!(
                        "attacker needs 1 <= k_probe and k_probe + 1 <= k (k_probe={k_probe}, k={k})"
                    )));
                }
                check_nonneg("delta", *delta)?;
            }
            AnalystSpec::VarianceControlled { sigma1, delta } => {
                check_nonneg("sigma1", *sigma1)?;
                check_nonneg("delta", *delta)?;
            }
        }
        Ok(())
    }

    /// The query for round `prefix.rounds() + 1`.
    pub fn next_query(&self, prefix: &View, prior: &DomainDistribution) -> Result<LinearQuery> {
        let round = prefix.rounds();
        match self {
            AnalystSpec::FixedPool { pool } => pool.get(round).cloned().ok_or_else(|| {
                Error::Protocol(format!(
                    "fixed pool of {} queries exhausted at round {}",
                    pool.len(),
                    round + 1
                ))
            }),
            AnalystSpec::RandomSignAttacker { k_probe, delta } => {
                if round < *k_probe {
                    Ok(probe_query(prefix.coin_seed, round, prior.len(), *delta))
                } else {
                    correlation_query(prefix, prior, *k_probe, *delta)
                }
            }
            AnalystSpec::VarianceControlled { sigma1, delta } => {
                let mut rng = child_rng(prefix.coin_seed, round as u64);
                variance_controlled_query(prior, *sigma1, *delta, &mut rng)
            }
        }
    }
}

fn check_nonneg(what: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("{what} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn probe_query(coin_seed: u64, round: usize, m: usize, delta: f64) -> LinearQuery {
    let mut rng = child_rng(coin_seed, round as u64);
    let half = delta / 2.0;
    let values = (0..m)
        .map(|_| if rng.random::<bool>() { half } else { -half })
        .collect();
    LinearQuery::scalar(values).expect("m >= 1 and finite values")
}

fn correlation_query(
    prefix: &View,
    prior: &DomainDistribution,
    k_probe: usize,
    delta: f64,
) -> Result<LinearQuery> {
    if prefix.rounds() < k_probe {
        return Err(Error::Protocol("probe responses missing".into()));
    }
    let m = prior.len();
    let mut score = vec![0.0; m];
    for j in 0..k_probe {
        let q = probe_query(prefix.coin_seed, j, m, delta);
        let r = prefix.responses[j]
            .first()
            .copied()
            .ok_or_else(|| Error::Protocol(format!("empty response in round {}", j + 1)))?;
        let resid = r - q.mean(prior)?[0];
        let sign = if resid > 0.0 {
            1.0
        } else if resid < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign != 0.0 {
            for (acc, v) in score.iter_mut().zip(q.rows()) {
                *acc += sign * v[0];
            }
        }
    }
    let half = delta / 2.0;
    LinearQuery::scalar(score.into_iter().map(|s| s.clamp(-half, half)).collect())
}

/// Random scalar query with element std `sigma1` (capped at what range
/// `delta` allows for the drawn shape) and range at most `delta`.
///
/// Shape: one random element at `+1/2`, another at `−1/2`, the rest at
/// `±c/2` with random signs; `c ∈ [0, 1]` is solved so the std hits the
/// target. If even `c = 0` overshoots, the whole query is scaled down and
/// the range shrinks below `delta`.
pub fn variance_controlled_query<R: Rng + ?Sized>(
    prior: &DomainDistribution,
    sigma1: f64,
    delta: f64,
    rng: &mut R,
) -> Result<LinearQuery> {
    let m = prior.len();
    if m == 1 || delta == 0.0 || sigma1 == 0.0 {
        return LinearQuery::constant(m, 0.0);
    }
    let hi = rng.random_range(0..m);
    let mut lo = rng.random_range(0..m - 1);
    if lo >= hi {
        lo += 1;
    }
    let mut base = vec![0.0; m];
    let mut free = vec![0.0; m];
    base[hi] = 0.5;
    base[lo] = -0.5;
    for (x, f) in free.iter_mut().enumerate() {
        let sign = if rng.random::<bool>() { 0.5 } else { -0.5 };
        if x != hi && x != lo {
            *f = sign;
        }
    }
    let p = prior.probs();
    let mean = |v: &[f64]| v.iter().zip(p).map(|(a, w)| a * w).sum::<f64>();
    let (mb, mf) = (mean(&base), mean(&free));
    let a = base.iter().zip(p).map(|(b, w)| w * b * b).sum::<f64>() - mb * mb;
    let b = -mb * mf;
    let c = free.iter().zip(p).map(|(f, w)| w * f * f).sum::<f64>() - mf * mf;
    let var = |t: f64| (a + 2.0 * b * t + c * t * t).max(0.0);
    let target = (sigma1 / delta).powi(2);

    let (t, scale) = match solve_unit_interval(a - target, b, c) {
        Some(t) => (t, 1.0),
        None => {
            let vertex = if c > 0.0 { (-b / c).clamp(0.0, 1.0) } else { 0.0 };
            let cands = [0.0, 1.0, vertex];
            let tmax = cands
                .iter()
                .copied()
                .max_by(|x, y| var(*x).total_cmp(&var(*y)))
                .unwrap_or(0.0);
            let tmin = cands
                .iter()
                .copied()
                .min_by(|x, y| var(*x).total_cmp(&var(*y)))
                .unwrap_or(0.0);
            if target > var(tmax) {
                (tmax, 1.0)
            } else if var(tmin) > 0.0 {
                (tmin, (target / var(tmin)).sqrt())
            } else {
                (tmin, 0.0)
            }
        }
    };
    let raw: Vec<f64> = base
        .iter()
        .zip(&free)
        .map(|(b, f)| delta * scale * (b + t * f))
        .collect();
    let mu = mean(&raw);
    LinearQuery::scalar(raw.into_iter().map(|v| v - mu).collect())
}

/// Smallest root in `[0, 1]` of `c t² + 2 b t + a0 = 0`.
fn solve_unit_interval(a0: f64, b: f64, c: f64) -> Option<f64> {
    let in_unit = |t: f64| (-1e-12..=1.0 + 1e-12).contains(&t);
    if c.abs() < 1e-300 {
        if b.abs() < 1e-300 {
            return (a0.abs() < 1e-15).then_some(0.0);
        }
        let t = -a0 / (2.0 * b);
        return in_unit(t).then(|| t.clamp(0.0, 1.0));
    }
    let disc = b * b - a0 * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let mut roots = [(-b - sq) / c, (-b + sq) / c];
    roots.sort_by(f64::total_cmp);
    roots
        .into_iter()
        .find(|t| in_unit(*t))
        .map(|t| t.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn fixed_pool_indexes() {
        let q1 = LinearQuery::scalar(vec![0.0, 1.0]).unwrap();
        let q2 = LinearQuery::scalar(vec![1.0, 0.0]).unwrap();
        let a = AnalystSpec::FixedPool {
            pool: vec![q1, q2.clone()],
        };
        let d = DomainDistribution::uniform(2).unwrap();
        let prefix = View {
            coin_seed: 0,
            responses: vec![vec![0.3]],
        };
        assert_eq!(a.next_query(&prefix, &d).unwrap(), q2);
        let long = View {
            coin_seed: 0,
            responses: vec![vec![0.3]; 2],
        };
        assert!(matches!(a.next_query(&long, &d), Err(Error::Protocol(_))));
    }

    #[test]
    fn two_point_variance_controlled() {
        let d = DomainDistribution::uniform(2).unwrap();
        let a = AnalystSpec::VarianceControlled {
            sigma1: 0.5,
            delta: 1.0,
        };
        let mut seen_orders = std::collections::HashSet::new();
        for seed in 0..32 {
            let q = a.next_query(&View::new(seed), &d).unwrap();
            let mut v = vec![q.value(0)[0], q.value(1)[0]];
            seen_orders.insert(v[0] > v[1]);
            v.sort_by(f64::total_cmp);
            assert!((v[0] + 0.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12);
        }
        assert_eq!(seen_orders.len(), 2, "assignment should be random");
    }

    #[test]
    fn attacker_final_query_majority() {
        // All probe residuals positive: final query is the clamped probe sum.
        let d = DomainDistribution::uniform(4).unwrap();
        let a = AnalystSpec::RandomSignAttacker {
            k_probe: 3,
            delta: 1.0,
        };
        let coin = 5;
        let probes: Vec<LinearQuery> = (0..3).map(|j| probe_query(coin, j, 4, 1.0)).collect();
        let view = View {
            coin_seed: coin,
            responses: vec![vec![10.0]; 3],
        };
        let q = a.next_query(&view, &d).unwrap();
        for x in 0..4 {
            let s: f64 = probes.iter().map(|p| p.value(x)[0]).sum();
            assert_eq!(q.value(x)[0], s.clamp(-0.5, 0.5));
        }
    }

    #[test]
    fn attacker_validation() {
        let a = AnalystSpec::RandomSignAttacker {
            k_probe: 5,
            delta: 1.0,
        };
        assert!(a.validate(5).is_err());
        assert!(a.validate(6).is_ok());
    }

    #[test]
    fn attacker_overfits_empirical() {
        // n = 100, k_probe = 50, 2000 trials over a large uniform domain.
        let m = 1000;
        let n = 100;
        let k_probe = 50;
        let delta = 1.0;
        let d = DomainDistribution::uniform(m).unwrap();
        let a = AnalystSpec::RandomSignAttacker { k_probe, delta };
        let mut gap = 0.0;
        let trials = 2000;
        for t in 0..trials {
            let s = d.sample_dataset(n, &mut child_rng(t, 0)).unwrap();
            let sess = crate::mechanisms::run_session(
                &crate::mechanisms::MechanismSpec::Empirical,
                &a,
                &d,
                &s,
                k_probe + 1,
                t,
            )
            .unwrap();
            let q = sess.queries.last().unwrap();
            gap += q.evaluate(&s).unwrap()[0] - q.mean(&d).unwrap()[0];
        }
        let gap = gap / trials as f64;
        let threshold = 0.3 * delta * (k_probe as f64 / n as f64).sqrt() / 2.0;
        assert!(gap > threshold, "mean gap {gap} <= {threshold}");
    }

    proptest! {
        #[test]
        fn variance_controlled_caps(
            probs in prop::collection::vec(0.0f64..1.0, 1..7),
            sigma1 in 0.0f64..1.5,
            delta in 0.01f64..3.0,
            seed in any::<u64>(),
        ) {
            let total: f64 = probs.iter().sum();
            prop_assume!(total > 1e-3);
            let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
            let d = DomainDistribution::normalized(
                (0..probs.len()).map(|i| format!("x{i}")).collect(), probs, 1e-9).unwrap();
            let q = variance_controlled_query(&d, sigma1, delta, &mut rng_from_seed(seed)).unwrap();
            let st = q.stats(&d).unwrap();
            prop_assert!(st.delta <= delta + 1e-12);
            prop_assert!(st.sigma1 <= sigma1 + 1e-12);
            prop_assert!(q.mean(&d).unwrap()[0].abs() < 1e-12);
        }

        #[test]
        fn variance_controlled_hits_feasible_target(
            m in 3usize..8,
            frac in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            // Uniform prior: c ranges over a std interval containing
            // [std(c=0), std(c=1)], so a target between them is met exactly.
            let d = DomainDistribution::uniform(m).unwrap();
            let delta = 1.0;
            let mut rng = rng_from_seed(seed);
            let probe = variance_controlled_query(&d, 0.0 + 1e9, delta, &mut rng_from_seed(seed)).unwrap();
            let hi = probe.stats(&d).unwrap().sigma1;
            let lo = (2.0 / m as f64).sqrt() / 2.0;
            prop_assume!(hi > lo);
            let target = lo + frac * (hi - lo);
            let q = variance_controlled_query(&d, target, delta, &mut rng).unwrap();
            let st = q.stats(&d).unwrap();
            prop_assert!((st.sigma1 - target).abs() < 1e-9, "{} vs {}", st.sigma1, target);
            prop_assert!((st.delta - delta).abs() < 1e-12);
        }

        #[test]
        fn next_query_is_replayable(seed in any::<u64>(), rounds in 0usize..4) {
            let d = DomainDistribution::uniform(5).unwrap();
            let prefix = View { coin_seed: seed, responses: vec![vec![0.1]; rounds] };
            for a in [
                AnalystSpec::VarianceControlled { sigma1: 0.3, delta: 1.0 },
                AnalystSpec::RandomSignAttacker { k_probe: 2, delta: 1.0 },
            ] {
                prop_assert_eq!(a.next_query(&prefix, &d).unwrap(), a.next_query(&prefix, &d).unwrap());
            }
        }

        #[test]
        fn attacker_queries_respect_range(seed in any::<u64>(), rounds in 0usize..6) {
            let d = DomainDistribution::uniform(7).unwrap();
            let a = AnalystSpec::RandomSignAttacker { k_probe: 3, delta: 0.8 };
            let prefix = View { coin_seed: seed, responses: (0..rounds).map(|i| vec![i as f64 * 0.01 - 0.02]).collect() };
            let q = a.next_query(&prefix, &d).unwrap();
            let st = q.stats(&d).unwrap();
            prop_assert!(st.delta <= 0.8 + 1e-12);
            prop_assert!(st.sigma1 <= 0.4 + 1e-12);
        }
    }
}
