//! Turning sample-accuracy tails into posterior- and distribution-accuracy
//! tails by Markov's inequality on the excess error.

use super::search::inf_over_c;
use super::tail::{TabulatedTail, TailFunction, C_FLOOR_FRAC};
use crate::error::{invalid, Result};

/// Log-spaced ε candidates in the first pass of the 2-D search.
const EPS_GRID: usize = 32;
/// Points inserted between the best candidate's neighbours in each refinement.
const EPS_REFINE: usize = 16;
const REFINE_PASSES: usize = 3;

/// `inf_{c ∈ (0, α')} (1/c) ∫_{α'−c}^∞ φ`, searched over `c ∈ [10⁻⁶·α, α')`.
/// `scale` sets the lower end of the bracket; α' is the effective threshold.
fn markov_inf(phi: &TailFunction, alpha_eff: f64, scale: f64) -> Result<f64> {
    if alpha_eff <= 0.0 {
        return Ok(1.0);
    }
    // Propagate unsupported families before searching.
    phi.integral_from(alpha_eff)?;
    let lo = (C_FLOOR_FRAC * scale).min(alpha_eff);
    let obj = |c: f64| phi.integral_from(alpha_eff - c).unwrap_or(f64::INFINITY) / c;
    Ok(inf_over_c(obj, lo, alpha_eff).map_or(1.0, |(_, v)| v.clamp(0.0, 1.0)))
}

/// Posterior-accuracy tail implied by sample accuracy φ, evaluated at one α.
pub fn sample_to_posterior_at(phi: &TailFunction, alpha: f64) -> Result<f64> {
    markov_inf(phi, alpha, alpha)
}

/// Posterior-accuracy tail implied by sample accuracy φ, tabulated on
/// `grid` (strictly increasing).
pub fn sample_to_posterior(phi: &TailFunction, grid: &[f64]) -> Result<TailFunction> {
    let values = grid
        .iter()
        .map(|&a| sample_to_posterior_at(phi, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(TailFunction::Tabulated(TabulatedTail::from_bounds(grid.to_vec(), values)?))
}

fn log_points(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(move |i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
}

/// `inf_{ε ∈ [0, α), c ∈ (0, α−ε)} (1/c) ∫_{α−ε−c}^∞ φ + ψ(ε)` at one α.
///
/// ε is searched on a log grid refined three times around the best point;
/// the breakpoints of a tabulated ψ are always candidates, since a step ψ
/// attains its infimum there.
pub fn combine_accuracy_at(phi: &TailFunction, psi: &TailFunction, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 {
        return Ok(1.0);
    }
    let eval = |eps: f64| -> Result<f64> {
        let accuracy = markov_inf(phi, alpha - eps, alpha)?;
        Ok(accuracy + psi.value(eps))
    };
    let top = alpha * (1.0 - C_FLOOR_FRAC);
    let mut cands: Vec<f64> = std::iter::once(0.0)
        .chain(log_points(C_FLOOR_FRAC * alpha, top, EPS_GRID))
        .collect();
    if let TailFunction::Tabulated(t) = psi {
        cands.extend(t.alphas().iter().copied().filter(|e| (0.0..alpha).contains(e)));
    }
    let mut scored: Vec<(f64, f64)> = Vec::new();
    let push = |scored: &mut Vec<(f64, f64)>, e: f64| -> Result<()> {
        if !scored.iter().any(|(x, _)| *x == e) {
            scored.push((e, eval(e)?));
        }
        Ok(())
    };
    for e in cands {
        push(&mut scored, e)?;
    }
    for _ in 0..REFINE_PASSES {
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let best = (0..scored.len())
            .min_by(|&i, &j| scored[i].1.total_cmp(&scored[j].1))
            .expect("non-empty candidate set");
        let lo = scored[best.saturating_sub(1)].0;
        let hi = scored[(best + 1).min(scored.len() - 1)].0;
        if hi > lo {
            let step = (hi - lo) / (EPS_REFINE + 1) as f64;
            for i in 1..=EPS_REFINE {
                push(&mut scored, lo + step * i as f64)?;
            }
        }
    }
    let best = scored.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    Ok(best.clamp(0.0, 1.0))
}

/// Distribution-accuracy tail from sample accuracy φ and Bayes stability ψ,
/// tabulated on `grid`.
pub fn combine_accuracy(
    phi: &TailFunction,
    psi: &TailFunction,
    grid: &[f64],
) -> Result<TailFunction> {
    if grid.is_empty() {
        return Err(invalid("empty alpha grid"));
    }
    let values = grid
        .iter()
        .map(|&a| combine_accuracy_at(phi, psi, a))
        .collect::<Result<Vec<_>>>()?;
    Ok(TailFunction::Tabulated(TabulatedTail::from_bounds(grid.to_vec(), values)?))
}
