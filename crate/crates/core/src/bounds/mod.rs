//! Closed-form tail bounds, their transforms, LBI calculus and sample-size
//! calibration.
//!
//! Every infimum over a slack `c` is found by golden-section search in `ln c`
//! on `[10⁻⁶·α, α − ε − floor]` to relative tolerance 1e-4, followed by a
//! comparison with both bracket endpoints. Evaluations outside a formula's
//! validity range return the vacuous value 1 with `valid = false`.

mod generalization;
mod lbi;
pub mod search;
mod tail;
mod transform;

use serde::{Deserialize, Serialize};

pub use generalization::{
    distribution_tail, gaussian_sample_size, laplace_sample_size, splitting_sample_size,
    Calibration, CalibrationInputs, DistTailSpec,
};
pub use lbi::{
    compose_lbi, lbi_per_query, lbi_to_bayes, lss_to_bayes, theta_bound, theta_window,
    StabilityBudget,
};
pub use tail::{
    mechanism_tails, posterior_floor, ComposedTail, TabulatedTail, TailFamily, TailFunction,
    TailValue,
};
pub use transform::{
    combine_accuracy, combine_accuracy_at, sample_to_posterior, sample_to_posterior_at,
};

/// Noise families with closed-form bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Laplace,
    Gaussian,
}

/// Which variance assumption a Θ bound uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Queries are Δ-bounded with element std at most σ.
    Bounded,
    /// Queries form a sub-Gaussian vector with parameter σ.
    SubGaussian,
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}
