//! Monte Carlo and exact-oracle tooling for adaptive statistical queries.
//!
//! An analyst asks `k` linear queries in sequence, each possibly depending on
//! earlier answers, and a mechanism answers from an i.i.d. dataset. The crate
//! simulates such sessions, computes exact posteriors on small instances,
//! evaluates closed-form accuracy bounds, and checks the bounds against
//! simulated tail frequencies.

pub mod analysts;
pub mod bounds;
pub mod config;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod model;
pub mod oracle;
pub mod rng;

pub use analysts::AnalystSpec;
pub use error::{Error, Result};
pub use mechanisms::{run_session, MechanismSpec, Session};
pub use model::{compute_errors, Dataset, DomainDistribution, ErrorRecord, LinearQuery, View};
pub use oracle::{LbiParams, PosteriorReport};
