//! Built-in acceptance suite and the reference oracles it relies on.

pub mod criteria;
pub mod oracles;

pub use criteria::{criteria, run_all, Criterion, CriterionOutcome, DEFAULT_SEED};
