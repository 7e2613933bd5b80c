pub mod cli;
pub mod counterexample;
pub mod dependence;
pub mod deviation_bounds;
pub mod error;
pub mod numeric;
pub mod polygonal_holder;
pub mod process_gen;
pub mod quantile_core;
pub mod rng;
pub mod tightness_mc;
pub mod verification;

pub use error::{Error, Result};
