//! Optimal and near-optimal storage allocations for distributed storage
//! systems whose nodes are reached independently with probability `p` and
//! may have limited memory.
//!
//! A data object of unit size is coded with total budget `T` and spread over
//! `N` nodes. A data collector recovers the object when the amount of coded
//! data on the nodes it reaches totals at least one unit. The crate provides
//!
//! * [`exact`]: exact, closed-form and Monte Carlo recovery probabilities,
//! * [`relaxation`]: the Gaussian (Q-function) relaxation of the symmetric
//!   problem, its case analysis and the exact-vs-relaxed disparity scan,
//! * [`memory`]: solvers for constant and arbitrary memory profiles,
//! * [`multi_object`]: the sequential two-object strategy,
//! * [`oracle`]: brute-force searches used to validate all of the above.

pub mod error;
pub mod exact;
pub mod memory;
pub mod multi_object;
pub mod numeric;
pub mod oracle;
pub mod parallel;
pub mod relaxation;
mod types;

#[cfg(test)]
mod proptests;

pub use error::{Error, Result};
pub use types::{Allocation, CaseLabel, Family, NStar, SolveOutcome, SystemParams};
