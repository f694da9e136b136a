//! Exact solution of the discrete ordered median problem.
//!
//! Choose `p` of `n` sites so that the weighted sum of the sorted client
//! allocation costs is minimal. The crate covers instance handling, the
//! ordered median objective and its brute-force oracle, the MILP
//! formulations with strong (SOC) and weak (WOC) order constraints, an
//! O(n³) SOC separator, a small branch-and-bound engine with cut hooks, and
//! the solution methods built on top of them.

pub mod bench;
pub mod engine;
pub mod instance;
pub mod methods;
pub mod models;
pub mod objective;
pub mod report;
pub mod separation;
