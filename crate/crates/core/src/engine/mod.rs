//! LP-based branch-and-bound with cut hooks.
//!
//! The engine knows nothing about ordered median structure: it solves
//! [`MilpModel`]s and asks a [`CutHooks`] implementation for rows at two
//! places, fractional LP points at the root node and integral LP points
//! anywhere in the tree. [`strategy`] provides the SOC hooks.

mod bnb;
mod lp;
pub mod strategy;

use std::time::Duration;

use thiserror::Error;

pub use bnb::{branch_and_bound, BranchAndBound};
pub use lp::{solve_lp, LpSolution, LpStatus, FEASIBILITY_TOL};

use crate::models::{MilpModel, Row};
use crate::objective::OrderedSolution;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("numerical failure in LP solve: {0}")]
    NumericalFailure(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Every SOC materialized up front and scanned for violations.
    Pool,
    /// SOC produced on demand by the O(n³) separator.
    Callback,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Pool => "pool",
            Strategy::Callback => "callback",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbConfig {
    pub time_limit: Option<Duration>,
    pub node_limit: usize,
    pub int_tol: f64,
    /// Relative gap at which open nodes are pruned against the incumbent.
    pub mip_gap: f64,
    /// Separation rounds at the root node.
    pub root_cut_rounds: usize,
    pub cuts_per_round: usize,
    pub strategy: Strategy,
    /// Violation threshold for integral candidates, in `[1, 2)`.
    pub b: f64,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            time_limit: None,
            node_limit: usize::MAX,
            int_tol: 1e-6,
            mip_gap: 1e-6,
            root_cut_rounds: 50,
            cuts_per_round: 500,
            strategy: Strategy::Callback,
            b: 1.0,
        }
    }
}

impl BnbConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.node_limit == 0 || self.cuts_per_round == 0 {
            return Err(EngineError::InvalidConfig(
                "node and per-round cut limits must be positive".into(),
            ));
        }
        if self.time_limit.is_some_and(|t| t.is_zero()) {
            return Err(EngineError::InvalidConfig("time limit must be positive".into()));
        }
        if !(self.int_tol > 0.0 && self.int_tol < 0.5) || !(self.mip_gap >= 0.0) {
            return Err(EngineError::InvalidConfig("bad tolerances".into()));
        }
        if !(1.0..2.0).contains(&self.b) {
            return Err(EngineError::InvalidConfig(format!("b = {} outside [1, 2)", self.b)));
        }
        Ok(())
    }
}

/// Callbacks consulted by the engine. Returned rows become global model
/// rows for the rest of the run.
pub trait CutHooks {
    /// Fractional LP point at the root node; called once per cut round.
    fn on_root_fractional(&mut self, values: &[f64]) -> Vec<Row>;
    /// Integral LP point anywhere in the tree. An empty answer accepts the
    /// point; otherwise the rows are added and the node is re-solved.
    fn on_integer_candidate(&mut self, values: &[f64]) -> Vec<Row>;
}

/// Plain branch-and-bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHooks;

impl CutHooks for NoHooks {
    fn on_root_fractional(&mut self, _: &[f64]) -> Vec<Row> {
        Vec::new()
    }

    fn on_integer_candidate(&mut self, _: &[f64]) -> Vec<Row> {
        Vec::new()
    }
}

/// A known feasible point used as the starting upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    Infeasible,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::TimeLimit => "TimeLimit",
            SolveStatus::NodeLimit => "NodeLimit",
            SolveStatus::Infeasible => "Infeasible",
        })
    }
}

/// Raw outcome of one branch-and-bound run.
#[derive(Debug, Clone)]
pub struct BnbResult {
    pub status: SolveStatus,
    pub upper_bound: Option<f64>,
    pub lower_bound: f64,
    /// Bound after root processing (LP plus root cuts).
    pub root_bound: f64,
    /// Objective of the very first root LP, before any cut.
    pub root_lp_bound: f64,
    pub nodes: usize,
    /// Rows added by the hooks, in insertion order.
    pub added_rows: Vec<Row>,
    pub root_cuts: usize,
    pub incumbent: Option<Vec<f64>>,
    /// `(lower, upper)` after every processed node.
    pub bound_trace: Vec<(f64, Option<f64>)>,
    pub lp_iterations: u64,
    pub elapsed: Duration,
}

impl BnbResult {
    pub fn cuts_added(&self) -> usize {
        self.added_rows.len()
    }
}

/// Seam for alternative MILP engines.
pub trait MilpBackend {
    fn solve(
        &self,
        model: &MilpModel,
        hooks: &mut dyn CutHooks,
        warm_start: Option<&Incumbent>,
        config: &BnbConfig,
    ) -> Result<BnbResult, EngineError>;
}

/// `100 · (ub − lb) / |ub|`, clamped at zero.
pub fn gap_pct(upper: f64, lower: f64) -> f64 {
    (100.0 * (upper - lower) / upper.abs().max(1e-10)).max(0.0)
}

/// Per-solve summary in the shape of the benchmark tables.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Ordered median value of the incumbent's open set.
    pub value: Option<f64>,
    pub upper_bound: Option<f64>,
    pub lower_bound: f64,
    pub gap_root_pct: Option<f64>,
    pub gap_pct: Option<f64>,
    pub nodes: usize,
    pub cuts: usize,
    pub orig_cons: usize,
    pub wall_time: Duration,
    pub incumbent: Option<OrderedSolution>,
    /// The incumbent exactly as the MILP saw it.
    pub incumbent_point: Option<Vec<f64>>,
    pub lp_iterations: u64,
}
