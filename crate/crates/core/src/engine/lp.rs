//! LP relaxations on top of microlp's bounded revised simplex.
//!
//! Variables are registered in flat-id order so a microlp `Variable` index
//! equals the model's flat id.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};

use super::EngineError;
use crate::models::{MilpModel, Row, Sense};

/// Primal feasibility tolerance promised for optimal LP solutions.
pub const FEASIBILITY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Reserved for backends with pivot limits; microlp never stops early
    /// without a time limit.
    IterLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    /// One value per flat id; empty unless optimal.
    pub values: Vec<f64>,
    pub iterations: u64,
}

fn op(sense: Sense) -> ComparisonOp {
    match sense {
        Sense::Le => ComparisonOp::Le,
        Sense::Eq => ComparisonOp::Eq,
        Sense::Ge => ComparisonOp::Ge,
    }
}

/// Result of one LP (re)solve inside a session.
pub(crate) enum LpOutcome {
    Optimal(Solution),
    Infeasible,
    Unbounded,
}

fn map_result(res: Result<microlp::SolveOutcome, microlp::Error>) -> Result<LpOutcome, EngineError> {
    match res {
        Ok(outcome) => match outcome.into_solution() {
            Ok(sol) => Ok(LpOutcome::Optimal(sol)),
            Err(_) => Err(EngineError::NumericalFailure(
                "LP interrupted without a solution".into(),
            )),
        },
        Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
        Err(e) => Err(EngineError::NumericalFailure(e.to_string())),
    }
}

/// Builds and solves the continuous relaxation of `model` with extra rows
/// and per-variable fixings applied as bounds.
pub(crate) struct LpBuilder<'a> {
    model: &'a MilpModel,
    vars: Vec<Variable>,
}

impl<'a> LpBuilder<'a> {
    pub(crate) fn new(model: &'a MilpModel) -> Self {
        LpBuilder {
            model,
            vars: Vec::new(),
        }
    }

    pub(crate) fn solve_fresh(
        &mut self,
        extra_rows: &[Row],
        fixings: &[(usize, f64)],
    ) -> Result<LpOutcome, EngineError> {
        let model = self.model;
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let mut lower = model.lower.clone();
        let mut upper = model.upper.clone();
        for &(v, val) in fixings {
            lower[v] = val;
            upper[v] = val;
        }
        self.vars = (0..model.num_vars())
            .map(|v| problem.add_var(model.objective[v], (lower[v], upper[v])))
            .collect();
        for row in model.rows.iter().chain(extra_rows) {
            problem.add_constraint(self.expr(row), op(row.sense), row.rhs);
        }
        map_result(problem.solve())
    }

    fn expr(&self, row: &Row) -> Vec<(Variable, f64)> {
        row.coefs.iter().map(|&(v, a)| (self.vars[v], a)).collect()
    }

    pub(crate) fn var(&self, flat: usize) -> Variable {
        self.vars[flat]
    }

    /// Appends `row` to a solved LP and re-optimizes.
    pub(crate) fn add_row(&self, sol: Solution, row: &Row) -> Result<LpOutcome, EngineError> {
        map_result(sol.add_constraint(self.expr(row), op(row.sense), row.rhs))
    }

    pub(crate) fn fix(&self, sol: Solution, flat: usize, val: f64) -> Result<LpOutcome, EngineError> {
        map_result(sol.fix_var(self.var(flat), val))
    }

    pub(crate) fn values(&self, sol: &Solution) -> Vec<f64> {
        self.vars.iter().map(|&v| sol.var_value_raw(v)).collect()
    }
}

/// Solves the LP relaxation of `model` (integrality dropped).
pub fn solve_lp(model: &MilpModel) -> Result<LpSolution, EngineError> {
    let mut builder = LpBuilder::new(model);
    Ok(match builder.solve_fresh(&[], &[])? {
        LpOutcome::Optimal(sol) => LpSolution {
            status: LpStatus::Optimal,
            objective: sol.objective(),
            values: builder.values(&sol),
            iterations: sol.stats().lp_iterations,
        },
        LpOutcome::Infeasible => LpSolution {
            status: LpStatus::Infeasible,
            objective: f64::INFINITY,
            values: Vec::new(),
            iterations: 0,
        },
        LpOutcome::Unbounded => LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::NEG_INFINITY,
            values: Vec::new(),
            iterations: 0,
        },
    })
}
