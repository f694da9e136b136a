//! End-to-end solution procedures: the complete SOC and WOC formulations,
//! cut-and-branch on WOC with root SOC separation, and row generation from
//! the relaxation with SOC added lazily.

mod heuristic;

use std::time::Instant;

use thiserror::Error;

pub use heuristic::{greedy_construct, swap_local_search, warm_start_heuristic, DEFAULT_ALPHA, DEFAULT_ITERATIONS};

use crate::engine::strategy::{CandidateMode, SocHooks};
use crate::engine::{
    gap_pct, BnbConfig, BnbResult, BranchAndBound, CutHooks, EngineError, Incumbent, MilpBackend, NoHooks,
    SolveReport, Strategy,
};
use crate::instance::{compute_ranks, Instance};
use crate::models::{build_model, Formulation, MilpModel};
use crate::objective::{evaluate, OpenSet};
use crate::separation::{check_ordered_feasibility, Point, SeparationError};

/// Largest `n` for which the complete SOC model or the SOC pool is built.
pub const DEFAULT_SIZE_GUARD: usize = 40;

#[derive(Debug, Error, PartialEq)]
pub enum MethodError {
    #[error("n = {n} exceeds the size guard {limit} for materializing every SOC")]
    SizeGuard { n: usize, limit: usize },
    #[error(transparent)]
    Threshold(#[from] SeparationError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0} is not a complete formulation")]
    Unsupported(Formulation),
    #[error("order check failed: {0}")]
    OrderViolation(String),
}

/// Warm-start heuristic parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmStart {
    pub iterations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for WarmStart {
    fn default() -> Self {
        WarmStart {
            iterations: DEFAULT_ITERATIONS,
            alpha: DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub bnb: BnbConfig,
    pub size_guard: usize,
    pub warm_start: Option<WarmStart>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            bnb: BnbConfig::default(),
            size_guard: DEFAULT_SIZE_GUARD,
            warm_start: Some(WarmStart::default()),
        }
    }
}

impl SolveConfig {
    fn guard(&self, n: usize) -> Result<(), MethodError> {
        if n > self.size_guard {
            Err(MethodError::SizeGuard {
                n,
                limit: self.size_guard,
            })
        } else {
            Ok(())
        }
    }
}

fn run(
    instance: &Instance,
    model: &MilpModel,
    hooks: &mut dyn CutHooks,
    config: &SolveConfig,
    bnb: &BnbConfig,
) -> Result<SolveReport, MethodError> {
    let start = Instant::now();
    let warm = config.warm_start.map(|ws| {
        let sol = warm_start_heuristic(instance, ws.iterations, ws.alpha, ws.seed);
        Incumbent {
            values: Point::from_solution(instance.n(), &sol).to_values(),
        }
    });
    let res = BranchAndBound.solve(model, hooks, warm.as_ref(), bnb)?;
    report(instance, model, res, start)
}

/// Turns an engine result into a report. The reported value is the ordered
/// median objective of the incumbent's open sites.
fn report(instance: &Instance, model: &MilpModel, res: BnbResult, start: Instant) -> Result<SolveReport, MethodError> {
    let layout = model.layout();
    let incumbent = match &res.incumbent {
        Some(values) => {
            let open: Vec<usize> = (0..instance.n()).filter(|&j| values[layout.y(j)] > 0.5).collect();
            let open = OpenSet::new(open, instance.n())
                .map_err(|e| EngineError::NumericalFailure(format!("incumbent sites: {e}")))?;
            Some(
                evaluate(instance, &open)
                    .map_err(|e| EngineError::NumericalFailure(format!("incumbent sites: {e}")))?,
            )
        }
        None => None,
    };
    let value = incumbent.as_ref().map(|s| s.value);
    let upper = match (res.upper_bound, value) {
        (Some(u), Some(v)) => Some(u.min(v)),
        (u, _) => u,
    };
    let lower = match upper {
        Some(u) => res.lower_bound.min(u),
        None => res.lower_bound,
    };
    Ok(SolveReport {
        status: res.status,
        value,
        upper_bound: upper,
        lower_bound: lower,
        gap_root_pct: upper.map(|u| gap_pct(u, res.root_bound)),
        gap_pct: upper.map(|u| gap_pct(u, lower)),
        nodes: res.nodes,
        cuts: res.cuts_added(),
        orig_cons: model.orig_cons(),
        wall_time: start.elapsed(),
        incumbent,
        incumbent_point: res.incumbent,
        lp_iterations: res.lp_iterations,
    })
}

/// Branch-and-bound on a complete formulation, no cuts.
pub fn solve_full(instance: &Instance, formulation: Formulation, config: &SolveConfig) -> Result<SolveReport, MethodError> {
    match formulation {
        Formulation::Soc => config.guard(instance.n())?,
        Formulation::Woc => {}
        Formulation::Relax => return Err(MethodError::Unsupported(formulation)),
    }
    let ranks = compute_ranks(instance);
    let model = build_model(instance, &ranks, formulation);
    run(instance, &model, &mut NoHooks, config, &config.bnb)
}

/// WOC model, SOC separated on fractional root points, then plain
/// branching. Integral candidates are only checked for order consistency.
pub fn solve_branch_and_cut(instance: &Instance, strategy: Strategy, config: &SolveConfig) -> Result<SolveReport, MethodError> {
    if strategy == Strategy::Pool {
        config.guard(instance.n())?;
    }
    let bnb = BnbConfig {
        strategy,
        ..config.bnb.clone()
    };
    let ranks = compute_ranks(instance);
    let model = build_model(instance, &ranks, Formulation::Woc);
    let mut hooks = SocHooks::for_strategy(&ranks, &bnb, CandidateMode::AssertOrdered);
    let report = run(instance, &model, &mut hooks, config, &bnb)?;
    let failures = hooks.stats().assertion_failures;
    if failures > 0 {
        return Err(MethodError::OrderViolation(format!(
            "{failures} integral WOC candidates out of order"
        )));
    }
    Ok(report)
}

/// Relaxation model with SOC separated at the root (threshold 1) and at
/// every integral candidate (threshold `b`).
pub fn solve_row_generation(
    instance: &Instance,
    strategy: Strategy,
    b: f64,
    config: &SolveConfig,
) -> Result<SolveReport, MethodError> {
    if !(1.0..2.0).contains(&b) {
        return Err(SeparationError::ThresholdOutOfRange(b).into());
    }
    if strategy == Strategy::Pool {
        config.guard(instance.n())?;
    }
    let bnb = BnbConfig {
        strategy,
        b,
        ..config.bnb.clone()
    };
    let ranks = compute_ranks(instance);
    let model = build_model(instance, &ranks, Formulation::Relax);
    let mut hooks = SocHooks::for_strategy(&ranks, &bnb, CandidateMode::Separate { b });
    let report = run(instance, &model, &mut hooks, config, &bnb)?;
    if let Some(values) = &report.incumbent_point {
        let point = Point::from_values(instance.n(), values);
        if !check_ordered_feasibility(&point, &ranks)? {
            return Err(MethodError::OrderViolation("final incumbent out of order".into()));
        }
    }
    Ok(report)
}

/// The four procedures, as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Soc,
    Woc,
    BranchAndCut,
    RowGeneration,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Soc, Method::Woc, Method::BranchAndCut, Method::RowGeneration];

    /// Whether the strategy choice matters.
    pub fn uses_strategy(self) -> bool {
        matches!(self, Method::BranchAndCut | Method::RowGeneration)
    }

    pub fn uses_threshold(self) -> bool {
        self == Method::RowGeneration
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Soc => "soc",
            Method::Woc => "woc",
            Method::BranchAndCut => "bc",
            Method::RowGeneration => "rowgen",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "soc" => Ok(Method::Soc),
            "woc" => Ok(Method::Woc),
            "bc" => Ok(Method::BranchAndCut),
            "rowgen" => Ok(Method::RowGeneration),
            _ => Err(format!("unknown method '{s}' (soc, woc, bc, rowgen)")),
        }
    }
}

/// Dispatches to the matching procedure; `strategy` and `b` are ignored
/// where they do not apply.
pub fn solve(
    instance: &Instance,
    method: Method,
    strategy: Strategy,
    b: f64,
    config: &SolveConfig,
) -> Result<SolveReport, MethodError> {
    match method {
        Method::Soc => solve_full(instance, Formulation::Soc, config),
        Method::Woc => solve_full(instance, Formulation::Woc, config),
        Method::BranchAndCut => solve_branch_and_cut(instance, strategy, config),
        Method::RowGeneration => solve_row_generation(instance, strategy, b, config),
    }
}
