use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use microlp::Solution;

use super::lp::{LpBuilder, LpOutcome};
use super::{BnbConfig, BnbResult, CutHooks, EngineError, Incumbent, MilpBackend, SolveStatus};
use crate::models::{MilpModel, Row};

/// The bundled engine.
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchAndBound;

impl MilpBackend for BranchAndBound {
    fn solve(
        &self,
        model: &MilpModel,
        hooks: &mut dyn CutHooks,
        warm_start: Option<&Incumbent>,
        config: &BnbConfig,
    ) -> Result<BnbResult, EngineError> {
        branch_and_bound(model, hooks, warm_start, config)
    }
}

struct Node {
    id: usize,
    bound: f64,
    fixings: Vec<(usize, f64)>,
    /// Key of the parent's LP in the warm-start cache.
    parent: usize,
}

/// Key of the root LP in the warm-start cache.
const ROOT_KEY: usize = usize::MAX;

/// Memory budget for cached node LPs.
const CACHE_BYTES: usize = 256 << 20;

/// A solved parent LP kept so that children start from its basis.
struct CachedLp {
    sol: Solution,
    /// Number of global rows already in `sol`.
    rows: usize,
    bound: f64,
    /// Children not yet solved.
    pending: u8,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound, then smallest id, on top.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// What happened to a node after its LP loop.
enum NodeEnd {
    /// Fractional; branch on the carried point.
    Open(f64, Vec<f64>),
    Closed(f64),
    Infeasible,
}

struct Search<'m, 'h> {
    model: &'m MilpModel,
    builder: LpBuilder<'m>,
    hooks: &'h mut dyn CutHooks,
    config: &'m BnbConfig,
    master: Option<Solution>,
    added_rows: Vec<Row>,
    upper: Option<f64>,
    incumbent: Option<Vec<f64>>,
    globally_infeasible: bool,
    iterations: u64,
    cache: HashMap<usize, CachedLp>,
    cache_cap: usize,
}

impl<'m, 'h> Search<'m, 'h> {
    fn prunable(&self, bound: f64) -> bool {
        self.upper
            .is_some_and(|ub| bound >= ub - self.config.mip_gap * ub.abs().max(1.0))
    }

    fn is_integral(&self, values: &[f64]) -> bool {
        values
            .iter()
            .zip(&self.model.binary)
            .all(|(&v, &bin)| !bin || (v - v.round()).abs() <= self.config.int_tol)
    }

    fn rounded(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(&self.model.binary)
            .map(|(&v, &bin)| if bin { v.round() } else { v })
            .collect()
    }

    fn accept(&mut self, values: &[f64]) {
        let obj = self.model.objective_value(values);
        if self.upper.is_none_or(|ub| obj < ub) {
            self.upper = Some(obj);
            self.incumbent = Some(values.to_vec());
        }
    }

    /// Most fractional binary, `y` before `x`, lowest id on ties.
    fn branching_var(&self, values: &[f64]) -> Option<usize> {
        let layout = self.model.layout();
        let mut best: [Option<(f64, usize)>; 2] = [None, None];
        for (v, &x) in values.iter().enumerate() {
            if !self.model.binary[v] {
                continue;
            }
            let frac = x - x.floor();
            let score = frac.min(1.0 - frac);
            if score <= self.config.int_tol {
                continue;
            }
            let slot = &mut best[usize::from(!layout.is_y(v))];
            if slot.is_none_or(|(s, _)| score > s) {
                *slot = Some((score, v));
            }
        }
        best[0].or(best[1]).map(|(_, v)| v)
    }

    /// Adds hook rows to `sol` and to the shared root LP. `None` when the
    /// node became infeasible.
    fn add_global_rows(
        &mut self,
        sol: Solution,
        rows: Vec<Row>,
        sol_is_master: bool,
    ) -> Result<Option<Solution>, EngineError> {
        let mut sol = Some(sol);
        for row in rows {
            if let Some(s) = sol.take() {
                if let LpOutcome::Optimal(s) = self.builder.add_row(s, &row)? {
                    sol = Some(s);
                }
            }
            if !sol_is_master {
                if let Some(master) = self.master.take() {
                    match self.builder.add_row(master, &row)? {
                        LpOutcome::Optimal(m) => self.master = Some(m),
                        _ => self.globally_infeasible = true,
                    }
                }
            }
            self.added_rows.push(row);
        }
        if sol_is_master && sol.is_none() {
            self.globally_infeasible = true;
        }
        Ok(sol)
    }

    fn placeholder(&self) -> Result<Solution, EngineError> {
        self.master
            .clone()
            .ok_or_else(|| EngineError::NumericalFailure("root LP unavailable".into()))
    }

    /// Keeps a branched node's LP for its two children. When full, the
    /// entry with the largest bound makes room if it is worse than `bound`.
    fn cache_lp(&mut self, key: usize, sol: Solution, bound: f64) {
        if self.cache.len() >= self.cache_cap {
            let worst = self
                .cache
                .iter()
                .max_by(|a, b| a.1.bound.total_cmp(&b.1.bound).then(a.0.cmp(b.0)))
                .map(|(&k, e)| (k, e.bound));
            match worst {
                Some((k, b)) if b > bound => {
                    self.cache.remove(&k);
                }
                _ => return,
            }
        }
        let rows = self.added_rows.len();
        self.cache.insert(
            key,
            CachedLp {
                sol,
                rows,
                bound,
                pending: 2,
            },
        );
    }

    /// Drops one pending child of a cached LP.
    fn release(&mut self, parent: usize) {
        if let Some(entry) = self.cache.get_mut(&parent) {
            entry.pending -= 1;
            if entry.pending == 0 {
                self.cache.remove(&parent);
            }
        }
    }

    /// Parent LP plus the rows added since it was cached, if still cached.
    fn warm_lp(&mut self, parent: usize) -> Result<Option<(Solution, u64)>, EngineError> {
        let Some(entry) = self.cache.get_mut(&parent) else {
            return Ok(None);
        };
        entry.pending -= 1;
        let rows = entry.rows;
        let sol = if entry.pending == 0 {
            self.cache.remove(&parent).map(|e| e.sol).expect("entry present")
        } else {
            entry.sol.clone()
        };
        let base = sol.stats().lp_iterations;
        let mut sol = Some(sol);
        for row in &self.added_rows[rows..] {
            match self.builder.add_row(sol.take().expect("set each round"), row) {
                Ok(LpOutcome::Optimal(s)) => sol = Some(s),
                _ => return Ok(None),
            }
        }
        Ok(sol.map(|s| (s, base)))
    }

    /// LP of a node: the parent LP with the last fixing applied, or the root
    /// LP with every fixing replayed. Falls back to a cold solve if an
    /// incremental step breaks down.
    fn node_lp(&mut self, node: &Node) -> Result<Option<Solution>, EngineError> {
        let fixings = &node.fixings[..];
        let (start, base, todo) = match self.warm_lp(node.parent)? {
            Some((sol, base)) => (sol, base, &fixings[fixings.len() - 1..]),
            None => {
                let master = self.placeholder()?;
                let base = master.stats().lp_iterations;
                (master, base, fixings)
            }
        };
        let mut sol = Some(start);
        for &(v, val) in todo {
            match self.builder.fix(sol.take().expect("set each round"), v, val) {
                Ok(LpOutcome::Optimal(s)) => sol = Some(s),
                Ok(_) => return Ok(None),
                Err(_) => break,
            }
        }
        if let Some(sol) = sol {
            self.iterations += sol.stats().lp_iterations.saturating_sub(base);
            return Ok(Some(sol));
        }
        let rows = self.added_rows.clone();
        let mut cold = LpBuilder::new(self.model);
        match cold.solve_fresh(&rows, fixings)? {
            LpOutcome::Optimal(s) => {
                self.iterations += s.stats().lp_iterations;
                Ok(Some(s))
            }
            _ => Ok(None),
        }
    }

    /// Runs the cut/candidate loop on a solved node LP.
    fn process(&mut self, mut sol: Solution, is_root: bool, cut_rounds: &mut usize) -> Result<(NodeEnd, Option<Solution>), EngineError> {
        loop {
            let z = sol.objective();
            if self.prunable(z) {
                return Ok((NodeEnd::Closed(z), Some(sol)));
            }
            let values = self.builder.values(&sol);
            if self.is_integral(&values) {
                let point = self.rounded(&values);
                let rows = self.hooks.on_integer_candidate(&point);
                if rows.is_empty() {
                    self.accept(&point);
                    return Ok((NodeEnd::Closed(z), Some(sol)));
                }
                match self.add_global_rows(sol, rows, is_root)? {
                    Some(s) => sol = s,
                    None => return Ok((NodeEnd::Infeasible, None)),
                }
                continue;
            }
            if !is_root || *cut_rounds >= self.config.root_cut_rounds {
                return Ok((NodeEnd::Open(z, values), Some(sol)));
            }
            let mut rows = self.hooks.on_root_fractional(&values);
            rows.truncate(self.config.cuts_per_round);
            *cut_rounds += 1;
            if rows.is_empty() {
                return Ok((NodeEnd::Open(z, values), Some(sol)));
            }
            match self.add_global_rows(sol, rows, true)? {
                Some(s) => sol = s,
                None => return Ok((NodeEnd::Infeasible, None)),
            }
        }
    }
}

/// Best-bound branch-and-bound over binary variables.
///
/// Root: alternate LP solves and `on_root_fractional` until no rows come back
/// or the round limit is hit. Every node: integral LP points go through
/// `on_integer_candidate`; rows it returns are added globally and the node is
/// re-solved, an empty answer makes the point a candidate incumbent.
pub fn branch_and_bound(
    model: &MilpModel,
    hooks: &mut dyn CutHooks,
    warm_start: Option<&Incumbent>,
    config: &BnbConfig,
) -> Result<BnbResult, EngineError> {
    config.validate()?;
    let start = Instant::now();
    let mut search = Search {
        model,
        builder: LpBuilder::new(model),
        hooks,
        config,
        master: None,
        added_rows: Vec::new(),
        upper: None,
        incumbent: None,
        globally_infeasible: false,
        iterations: 0,
        cache: HashMap::new(),
        cache_cap: cache_capacity(model),
    };
    if let Some(ws) = warm_start {
        if ws.values.len() == model.num_vars() {
            search.accept(&ws.values);
        }
    }

    let mut result = BnbResult {
        status: SolveStatus::Infeasible,
        upper_bound: None,
        lower_bound: f64::INFINITY,
        root_bound: f64::INFINITY,
        root_lp_bound: f64::INFINITY,
        nodes: 0,
        added_rows: Vec::new(),
        root_cuts: 0,
        incumbent: None,
        bound_trace: Vec::new(),
        lp_iterations: 0,
        elapsed: Default::default(),
    };

    let root = match search.builder.solve_fresh(&[], &[])? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible => {
            result.elapsed = start.elapsed();
            return Ok(result);
        }
        LpOutcome::Unbounded => {
            return Err(EngineError::NumericalFailure(
                "unbounded relaxation of a bounded model".into(),
            ))
        }
    };
    result.root_lp_bound = root.objective();
    search.master = Some(root.clone());

    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut nodes = 1usize;
    let mut cut_rounds = 0usize;
    let mut trace = Vec::new();

    let (end, root_sol) = search.process(root, true, &mut cut_rounds)?;
    if let Some(s) = root_sol {
        search.iterations += s.stats().lp_iterations;
        search.master = Some(s);
    }
    result.root_cuts = search.added_rows.len();
    match end {
        NodeEnd::Open(z, values) => {
            result.root_bound = z;
            let sol = search.placeholder()?;
            search.cache_lp(ROOT_KEY, sol, z);
            branch(&search, &values, z, &[], ROOT_KEY, &mut heap, &mut next_id);
        }
        NodeEnd::Closed(z) => result.root_bound = z,
        NodeEnd::Infeasible => {}
    }
    if search.globally_infeasible {
        heap.clear();
    }
    let mut running_lb = lower_bound(&heap, search.upper);
    trace.push((running_lb, search.upper));

    let mut status = None;
    while let Some(node) = heap.pop() {
        if search.prunable(node.bound) {
            search.release(node.parent);
            continue;
        }
        if nodes >= config.node_limit {
            heap.push(node);
            status = Some(SolveStatus::NodeLimit);
            break;
        }
        if config.time_limit.is_some_and(|t| start.elapsed() >= t) {
            heap.push(node);
            status = Some(SolveStatus::TimeLimit);
            break;
        }
        nodes += 1;
        if let Some(sol) = search.node_lp(&node)? {
            if let (NodeEnd::Open(z, values), Some(sol)) = search.process(sol, false, &mut cut_rounds)? {
                search.cache_lp(node.id, sol, z);
                branch(&search, &values, z, &node.fixings, node.id, &mut heap, &mut next_id);
            }
        }
        if search.globally_infeasible {
            heap.clear();
        }
        running_lb = running_lb.max(lower_bound(&heap, search.upper));
        trace.push((running_lb, search.upper));
    }

    result.status = status.unwrap_or(if search.upper.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    });
    result.upper_bound = search.upper;
    result.lower_bound = match (result.status, search.upper) {
        (SolveStatus::Optimal, Some(u)) => u,
        (_, Some(u)) => running_lb.min(u),
        (_, None) => running_lb,
    };
    if let Some(u) = search.upper {
        result.root_bound = result.root_bound.min(u);
    }
    result.nodes = nodes;
    result.added_rows = search.added_rows;
    result.incumbent = search.incumbent;
    result.bound_trace = trace;
    result.lp_iterations = search.iterations;
    result.elapsed = start.elapsed();
    Ok(result)
}

fn lower_bound(heap: &BinaryHeap<Node>, upper: Option<f64>) -> f64 {
    let open = heap.peek().map_or(f64::INFINITY, |n| n.bound);
    upper.map_or(open, |u| open.min(u))
}

/// Cache entries affordable within [`CACHE_BYTES`], from a rough per-LP
/// footprint of the model.
fn cache_capacity(model: &MilpModel) -> usize {
    let nnz: usize = model.rows.iter().map(|r| r.coefs.len()).sum();
    let per_lp = 8 * (3 * nnz + 12 * (model.num_vars() + model.rows.len()));
    (CACHE_BYTES / per_lp.max(1)).clamp(16, 4096)
}

fn branch(
    search: &Search,
    values: &[f64],
    bound: f64,
    fixings: &[(usize, f64)],
    parent: usize,
    heap: &mut BinaryHeap<Node>,
    next_id: &mut usize,
) {
    let Some(v) = search.branching_var(values) else {
        return;
    };
    for val in [1.0, 0.0] {
        let mut f = fixings.to_vec();
        f.push((v, val));
        heap.push(Node {
            id: *next_id,
            bound,
            fixings: f,
            parent,
        });
        *next_id += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{gap_pct, NoHooks};
    use crate::instance::{compute_ranks, generate_instance};
    use crate::models::{build_soc_model, build_woc_model};
    use crate::objective::{brute_force, DEFAULT_SUBSET_LIMIT};
    use crate::separation::Point;

    fn exact() -> BnbConfig {
        BnbConfig {
            mip_gap: 0.0,
            ..BnbConfig::default()
        }
    }

    #[test]
    fn full_soc_matches_brute_force() {
        for (n, p, seed) in [(4, 2, 1), (5, 2, 2), (6, 3, 3), (6, 2, 4)] {
            let inst = generate_instance(n, p, seed, false).unwrap();
            let model = build_soc_model(&inst, &compute_ranks(&inst));
            let res = branch_and_bound(&model, &mut NoHooks, None, &exact()).unwrap();
            let (opt, _) = brute_force(&inst, DEFAULT_SUBSET_LIMIT).unwrap();
            assert_eq!(res.status, SolveStatus::Optimal);
            assert!((res.upper_bound.unwrap() - opt).abs() < 1e-6, "n={n} seed={seed}");
            assert!(res.root_lp_bound <= opt + 1e-6);
            for w in res.bound_trace.windows(2) {
                assert!(w[1].0 >= w[0].0);
                if let (Some(a), Some(b)) = (w[0].1, w[1].1) {
                    assert!(b <= a);
                }
            }
        }
    }

    #[test]
    fn optimal_warm_start_keeps_upper_bound() {
        let inst = generate_instance(5, 2, 7, false).unwrap();
        let ranks = compute_ranks(&inst);
        let model = build_woc_model(&inst, &ranks);
        let (opt, open) = brute_force(&inst, DEFAULT_SUBSET_LIMIT).unwrap();
        let sol = crate::objective::evaluate(&inst, &open).unwrap();
        let ws = Incumbent {
            values: Point::from_solution(5, &sol).to_values(),
        };
        let res = branch_and_bound(&model, &mut NoHooks, Some(&ws), &exact()).unwrap();
        assert_eq!(res.upper_bound, Some(opt));
        assert_eq!(res.incumbent.as_deref(), Some(&ws.values[..]));
        assert_eq!(res.status, SolveStatus::Optimal);
    }

    #[test]
    fn single_node_gap_equals_root_gap() {
        let inst = generate_instance(6, 2, 11, false).unwrap();
        let model = build_woc_model(&inst, &compute_ranks(&inst));
        let cfg = BnbConfig {
            node_limit: 1,
            ..exact()
        };
        let res = branch_and_bound(&model, &mut NoHooks, None, &cfg).unwrap();
        assert_eq!(res.nodes, 1);
        if let Some(ub) = res.upper_bound {
            assert_eq!(gap_pct(ub, res.root_bound), gap_pct(ub, res.lower_bound));
        }
    }

    #[test]
    fn repeated_runs_are_identical() {
        let inst = generate_instance(6, 3, 5, false).unwrap();
        let model = build_woc_model(&inst, &compute_ranks(&inst));
        let a = branch_and_bound(&model, &mut NoHooks, None, &exact()).unwrap();
        let b = branch_and_bound(&model, &mut NoHooks, None, &exact()).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.upper_bound, b.upper_bound);
        assert_eq!(a.incumbent, b.incumbent);
        assert_eq!(a.lp_iterations, b.lp_iterations);
    }

    #[test]
    fn rejects_bad_config() {
        let inst = generate_instance(3, 1, 5, false).unwrap();
        let model = build_woc_model(&inst, &compute_ranks(&inst));
        let cfg = BnbConfig {
            b: 2.0,
            ..BnbConfig::default()
        };
        assert!(matches!(
            branch_and_bound(&model, &mut NoHooks, None, &cfg),
            Err(EngineError::InvalidConfig(_))
        ));
    }
}
