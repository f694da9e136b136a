//! SOC cut hooks in the two flavours compared by the benchmarks: a stored
//! pool scanned row by row, and the telescoping separator called on demand.

use std::collections::HashSet;

use super::{BnbConfig, CutHooks, Strategy};
use crate::instance::RankStructure;
use crate::models::{materialize_cut, Row, SocCut};
use crate::separation::{check_ordered_feasibility, is_violated, separate_soc, Point};

/// Where violated SOC come from.
#[derive(Debug, Clone)]
pub enum CutSource {
    /// Materialized rows, scanned in stored order.
    Pool(Vec<(SocCut, Row)>),
    Callback,
}

/// What to do with an integral LP point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CandidateMode {
    /// Return violated SOC at threshold `b`; accept only if none.
    Separate { b: f64 },
    /// Accept, recording whether the point is order-consistent.
    AssertOrdered,
    /// Accept unconditionally.
    Accept,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HookStats {
    pub root_rounds: usize,
    pub root_cuts: usize,
    pub candidates: usize,
    pub candidate_cuts: usize,
    /// Rows returned for each integral candidate, in call order.
    pub cuts_per_candidate: Vec<usize>,
    /// Candidates that failed the order check in `AssertOrdered` mode.
    pub assertion_failures: usize,
}

/// Hooks separating SOC at the root and, optionally, at integral candidates.
#[derive(Debug, Clone)]
pub struct SocHooks {
    ranks: RankStructure,
    source: CutSource,
    root_enabled: bool,
    candidate: CandidateMode,
    cap: usize,
    added: HashSet<SocCut>,
    stats: HookStats,
}

impl SocHooks {
    pub fn new(ranks: RankStructure, source: CutSource, candidate: CandidateMode, cap: usize) -> Self {
        SocHooks {
            ranks,
            source,
            root_enabled: true,
            candidate,
            cap,
            added: HashSet::new(),
            stats: HookStats::default(),
        }
    }

    /// Builds the hooks matching `config.strategy`.
    pub fn for_strategy(ranks: &RankStructure, config: &BnbConfig, candidate: CandidateMode) -> Self {
        match config.strategy {
            Strategy::Pool => pool_strategy(SocCut::all(ranks.n()).collect(), ranks, config, candidate),
            Strategy::Callback => callback_strategy(ranks, config, candidate),
        }
    }

    pub fn with_root(mut self, enabled: bool) -> Self {
        self.root_enabled = enabled;
        self
    }

    pub fn stats(&self) -> &HookStats {
        &self.stats
    }

    /// Rows held by the pool; zero for the callback.
    pub fn pool_len(&self) -> usize {
        match &self.source {
            CutSource::Pool(rows) => rows.len(),
            CutSource::Callback => 0,
        }
    }

    /// Violated, not yet added SOC at `point`, at most `cap` of them.
    pub fn violated(&self, point: &Point, b: f64) -> Vec<(SocCut, Row)> {
        let mut out = Vec::new();
        match &self.source {
            CutSource::Pool(rows) => {
                let values = point.to_values();
                let integral = point.is_integral();
                for (cut, row) in rows {
                    if out.len() >= self.cap {
                        break;
                    }
                    if !self.added.contains(cut) && is_violated(row.activity(&values), b, integral) {
                        out.push((*cut, row.clone()));
                    }
                }
            }
            CutSource::Callback => {
                let found = separate_soc(point, &self.ranks, b).expect("threshold checked by config");
                for cut in found.cuts {
                    if out.len() >= self.cap {
                        break;
                    }
                    if !self.added.contains(&cut) {
                        let row = materialize_cut(cut, &self.ranks).expect("separator yields in-range cuts");
                        out.push((cut, row));
                    }
                }
            }
        }
        out
    }

    fn take(&mut self, found: Vec<(SocCut, Row)>) -> Vec<Row> {
        found
            .into_iter()
            .map(|(cut, row)| {
                self.added.insert(cut);
                row
            })
            .collect()
    }
}

impl CutHooks for SocHooks {
    fn on_root_fractional(&mut self, values: &[f64]) -> Vec<Row> {
        if !self.root_enabled {
            return Vec::new();
        }
        let point = Point::from_values(self.ranks.n(), values);
        // fractional points are always separated at 1 (+ tolerance)
        let rows = self.take(self.violated(&point, 1.0));
        self.stats.root_rounds += 1;
        self.stats.root_cuts += rows.len();
        rows
    }

    fn on_integer_candidate(&mut self, values: &[f64]) -> Vec<Row> {
        self.stats.candidates += 1;
        let rows = match self.candidate {
            CandidateMode::Accept => Vec::new(),
            CandidateMode::AssertOrdered => {
                let point = Point::from_values(self.ranks.n(), values);
                if !check_ordered_feasibility(&point, &self.ranks).unwrap_or(false) {
                    self.stats.assertion_failures += 1;
                }
                Vec::new()
            }
            CandidateMode::Separate { b } => {
                let point = Point::from_values(self.ranks.n(), values);
                self.take(self.violated(&point, b))
            }
        };
        self.stats.candidate_cuts += rows.len();
        self.stats.cuts_per_candidate.push(rows.len());
        rows
    }
}

/// Hooks scanning a pool of materialized SOC rows in ascending `(k, ell)`.
pub fn pool_strategy(
    mut all_cuts: Vec<SocCut>,
    ranks: &RankStructure,
    config: &BnbConfig,
    candidate: CandidateMode,
) -> SocHooks {
    all_cuts.sort_by_key(|c| (c.k, c.ell));
    all_cuts.dedup();
    let rows = all_cuts
        .into_iter()
        .filter_map(|cut| materialize_cut(cut, ranks).ok().map(|row| (cut, row)))
        .collect();
    SocHooks::new(ranks.clone(), CutSource::Pool(rows), candidate, config.cuts_per_round)
}

/// Hooks calling the separator and materializing only what it returns.
pub fn callback_strategy(ranks: &RankStructure, config: &BnbConfig, candidate: CandidateMode) -> SocHooks {
    SocHooks::new(ranks.clone(), CutSource::Callback, candidate, config.cuts_per_round)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{compute_ranks, generate_instance};
    use crate::models::VarLayout;
    use crate::objective::{evaluate, OpenSet};
    use crate::separation::separate_soc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let l = VarLayout::new(n);
        let mut v = vec![0.0; l.num_vars()];
        for x in v.iter_mut() {
            if rng.random_bool(0.1) {
                *x = rng.random_range(0.0..1.0);
            }
        }
        v
    }

    fn config(cap: usize) -> BnbConfig {
        BnbConfig {
            cuts_per_round: cap,
            ..BnbConfig::default()
        }
    }

    #[test]
    fn pool_holds_every_soc() {
        let inst = generate_instance(6, 2, 3, false).unwrap();
        let ranks = compute_ranks(&inst);
        let hooks = pool_strategy(SocCut::all(6).collect(), &ranks, &config(500), CandidateMode::Accept);
        assert_eq!(hooks.pool_len(), 180);
        assert_eq!(callback_strategy(&ranks, &config(500), CandidateMode::Accept).pool_len(), 0);
    }

    #[test]
    fn empty_pool_is_a_no_op() {
        let inst = generate_instance(4, 2, 3, false).unwrap();
        let ranks = compute_ranks(&inst);
        let mut hooks = pool_strategy(Vec::new(), &ranks, &config(500), CandidateMode::Separate { b: 1.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_point(4, &mut rng);
        assert!(hooks.on_root_fractional(&v).is_empty());
        assert!(hooks.on_integer_candidate(&vec![1.0; v.len()]).is_empty());
    }

    #[test]
    fn pool_and_callback_agree_up_to_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [3, 4, 5] {
            let inst = generate_instance(n, 2, n as u64, false).unwrap();
            let ranks = compute_ranks(&inst);
            for cap in [3, 500] {
                let pool = pool_strategy(SocCut::all(n).collect(), &ranks, &config(cap), CandidateMode::Accept);
                let cb = callback_strategy(&ranks, &config(cap), CandidateMode::Accept);
                for _ in 0..50 {
                    let v = random_point(n, &mut rng);
                    let point = Point::from_values(n, &v);
                    let a: Vec<SocCut> = pool.violated(&point, 1.0).into_iter().map(|c| c.0).collect();
                    let b: Vec<SocCut> = cb.violated(&point, 1.0).into_iter().map(|c| c.0).collect();
                    assert_eq!(a, b);
                    let all = separate_soc(&point, &ranks, 1.0).unwrap().cuts;
                    assert_eq!(a, all.into_iter().take(cap).collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn returned_rows_are_violated_and_not_repeated() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = generate_instance(5, 2, 8, false).unwrap();
        let ranks = compute_ranks(&inst);
        let mut hooks = callback_strategy(&ranks, &config(500), CandidateMode::Accept);
        let mut seen = 0;
        for _ in 0..20 {
            let v = random_point(5, &mut rng);
            let rows = hooks.on_root_fractional(&v);
            for row in &rows {
                assert!(row.activity(&v) > 1.0 + 1e-6);
            }
            seen += rows.len();
            // the same point yields nothing new
            assert!(hooks.on_root_fractional(&v).is_empty());
        }
        assert_eq!(hooks.stats().root_cuts, seen);
    }

    #[test]
    fn ordered_candidates_pass_assertion() {
        let inst = generate_instance(5, 2, 2, false).unwrap();
        let ranks = compute_ranks(&inst);
        let mut hooks = callback_strategy(&ranks, &config(500), CandidateMode::AssertOrdered);
        let sol = evaluate(&inst, &OpenSet::new(vec![1, 3], 5).unwrap()).unwrap();
        let v = Point::from_solution(5, &sol).to_values();
        assert!(hooks.on_integer_candidate(&v).is_empty());
        assert_eq!(hooks.stats().assertion_failures, 0);

        // swap the first two positions: order broken
        let l = VarLayout::new(5);
        let mut bad = v.clone();
        let (i0, j0) = sol.positions[0];
        let (i1, j1) = sol.positions[1];
        if inst.cost(i0, j0) < inst.cost(i1, j1) {
            bad[l.x(i0, j0, 0)] = 0.0;
            bad[l.x(i1, j1, 1)] = 0.0;
            bad[l.x(i0, j0, 1)] = 1.0;
            bad[l.x(i1, j1, 0)] = 1.0;
            hooks.on_integer_candidate(&bad);
            assert_eq!(hooks.stats().assertion_failures, 1);
        }
    }

    #[test]
    fn higher_threshold_adds_a_subset() {
        let inst = generate_instance(5, 2, 21, false).unwrap();
        let ranks = compute_ranks(&inst);
        let l = VarLayout::new(5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            // integral point with random positions
            let mut v = vec![0.0; l.num_vars()];
            let mut perm: Vec<usize> = (0..5).collect();
            for i in (1..5).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            for (i, &k) in perm.iter().enumerate() {
                v[l.x(i, rng.random_range(0..5), k)] = 1.0;
            }
            let run = |b: f64| {
                let mut h = callback_strategy(&ranks, &config(500), CandidateMode::Separate { b });
                h.on_integer_candidate(&v)
            };
            let lo = run(1.0);
            let hi = run(1.3);
            assert!(hi.len() <= lo.len());
            assert!(hi.iter().all(|r| lo.contains(r)));
        }
    }
}
