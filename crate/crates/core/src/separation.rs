//! Separation of strong order constraints.
//!
//! [`separate_soc`] walks all `(n − 1)·n²` rows in `(k, ell)` order and keeps
//! a running left-hand side: moving the threshold from `ell − 1` to `ell`
//! adds `x^k` at rank `ell` and drops `x^{k−1}` at rank `ell − 1`; moving from
//! `(n² − 1, k)` to `(0, k + 1)` adds `x^{k+1}` at rank 0 and drops `x^{k−1}`
//! at rank `n² − 1`. Each row is therefore checked in O(1), O(n³) overall.

use thiserror::Error;

use crate::instance::RankStructure;
use crate::models::{SocCut, VarLayout};
use crate::objective::OrderedSolution;

/// Violation tolerance for fractional points.
pub const FRACTIONAL_EPS: f64 = 1e-6;
/// Distance to {0, 1} under which a value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum SeparationError {
    #[error("threshold b = {0} outside [1, 2)")]
    ThresholdOutOfRange(f64),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("point is not integral")]
    NotIntegral,
    #[error("point does not fill position {position} exactly once")]
    MalformedPoint { position: usize },
}

/// Values of the `x` and `y` variables at a (possibly fractional) LP point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    n: usize,
    /// Indexed like [`VarLayout::x`].
    x: Vec<f64>,
    y: Vec<f64>,
    is_integral: bool,
}

impl Point {
    /// Builds a point from a flat value vector. Values within
    /// [`INTEGRALITY_TOL`] of {0, 1} everywhere make the point integral, in
    /// which case they are rounded exactly.
    pub fn from_values(n: usize, values: &[f64]) -> Self {
        let layout = VarLayout::new(n);
        assert!(values.len() >= layout.num_vars(), "value vector too short");
        let is_integral = values[..layout.num_vars()]
            .iter()
            .all(|&v| (v - v.round()).abs() <= INTEGRALITY_TOL && (-0.5..1.5).contains(&v));
        let clean = |v: f64| if is_integral { v.round() } else { v };
        Point {
            n,
            x: values[..layout.num_x()].iter().map(|&v| clean(v)).collect(),
            y: values[layout.num_x()..layout.num_vars()]
                .iter()
                .map(|&v| clean(v))
                .collect(),
            is_integral,
        }
    }

    /// The 0/1 point encoding an ordered solution.
    pub fn from_solution(n: usize, solution: &OrderedSolution) -> Self {
        let layout = VarLayout::new(n);
        let mut values = vec![0.0; layout.num_vars()];
        for (k, &(i, j)) in solution.positions.iter().enumerate() {
            values[layout.x(i, j, k)] = 1.0;
        }
        for &j in solution.open.sites() {
            values[layout.y(j)] = 1.0;
        }
        Point::from_values(n, &values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn x(&self, client: usize, site: usize, position: usize) -> f64 {
        self.x[(client * self.n + site) * self.n + position]
    }

    pub fn y(&self, site: usize) -> f64 {
        self.y[site]
    }

    pub fn is_integral(&self) -> bool {
        self.is_integral
    }

    /// Flat values in [`VarLayout`] order.
    pub fn to_values(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    /// `x^k` laid out by rank, for each position `k`.
    fn by_rank(&self, ranks: &RankStructure) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|k| ranks.pairs().iter().map(|&(i, j)| self.x(i, j, k)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SeparationStats {
    /// Additions/subtractions spent maintaining left-hand sides.
    pub lhs_updates: usize,
    /// Rows compared against the threshold.
    pub checks: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeparationResult {
    pub cuts: Vec<SocCut>,
    /// Left-hand side of each returned cut at the separated point.
    pub lhs_values: Vec<f64>,
    pub stats: SeparationStats,
}

fn check_threshold(b: f64) -> Result<(), SeparationError> {
    if (1.0..2.0).contains(&b) {
        Ok(())
    } else {
        Err(SeparationError::ThresholdOutOfRange(b))
    }
}

fn check_cut(cut: SocCut, n: usize) -> Result<(), SeparationError> {
    if cut.ell >= n * n || cut.k == 0 || cut.k >= n {
        return Err(SeparationError::IndexOutOfRange(format!(
            "cut (ell = {}, k = {}) for n = {n}",
            cut.ell, cut.k
        )));
    }
    Ok(())
}

/// Violation test shared by both separators: exact against `b` on integral
/// points, with [`FRACTIONAL_EPS`] slack otherwise.
#[inline]
pub fn is_violated(lhs: f64, b: f64, integral: bool) -> bool {
    if integral {
        lhs > b
    } else {
        lhs > b + FRACTIONAL_EPS
    }
}

/// Left-hand side of one SOC by direct summation, O(n²).
pub fn lhs_direct(point: &Point, cut: SocCut, ranks: &RankStructure) -> Result<f64, SeparationError> {
    check_cut(cut, point.n)?;
    let pairs = ranks.pairs();
    let upper: f64 = pairs[..=cut.ell].iter().map(|&(i, j)| point.x(i, j, cut.k)).sum();
    let lower: f64 = pairs[cut.ell..]
        .iter()
        .map(|&(i, j)| point.x(i, j, cut.k - 1))
        .sum();
    Ok(upper + lower)
}

/// All SOC with left-hand side above `b`, in ascending `(k, ell)` order.
pub fn separate_soc(point: &Point, ranks: &RankStructure, b: f64) -> Result<SeparationResult, SeparationError> {
    separate_soc_traced(point, ranks, b, |_, _| {})
}

/// [`separate_soc`], reporting the running left-hand side at every scan
/// position to `trace`.
pub fn separate_soc_traced<F>(
    point: &Point,
    ranks: &RankStructure,
    b: f64,
    mut trace: F,
) -> Result<SeparationResult, SeparationError>
where
    F: FnMut(SocCut, f64),
{
    check_threshold(b)?;
    let n = point.n;
    let mut result = SeparationResult::default();
    if n < 2 {
        return Ok(result);
    }
    let nn = n * n;
    let xr = point.by_rank(ranks);
    let integral = point.is_integral;

    let mut visit = |cut: SocCut, lhs: f64, result: &mut SeparationResult| {
        trace(cut, lhs);
        result.stats.checks += 1;
        if is_violated(lhs, b, integral) {
            result.cuts.push(cut);
            result.lhs_values.push(lhs);
        }
    };

    // (ell = 0, k = 1): every x^0 plus x^1 at rank 0.
    let mut lhs: f64 = xr[0].iter().sum::<f64>() + xr[1][0];
    result.stats.lhs_updates += nn + 1;
    visit(SocCut { ell: 0, k: 1 }, lhs, &mut result);
    for k in 1..n {
        if k > 1 {
            lhs += xr[k][0] - xr[k - 2][nn - 1];
            result.stats.lhs_updates += 2;
            visit(SocCut { ell: 0, k }, lhs, &mut result);
        }
        for ell in 1..nn {
            lhs += xr[k][ell] - xr[k - 1][ell - 1];
            result.stats.lhs_updates += 2;
            visit(SocCut { ell, k }, lhs, &mut result);
        }
    }
    Ok(result)
}

/// Reference separator: [`lhs_direct`] on every row. O(n⁵).
pub fn separate_soc_naive(point: &Point, ranks: &RankStructure, b: f64) -> Result<SeparationResult, SeparationError> {
    check_threshold(b)?;
    let n = point.n;
    let mut result = SeparationResult::default();
    for cut in SocCut::all(n) {
        let lhs = lhs_direct(point, cut, ranks)?;
        result.stats.lhs_updates += n * n + 1;
        result.stats.checks += 1;
        if is_violated(lhs, b, point.is_integral) {
            result.cuts.push(cut);
            result.lhs_values.push(lhs);
        }
    }
    Ok(result)
}

/// Ranks of the pair filling each position of an integral point.
pub fn position_ranks(point: &Point, ranks: &RankStructure) -> Result<Vec<usize>, SeparationError> {
    if !point.is_integral {
        return Err(SeparationError::NotIntegral);
    }
    let n = point.n;
    (0..n)
        .map(|k| {
            let mut filled = ranks
                .pairs()
                .iter()
                .enumerate()
                .filter(|&(_, &(i, j))| point.x(i, j, k) == 1.0)
                .map(|(r, _)| r);
            match (filled.next(), filled.next()) {
                (Some(r), None) => Ok(r),
                _ => Err(SeparationError::MalformedPoint { position: k }),
            }
        })
        .collect()
}

/// True iff the ranks along positions increase, which for an integral point
/// is the same as satisfying every SOC.
pub fn check_ordered_feasibility(point: &Point, ranks: &RankStructure) -> Result<bool, SeparationError> {
    let r = position_ranks(point, ranks)?;
    Ok(r.windows(2).all(|w| w[0] < w[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{compute_ranks, generate_instance, Instance};
    use crate::objective::{evaluate, OpenSet};

    fn two() -> (Instance, RankStructure) {
        let inst = Instance::new("two", 1, vec![vec![0, 5], vec![6, 0]], vec![1.0, 1.0]).unwrap();
        let r = compute_ranks(&inst);
        (inst, r)
    }

    /// x_{0,1} at position 0 and x_{0,0} at position 1.
    fn violating_point() -> Point {
        let l = VarLayout::new(2);
        let mut v = vec![0.0; l.num_vars()];
        v[l.x(0, 1, 0)] = 1.0;
        v[l.x(0, 0, 1)] = 1.0;
        v[l.y(0)] = 1.0;
        Point::from_values(2, &v)
    }

    #[test]
    fn zero_point_has_zero_lhs() {
        let inst = generate_instance(4, 2, 3, false).unwrap();
        let r = compute_ranks(&inst);
        let p = Point::from_values(4, &vec![0.0; VarLayout::new(4).num_vars()]);
        for cut in SocCut::all(4) {
            assert_eq!(lhs_direct(&p, cut, &r).unwrap(), 0.0);
        }
        assert!(separate_soc(&p, &r, 1.0).unwrap().cuts.is_empty());
        assert!(separate_soc_naive(&p, &r, 1.0).unwrap().cuts.is_empty());
    }

    #[test]
    fn hand_sum_on_violating_point() {
        let (_, r) = two();
        let p = violating_point();
        assert_eq!(lhs_direct(&p, SocCut { ell: 0, k: 1 }, &r).unwrap(), 2.0);
        let all: Vec<f64> = SocCut::all(2).map(|c| lhs_direct(&p, c, &r).unwrap()).collect();
        // ranks: (0,0)=0, (1,1)=1, (0,1)=2, (1,0)=3
        assert_eq!(all, vec![2.0, 2.0, 2.0, 1.0]);
        let res = separate_soc(&p, &r, 1.0).unwrap();
        assert!(res.cuts.contains(&SocCut { ell: 0, k: 1 }));
        assert_eq!(res.cuts.len(), 3);
        assert_eq!(res.lhs_values, vec![2.0, 2.0, 2.0]);
        assert!(!check_ordered_feasibility(&p, &r).unwrap());
        assert_eq!(position_ranks(&p, &r).unwrap(), vec![2, 0]);
    }

    #[test]
    fn checks_counter_is_fixed() {
        for n in 2..7 {
            let inst = generate_instance(n, 1, n as u64, false).unwrap();
            let r = compute_ranks(&inst);
            let p = Point::from_values(n, &vec![0.5; VarLayout::new(n).num_vars()]);
            assert_eq!(separate_soc(&p, &r, 1.0).unwrap().stats.checks, (n - 1) * n * n);
            assert_eq!(separate_soc_naive(&p, &r, 1.0).unwrap().stats.checks, (n - 1) * n * n);
        }
    }

    #[test]
    fn threshold_range_enforced() {
        let (_, r) = two();
        let p = violating_point();
        for b in [0.99, 2.0, 2.5, f64::NAN] {
            assert!(matches!(
                separate_soc(&p, &r, b),
                Err(SeparationError::ThresholdOutOfRange(_))
            ));
            assert!(separate_soc_naive(&p, &r, b).is_err());
        }
        assert!(separate_soc(&p, &r, 1.999).is_ok());
    }

    #[test]
    fn lhs_direct_index_errors() {
        let (_, r) = two();
        let p = violating_point();
        assert!(lhs_direct(&p, SocCut { ell: 4, k: 1 }, &r).is_err());
        assert!(lhs_direct(&p, SocCut { ell: 0, k: 0 }, &r).is_err());
    }

    #[test]
    fn ordered_solutions_satisfy_every_soc() {
        // every open site and every assignment at n = 3, p = 1, positions
        // sorted by rank
        let inst = generate_instance(3, 1, 17, false).unwrap();
        let r = compute_ranks(&inst);
        for j in 0..3 {
            let sol = evaluate(&inst, &OpenSet::new(vec![j], 3).unwrap()).unwrap();
            let p = Point::from_solution(3, &sol);
            for cut in SocCut::all(3) {
                assert!(lhs_direct(&p, cut, &r).unwrap() <= 1.0);
            }
            assert!(check_ordered_feasibility(&p, &r).unwrap());
            assert!(separate_soc(&p, &r, 1.0).unwrap().cuts.is_empty());
        }
    }

    #[test]
    fn feasibility_check_by_position_ranks() {
        let inst = generate_instance(3, 3, 2, true).unwrap();
        let r = compute_ranks(&inst);
        let l = VarLayout::new(3);
        let point_for = |order: [(usize, usize); 3]| {
            let mut v = vec![0.0; l.num_vars()];
            for (k, (i, j)) in order.into_iter().enumerate() {
                v[l.x(i, j, k)] = 1.0;
                v[l.y(j)] = 1.0;
            }
            Point::from_values(3, &v)
        };
        let mut pairs = vec![(0, 0), (1, 1), (2, 2)];
        pairs.sort_by_key(|&(i, j)| r.rank(i, j));
        let sorted = point_for([pairs[0], pairs[1], pairs[2]]);
        assert!(check_ordered_feasibility(&sorted, &r).unwrap());
        let swapped = point_for([pairs[1], pairs[0], pairs[2]]);
        assert!(!check_ordered_feasibility(&swapped, &r).unwrap());
        assert!(!separate_soc(&swapped, &r, 1.0).unwrap().cuts.is_empty());
    }

    #[test]
    fn all_open_self_service_greedy_passes() {
        let inst = generate_instance(5, 5, 8, true).unwrap();
        let r = compute_ranks(&inst);
        let sol = evaluate(&inst, &OpenSet::new((0..5).collect(), 5).unwrap()).unwrap();
        assert_eq!(sol.value, 0.0);
        let p = Point::from_solution(5, &sol);
        assert!(check_ordered_feasibility(&p, &r).unwrap());
    }

    #[test]
    fn fractional_point_is_not_checked_for_order() {
        let (_, r) = two();
        let p = Point::from_values(2, &[0.5; 10]);
        assert!(!p.is_integral());
        assert_eq!(check_ordered_feasibility(&p, &r), Err(SeparationError::NotIntegral));
        let empty = Point::from_values(2, &[0.0; 10]);
        assert_eq!(
            check_ordered_feasibility(&empty, &r),
            Err(SeparationError::MalformedPoint { position: 0 })
        );
    }

    #[test]
    fn integral_rounding() {
        let mut v = vec![0.0; 10];
        v[0] = 1.0 - 1e-9;
        v[3] = 2e-8;
        let p = Point::from_values(2, &v);
        assert!(p.is_integral());
        assert_eq!(p.to_values()[0], 1.0);
        assert_eq!(p.to_values()[3], 0.0);
    }
}
