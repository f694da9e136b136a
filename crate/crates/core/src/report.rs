//! Solution JSON written by `solve` and checked by `verify`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::engine::SolveReport;
use crate::instance::Instance;
use crate::objective::positions_value;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaps {
    pub root_pct: Option<f64>,
    pub final_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    pub status: String,
    pub value: Option<f64>,
    pub open_sites: Vec<usize>,
    /// Serving site per client.
    pub assignment: Vec<usize>,
    /// `(client, site)` per sorted position.
    pub positions: Vec<(usize, usize)>,
    pub bounds: Bounds,
    pub gaps: Gaps,
    pub cuts: usize,
    pub nodes: usize,
    /// Wall time in seconds.
    pub time: f64,
}

impl SolutionJson {
    pub fn from_report(report: &SolveReport) -> Self {
        let inc = report.incumbent.as_ref();
        SolutionJson {
            status: report.status.to_string(),
            value: report.value,
            open_sites: inc.map(|s| s.open.sites().to_vec()).unwrap_or_default(),
            assignment: inc.map(|s| s.assign.clone()).unwrap_or_default(),
            positions: inc.map(|s| s.positions.clone()).unwrap_or_default(),
            bounds: Bounds {
                lower: report.lower_bound.is_finite().then_some(report.lower_bound),
                upper: report.upper_bound,
            },
            gaps: Gaps {
                root_pct: report.gap_root_pct,
                final_pct: report.gap_pct,
            },
            cuts: report.cuts,
            nodes: report.nodes,
            time: report.wall_time.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Infeasible(String),
    Mismatch {
        reported: f64,
        recomputed: f64,
        optimum: f64,
    },
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Checks a claimed solution against the instance and the known optimum:
/// `p` distinct open sites, every client served by an open site, positions
/// listing each client once with nondecreasing costs, and a value that
/// matches both its recomputation and `optimum`.
pub fn verify_solution(instance: &Instance, sol: &SolutionJson, optimum: f64) -> Verdict {
    let n = instance.n();
    let infeasible = |msg: String| Verdict::Infeasible(msg);
    let Some(reported) = sol.value else {
        return infeasible("no solution value".into());
    };
    let open: HashSet<usize> = sol.open_sites.iter().copied().collect();
    if open.len() != sol.open_sites.len() || sol.open_sites.len() != instance.p() {
        return infeasible(format!(
            "{} distinct open sites listed, expected p = {}",
            open.len(),
            instance.p()
        ));
    }
    if let Some(s) = sol.open_sites.iter().find(|&&s| s >= n) {
        return infeasible(format!("site {s} out of range"));
    }
    if sol.assignment.len() != n {
        return infeasible(format!("{} assignments for {n} clients", sol.assignment.len()));
    }
    if let Some(i) = (0..n).find(|&i| !open.contains(&sol.assignment[i])) {
        return infeasible(format!("client {i} served by closed site {}", sol.assignment[i]));
    }
    if sol.positions.len() != n {
        return infeasible(format!("{} positions for {n} clients", sol.positions.len()));
    }
    let mut seen = vec![false; n];
    for (k, &(i, j)) in sol.positions.iter().enumerate() {
        if i >= n || seen[i] || sol.assignment[i] != j {
            return infeasible(format!("position {k} does not match the assignment"));
        }
        seen[i] = true;
    }
    if let Some(k) = sol
        .positions
        .windows(2)
        .position(|w| instance.cost(w[0].0, w[0].1) > instance.cost(w[1].0, w[1].1))
    {
        return infeasible(format!("positions {k} and {} out of order", k + 1));
    }
    let recomputed = positions_value(instance, &sol.positions);
    if !same(reported, recomputed) || !same(recomputed, optimum) {
        return Verdict::Mismatch {
            reported,
            recomputed,
            optimum,
        };
    }
    Verdict::Pass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_instance;
    use crate::objective::{brute_force, evaluate, DEFAULT_SUBSET_LIMIT};

    fn optimal_json(inst: &Instance) -> (SolutionJson, f64) {
        let (opt, open) = brute_force(inst, DEFAULT_SUBSET_LIMIT).unwrap();
        let s = evaluate(inst, &open).unwrap();
        let json = SolutionJson {
            status: "Optimal".into(),
            value: Some(s.value),
            open_sites: s.open.sites().to_vec(),
            assignment: s.assign.clone(),
            positions: s.positions.clone(),
            bounds: Bounds {
                lower: Some(opt),
                upper: Some(opt),
            },
            gaps: Gaps {
                root_pct: Some(0.0),
                final_pct: Some(0.0),
            },
            cuts: 0,
            nodes: 1,
            time: 0.0,
        };
        (json, opt)
    }

    #[test]
    fn optimal_solution_passes_and_round_trips() {
        let inst = generate_instance(6, 2, 3, false).unwrap();
        let (json, opt) = optimal_json(&inst);
        assert_eq!(verify_solution(&inst, &json, opt), Verdict::Pass);
        let text = serde_json::to_string(&json).unwrap();
        let back: SolutionJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back, json);
        for key in ["status", "value", "open_sites", "assignment", "positions", "bounds", "gaps", "cuts", "nodes", "time"] {
            assert!(text.contains(&format!("\"{key}\"")), "{key}");
        }
    }

    #[test]
    fn tampered_value_is_a_mismatch() {
        let inst = generate_instance(6, 2, 4, false).unwrap();
        let (mut json, opt) = optimal_json(&inst);
        json.value = Some(opt - 1.0);
        assert!(matches!(verify_solution(&inst, &json, opt), Verdict::Mismatch { .. }));
    }

    #[test]
    fn suboptimal_value_is_a_mismatch() {
        let inst = generate_instance(6, 2, 4, false).unwrap();
        let (json, opt) = optimal_json(&inst);
        assert!(matches!(verify_solution(&inst, &json, opt - 5.0), Verdict::Mismatch { .. }));
    }

    #[test]
    fn structural_errors_are_infeasible() {
        let inst = generate_instance(6, 2, 5, false).unwrap();
        let (json, opt) = optimal_json(&inst);

        let mut swapped = json.clone();
        let (a, b) = (0, 5);
        if inst.cost(json.positions[a].0, json.positions[a].1) < inst.cost(json.positions[b].0, json.positions[b].1) {
            swapped.positions.swap(a, b);
            assert!(matches!(verify_solution(&inst, &swapped, opt), Verdict::Infeasible(_)));
        }

        let mut extra = json.clone();
        extra.open_sites.push((0..6).find(|s| !json.open_sites.contains(s)).unwrap());
        assert!(matches!(verify_solution(&inst, &extra, opt), Verdict::Infeasible(_)));

        let mut closed = json.clone();
        closed.assignment[0] = (0..6).find(|s| !json.open_sites.contains(s)).unwrap();
        assert!(matches!(verify_solution(&inst, &closed, opt), Verdict::Infeasible(_)));

        let mut none = json;
        none.value = None;
        assert!(matches!(verify_solution(&inst, &none, opt), Verdict::Infeasible(_)));
    }
}
