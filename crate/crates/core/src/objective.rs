//! Ordered median objective and the enumeration oracle.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::Instance;

/// Default cap on the number of `p`-subsets [`brute_force`] will visit.
pub const DEFAULT_SUBSET_LIMIT: u128 = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum ObjectiveError {
    #[error("invalid open set: {0}")]
    InvalidOpenSet(String),
    #[error("enumeration needs {subsets} subsets, limit is {limit}")]
    TooLarge { subsets: u128, limit: u128 },
}

/// Sorted, duplicate-free set of open sites.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OpenSet(Vec<usize>);

impl OpenSet {
    pub fn new(mut sites: Vec<usize>, n: usize) -> Result<Self, ObjectiveError> {
        sites.sort_unstable();
        if let Some(&bad) = sites.iter().find(|&&s| s >= n) {
            return Err(ObjectiveError::InvalidOpenSet(format!(
                "site {bad} is not below n = {n}"
            )));
        }
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(ObjectiveError::InvalidOpenSet("duplicate site".into()));
        }
        Ok(OpenSet(sites))
    }

    pub fn sites(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, site: usize) -> bool {
        self.0.binary_search(&site).is_ok()
    }
}

/// Open sites, client assignment and the sorted positions of the resulting
/// allocation costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedSolution {
    pub open: OpenSet,
    /// `assign[i]` is the site serving client `i`.
    pub assign: Vec<usize>,
    /// `positions[k]` is the `(client, site)` pair whose cost sits in sorted
    /// slot `k`.
    pub positions: Vec<(usize, usize)>,
    pub value: f64,
}

/// `Σ_k λ_k · c(positions[k])`, summed in slot order.
pub fn positions_value(instance: &Instance, positions: &[(usize, usize)]) -> f64 {
    positions
        .iter()
        .zip(instance.lambda())
        .map(|(&(i, j), &w)| w * instance.cost_f64(i, j))
        .sum()
}

/// Evaluates any nonempty site set, regardless of `p`. Clients go to their
/// cheapest site (lowest index on ties); positions sort clients by cost
/// (lowest client on ties).
pub(crate) fn evaluate_sites(instance: &Instance, sites: &[usize]) -> (Vec<usize>, Vec<(usize, usize)>, f64) {
    debug_assert!(!sites.is_empty());
    let n = instance.n();
    let assign: Vec<usize> = (0..n)
        .map(|i| {
            let row = instance.cost_row(i);
            // `sites` is ascending, so min_by_key keeps the lowest index on ties.
            *sites.iter().min_by_key(|&&j| row[j]).unwrap()
        })
        .collect();
    let mut clients: Vec<usize> = (0..n).collect();
    clients.sort_by_key(|&i| instance.cost(i, assign[i]));
    let positions: Vec<(usize, usize)> = clients.into_iter().map(|i| (i, assign[i])).collect();
    let value = positions_value(instance, &positions);
    (assign, positions, value)
}

pub fn evaluate(instance: &Instance, open: &OpenSet) -> Result<OrderedSolution, ObjectiveError> {
    if open.len() != instance.p() {
        return Err(ObjectiveError::InvalidOpenSet(format!(
            "{} sites open, expected p = {}",
            open.len(),
            instance.p()
        )));
    }
    if let Some(&bad) = open.sites().iter().find(|&&s| s >= instance.n()) {
        return Err(ObjectiveError::InvalidOpenSet(format!(
            "site {bad} is not below n = {}",
            instance.n()
        )));
    }
    let (assign, positions, value) = evaluate_sites(instance, open.sites());
    Ok(OrderedSolution {
        open: open.clone(),
        assign,
        positions,
        value,
    })
}

/// `C(n, k)`, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = match acc.checked_mul((n - t) as u128) {
            Some(v) => v / (t as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exact optimum by enumerating every `p`-subset. Ties keep the
/// lexicographically smallest set.
pub fn brute_force(instance: &Instance, subset_limit: u128) -> Result<(f64, OpenSet), ObjectiveError> {
    let subsets = binomial(instance.n(), instance.p());
    if subsets > subset_limit {
        return Err(ObjectiveError::TooLarge {
            subsets,
            limit: subset_limit,
        });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for sites in (0..instance.n()).combinations(instance.p()) {
        let (_, _, value) = evaluate_sites(instance, &sites);
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, sites));
        }
    }
    let (value, sites) = best.expect("at least one subset since 1 <= p <= n");
    Ok((value, OpenSet(sites)))
}
