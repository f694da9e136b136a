//! Greedy randomized construction with swap local search, used to seed the
//! exact methods with an upper bound.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instance::Instance;
use crate::objective::{evaluate, evaluate_sites, OpenSet, OrderedSolution};

pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_ITERATIONS: usize = 50;

fn sites_value(instance: &Instance, sites: &[usize]) -> f64 {
    evaluate_sites(instance, sites).2
}

/// Opens `p` sites one at a time. Each step ranks the closed sites by the
/// ordered median value after opening them and draws from those within
/// `alpha` of the best; without `rng` the best (lowest index on ties) is taken.
pub fn greedy_construct<R: Rng>(instance: &Instance, alpha: f64, mut rng: Option<&mut R>) -> Vec<usize> {
    let n = instance.n();
    let mut open: Vec<usize> = Vec::with_capacity(instance.p());
    let mut trial = Vec::with_capacity(instance.p());
    while open.len() < instance.p() {
        let scored: Vec<(usize, f64)> = (0..n)
            .filter(|s| !open.contains(s))
            .map(|s| {
                trial.clear();
                trial.extend_from_slice(&open);
                trial.push(s);
                (s, sites_value(instance, &trial))
            })
            .collect();
        let best = scored.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        let worst = scored.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let pick = match rng.as_deref_mut() {
            Some(rng) => {
                let limit = best + alpha * (worst - best);
                let rcl: Vec<usize> = scored.iter().filter(|c| c.1 <= limit).map(|c| c.0).collect();
                rcl[rng.random_range(0..rcl.len())]
            }
            None => scored.iter().find(|c| c.1 == best).map(|c| c.0).unwrap(),
        };
        open.push(pick);
    }
    open.sort_unstable();
    open
}

/// First-improving exchange of one open for one closed site, repeated until
/// no exchange improves.
pub fn swap_local_search(instance: &Instance, mut open: Vec<usize>) -> Vec<usize> {
    let n = instance.n();
    let mut current = sites_value(instance, &open);
    'outer: loop {
        for slot in 0..open.len() {
            for site in 0..n {
                if open.contains(&site) {
                    continue;
                }
                let old = open[slot];
                open[slot] = site;
                let value = sites_value(instance, &open);
                if value < current {
                    current = value;
                    continue 'outer;
                }
                open[slot] = old;
            }
        }
        break;
    }
    open.sort_unstable();
    open
}

/// Best of `iterations` construct-and-improve rounds. The first round is
/// the deterministic greedy, the rest are randomized; `iterations = 0`
/// returns the plain greedy solution without local search.
pub fn warm_start_heuristic(instance: &Instance, iterations: usize, alpha: f64, seed: u64) -> OrderedSolution {
    let alpha = alpha.clamp(0.0, 1.0);
    let greedy = greedy_construct::<ChaCha8Rng>(instance, alpha, None);
    if iterations == 0 {
        return finish(instance, greedy);
    }
    let mut best = swap_local_search(instance, greedy);
    let mut best_value = sites_value(instance, &best);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 1..iterations {
        let start = greedy_construct(instance, alpha, Some(&mut rng));
        let cand = swap_local_search(instance, start);
        let value = sites_value(instance, &cand);
        if value < best_value {
            best = cand;
            best_value = value;
        }
    }
    finish(instance, best)
}

fn finish(instance: &Instance, open: Vec<usize>) -> OrderedSolution {
    let open = OpenSet::new(open, instance.n()).expect("p distinct sites");
    evaluate(instance, &open).expect("valid open set")
}
