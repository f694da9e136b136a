//! Problem data: clients/sites, allocation costs, ordered weights.
//!
//! Indices are 0-based throughout the crate: clients and sites are `0..n`,
//! sorted positions are `0..n` and ranks are `0..n²`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid instance: {0}")]
    Validation(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A DOMP instance. Every client is also a candidate site.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    name: String,
    n: usize,
    p: usize,
    /// Row-major `n × n`; `costs[i * n + j]` serves client `i` from site `j`.
    costs: Vec<i64>,
    lambda: Vec<f64>,
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        p: usize,
        costs: Vec<Vec<i64>>,
        lambda: Vec<f64>,
    ) -> Result<Self, InstanceError> {
        let n = costs.len();
        if n == 0 {
            return Err(InstanceError::Validation("n must be at least 1".into()));
        }
        if let Some(i) = costs.iter().position(|row| row.len() != n) {
            return Err(InstanceError::Validation(format!(
                "cost row {i} has {} entries, expected {n}",
                costs[i].len()
            )));
        }
        let instance = Instance {
            name: name.into(),
            n,
            p,
            costs: costs.into_iter().flatten().collect(),
            lambda,
        };
        instance.validate()?;
        Ok(instance)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let n = self.n;
        if self.p < 1 || self.p > n {
            return Err(InstanceError::Validation(format!(
                "p = {} is outside 1..={n}",
                self.p
            )));
        }
        if self.lambda.len() != n {
            return Err(InstanceError::Validation(format!(
                "lambda has {} entries, expected {n}",
                self.lambda.len()
            )));
        }
        if let Some(k) = self
            .lambda
            .iter()
            .position(|&w| !w.is_finite() || w < 0.0)
        {
            return Err(InstanceError::Validation(format!(
                "lambda[{k}] = {} is not a nonnegative finite weight",
                self.lambda[k]
            )));
        }
        if let Some(idx) = self.costs.iter().position(|&c| c < 0) {
            return Err(InstanceError::Validation(format!(
                "cost[{}][{}] = {} is negative",
                idx / n,
                idx % n,
                self.costs[idx]
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn cost(&self, client: usize, site: usize) -> i64 {
        self.costs[client * self.n + site]
    }

    /// Cost widened to a real for objective and LP coefficients.
    #[inline]
    pub fn cost_f64(&self, client: usize, site: usize) -> f64 {
        self.cost(client, site) as f64
    }

    pub fn cost_row(&self, client: usize) -> &[i64] {
        &self.costs[client * self.n..(client + 1) * self.n]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Same costs and `p`, different weights.
    pub fn with_lambda(&self, lambda: Vec<f64>) -> Result<Self, InstanceError> {
        let inst = Instance {
            lambda,
            ..self.clone()
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Parse the canonical text form. The instance name is not part of the
    /// format and must be supplied by the caller.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, InstanceError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (line_no, header) = lines.next().ok_or(InstanceError::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let header: Vec<usize> = parse_fields(line_no, header)?;
        let [n, p] = header[..] else {
            return Err(InstanceError::Parse {
                line: line_no,
                msg: format!("expected `n p`, found {} fields", header.len()),
            });
        };
        if n == 0 {
            return Err(InstanceError::Validation("n must be at least 1".into()));
        }

        let (line_no, weights) = lines.next().ok_or(InstanceError::Parse {
            line: line_no + 1,
            msg: "missing lambda line".into(),
        })?;
        let lambda: Vec<f64> = parse_fields(line_no, weights)?;
        if lambda.len() != n {
            return Err(InstanceError::Parse {
                line: line_no,
                msg: format!("expected {n} weights, found {}", lambda.len()),
            });
        }

        let mut costs = Vec::with_capacity(n);
        for row in 0..n {
            let (line_no, l) = lines.next().ok_or(InstanceError::Parse {
                line: line_no + row + 1,
                msg: format!("missing cost row {row}"),
            })?;
            let values: Vec<i64> = parse_fields(line_no, l)?;
            if values.len() != n {
                return Err(InstanceError::Parse {
                    line: line_no,
                    msg: format!("expected {n} costs, found {}", values.len()),
                });
            }
            costs.push(values);
        }
        if let Some((line_no, _)) = lines.next() {
            return Err(InstanceError::Parse {
                line: line_no,
                msg: "trailing data after cost matrix".into(),
            });
        }
        Instance::new(name, p, costs, lambda)
    }

    /// Canonical text form: single spaces, one trailing newline.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.p);
        out.push_str(&join(self.lambda.iter()));
        out.push('\n');
        for i in 0..self.n {
            out.push_str(&join(self.cost_row(i).iter()));
            out.push('\n');
        }
        out
    }
}

fn parse_fields<T: std::str::FromStr>(line: usize, text: &str) -> Result<Vec<T>, InstanceError>
where
    T::Err: std::fmt::Display,
{
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<T>().map_err(|e| InstanceError::Parse {
                line,
                msg: format!("bad value `{tok}`: {e}"),
            })
        })
        .collect()
}

fn join<T: std::fmt::Display>(values: impl Iterator<Item = T>) -> String {
    let mut s = String::new();
    for (idx, v) in values.enumerate() {
        if idx > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

/// Reads an instance; the file stem becomes its name.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, InstanceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Instance::parse(name, &text)
}

pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), InstanceError> {
    fs::write(path, instance.to_text())?;
    Ok(())
}

/// Random instance: weights uniform on `[n/4, n]`, integer costs uniform on
/// `[1, 1000]`, optionally with free self-service on the diagonal.
pub fn generate_instance(
    n: usize,
    p: usize,
    seed: u64,
    self_service_zero: bool,
) -> Result<Instance, InstanceError> {
    if n == 0 || p == 0 || p > n {
        return Err(InstanceError::InvalidParams(format!(
            "need 1 <= p <= n, got n = {n}, p = {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = n as f64 / 4.0;
    let hi = n as f64;
    let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    let costs: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let c = rng.random_range(1..=1000);
                    if self_service_zero && i == j {
                        0
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect();
    Instance::new(format!("domp_n{n}_p{p}_s{seed}"), p, costs, lambda)
}

/// Bijection between allocation pairs and their rank in the nondecreasing
/// cost order. Equal costs are ordered by `(client, site)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankStructure {
    n: usize,
    /// `rank_of[i * n + j]`
    rank_of: Vec<usize>,
    pair_at: Vec<(usize, usize)>,
}

impl RankStructure {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of ranks, `n²`.
    pub fn len(&self) -> usize {
        self.pair_at.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pair_at.is_empty()
    }

    #[inline]
    pub fn rank(&self, client: usize, site: usize) -> usize {
        self.rank_of[client * self.n + site]
    }

    #[inline]
    pub fn pair_at(&self, rank: usize) -> (usize, usize) {
        self.pair_at[rank]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pair_at
    }
}

pub fn compute_ranks(instance: &Instance) -> RankStructure {
    let n = instance.n();
    let mut pair_at: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    // Stable sort over lexicographic input keeps the (i, j) tie-break.
    pair_at.sort_by_key(|&(i, j)| instance.cost(i, j));
    let mut rank_of = vec![0; n * n];
    for (rank, &(i, j)) in pair_at.iter().enumerate() {
        rank_of[i * n + j] = rank;
    }
    RankStructure {
        n,
        rank_of,
        pair_at,
    }
}
