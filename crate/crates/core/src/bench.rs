//! Benchmark sweeps: one CSV row per (instance, method, strategy, b) plus
//! mean rows per group.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use csv::Error as CsvError;

use crate::engine::{SolveReport, Strategy};
use crate::instance::Instance;
use crate::methods::{solve, Method, SolveConfig};

pub const CSV_HEADER: [&str; 15] = [
    "instance",
    "n",
    "p",
    "method",
    "strategy",
    "b",
    "status",
    "time_s",
    "value",
    "best_bound",
    "gap_root_pct",
    "gap_pct",
    "orig_cons",
    "cuts",
    "nodes",
];

/// Label used in the `instance` column of aggregate rows.
pub const MEAN_LABEL: &str = "MEAN";

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub strategies: Vec<Strategy>,
    pub thresholds: Vec<f64>,
    pub solve: SolveConfig,
    /// Worker threads; 1 runs inline.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: Method::ALL.to_vec(),
            strategies: vec![Strategy::Pool, Strategy::Callback],
            thresholds: vec![1.0],
            solve: SolveConfig::default(),
            jobs: 1,
        }
    }
}

/// One CSV line. Numeric fields are `None` when unavailable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub n: usize,
    pub p: usize,
    pub method: String,
    pub strategy: String,
    pub b: String,
    pub status: String,
    pub time_s: f64,
    pub value: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap_root_pct: Option<f64>,
    pub gap_pct: Option<f64>,
    pub orig_cons: Option<f64>,
    pub cuts: Option<f64>,
    pub nodes: Option<f64>,
}

impl BenchRow {
    fn group(&self) -> (usize, usize, &str, &str, &str) {
        (self.n, self.p, &self.method, &self.strategy, &self.b)
    }

    fn fields(&self) -> Vec<String> {
        let num = |v: Option<f64>| v.map(|x| fmt_num(x)).unwrap_or_default();
        vec![
            self.instance.clone(),
            self.n.to_string(),
            self.p.to_string(),
            self.method.clone(),
            self.strategy.clone(),
            self.b.clone(),
            self.status.clone(),
            format!("{:.3}", self.time_s),
            num(self.value),
            num(self.best_bound),
            num(self.gap_root_pct),
            num(self.gap_pct),
            num(self.orig_cons),
            num(self.cuts),
            num(self.nodes),
        ]
    }
}

/// Integers print without a fractional part, everything else with six
/// decimals, so output is stable across runs.
fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.6}")
    }
}

/// `(method, strategy, b)` combinations, skipping choices a method ignores.
pub fn combinations(config: &BenchConfig) -> Vec<(Method, Option<Strategy>, Option<f64>)> {
    let mut out = Vec::new();
    for &m in &config.methods {
        let strategies: Vec<Option<Strategy>> = if m.uses_strategy() {
            config.strategies.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for s in strategies {
            if m.uses_threshold() {
                out.extend(config.thresholds.iter().map(|&b| (m, s, Some(b))));
            } else {
                out.push((m, s, None));
            }
        }
    }
    out
}

fn row_for(
    instance: &Instance,
    method: Method,
    strategy: Option<Strategy>,
    b: Option<f64>,
    result: Result<&SolveReport, &String>,
) -> BenchRow {
    let mut row = BenchRow {
        instance: instance.name().to_string(),
        n: instance.n(),
        p: instance.p(),
        method: method.to_string(),
        strategy: strategy.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
        b: b.map(|b| format!("{b:.2}")).unwrap_or_else(|| "-".into()),
        status: String::new(),
        time_s: 0.0,
        value: None,
        best_bound: None,
        gap_root_pct: None,
        gap_pct: None,
        orig_cons: None,
        cuts: None,
        nodes: None,
    };
    match result {
        Ok(r) => {
            row.status = r.status.to_string();
            row.time_s = r.wall_time.as_secs_f64();
            row.value = r.value;
            row.best_bound = r.lower_bound.is_finite().then_some(r.lower_bound);
            row.gap_root_pct = r.gap_root_pct;
            row.gap_pct = r.gap_pct;
            row.orig_cons = Some(r.orig_cons as f64);
            row.cuts = Some(r.cuts as f64);
            row.nodes = Some(r.nodes as f64);
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

/// Solves every instance with every combination. Rows come back in input
/// order whatever `jobs` is; a failing solve becomes an `error:` row.
pub fn run_bench(instances: &[Instance], config: &BenchConfig) -> Vec<BenchRow> {
    run_bench_with_reports(instances, config)
        .into_iter()
        .map(|(row, _)| row)
        .collect()
}

/// [`run_bench`], also returning each solve's full report.
pub fn run_bench_with_reports(
    instances: &[Instance],
    config: &BenchConfig,
) -> Vec<(BenchRow, Result<SolveReport, String>)> {
    let combos = combinations(config);
    let tasks: Vec<(&Instance, (Method, Option<Strategy>, Option<f64>))> = instances
        .iter()
        .flat_map(|inst| combos.iter().map(move |&c| (inst, c)))
        .collect();
    let work = |&(inst, (m, s, b)): &(&Instance, (Method, Option<Strategy>, Option<f64>))| {
        let res = solve(inst, m, s.unwrap_or(Strategy::Callback), b.unwrap_or(1.0), &config.solve)
            .map_err(|e| e.to_string());
        (row_for(inst, m, s, b, res.as_ref()), res)
    };
    if config.jobs <= 1 {
        return tasks.iter().map(work).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build() {
        Ok(pool) => pool.install(|| tasks.par_iter().map(work).collect()),
        Err(_) => tasks.iter().map(work).collect(),
    }
}

/// Mean row per `(n, p, method, strategy, b)` group, in order of first
/// appearance. Means skip missing values; the status counts optimal runs.
pub fn aggregate(rows: &[BenchRow]) -> Vec<BenchRow> {
    let mut groups: Vec<Vec<&BenchRow>> = Vec::new();
    for row in rows.iter().filter(|r| r.instance != MEAN_LABEL) {
        match groups.iter_mut().find(|g| g[0].group() == row.group()) {
            Some(g) => g.push(row),
            None => groups.push(vec![row]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let mean = |f: fn(&BenchRow) -> Option<f64>| {
                let vals: Vec<f64> = g.iter().filter_map(|r| f(r)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            let optimal = g.iter().filter(|r| r.status == "Optimal").count();
            let first = g[0];
            BenchRow {
                instance: MEAN_LABEL.into(),
                n: first.n,
                p: first.p,
                method: first.method.clone(),
                strategy: first.strategy.clone(),
                b: first.b.clone(),
                status: format!("optimal {optimal}/{}", g.len()),
                time_s: g.iter().map(|r| r.time_s).sum::<f64>() / g.len() as f64,
                value: mean(|r| r.value),
                best_bound: mean(|r| r.best_bound),
                gap_root_pct: mean(|r| r.gap_root_pct),
                gap_pct: mean(|r| r.gap_pct),
                orig_cons: mean(|r| r.orig_cons),
                cuts: mean(|r| r.cuts),
                nodes: mean(|r| r.nodes),
            }
        })
        .collect()
}

/// Writes the header, `rows`, then their aggregate rows.
pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    write_csv_with(rows, out, true)
}

/// Like [`write_csv`]; with `include_time = false` the `time_s` column is
/// left empty, which makes repeated runs byte-identical.
pub fn write_csv_with<W: Write>(rows: &[BenchRow], out: W, include_time: bool) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    let means = aggregate(rows);
    for row in rows.iter().chain(&means) {
        let mut fields = row.fields();
        if !include_time {
            fields[7].clear();
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}
