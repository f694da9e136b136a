//! Three-index MILP formulations.
//!
//! All three share the assignment/position/linking/cardinality rows. The SOC
//! formulation adds one set-packing row per (rank threshold, position), the
//! WOC formulation adds one aggregated row per position, and the relaxed
//! formulation adds nothing (it is a `p`-median model with positions).

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::instance::{Instance, RankStructure};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

/// Sparse constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coefs.iter().map(|&(v, a)| a * values[v]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    Soc,
    Woc,
    Relax,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Soc => "DOMP_SOC",
            Formulation::Woc => "DOMP_WOC",
            Formulation::Relax => "DOMP_relax",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Client `client` served by `site`, cost in sorted slot `position`.
    X {
        client: usize,
        site: usize,
        position: usize,
    },
    Y {
        site: usize,
    },
}

/// Flat variable numbering: `x[i][j][k]` occupy `0..n³` in row-major order,
/// `y[j]` follow at `n³ + j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    n: usize,
}

impl VarLayout {
    pub fn new(n: usize) -> Self {
        VarLayout { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_x(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn num_vars(&self) -> usize {
        self.num_x() + self.n
    }

    #[inline]
    pub fn x(&self, client: usize, site: usize, position: usize) -> usize {
        (client * self.n + site) * self.n + position
    }

    #[inline]
    pub fn y(&self, site: usize) -> usize {
        self.num_x() + site
    }

    pub fn is_y(&self, flat: usize) -> bool {
        flat >= self.num_x()
    }

    pub fn decode(&self, flat: usize) -> Option<VarKind> {
        let n = self.n;
        if flat < self.num_x() {
            Some(VarKind::X {
                client: flat / (n * n),
                site: (flat / n) % n,
                position: flat % n,
            })
        } else if flat < self.num_vars() {
            Some(VarKind::Y {
                site: flat - self.num_x(),
            })
        } else {
            None
        }
    }

    pub fn name(&self, flat: usize) -> String {
        match self.decode(flat) {
            Some(VarKind::X {
                client,
                site,
                position,
            }) => format!("x_{client}_{site}_{position}"),
            Some(VarKind::Y { site }) => format!("y_{site}"),
            None => format!("v{flat}"),
        }
    }
}

/// A strong order constraint, identified by the rank threshold `ell` and the
/// later of its two positions `k` (`k ≥ 1`; the row also covers `k − 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SocCut {
    pub ell: usize,
    pub k: usize,
}

impl SocCut {
    /// Every SOC in ascending `(k, ell)` order.
    pub fn all(n: usize) -> impl Iterator<Item = SocCut> {
        (1..n).flat_map(move |k| (0..n * n).map(move |ell| SocCut { ell, k }))
    }
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    layout: VarLayout,
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub binary: Vec<bool>,
    pub formulation: Formulation,
    /// Rows shared by every formulation.
    pub base_rows: usize,
}

impl MilpModel {
    pub fn layout(&self) -> VarLayout {
        self.layout
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Rows present before any cut or lazy constraint is added.
    pub fn orig_cons(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, v)| c * v).sum()
    }

    /// Row sets without the shared base rows.
    pub fn order_rows(&self) -> &[Row] {
        &self.rows[self.base_rows..]
    }

    /// Writes the model in CPLEX LP text format.
    pub fn write_lp<W: Write>(&self, mut out: W) -> io::Result<()> {
        let layout = self.layout;
        writeln!(out, "\\ {}", self.formulation)?;
        writeln!(out, "Minimize")?;
        write!(out, " obj:")?;
        let terms: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(v, &c)| (v, c))
            .collect();
        write_terms(&mut out, &layout, &terms)?;
        writeln!(out)?;
        writeln!(out, "Subject To")?;
        for (r, row) in self.rows.iter().enumerate() {
            write!(out, " c{r}:")?;
            write_terms(&mut out, &layout, &row.coefs)?;
            writeln!(out, " {} {}", row.sense, row.rhs)?;
        }
        writeln!(out, "Bounds")?;
        for v in 0..self.num_vars() {
            writeln!(out, " {} <= {} <= {}", self.lower[v], layout.name(v), self.upper[v])?;
        }
        writeln!(out, "Binary")?;
        for v in (0..self.num_vars()).filter(|&v| self.binary[v]) {
            writeln!(out, " {}", layout.name(v))?;
        }
        writeln!(out, "End")
    }
}

fn write_terms<W: Write>(out: &mut W, layout: &VarLayout, terms: &[(usize, f64)]) -> io::Result<()> {
    if terms.is_empty() {
        return write!(out, " 0 {}", layout.name(0));
    }
    for (idx, &(v, a)) in terms.iter().enumerate() {
        if idx > 0 && idx % 8 == 0 {
            write!(out, "\n   ")?;
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        write!(out, " {sign} {} {}", a.abs(), layout.name(v))?;
    }
    Ok(())
}

/// Assignment, position, linking and cardinality rows with binary bounds.
pub fn build_base(instance: &Instance, _ranks: &RankStructure) -> MilpModel {
    let n = instance.n();
    let layout = VarLayout::new(n);
    let mut objective = vec![0.0; layout.num_vars()];
    for i in 0..n {
        for j in 0..n {
            let c = instance.cost_f64(i, j);
            for (k, &w) in instance.lambda().iter().enumerate() {
                objective[layout.x(i, j, k)] = w * c;
            }
        }
    }

    let mut rows = Vec::with_capacity(n * n + 2 * n + 1);
    // each client in exactly one (site, position)
    for i in 0..n {
        let coefs = (0..n)
            .flat_map(|j| (0..n).map(move |k| (j, k)))
            .map(|(j, k)| (layout.x(i, j, k), 1.0))
            .collect();
        rows.push(Row {
            coefs,
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    // each position holds exactly one allocation
    for k in 0..n {
        let coefs = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (layout.x(i, j, k), 1.0))
            .collect();
        rows.push(Row {
            coefs,
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    // allocation only to open sites
    for i in 0..n {
        for j in 0..n {
            let mut coefs: Vec<(usize, f64)> = (0..n).map(|k| (layout.x(i, j, k), 1.0)).collect();
            coefs.push((layout.y(j), -1.0));
            rows.push(Row {
                coefs,
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }
    rows.push(Row {
        coefs: (0..n).map(|j| (layout.y(j), 1.0)).collect(),
        sense: Sense::Eq,
        rhs: instance.p() as f64,
    });

    let base_rows = rows.len();
    MilpModel {
        layout,
        objective,
        rows,
        lower: vec![0.0; layout.num_vars()],
        upper: vec![1.0; layout.num_vars()],
        binary: vec![true; layout.num_vars()],
        formulation: Formulation::Relax,
        base_rows,
    }
}

/// Row for `cut`: `Σ_{r ≤ ell} x^k_r + Σ_{r ≥ ell} x^{k−1}_r ≤ 1`.
pub fn materialize_cut(cut: SocCut, ranks: &RankStructure) -> Result<Row, ModelError> {
    let n = ranks.n();
    if cut.ell >= n * n {
        return Err(ModelError::IndexOutOfRange(format!(
            "rank threshold {} not below n² = {}",
            cut.ell,
            n * n
        )));
    }
    if cut.k == 0 || cut.k >= n {
        return Err(ModelError::IndexOutOfRange(format!(
            "position {} not in 1..{n}",
            cut.k
        )));
    }
    let layout = VarLayout::new(n);
    let pairs = ranks.pairs();
    let coefs = pairs[..=cut.ell]
        .iter()
        .map(|&(i, j)| (layout.x(i, j, cut.k), 1.0))
        .chain(
            pairs[cut.ell..]
                .iter()
                .map(|&(i, j)| (layout.x(i, j, cut.k - 1), 1.0)),
        )
        .collect();
    Ok(Row {
        coefs,
        sense: Sense::Le,
        rhs: 1.0,
    })
}

/// Base rows plus every strong order constraint.
pub fn build_soc_model(instance: &Instance, ranks: &RankStructure) -> MilpModel {
    let mut model = build_base(instance, ranks);
    let n = instance.n();
    model.rows.reserve(n.saturating_sub(1) * n * n);
    // Distinct (ell, k) always give distinct rows: moving ell shifts exactly
    // one pair between the two sums, so nothing collapses.
    for cut in SocCut::all(n) {
        model
            .rows
            .push(materialize_cut(cut, ranks).expect("enumerated cut is in range"));
    }
    model.formulation = Formulation::Soc;
    model
}

/// Base rows plus one weak order constraint per position `k ≥ 1`: the sum of
/// the SOC rows of position `k` over all thresholds. A pair of rank `r`
/// (0-based) gets coefficient `n² − r` at position `k` and `r + 1` at `k − 1`.
pub fn build_woc_model(instance: &Instance, ranks: &RankStructure) -> MilpModel {
    let mut model = build_base(instance, ranks);
    let n = instance.n();
    let layout = model.layout;
    let nn = (n * n) as f64;
    for k in 1..n {
        let coefs = ranks
            .pairs()
            .iter()
            .enumerate()
            .flat_map(|(r, &(i, j))| {
                [
                    (layout.x(i, j, k), nn - r as f64),
                    (layout.x(i, j, k - 1), r as f64 + 1.0),
                ]
            })
            .collect();
        model.rows.push(Row {
            coefs,
            sense: Sense::Le,
            rhs: nn,
        });
    }
    model.formulation = Formulation::Woc;
    model
}

/// The order-free relaxation: exactly the base rows.
pub fn build_relax_model(instance: &Instance, ranks: &RankStructure) -> MilpModel {
    let mut model = build_base(instance, ranks);
    model.formulation = Formulation::Relax;
    model
}

pub fn build_model(instance: &Instance, ranks: &RankStructure, formulation: Formulation) -> MilpModel {
    match formulation {
        Formulation::Soc => build_soc_model(instance, ranks),
        Formulation::Woc => build_woc_model(instance, ranks),
        Formulation::Relax => build_relax_model(instance, ranks),
    }
}
