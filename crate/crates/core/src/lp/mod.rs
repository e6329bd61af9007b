//! Linear programs `min c·x  s.t.  A x <= b, lower <= x <= upper`, the
//! min-norm encodings used by repair, and solvers for them.

mod dump;
mod external;
mod simplex;

pub use dump::{parse_dump, write_dump};
pub use external::{solve_external, ExternalSolver, ProcessSolver};
pub use simplex::{solve, solve_with_limit, FEASIBILITY_TOL, MAX_PIVOTS, PIVOT_TOL};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// `min c·x` subject to `a x <= b` and optional per-variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub c: Array1<f64>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl LinearProgram {
    /// LP with all variables free.
    pub fn new(a: Array2<f64>, b: Array1<f64>, c: Array1<f64>) -> Result<Self> {
        let m = c.len();
        Self::with_bounds(a, b, c, vec![None; m], vec![None; m])
    }

    pub fn with_bounds(
        a: Array2<f64>,
        b: Array1<f64>,
        c: Array1<f64>,
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    ) -> Result<Self> {
        let (n, m) = a.dim();
        if b.len() != n || c.len() != m || lower.len() != m || upper.len() != m {
            return Err(Error::Dimension(format!(
                "LP with {n}x{m} constraint matrix got b[{}], c[{}], {} lower and {} upper bounds",
                b.len(),
                c.len(),
                lower.len(),
                upper.len()
            )));
        }
        let finite = a.iter().chain(&b).chain(&c).all(|v| v.is_finite())
            && lower.iter().chain(&upper).flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("LP contains a non-finite entry".into()));
        }
        Ok(Self { a, b, c, lower, upper })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Largest violation of any row or bound at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let xv = Array1::from(x.to_vec());
        let rows = (self.a.dot(&xv) - &self.b).iter().fold(0.0f64, |m, v| m.max(*v));
        let bounds = x.iter().enumerate().fold(0.0f64, |m, (j, &xj)| {
            let lo = self.lower[j].map_or(0.0, |l| l - xj);
            let hi = self.upper[j].map_or(0.0, |u| xj - u);
            m.max(lo).max(hi)
        });
        rows.max(bounds)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

/// Result of solving an LP.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }
}

/// Size measure minimized by a repair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormObjective {
    L1,
    Linf,
}

impl NormObjective {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            NormObjective::L1 => v.iter().map(|x| x.abs()).sum(),
            NormObjective::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormObjective::L1 => "l1",
            NormObjective::Linf => "linf",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "l1" => Some(NormObjective::L1),
            "linf" => Some(NormObjective::Linf),
            _ => None,
        }
    }
}

/// One linear constraint `coeff · Δ <= rhs` over the repair deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaRow {
    pub coeff: Vec<f64>,
    pub rhs: f64,
}

/// Builds the LP minimizing `norm(Δ)` subject to `rows`.
///
/// The first `num_deltas` variables are Δ. Entries with `mask[k] == false`
/// are pinned to zero by the rows `Δ_k <= 0` and `-Δ_k <= 0`. The
/// remaining variables are non-negative auxiliaries: one per free delta
/// for L1 (`±Δ_k <= t_k`, objective `Σ t_k`), or a single one for L∞
/// (`±Δ_k <= t`, objective `t`). Specification rows come first, verbatim.
pub fn encode_min_norm(
    rows: &[DeltaRow],
    num_deltas: usize,
    norm: NormObjective,
    mask: Option<&[bool]>,
) -> Result<LinearProgram> {
    if let Some(r) = rows.iter().find(|r| r.coeff.len() != num_deltas) {
        return Err(Error::Dimension(format!(
            "constraint row has {} coefficients, expected {num_deltas}",
            r.coeff.len()
        )));
    }
    if let Some(m) = mask {
        if m.len() != num_deltas {
            return Err(Error::Dimension(format!("mask has {} entries, expected {num_deltas}", m.len())));
        }
    }
    let free: Vec<usize> = (0..num_deltas).filter(|&k| mask.is_none_or(|m| m[k])).collect();
    let pinned: Vec<usize> = (0..num_deltas).filter(|&k| mask.is_some_and(|m| !m[k])).collect();
    let aux = match norm {
        NormObjective::L1 => free.len(),
        NormObjective::Linf => 1,
    };
    let nvars = num_deltas + aux;
    let nrows = rows.len() + 2 * pinned.len() + 2 * free.len();

    let mut a = Array2::zeros((nrows, nvars));
    let mut b = Array1::zeros(nrows);
    let mut r = 0;
    for row in rows {
        a.row_mut(r).slice_mut(ndarray::s![..num_deltas]).assign(&Array1::from(row.coeff.clone()));
        b[r] = row.rhs;
        r += 1;
    }
    for &k in &pinned {
        a[[r, k]] = 1.0;
        a[[r + 1, k]] = -1.0;
        r += 2;
    }
    for (i, &k) in free.iter().enumerate() {
        let t = num_deltas + if norm == NormObjective::L1 { i } else { 0 };
        a[[r, k]] = 1.0;
        a[[r, t]] = -1.0;
        a[[r + 1, k]] = -1.0;
        a[[r + 1, t]] = -1.0;
        r += 2;
    }
    let mut c = Array1::zeros(nvars);
    c.slice_mut(ndarray::s![num_deltas..]).fill(1.0);
    let mut lower = vec![None; nvars];
    lower[num_deltas..].iter_mut().for_each(|l| *l = Some(0.0));
    LinearProgram::with_bounds(a, b, c, lower, vec![None; nvars])
}
