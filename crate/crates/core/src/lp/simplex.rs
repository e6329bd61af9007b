//! Dense two-phase primal simplex.
//!
//! The LP is first rewritten over non-negative variables: a variable with a
//! finite lower bound is shifted, one with only an upper bound is
//! reflected, a free variable is split into a difference of two
//! non-negative parts, and a finite upper bound on a shifted variable
//! becomes an extra row. Every row gets a slack; rows whose right-hand side
//! is negative are negated and receive an artificial variable.
//!
//! Entering columns follow Dantzig's most-negative reduced cost. After a
//! degenerate pivot the solver switches to Bland's lowest-index rule for
//! both the entering and the leaving variable, and stays there until a
//! pivot makes progress again.

use crate::error::{Error, Result};

use super::{LinearProgram, LpOutcome};

/// Phase-one optimum above this means the LP is infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Smallest pivot element and most-negative reduced cost treated as nonzero.
pub const PIVOT_TOL: f64 = 1e-9;
pub const MAX_PIVOTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = offset + y[col]`
    Shift { col: usize, offset: f64 },
    /// `x = offset - y[col]`
    Flip { col: usize, offset: f64 },
    /// `x = y[pos] - y[neg]`
    Split { pos: usize, neg: usize },
}

impl VarMap {
    fn offset(self) -> f64 {
        match self {
            VarMap::Shift { offset, .. } | VarMap::Flip { offset, .. } => offset,
            VarMap::Split { .. } => 0.0,
        }
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    /// Phase-one reduced costs; last entry is minus the objective value.
    phase1: Vec<f64>,
    phase2: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.rhs_col())
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let p = self.at(r, e);
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].iter().map(|v| v / p).collect();
        self.data[r * w..(r + 1) * w].copy_from_slice(&pivot_row);
        let eliminate = |row: &mut [f64]| {
            let f = row[e];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a -= f * b);
                row[e] = 0.0;
            }
        };
        for (i, row) in self.data.chunks_exact_mut(w).enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.phase1);
        eliminate(&mut self.phase2);
        self.basis[r] = e;
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

/// Solves `lp` with the default pivot cap.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome> {
    solve_with_limit(lp, MAX_PIVOTS)
}

pub fn solve_with_limit(lp: &LinearProgram, max_pivots: usize) -> Result<LpOutcome> {
    let m = lp.num_vars();

    let mut maps = Vec::with_capacity(m);
    let mut ny = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..m {
        let map = match (lp.lower[j], lp.upper[j]) {
            (Some(l), u) => {
                if let Some(u) = u {
                    if u < l {
                        return Ok(LpOutcome::Infeasible);
                    }
                    bound_rows.push((ny, u - l));
                }
                VarMap::Shift { col: ny, offset: l }
            }
            (None, Some(u)) => VarMap::Flip { col: ny, offset: u },
            (None, None) => {
                ny += 1;
                VarMap::Split { pos: ny - 1, neg: ny }
            }
        };
        ny += 1;
        maps.push(map);
    }

    let n_rows = lp.num_rows() + bound_rows.len();
    let mut std_rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n_rows);
    for i in 0..lp.num_rows() {
        let mut coeffs = vec![0.0; ny];
        let mut rhs = lp.b[i];
        for (j, map) in maps.iter().enumerate() {
            let a = lp.a[[i, j]];
            if a == 0.0 {
                continue;
            }
            rhs -= a * map.offset();
            match *map {
                VarMap::Shift { col, .. } => coeffs[col] += a,
                VarMap::Flip { col, .. } => coeffs[col] -= a,
                VarMap::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        std_rows.push((coeffs, rhs));
    }
    for &(col, ub) in &bound_rows {
        let mut coeffs = vec![0.0; ny];
        coeffs[col] = 1.0;
        std_rows.push((coeffs, ub));
    }

    let n_art = std_rows.iter().filter(|(_, rhs)| *rhs < 0.0).count();
    let art_start = ny + n_rows;
    let width = art_start + n_art + 1;
    let mut t = Tableau {
        rows: n_rows,
        width,
        data: vec![0.0; n_rows * width],
        phase1: vec![0.0; width],
        phase2: vec![0.0; width],
        basis: vec![0; n_rows],
    };
    let mut next_art = art_start;
    for (i, (coeffs, rhs)) in std_rows.iter().enumerate() {
        let row = &mut t.data[i * width..(i + 1) * width];
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        row[..ny].iter_mut().zip(coeffs).for_each(|(r, c)| *r = sign * c);
        row[ny + i] = sign;
        row[width - 1] = sign * rhs;
        if *rhs < 0.0 {
            row[next_art] = 1.0;
            t.basis[i] = next_art;
            next_art += 1;
            for (d, v) in t.phase1.iter_mut().zip(row.iter()) {
                *d -= v;
            }
        } else {
            t.basis[i] = ny + i;
        }
    }
    // artificial columns carry unit phase-one cost; their reduced cost is 0
    for j in art_start..art_start + n_art {
        t.phase1[j] = 0.0;
    }
    for (j, map) in maps.iter().enumerate() {
        let c = lp.c[j];
        match *map {
            VarMap::Shift { col, .. } => t.phase2[col] += c,
            VarMap::Flip { col, .. } => t.phase2[col] -= c,
            VarMap::Split { pos, neg } => {
                t.phase2[pos] += c;
                t.phase2[neg] -= c;
            }
        }
    }

    let mut pivots = 0usize;
    if n_art > 0 {
        run_phase(&mut t, true, width - 1, &mut pivots, max_pivots)?;
        let infeasibility = -t.phase1[t.rhs_col()];
        if infeasibility > FEASIBILITY_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        for r in 0..t.rows {
            if t.basis[r] < art_start {
                continue;
            }
            let best = (0..art_start)
                .map(|j| (j, t.at(r, j).abs()))
                .filter(|(_, v)| *v > PIVOT_TOL)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((j, _)) = best {
                t.pivot(r, j);
                pivots += 1;
            }
        }
    }
    if let PhaseEnd::Unbounded = run_phase(&mut t, false, art_start, &mut pivots, max_pivots)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut y = vec![0.0; ny];
    for r in 0..t.rows {
        if t.basis[r] < ny {
            y[t.basis[r]] = t.rhs(r).max(0.0);
        }
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, offset } => offset + y[col],
            VarMap::Flip { col, offset } => offset - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let objective = lp.objective(&x);
    Ok(LpOutcome::Optimal { x, objective })
}

/// Runs simplex iterations on the phase-one or phase-two objective row,
/// considering entering columns `< col_limit`.
fn run_phase(t: &mut Tableau, phase_one: bool, col_limit: usize, pivots: &mut usize, max_pivots: usize) -> Result<PhaseEnd> {
    let mut bland = false;
    loop {
        let costs = if phase_one { &t.phase1 } else { &t.phase2 };
        let entering = if bland {
            (0..col_limit).find(|&j| costs[j] < -PIVOT_TOL)
        } else {
            (0..col_limit)
                .filter(|&j| costs[j] < -PIVOT_TOL)
                .min_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)))
        };
        let Some(e) = entering else {
            return Ok(PhaseEnd::Optimal);
        };

        let mut leave: Option<(usize, f64)> = None;
        for r in 0..t.rows {
            let a = t.at(r, e);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = t.rhs(r).max(0.0) / a;
            leave = match leave {
                None => Some((r, ratio)),
                Some((lr, lratio)) => {
                    let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                    let better = if tie {
                        if bland {
                            t.basis[r] < t.basis[lr]
                        } else {
                            a > t.at(lr, e)
                        }
                    } else {
                        ratio < lratio
                    };
                    if better {
                        Some((r, ratio))
                    } else {
                        Some((lr, lratio))
                    }
                }
            };
        }
        let Some((r, ratio)) = leave else {
            return Ok(PhaseEnd::Unbounded);
        };
        if *pivots >= max_pivots {
            return Err(Error::IterationLimit(max_pivots));
        }
        bland = ratio <= 1e-12;
        t.pivot(r, e);
        *pivots += 1;
    }
}
