//! Plain-text LP dump.
//!
//! ```text
//! m n
//! c_1 … c_m
//! a_1 … a_m <= b      (n lines)
//! ```
//!
//! `m` is the number of variables and `n` the number of rows. Variables are
//! free; finite bounds are written as extra rows (`-x_j <= -l`,
//! `x_j <= u`) after the constraint rows.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::io::float::{fmt_g17, join_g17};

use super::LinearProgram;

pub fn write_dump(lp: &LinearProgram) -> String {
    let m = lp.num_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.a.rows().into_iter().zip(&lp.b).map(|(r, b)| (r.to_vec(), *b)).collect();
    for j in 0..m {
        if let Some(l) = lp.lower[j] {
            let mut r = vec![0.0; m];
            r[j] = -1.0;
            rows.push((r, -l));
        }
        if let Some(u) = lp.upper[j] {
            let mut r = vec![0.0; m];
            r[j] = 1.0;
            rows.push((r, u));
        }
    }
    let mut out = format!("{m} {}\n{}\n", rows.len(), join_g17(lp.c.iter().copied(), " "));
    for (r, b) in rows {
        let lhs = join_g17(r, " ");
        let sep = if lhs.is_empty() { "" } else { " " };
        out.push_str(&format!("{lhs}{sep}<= {}\n", fmt_g17(b)));
    }
    out
}

/// Parses a dump back into an LP with all variables free.
pub fn parse_dump(text: &str) -> Result<LinearProgram> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, msg: String| Error::Parse(format!("LP dump line {}: {msg}", line + 1));

    let (ln, header) = lines.next().ok_or_else(|| Error::Parse("empty LP dump".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(ln, format!("bad size `{t}`"))))
        .collect::<Result<_>>()?;
    let [m, n] = dims[..] else {
        return Err(bad(ln, "expected `m n`".into()));
    };
    let c = match lines.next() {
        Some((ln, l)) => floats(l, ln)?,
        None if m == 0 => vec![],
        None => return Err(Error::Parse("LP dump missing objective line".into())),
    };
    if c.len() != m {
        return Err(Error::Parse(format!("objective has {} entries, expected {m}", c.len())));
    }
    let mut a = Array2::zeros((n, m));
    let mut b = Array1::zeros(n);
    for i in 0..n {
        let (ln, l) = lines.next().ok_or_else(|| Error::Parse(format!("LP dump has fewer than {n} rows")))?;
        let (lhs, rhs) = l.split_once("<=").ok_or_else(|| bad(ln, "row missing `<=`".into()))?;
        let coeffs = floats(lhs, ln)?;
        if coeffs.len() != m {
            return Err(bad(ln, format!("row has {} coefficients, expected {m}", coeffs.len())));
        }
        a.row_mut(i).assign(&Array1::from(coeffs));
        b[i] = rhs.trim().parse().map_err(|_| bad(ln, format!("bad right-hand side `{}`", rhs.trim())))?;
    }
    if let Some((ln, _)) = lines.next() {
        return Err(bad(ln, "trailing content".into()));
    }
    LinearProgram::new(a, b, Array1::from(c))
}

fn floats(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("LP dump line {}: bad number `{t}`", line + 1))))
        .collect()
}
