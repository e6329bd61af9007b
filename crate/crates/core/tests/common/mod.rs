//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use ndarray::Array1;
use rand::Rng;

pub mod suites;

use nnrepair::fixtures::{random_dnn, random_point, RandomNetConfig};
use nnrepair::{ActivationKind, Ddnn, Dnn, LinearProgram};

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                let pivot = a[col].clone();
                a[r].iter_mut().zip(&pivot).skip(col).for_each(|(x, p)| *x -= f * p);
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

#[derive(Debug, Clone, PartialEq)]
pub enum Brute {
    Infeasible,
    Optimal { objective: f64, x: Vec<f64> },
}

/// Minimizes `c·x` over `{a x <= b} ∩ bounds ∩ [-boxed, boxed]^m` by
/// enumerating every vertex. The box makes the region bounded, so the
/// optimum, if any, sits at a vertex.
pub fn brute_force_lp(lp: &LinearProgram, boxed: f64) -> Brute {
    let m = lp.num_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = lp.a.rows().into_iter().zip(&lp.b).map(|(r, b)| (r.to_vec(), *b)).collect();
    for j in 0..m {
        let unit = |s: f64| {
            let mut r = vec![0.0; m];
            r[j] = s;
            r
        };
        rows.push((unit(-1.0), -lp.lower[j].unwrap_or(-boxed).max(-boxed)));
        rows.push((unit(1.0), lp.upper[j].unwrap_or(boxed).min(boxed)));
    }
    let feasible = |x: &[f64]| {
        rows.iter().all(|(r, b)| {
            let lhs: f64 = r.iter().zip(x).map(|(a, x)| a * x).sum();
            lhs <= b + 1e-9 * (1.0 + b.abs())
        })
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    if m == 0 {
        return if lp.b.iter().all(|b| *b >= -1e-9) {
            Brute::Optimal { objective: 0.0, x: vec![] }
        } else {
            Brute::Infeasible
        };
    }
    for_each_subset(rows.len(), m, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if feasible(&x) {
                let obj = lp.objective(&x);
                if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                    best = Some((obj, x));
                }
            }
        }
    });
    match best {
        Some((objective, x)) => Brute::Optimal { objective, x },
        None => Brute::Infeasible,
    }
}

/// Column `k` of the parameter Jacobian as `N(θ + e_k) - N(θ)`; exact up to
/// rounding because the output is affine in one layer's value parameters.
pub fn unit_step_jacobian(ddnn: &Ddnn, layer: usize, x: &[f64]) -> Vec<Vec<f64>> {
    let l = &ddnn.value_layers()[layer - 1];
    let base = ddnn.eval(x).unwrap();
    let (rows, cols) = l.weights().dim();
    let mut out = Vec::new();
    for k in 0..rows * cols + rows {
        let (mut w, mut b) = (l.weights().clone(), l.bias().clone());
        if k < rows * cols {
            w[[k / cols, k % cols]] += 1.0;
        } else {
            b[k - rows * cols] += 1.0;
        }
        let y = ddnn.set_value_layer(layer, w, b).unwrap().eval(x).unwrap();
        out.push((&y - &base).to_vec());
    }
    out
}

pub fn pwl_config(input_dim: usize, output_dim: usize) -> RandomNetConfig {
    RandomNetConfig {
        input_dim,
        output_dim,
        max_hidden_layers: 3,
        max_width: 8,
        activations: vec![ActivationKind::Relu, ActivationKind::Relu, ActivationKind::Identity],
        scale: 1.0,
    }
}

pub fn random_pwl_net<R: Rng>(rng: &mut R, input_dim: usize, output_dim: usize) -> Dnn {
    random_dnn(rng, &pwl_config(input_dim, output_dim))
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, dim: usize, r: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| random_point(rng, dim, r)).collect()
}

/// Random `≤` system over `m` bounded variables with entries in `[-5, 5]`.
/// A third of the instances use small integer coefficients, which makes
/// degenerate vertices common.
pub fn random_bounded_lp<R: Rng>(rng: &mut R, max_vars: usize, max_rows: usize) -> LinearProgram {
    let m = rng.gen_range(1..=max_vars);
    let n = rng.gen_range(0..=max_rows);
    let integer = rng.gen_bool(1.0 / 3.0);
    let coeff = |rng: &mut R| {
        if integer {
            rng.gen_range(-2..=2) as f64
        } else {
            rng.gen_range(-5.0..5.0)
        }
    };
    let a = ndarray::Array2::from_shape_fn((n, m), |_| coeff(rng));
    let shift = if rng.gen_bool(0.3) { -1.5 } else { 0.0 };
    let b = Array1::from_shape_fn(n, |_| if integer { rng.gen_range(-1..=2) as f64 } else { rng.gen_range(-5.0..5.0) + 3.0 * shift });
    let c = Array1::from_shape_fn(m, |_| coeff(rng));
    let lower = (0..m).map(|_| Some(-rng.gen_range(1.0..5.0))).collect();
    let upper = (0..m).map(|_| Some(rng.gen_range(1.0..5.0))).collect();
    LinearProgram::with_bounds(a, b, c, lower, upper).unwrap()
}
