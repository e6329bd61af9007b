//! Randomized suites shared by the integration tests and the acceptance
//! harness. Each returns the number of cases run and a description of
//! every failure.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nnrepair::fixtures::{random_dnn, random_layer, random_point, RandomNetConfig};
use nnrepair::jacobian::{layout_of, param_jacobian};
use nnrepair::lp::{encode_min_norm, solve, DeltaRow};
use nnrepair::metrics::check_polytope_spec_sampled;
use nnrepair::regions::{exactline, key_points, RegionShape};
use nnrepair::repair::PolytopeConstraint;
use nnrepair::{
    point_repair, polytope_repair, satisfies_points, ActivationKind, Ddnn, NormObjective,
    OutputConstraint, PointConstraint, PointSpec, Polygon2D, Polytope, PolytopeSpec, RepairMask, RepairOptions,
    RepairStatus, Segment,
};

use super::{brute_force_lp, max_abs_diff, random_bounded_lp, random_pwl_net, unit_step_jacobian, Brute};

#[derive(Debug, Default)]
pub struct Outcome {
    pub cases: usize,
    pub failures: Vec<String>,
    pub detail: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases > 0
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }
}

pub fn mixed_config() -> RandomNetConfig {
    RandomNetConfig {
        input_dim: 1,
        output_dim: 1,
        max_hidden_layers: 3,
        max_width: 8,
        activations: vec![ActivationKind::Relu, ActivationKind::Tanh, ActivationKind::Identity],
        scale: 1.0,
    }
}

fn random_dims<R: Rng>(rng: &mut R, cfg: &mut RandomNetConfig) {
    cfg.input_dim = rng.gen_range(1..=4);
    cfg.output_dim = rng.gen_range(1..=3);
}

/// Decoupled network whose two channels have independent parameters.
pub fn random_ddnn<R: Rng>(rng: &mut R, cfg: &RandomNetConfig) -> Ddnn {
    let act = random_dnn(rng, cfg);
    let val: Vec<_> = act
        .layers()
        .iter()
        .map(|l| random_layer(rng, l.in_dim(), l.out_dim(), l.activation(), cfg.scale))
        .collect();
    Ddnn::new(act.layers().to_vec(), val).unwrap()
}

/// Decoupling a network leaves its outputs unchanged.
pub fn decoupling(seed: u64, nets: usize, inputs: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    for n in 0..nets {
        let mut cfg = mixed_config();
        random_dims(&mut rng, &mut cfg);
        let dnn = random_dnn(&mut rng, &cfg);
        let ddnn = Ddnn::decouple(&dnn);
        for _ in 0..inputs {
            let x = random_point(&mut rng, cfg.input_dim, 3.0);
            let (a, b) = (dnn.eval(&x).unwrap(), ddnn.eval(&x).unwrap());
            let ok = a.iter().zip(&b).all(|(y, z)| (y - z).abs() <= 1e-9 * (1.0 + y.abs()));
            out.check(ok, || format!("net {n} at {x:?}: {a} vs {b}"));
            out.cases += 1;
        }
    }
    out
}

/// `base + J Δ` equals re-evaluation with the edited layer.
pub fn jacobian_exactness(seed: u64, cases: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    for c in 0..cases {
        let mut cfg = mixed_config();
        random_dims(&mut rng, &mut cfg);
        let ddnn = random_ddnn(&mut rng, &cfg);
        let layer = rng.gen_range(1..=ddnn.layer_count());
        let x = random_point(&mut rng, cfg.input_dim, 2.0);
        let jac = param_jacobian(&ddnn, layer, &x, None).unwrap();
        let scale = if rng.gen_bool(0.5) { 0.1 } else { 2.0 };
        let delta: Vec<f64> = (0..jac.layout.len()).map(|_| rng.gen_range(-scale..scale)).collect();
        let (dw, db) = jac.layout.split(&delta).unwrap();
        let l = &ddnn.value_layers()[layer - 1];
        let edited = ddnn.set_value_layer(layer, l.weights() + &dw, l.bias() + &db).unwrap();
        let actual = edited.eval(&x).unwrap();
        let predicted = jac.predict(&delta);
        let ok = actual.iter().zip(&predicted).all(|(a, p)| (a - p).abs() <= 1e-8 * (1.0 + a.abs()));
        out.check(ok, || format!("case {c} layer {layer}: {predicted} vs {actual}"));
        out.cases += 1;
    }
    out
}

/// Sampled activation patterns agree with the partition, piece lengths add
/// up, and value-channel edits keep every piece affine.
pub fn region_soundness(seed: u64, cases: usize, samples: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    for c in 0..cases {
        let dim = rng.gen_range(1..=3);
        let out_dim = rng.gen_range(1..=2);
        let net = random_pwl_net(&mut rng, dim, out_dim);
        let seg = Segment::new(random_point(&mut rng, dim, 2.0), random_point(&mut rng, dim, 2.0)).unwrap();
        let part = exactline(&net, &seg).unwrap();
        out.cases += 1;

        let total = part.total_measure();
        out.check((total - seg.length()).abs() <= 1e-9 * seg.length().max(1e-300), || {
            format!("case {c}: pieces sum to {total}, segment is {}", seg.length())
        });

        let intervals: Vec<(f64, f64)> = part
            .pieces
            .iter()
            .map(|p| match p.shape {
                RegionShape::Interval { t0, t1, .. } => (t0, t1),
                _ => unreachable!(),
            })
            .collect();
        let mut mismatches = 0;
        for _ in 0..samples {
            let t: f64 = rng.gen();
            let Some(k) = intervals.iter().position(|(a, b)| t > a + 1e-9 && t < b - 1e-9) else {
                continue;
            };
            if net.activation_pattern(&seg.point_at(t)).unwrap() != part.pieces[k].pattern {
                mismatches += 1;
            }
        }
        out.check(mismatches == 0, || format!("case {c}: {mismatches} sampled patterns disagree"));

        let ddnn = Ddnn::decouple(&net);
        let layer = rng.gen_range(1..=ddnn.layer_count());
        let l = &ddnn.value_layers()[layer - 1];
        let (rows, cols) = l.weights().dim();
        let w = l.weights() + &ndarray::Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0));
        let b = l.bias() + &Array1::from_shape_fn(rows, |_| rng.gen_range(-1.0..1.0));
        let edited = ddnn.set_value_layer(layer, w, b).unwrap();
        let again = exactline(&edited.activation_network(), &seg).unwrap();
        out.check(again == part, || format!("case {c}: partition changed after a value edit"));
        for (k, &(t0, t1)) in intervals.iter().enumerate() {
            let ts = [t0 + 0.25 * (t1 - t0), t0 + 0.5 * (t1 - t0), t0 + 0.75 * (t1 - t0)];
            let ys: Vec<Array1<f64>> = ts.iter().map(|t| edited.eval(&seg.point_at(*t)).unwrap()).collect();
            let mid = (&ys[0] + &ys[2]) / 2.0;
            let err = max_abs_diff(mid.as_slice().unwrap(), ys[1].as_slice().unwrap());
            let scale = 1.0 + ys[1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            out.check(err <= 1e-9 * scale, || format!("case {c} piece {k}: edited network not affine ({err:e})"));
        }
    }
    out
}

pub fn lp_oracle(seed: u64, count: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    let mut infeasible = 0;
    for i in 0..count {
        let lp = random_bounded_lp(&mut rng, 6, 10);
        let oracle = brute_force_lp(&lp, 1e9);
        let got = solve(&lp).unwrap();
        out.cases += 1;
        match (&got, &oracle) {
            (nnrepair::LpOutcome::Infeasible, Brute::Infeasible) => infeasible += 1,
            (nnrepair::LpOutcome::Optimal { x, objective }, Brute::Optimal { objective: o, .. }) => {
                out.check((objective - o).abs() <= 1e-6 && lp.max_violation(x) <= 1e-7, || {
                    format!("lp {i}: objective {objective} vs {o}")
                });
            }
            _ => out.failures.push(format!("lp {i}: {got:?} vs {oracle:?}")),
        }
    }
    out.detail = format!("{infeasible} infeasible");
    out
}

fn box_constraint(lo: &[f64], hi: &[f64]) -> OutputConstraint {
    let lo: Vec<_> = lo.iter().copied().map(Some).collect();
    let hi: Vec<_> = hi.iter().copied().map(Some).collect();
    OutputConstraint::bounds(&lo, &hi).unwrap()
}

/// Minimum-norm repair over the free parameters, computed from unit-step
/// Jacobians and vertex enumeration.
fn brute_force_repair(ddnn: &Ddnn, layer: usize, spec: &PointSpec, free: &[usize], norm: NormObjective) -> Brute {
    let mut rows = Vec::new();
    for item in spec.items() {
        let cols = unit_step_jacobian(ddnn, layer, &item.point);
        let y = ddnn.eval(&item.point).unwrap();
        let a = item.constraint.a();
        for (r, b) in a.rows().into_iter().zip(item.constraint.b()) {
            let coeff: Vec<f64> = free.iter().map(|&k| r.iter().zip(&cols[k]).map(|(a, j)| a * j).sum()).collect();
            let rhs = b - r.dot(&y);
            rows.push(DeltaRow { coeff, rhs });
        }
    }
    let lp = encode_min_norm(&rows, free.len(), norm, None).unwrap();
    brute_force_lp(&lp, 1e3)
}

/// Constructed repair problems: planted-feasible ones check soundness and
/// minimality; tightly masked ones are compared with brute force.
pub fn repair_soundness(seed: u64, count: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    let (mut repaired, mut infeasible) = (0, 0);
    for case in 0..count {
        let net = random_pwl_net(&mut rng, 2, 2);
        let ddnn = Ddnn::decouple(&net);
        let layer = rng.gen_range(1..=ddnn.layer_count());
        let layout = layout_of(&ddnn, layer).unwrap();
        let norm = if case % 2 == 0 { NormObjective::L1 } else { NormObjective::Linf };
        let tight = case % 3 == 2;
        let free: Vec<usize> = if tight {
            let mut idx: Vec<usize> = (0..layout.len()).collect();
            let k = rng.gen_range(1..=2.min(idx.len()));
            (0..k).map(|_| idx.swap_remove(rng.gen_range(0..idx.len()))).collect()
        } else {
            (0..layout.len()).filter(|_| rng.gen_bool(0.7)).collect()
        };
        let names: Vec<String> = free.iter().map(|&k| layout.name(layer, k)).collect();
        let mask = if free.is_empty() { None } else { Some(RepairMask::from_names(&names).unwrap()) };
        let free: Vec<usize> = if mask.is_some() { free } else { (0..layout.len()).collect() };

        let points: Vec<Vec<f64>> = (0..rng.gen_range(2..=5)).map(|_| random_point(&mut rng, 2, 1.0)).collect();
        let mut planted = vec![0.0; layout.len()];
        let target_net = if tight {
            ddnn.clone()
        } else {
            for &k in &free {
                planted[k] = rng.gen_range(-0.3..0.3);
            }
            let (dw, db) = layout.split(&planted).unwrap();
            let l = &ddnn.value_layers()[layer - 1];
            ddnn.set_value_layer(layer, l.weights() + &dw, l.bias() + &db).unwrap()
        };
        let items = points
            .iter()
            .map(|x| {
                let y = target_net.eval(x).unwrap();
                let shift = if tight { rng.gen_range(-0.5..0.5) } else { 0.0 };
                let lo: Vec<f64> = y.iter().map(|v| v + shift - rng.gen_range(1e-4..0.05)).collect();
                let hi: Vec<f64> = y.iter().map(|v| v + shift + rng.gen_range(1e-4..0.05)).collect();
                PointConstraint { point: x.clone(), constraint: box_constraint(&lo, &hi) }
            })
            .collect();
        let spec = PointSpec::new(items).unwrap();
        let mut opts = RepairOptions::new(norm);
        if let Some(m) = &mask {
            opts = opts.with_mask(m);
        }
        let result = match point_repair(&net, layer, &spec, &opts, None) {
            Ok(r) => r,
            Err(e) => {
                out.failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        out.cases += 1;
        match result.status {
            RepairStatus::Repaired => {
                repaired += 1;
                let fixed = result.repaired.as_ref().unwrap();
                let sat = satisfies_points(fixed, &spec, 1e-7).unwrap();
                out.check(sat.satisfied, || format!("case {case}: repaired net misses spec by {:e}", sat.max_residual()));
                let delta = result.delta.as_ref().unwrap();
                let value = result.norm_value.unwrap();
                out.check((norm.of(delta) - value).abs() <= 1e-9, || format!("case {case}: norm_value mismatch"));
                let frozen_ok = (0..layout.len()).filter(|k| !free.contains(k)).all(|k| delta[k] == 0.0);
                out.check(frozen_ok, || format!("case {case}: masked parameter changed"));
                out.check(fixed.act_layers() == ddnn.act_layers(), || format!("case {case}: activation channel changed"));
                if !tight {
                    let bound = norm.of(&planted) + 1e-6;
                    out.check(value <= bound, || format!("case {case}: norm {value} exceeds planted {bound}"));
                } else if let Brute::Optimal { objective, .. } = brute_force_repair(&ddnn, layer, &spec, &free, norm) {
                    out.check((objective - value).abs() <= 1e-6, || format!("case {case}: norm {value} vs brute force {objective}"));
                } else {
                    out.failures.push(format!("case {case}: repaired but brute force finds no feasible delta"));
                }
            }
            RepairStatus::Infeasible => {
                infeasible += 1;
                out.check(!tight || brute_force_repair(&ddnn, layer, &spec, &free, norm) == Brute::Infeasible, || {
                    format!("case {case}: infeasible but brute force finds a repair")
                });
                out.check(tight, || format!("case {case}: planted-feasible problem reported infeasible"));
            }
        }
    }
    out.detail = format!("{repaired} repaired, {infeasible} infeasible");
    out
}

/// Polytope repairs with planted feasible edits: every repaired network
/// must satisfy its spec on dense samples.
pub fn polytope_soundness(seed: u64, count: usize, samples: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    for case in 0..count {
        let dim = if case % 2 == 0 { 1 } else { 2 };
        let net = random_pwl_net(&mut rng, dim, 1 + case % 2);
        let ddnn = Ddnn::decouple(&net);
        let layer = rng.gen_range(1..=ddnn.layer_count());
        let layout = layout_of(&ddnn, layer).unwrap();
        let polytope = if dim == 1 {
            let a = rng.gen_range(-1.0..0.0);
            Polytope::Segment(Segment::new(vec![a], vec![a + rng.gen_range(0.2..1.5)]).unwrap())
        } else {
            let c = random_point(&mut rng, 2, 0.5);
            let r = rng.gen_range(0.2..0.8);
            let phase: f64 = rng.gen_range(0.0..1.0);
            let verts = (0..3)
                .map(|k| {
                    let a = phase + k as f64 * std::f64::consts::TAU / 3.0;
                    vec![c[0] + r * a.cos(), c[1] + r * a.sin()]
                })
                .collect();
            Polytope::Polygon(Polygon2D::new(verts).unwrap())
        };
        let planted: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let (dw, db) = layout.split(&planted).unwrap();
        let l = &ddnn.value_layers()[layer - 1];
        let target = ddnn.set_value_layer(layer, l.weights() + &dw, l.bias() + &db).unwrap();
        // the target is affine on each region, so its range over P is spanned by region vertices
        let keys = key_points(&net, std::slice::from_ref(&polytope)).unwrap();
        let m = net.output_dim();
        let (mut lo, mut hi) = (vec![f64::INFINITY; m], vec![f64::NEG_INFINITY; m]);
        for k in &keys {
            let y = target.eval_with_pattern(&k.point, &k.pattern).unwrap();
            for i in 0..m {
                lo[i] = lo[i].min(y[i] - 1e-4);
                hi[i] = hi[i].max(y[i] + 1e-4);
            }
        }
        let spec = PolytopeSpec::new(vec![PolytopeConstraint { polytope, constraint: box_constraint(&lo, &hi) }]).unwrap();
        let norm = if case % 2 == 0 { NormObjective::L1 } else { NormObjective::Linf };
        out.cases += 1;
        match polytope_repair(&net, layer, &spec, &RepairOptions::new(norm)) {
            Ok(r) if r.is_repaired() => {
                let fixed = r.repaired.as_ref().unwrap();
                let check = check_polytope_spec_sampled(fixed, &spec, samples, seed ^ case as u64).unwrap();
                out.check(check.passed, || format!("case {case}: sampled residual {:e}", check.worst_residual));
                let bound = norm.of(&planted) + 1e-6;
                out.check(r.norm_value.unwrap() <= bound, || format!("case {case}: norm above planted edit"));
            }
            Ok(_) => out.failures.push(format!("case {case}: planted-feasible polytope repair reported infeasible")),
            Err(e) => out.failures.push(format!("case {case}: {e}")),
        }
    }
    out
}
