mod common;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::suites::{mixed_config, random_ddnn};
use common::{random_bounded_lp, random_pwl_net};
use nnrepair::io::float::fmt_g17;
use nnrepair::io::{parse_network, print_network, LoadedNetwork};
use nnrepair::jacobian::layout_of;
use nnrepair::lp::{encode_min_norm, parse_dump, solve, write_dump, DeltaRow};
use nnrepair::metrics::{accuracy, check_polytope_spec_sampled, drawdown, generalization, LabeledSet, SAMPLED_SLACK};
use nnrepair::regions::RegionShape;
use nnrepair::repair::PolytopeConstraint;
use nnrepair::{
    exactline, param_jacobian, plane_transfer, point_repair, Ddnn, LpOutcome, Network, NormObjective,
    OutputConstraint, PointConstraint, PointSpec, Polygon2D, Polytope, PolytopeSpec, RepairOptions, Segment,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn point(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-r..r)).collect()
}

fn rel_close(a: &Array1<f64>, b: &Array1<f64>, tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

fn edited(ddnn: &Ddnn, layer: usize, delta: &[f64]) -> Ddnn {
    let layout = layout_of(ddnn, layer).unwrap();
    let (dw, db) = layout.split(delta).unwrap();
    let l = &ddnn.value_layers()[layer - 1];
    ddnn.set_value_layer(layer, l.weights() + &dw, l.bias() + &db).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn eval_is_deterministic_and_pattern_replay_is_exact(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.gen_range(1..=3);
        let net = random_pwl_net(&mut r, dim, 2);
        for _ in 0..10 {
            let x = point(&mut r, dim, 3.0);
            let y = net.eval(&x).unwrap();
            prop_assert_eq!(&y, &net.eval(&x).unwrap());
            let pattern = net.activation_pattern(&x).unwrap();
            prop_assert_eq!(net.eval_with_pattern(&x, &pattern).unwrap(), y);
        }
    }

    #[test]
    fn eval_is_affine_inside_a_piece(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.gen_range(1..=3);
        let net = random_pwl_net(&mut r, dim, 2);
        let seg = Segment::new(point(&mut r, dim, 2.0), point(&mut r, dim, 2.0)).unwrap();
        for piece in exactline(&net, &seg).unwrap().pieces {
            let RegionShape::Interval { t0, t1, .. } = piece.shape else { unreachable!() };
            let (a, b) = (seg.point_at(t0), seg.point_at(t1));
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x + y) / 2.0).collect();
            let avg = (net.eval(&a).unwrap() + net.eval(&b).unwrap()) / 2.0;
            prop_assert!(rel_close(&avg, &net.eval(&mid).unwrap(), 1e-8));
        }
    }

    #[test]
    fn value_layer_edits_act_linearly(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let mut r = rng(seed);
        let mut cfg = mixed_config();
        cfg.input_dim = r.gen_range(1..=3);
        cfg.output_dim = r.gen_range(1..=2);
        let ddnn = random_ddnn(&mut r, &cfg);
        let layer = r.gen_range(1..=ddnn.layer_count());
        let n = layout_of(&ddnn, layer).unwrap().len();
        let d1: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let d2: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let mixed: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + alpha * b).collect();
        let x = point(&mut r, cfg.input_dim, 2.0);
        let y0 = ddnn.eval(&x).unwrap();
        let y1 = edited(&ddnn, layer, &d1).eval(&x).unwrap();
        let y2 = edited(&ddnn, layer, &d2).eval(&x).unwrap();
        let ymix = edited(&ddnn, layer, &mixed).eval(&x).unwrap();
        prop_assert!(rel_close(&(&y1 + &((&y2 - &y0) * alpha)), &ymix, 1e-8));
    }

    #[test]
    fn edited_ddnn_is_affine_on_activation_regions(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_pwl_net(&mut r, 2, 2);
        let ddnn = Ddnn::decouple(&net);
        let layer = r.gen_range(1..=ddnn.layer_count());
        let n = layout_of(&ddnn, layer).unwrap().len();
        let delta: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let e = edited(&ddnn, layer, &delta);
        let square = Polygon2D::new(vec![vec![-1.0, -1.0], vec![1.0, -1.0], vec![1.0, 1.0], vec![-1.0, 1.0]]).unwrap();
        for piece in plane_transfer(&net, &square).unwrap().pieces {
            let v = piece.vertices();
            // three interior points: shrink vertices toward the barycenter
            let c = piece.interior_point();
            let inner: Vec<Vec<f64>> = v.iter().map(|p| p.iter().zip(&c).map(|(a, b)| 0.5 * a + 0.5 * b).collect()).collect();
            let ys: Vec<Array1<f64>> = inner.iter().map(|p| e.eval(p).unwrap()).collect();
            let mean = ys.iter().fold(Array1::zeros(2), |acc, y| acc + y) / ys.len() as f64;
            prop_assert!(rel_close(&mean, &e.eval(&c).unwrap(), 1e-8), "{:?}", piece.pattern);
        }
    }

    #[test]
    fn pattern_override_matches_at_interior_points(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_pwl_net(&mut r, 1, 2);
        let ddnn = Ddnn::decouple(&net);
        let seg = Segment::new(vec![-2.0], vec![2.0]).unwrap();
        let layer = r.gen_range(1..=ddnn.layer_count());
        for piece in exactline(&net, &seg).unwrap().pieces {
            let x = piece.interior_point();
            let plain = param_jacobian(&ddnn, layer, &x, None).unwrap();
            let forced = param_jacobian(&ddnn, layer, &x, Some(&piece.pattern)).unwrap();
            prop_assert_eq!(plain, forced);
        }
    }

    #[test]
    fn jacobian_columns_cover_every_parameter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut cfg = mixed_config();
        cfg.input_dim = r.gen_range(1..=4);
        let ddnn = random_ddnn(&mut r, &cfg);
        for layer in 1..=ddnn.layer_count() {
            let layout = layout_of(&ddnn, layer).unwrap();
            let l = &ddnn.value_layers()[layer - 1];
            prop_assert_eq!(layout.len(), l.param_count());
            let mut seen = vec![false; layout.len()];
            for row in 0..l.out_dim() {
                for col in 0..l.in_dim() {
                    seen[layout.weight(row, col)] = true;
                }
                seen[layout.bias(row)] = true;
            }
            prop_assert!(seen.iter().all(|s| *s));
        }
    }

    #[test]
    fn value_edits_leave_breakpoints_alone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.gen_range(1..=3);
        let net = random_pwl_net(&mut r, dim, 1);
        let ddnn = Ddnn::decouple(&net);
        let seg = Segment::new(point(&mut r, dim, 2.0), point(&mut r, dim, 2.0)).unwrap();
        let before = exactline(&ddnn.activation_network(), &seg).unwrap().breakpoints();
        let layer = r.gen_range(1..=ddnn.layer_count());
        let n = layout_of(&ddnn, layer).unwrap().len();
        let delta: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let after = exactline(&edited(&ddnn, layer, &delta).activation_network(), &seg).unwrap().breakpoints();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn polygon_pieces_cover_the_polygon(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_pwl_net(&mut r, 2, 1);
        let c = point(&mut r, 2, 0.5);
        let radius = r.gen_range(0.1..1.5);
        let k = r.gen_range(3..=6);
        let phase: f64 = r.gen();
        let verts: Vec<Vec<f64>> = (0..k)
            .map(|i| {
                let a = phase + i as f64 * std::f64::consts::TAU / k as f64;
                vec![c[0] + radius * a.cos(), c[1] + radius * a.sin()]
            })
            .collect();
        let poly = Polygon2D::new(verts).unwrap();
        let part = plane_transfer(&net, &poly).unwrap();
        prop_assert!((part.total_measure() - poly.area()).abs() <= 1e-9 * poly.area());
        for piece in &part.pieces {
            let v = piece.vertices();
            let mean = v.iter().fold(Array1::zeros(1), |acc, p| acc + net.eval(p).unwrap()) / v.len() as f64;
            prop_assert!(rel_close(&mean, &net.eval(&piece.interior_point()).unwrap(), 1e-8));
        }
    }

    #[test]
    fn optimal_points_are_feasible_and_reproducible(seed in any::<u64>()) {
        let lp = random_bounded_lp(&mut rng(seed), 6, 10);
        let a = solve(&lp).unwrap();
        prop_assert_eq!(&a, &solve(&lp).unwrap());
        let reparsed = parse_dump(&write_dump(&lp)).unwrap();
        prop_assert_eq!(solve(&reparsed).unwrap(), solve(&parse_dump(&write_dump(&lp)).unwrap()).unwrap());
        if let LpOutcome::Optimal { x, .. } = a {
            prop_assert!(lp.max_violation(&x) <= 1e-7);
        }
    }

    #[test]
    fn norm_encodings_report_the_norm(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = r.gen_range(1..=5);
        let rows: Vec<DeltaRow> = (0..r.gen_range(0..=4))
            .map(|_| DeltaRow { coeff: (0..k).map(|_| r.gen_range(-1.0..1.0)).collect(), rhs: r.gen_range(-1.0..1.0) })
            .collect();
        let mask: Vec<bool> = (0..k).map(|_| r.gen_bool(0.7)).collect();
        for norm in [NormObjective::L1, NormObjective::Linf] {
            let lp = encode_min_norm(&rows, k, norm, Some(&mask)).unwrap();
            if let LpOutcome::Optimal { x, objective } = solve(&lp).unwrap() {
                prop_assert!((norm.of(&x[..k]) - objective).abs() <= 1e-9);
                for j in (0..k).filter(|j| !mask[*j]) {
                    prop_assert!(x[j].abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn repaired_classification_has_full_efficacy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_pwl_net(&mut r, 2, 3);
        let ddnn = Ddnn::decouple(&net);
        let points: Vec<(Vec<f64>, usize)> = (0..4).map(|_| (point(&mut r, 2, 1.0), r.gen_range(0..3))).collect();
        let items = points
            .iter()
            .map(|(x, l)| PointConstraint { point: x.clone(), constraint: OutputConstraint::classify(*l, 3, 1e-6).unwrap() })
            .collect();
        let spec = PointSpec::new(items).unwrap();
        let set = LabeledSet::new(points).unwrap();
        let layer = ddnn.layer_count();
        let result = point_repair(&ddnn, layer, &spec, &RepairOptions::new(NormObjective::L1), None).unwrap();
        if let Some(fixed) = &result.repaired {
            prop_assert_eq!(accuracy(fixed, &set).unwrap(), 1.0);
        }
        prop_assert_eq!(drawdown(&net, &net, &set).unwrap(), 0.0);
        prop_assert_eq!(generalization(&ddnn, &ddnn, &set).unwrap(), 0.0);
    }

    #[test]
    fn sampled_check_is_monotone_in_the_bound(seed in any::<u64>(), hi in -2.0f64..2.0, loosen in 0.0f64..2.0) {
        let mut r = rng(seed);
        let net = random_pwl_net(&mut r, 1, 1);
        let spec = |b: f64| {
            PolytopeSpec::new(vec![PolytopeConstraint {
                polytope: Polytope::Segment(Segment::new(vec![-1.0], vec![1.0]).unwrap()),
                constraint: OutputConstraint::new(Array2::from_elem((1, 1), 1.0), Array1::from(vec![b])).unwrap(),
            }])
            .unwrap()
        };
        let tight = check_polytope_spec_sampled(&net, &spec(hi), 200, seed).unwrap();
        let loose = check_polytope_spec_sampled(&net, &spec(hi + loosen), 200, seed).unwrap();
        prop_assert_eq!(tight.passed, tight.worst_residual <= SAMPLED_SLACK);
        prop_assert!(loose.worst_residual <= tight.worst_residual);
        prop_assert!(!tight.passed || loose.passed);
    }

    #[test]
    fn network_files_round_trip_bit_for_bit(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut cfg = mixed_config();
        cfg.input_dim = r.gen_range(1..=4);
        cfg.scale = 10f64.powi(r.gen_range(-6..6));
        let ddnn = random_ddnn(&mut r, &cfg);
        let net = LoadedNetwork::Ddnn(ddnn);
        prop_assert_eq!(parse_network(&print_network(&net)).unwrap(), net.clone());
        let dnn = LoadedNetwork::Dnn(net.to_ddnn().activation_network());
        prop_assert_eq!(parse_network(&print_network(&dnn)).unwrap(), dnn);
    }

    #[test]
    fn decimal_formatting_round_trips(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        let s = fmt_g17(v);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
        let json: f64 = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(json.to_bits(), v.to_bits());
    }
}
