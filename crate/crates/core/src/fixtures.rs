//! Small reference networks and seeded random generators used by the test
//! suites, the acceptance harness and the CLI examples.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ddnn::Ddnn;
use crate::metrics::LabeledSet;
use crate::network::{ActivationKind, Dnn, Layer};

/// One input, three ReLU hidden units, one identity output.
///
/// `h1 = relu(-x)`, `h2 = relu(x)`, `h3 = relu(x - 1)`, `y = -h1 - h2 + h3`.
/// Linear regions on `[-1, 2]` are `[-1, 0]`, `[0, 1]` and `[1, 2]`.
pub fn n1() -> Dnn {
    n1_with_h3_weight(1.0)
}

fn n1_with_h3_weight(w: f64) -> Dnn {
    let hidden = Layer::from_rows(&[vec![-1.0], vec![1.0], vec![w]], &[0.0, 0.0, -1.0], ActivationKind::Relu)
        .expect("valid hidden layer");
    let out = Layer::from_rows(&[vec![-1.0, -1.0, 1.0]], &[0.0], ActivationKind::Identity)
        .expect("valid output layer");
    Dnn::new(vec![hidden, out]).expect("valid chain")
}

/// `n1` decoupled.
pub fn n3() -> Ddnn {
    Ddnn::decouple(&n1())
}

/// `n3` with the value-channel weight `x → h3` raised from 1 to 2.
pub fn n4() -> Ddnn {
    let v = n1_with_h3_weight(2.0);
    Ddnn::new(n1().layers().to_vec(), v.layers().to_vec()).expect("matching channels")
}

/// Parameter names that `paper4` expands to: the three input weights of
/// the first layer of `n1` and the bias of its third unit.
pub const PAPER4: [&str; 4] = ["L1.w[0][0]", "L1.w[1][0]", "L1.w[2][0]", "L1.b[2]"];

/// Parameter indices of [`PAPER4`] within the first layer of `n1`
/// (weights row-major, then biases).
pub const PAPER4_INDICES: [usize; 4] = [0, 1, 2, 5];

/// Two ReLU units reading the two input coordinates, followed by an
/// identity layer. Its regions on `[-1, 1]²` are the four quadrants.
pub fn quadrant_net() -> Dnn {
    let hidden = Layer::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0], ActivationKind::Relu).unwrap();
    let out = Layer::from_rows(&[vec![1.0, 1.0]], &[0.0], ActivationKind::Identity).unwrap();
    Dnn::new(vec![hidden, out]).unwrap()
}

/// `n1` with a second, ignored input coordinate.
pub fn lifted_n1() -> Dnn {
    let hidden = Layer::from_rows(
        &[vec![-1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]],
        &[0.0, 0.0, -1.0],
        ActivationKind::Relu,
    )
    .unwrap();
    let out = Layer::from_rows(&[vec![-1.0, -1.0, 1.0]], &[0.0], ActivationKind::Identity).unwrap();
    Dnn::new(vec![hidden, out]).unwrap()
}

/// Shape parameters for [`random_dnn`].
#[derive(Debug, Clone)]
pub struct RandomNetConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub max_hidden_layers: usize,
    pub max_width: usize,
    pub activations: Vec<ActivationKind>,
    /// Weights and biases are drawn uniformly from `[-scale, scale]`.
    pub scale: f64,
}

impl Default for RandomNetConfig {
    fn default() -> Self {
        Self {
            input_dim: 2,
            output_dim: 2,
            max_hidden_layers: 3,
            max_width: 8,
            activations: vec![ActivationKind::Relu, ActivationKind::Tanh, ActivationKind::Identity],
            scale: 1.0,
        }
    }
}

/// Random network with hidden activations drawn from `cfg.activations`
/// and an identity output layer.
pub fn random_dnn<R: Rng>(rng: &mut R, cfg: &RandomNetConfig) -> Dnn {
    let hidden = rng.gen_range(0..=cfg.max_hidden_layers);
    let mut dims = vec![cfg.input_dim];
    for _ in 0..hidden {
        dims.push(rng.gen_range(1..=cfg.max_width));
    }
    dims.push(cfg.output_dim);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (i, pair) in dims.windows(2).enumerate() {
        let activation = if i + 2 == dims.len() {
            ActivationKind::Identity
        } else {
            cfg.activations[rng.gen_range(0..cfg.activations.len())]
        };
        layers.push(random_layer(rng, pair[0], pair[1], activation, cfg.scale));
    }
    Dnn::new(layers).expect("generated chain is consistent")
}

pub fn random_layer<R: Rng>(rng: &mut R, in_dim: usize, out_dim: usize, activation: ActivationKind, scale: f64) -> Layer {
    let weights = Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-scale..=scale));
    let bias = Array1::from_shape_fn(out_dim, |_| rng.gen_range(-scale..=scale));
    Layer::new(weights, bias, activation).expect("finite random layer")
}

/// Random point with coordinates in `[-r, r]`.
pub fn random_point<R: Rng>(rng: &mut R, dim: usize, r: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-r..=r)).collect()
}

/// A small classifier with a planted bug, plus the datasets used to
/// measure a repair of it.
#[derive(Debug, Clone)]
pub struct PlantedClassifier {
    /// 2-16-16-2 ReLU network with an identity output layer.
    pub net: Dnn,
    /// Inside the bug disk, the desired class is the opposite of what
    /// `net` predicts.
    pub bug_center: [f64; 2],
    pub bug_radius: f64,
    /// Points inside the disk with their desired labels; all misclassified.
    pub repair_set: LabeledSet,
    /// Points outside the disk labeled by `net` itself.
    pub drawdown_set: LabeledSet,
    /// Further points inside the disk with their desired labels.
    pub generalization_set: LabeledSet,
}

pub fn planted_classifier(seed: u64, repair_points: usize, held_out: usize) -> PlantedClassifier {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Dnn::new(vec![
        random_layer(&mut rng, 2, 16, ActivationKind::Relu, 1.0),
        random_layer(&mut rng, 16, 16, ActivationKind::Relu, 0.5),
        random_layer(&mut rng, 16, 2, ActivationKind::Identity, 0.5),
    ])
    .expect("consistent shapes");
    let bug_center = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    let bug_radius = 0.3;
    let predict = |x: &[f64]| {
        let y = net.eval(x).expect("valid input");
        crate::metrics::argmax(y.as_slice().expect("contiguous"))
    };
    let in_disk = |rng: &mut ChaCha8Rng, n: usize| {
        let pts: Vec<(Vec<f64>, usize)> = (0..n)
            .map(|_| {
                let r = bug_radius * rng.gen::<f64>().sqrt();
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                let x = vec![bug_center[0] + r * a.cos(), bug_center[1] + r * a.sin()];
                let label = 1 - predict(&x);
                (x, label)
            })
            .collect();
        LabeledSet::new(pts).expect("uniform dimension")
    };
    let repair_set = in_disk(&mut rng, repair_points);
    let generalization_set = in_disk(&mut rng, held_out);
    let mut outside = Vec::with_capacity(held_out);
    while outside.len() < held_out {
        let x = random_point(&mut rng, 2, 1.0);
        if (x[0] - bug_center[0]).hypot(x[1] - bug_center[1]) > bug_radius {
            let label = predict(&x);
            outside.push((x, label));
        }
    }
    PlantedClassifier {
        net,
        bug_center,
        bug_radius,
        repair_set,
        drawdown_set: LabeledSet::new(outside).expect("uniform dimension"),
        generalization_set,
    }
}
