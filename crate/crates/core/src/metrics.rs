//! Accuracy-based repair metrics and a sampled check of polytope specs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ddnn::Network;
use crate::error::{Error, Result};
use crate::regions::Polytope;
use crate::repair::PolytopeSpec;

/// Residual up to which a sampled polytope check passes.
pub const SAMPLED_SLACK: f64 = 1e-7;
pub const DEFAULT_SAMPLES: usize = 1000;

/// Points with integer class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    points: Vec<(Vec<f64>, usize)>,
}

impl LabeledSet {
    pub fn new(points: Vec<(Vec<f64>, usize)>) -> Result<Self> {
        if let Some((first, _)) = points.first() {
            let n = first.len();
            if let Some(i) = points.iter().position(|(x, _)| x.len() != n) {
                return Err(Error::Dimension(format!(
                    "point {i} has {} features, expected {n}",
                    points[i].0.len()
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(Vec<f64>, usize)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of points whose predicted class equals their label.
pub fn accuracy(net: &dyn Network, set: &LabeledSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty set".into()));
    }
    let m = net.output_dim();
    let mut correct = 0usize;
    for (x, label) in set.points() {
        if *label >= m {
            return Err(Error::InvalidInput(format!("label {label} out of range for {m} outputs")));
        }
        let y = net.eval(x)?;
        if argmax(y.as_slice().expect("contiguous output")) == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len() as f64)
}

/// Accuracy lost on `dset`: buggy minus repaired. Lower is better.
pub fn drawdown(buggy: &dyn Network, repaired: &dyn Network, dset: &LabeledSet) -> Result<f64> {
    Ok(accuracy(buggy, dset)? - accuracy(repaired, dset)?)
}

/// Accuracy gained on `gset`: repaired minus buggy. Higher is better.
pub fn generalization(buggy: &dyn Network, repaired: &dyn Network, gset: &LabeledSet) -> Result<f64> {
    Ok(accuracy(repaired, gset)? - accuracy(buggy, gset)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetAccuracy {
    pub count: usize,
    pub buggy: f64,
    pub repaired: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Accuracy of the repaired network on the repair set, if one was given.
    pub efficacy: Option<f64>,
    pub drawdown: f64,
    pub generalization: f64,
    pub repair_set: Option<SetAccuracy>,
    pub drawdown_set: SetAccuracy,
    pub generalization_set: SetAccuracy,
}

fn set_accuracy(buggy: &dyn Network, repaired: &dyn Network, set: &LabeledSet) -> Result<SetAccuracy> {
    Ok(SetAccuracy { count: set.len(), buggy: accuracy(buggy, set)?, repaired: accuracy(repaired, set)? })
}

pub fn metrics_report(
    buggy: &dyn Network,
    repaired: &dyn Network,
    repair_set: Option<&LabeledSet>,
    dset: &LabeledSet,
    gset: &LabeledSet,
) -> Result<MetricsReport> {
    let repair_set = repair_set.map(|s| set_accuracy(buggy, repaired, s)).transpose()?;
    let d = set_accuracy(buggy, repaired, dset)?;
    let g = set_accuracy(buggy, repaired, gset)?;
    Ok(MetricsReport {
        efficacy: repair_set.as_ref().map(|s| s.repaired),
        drawdown: d.buggy - d.repaired,
        generalization: g.repaired - g.buggy,
        repair_set,
        drawdown_set: d,
        generalization_set: g,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledCheck {
    pub passed: bool,
    /// Largest `(A y - b)_i` over all samples and rows; `-inf` when nothing
    /// was checked.
    pub worst_residual: f64,
    pub samples: usize,
}

/// Uniform point of `polytope`, drawn with `rng`.
pub fn sample_polytope<R: Rng>(polytope: &Polytope, rng: &mut R) -> Vec<f64> {
    match polytope {
        Polytope::Segment(s) => s.point_at(rng.gen::<f64>()),
        Polytope::Polygon(p) => {
            let uv = p.plane_coords();
            // fan triangulation from the first vertex, triangles weighted by area
            let areas: Vec<f64> = (1..uv.len() - 1).map(|i| tri_area(uv[0], uv[i], uv[i + 1])).collect();
            let total: f64 = areas.iter().sum();
            let mut pick = rng.gen::<f64>() * total;
            let mut tri = areas.len() - 1;
            for (i, a) in areas.iter().enumerate() {
                if pick < *a {
                    tri = i;
                    break;
                }
                pick -= a;
            }
            let (a, b, c) = (uv[0], uv[tri + 1], uv[tri + 2]);
            let (r1, r2) = (rng.gen::<f64>().sqrt(), rng.gen::<f64>());
            let w = [1.0 - r1, r1 * (1.0 - r2), r1 * r2];
            p.point_at([
                w[0] * a[0] + w[1] * b[0] + w[2] * c[0],
                w[0] * a[1] + w[1] * b[1] + w[2] * c[1],
            ])
        }
    }
}

fn tri_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs() / 2.0
}

/// Evaluates `net` at `samples_per_polytope` seeded uniform samples of every
/// polytope and records the worst constraint residual.
pub fn check_polytope_spec_sampled(
    net: &dyn Network,
    spec: &PolytopeSpec,
    samples_per_polytope: usize,
    seed: u64,
) -> Result<SampledCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut samples = 0;
    for item in spec.items() {
        for _ in 0..samples_per_polytope {
            let x = sample_polytope(&item.polytope, &mut rng);
            worst = worst.max(item.constraint.max_residual(&net.eval(&x)?));
            samples += 1;
        }
    }
    Ok(SampledCheck { passed: worst <= SAMPLED_SLACK, worst_residual: worst, samples })
}
