//! Single-layer repair of pointwise and polytope specifications.
//!
//! Every specification item pairs an input (a point or a polytope) with an
//! output halfspace system `A y <= b`. Repair edits the value channel of one
//! layer by the smallest delta (in ℓ1 or ℓ∞) for which the decoupled network
//! satisfies every item. The output of a decoupled network is affine in the
//! parameters of any single value layer, so the search is one LP.

use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};

use crate::ddnn::{layer_slot, Ddnn, Network};
use crate::error::{Error, Result};
use crate::jacobian::{layout_of, param_jacobian, ParamLayout};
use crate::lp::{
    encode_min_norm, solve_external, solve_with_limit, DeltaRow, ExternalSolver, LinearProgram, LpOutcome,
    NormObjective, MAX_PIVOTS,
};
use crate::network::ActivationPattern;
use crate::regions::{key_points, Polytope};

/// Margin used when a classification label becomes LP rows.
pub const DEFAULT_MARGIN: f64 = 1e-6;
/// Residual allowed by [`satisfies_points`] unless the caller picks another.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// Output halfspace system `a y <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputConstraint {
    a: Array2<f64>,
    b: Array1<f64>,
}

impl OutputConstraint {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "constraint matrix has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.ncols() == 0 {
            return Err(Error::Dimension("constraint matrix has no columns".into()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("constraint contains a non-finite entry".into()));
        }
        Ok(Self { a, b })
    }

    /// `lower <= y <= upper` componentwise; `None` leaves a side open.
    pub fn bounds(lower: &[Option<f64>], upper: &[Option<f64>]) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension("lower and upper bounds differ in length".into()));
        }
        let m = lower.len();
        let mut rows = Vec::new();
        for i in 0..m {
            if let Some(l) = lower[i] {
                let mut r = vec![0.0; m];
                r[i] = -1.0;
                rows.push((r, -l));
            }
            if let Some(u) = upper[i] {
                let mut r = vec![0.0; m];
                r[i] = 1.0;
                rows.push((r, u));
            }
        }
        Self::from_rows(m, rows)
    }

    /// `y_label - y_j >= margin` for every `j != label`.
    pub fn classify(label: usize, out_dim: usize, margin: f64) -> Result<Self> {
        if label >= out_dim {
            return Err(Error::InvalidInput(format!("label {label} out of range for {out_dim} outputs")));
        }
        let rows = (0..out_dim)
            .filter(|&j| j != label)
            .map(|j| {
                let mut r = vec![0.0; out_dim];
                r[j] = 1.0;
                r[label] = -1.0;
                (r, -margin)
            })
            .collect();
        Self::from_rows(out_dim, rows)
    }

    fn from_rows(m: usize, rows: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let k = rows.len();
        let mut a = Array2::zeros((k, m));
        let mut b = Array1::zeros(k);
        for (i, (r, rhs)) in rows.into_iter().enumerate() {
            a.row_mut(i).assign(&Array1::from(r));
            b[i] = rhs;
        }
        Self::new(a, b)
    }

    pub fn a(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn b(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn out_dim(&self) -> usize {
        self.a.ncols()
    }

    /// Largest `(a y - b)_i`, or `-inf` for a system without rows.
    pub fn max_residual(&self, y: &Array1<f64>) -> f64 {
        (self.a.dot(y) - &self.b).iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointConstraint {
    pub point: Vec<f64>,
    pub constraint: OutputConstraint,
}

/// Finitely many input points, each with its own output constraint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSpec {
    items: Vec<PointConstraint>,
}

impl PointSpec {
    pub fn new(items: Vec<PointConstraint>) -> Result<Self> {
        if let Some(first) = items.first() {
            let (n, m) = (first.point.len(), first.constraint.out_dim());
            for (i, item) in items.iter().enumerate() {
                if item.point.len() != n || item.constraint.out_dim() != m {
                    return Err(Error::Dimension(format!(
                        "point {i} has input dim {} and output dim {}, expected {n} and {m}",
                        item.point.len(),
                        item.constraint.out_dim()
                    )));
                }
                if item.point.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate")));
                }
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[PointConstraint] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn check_dims(&self, input_dim: usize, output_dim: usize) -> Result<()> {
        match self.items.first() {
            Some(p) if p.point.len() != input_dim || p.constraint.out_dim() != output_dim => {
                Err(Error::Dimension(format!(
                    "spec is {}→{} but network is {input_dim}→{output_dim}",
                    p.point.len(),
                    p.constraint.out_dim()
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeConstraint {
    pub polytope: Polytope,
    pub constraint: OutputConstraint,
}

/// Bounded input polytopes, each with its own output constraint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolytopeSpec {
    items: Vec<PolytopeConstraint>,
}

impl PolytopeSpec {
    pub fn new(items: Vec<PolytopeConstraint>) -> Result<Self> {
        if let Some(first) = items.first() {
            let (n, m) = (first.polytope.dim(), first.constraint.out_dim());
            for (i, item) in items.iter().enumerate() {
                if item.polytope.dim() != n || item.constraint.out_dim() != m {
                    return Err(Error::Dimension(format!(
                        "polytope {i} has input dim {} and output dim {}, expected {n} and {m}",
                        item.polytope.dim(),
                        item.constraint.out_dim()
                    )));
                }
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[PolytopeConstraint] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Outcome of [`satisfies_points`].
#[derive(Debug, Clone, PartialEq)]
pub struct Satisfaction {
    pub satisfied: bool,
    /// Largest residual `(A y - b)_i` of each item.
    pub worst: Vec<f64>,
}

impl Satisfaction {
    pub fn max_residual(&self) -> f64 {
        self.worst.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }
}

/// Checks `A y <= b + slack` at every point of `spec`.
pub fn satisfies_points(net: &dyn Network, spec: &PointSpec, slack: f64) -> Result<Satisfaction> {
    spec.check_dims(net.input_dim(), net.output_dim())?;
    let worst = spec
        .items()
        .iter()
        .map(|item| Ok(item.constraint.max_residual(&net.eval(&item.point)?)))
        .collect::<Result<Vec<_>>>()?;
    let satisfied = worst.iter().all(|w| *w <= slack);
    Ok(Satisfaction { satisfied, worst })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum ParamRef {
    Weight(usize, usize),
    Bias(usize),
}

/// Set of named parameters a repair may change; all others stay fixed.
///
/// Names look like `L1.w[0][2]` (layer 1, row 0, column 2) and `L1.b[2]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RepairMask {
    free: BTreeSet<(usize, ParamRef)>,
}

impl RepairMask {
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut free = BTreeSet::new();
        for name in names {
            free.insert(parse_param_name(name.as_ref())?);
        }
        Ok(Self { free })
    }

    /// The four first-layer parameters freed in the worked examples:
    /// the three input weights and the bias of the third unit.
    pub fn paper4() -> Self {
        Self::from_names(&crate::fixtures::PAPER4).expect("valid names")
    }

    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    /// Layers that have at least one free parameter.
    pub fn layers(&self) -> BTreeSet<usize> {
        self.free.iter().map(|(l, _)| *l).collect()
    }

    /// Per-column freedom flags for `layer` with the given layout.
    pub fn for_layer(&self, layer: usize, layout: ParamLayout) -> Result<Vec<bool>> {
        let mut flags = vec![false; layout.len()];
        for &(l, p) in &self.free {
            if l != layer {
                continue;
            }
            let col = match p {
                ParamRef::Weight(r, c) if r < layout.out_dim && c < layout.in_dim => layout.weight(r, c),
                ParamRef::Bias(r) if r < layout.out_dim => layout.bias(r),
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "mask entry {} is outside layer {layer} ({}x{})",
                        format_param(l, p),
                        layout.out_dim,
                        layout.in_dim
                    )))
                }
            };
            flags[col] = true;
        }
        Ok(flags)
    }

    pub fn names(&self) -> Vec<String> {
        self.free.iter().map(|&(l, p)| format_param(l, p)).collect()
    }
}

fn format_param(layer: usize, p: ParamRef) -> String {
    match p {
        ParamRef::Weight(r, c) => format!("L{layer}.w[{r}][{c}]"),
        ParamRef::Bias(r) => format!("L{layer}.b[{r}]"),
    }
}

fn parse_param_name(name: &str) -> Result<(usize, ParamRef)> {
    let bad = || Error::InvalidInput(format!("bad parameter name `{name}` (expected L<k>.w[<r>][<c>] or L<k>.b[<r>])"));
    let rest = name.trim().strip_prefix('L').ok_or_else(bad)?;
    let (layer, rest) = rest.split_once('.').ok_or_else(bad)?;
    let layer: usize = layer.parse().map_err(|_| bad())?;
    if layer == 0 {
        return Err(bad());
    }
    let index = |s: &str| -> Result<(usize, String)> {
        let s = s.strip_prefix('[').ok_or_else(bad)?;
        let (i, rest) = s.split_once(']').ok_or_else(bad)?;
        Ok((i.parse().map_err(|_| bad())?, rest.to_string()))
    };
    if let Some(rest) = rest.strip_prefix('w') {
        let (r, rest) = index(rest)?;
        let (c, rest) = index(&rest)?;
        if !rest.is_empty() {
            return Err(bad());
        }
        Ok((layer, ParamRef::Weight(r, c)))
    } else if let Some(rest) = rest.strip_prefix('b') {
        let (r, rest) = index(rest)?;
        if !rest.is_empty() {
            return Err(bad());
        }
        Ok((layer, ParamRef::Bias(r)))
    } else {
        Err(bad())
    }
}

/// Knobs shared by the repair entry points.
#[derive(Clone, Copy)]
pub struct RepairOptions<'a> {
    pub norm: NormObjective,
    pub mask: Option<&'a RepairMask>,
    /// Solve with this solver instead of the built-in simplex.
    pub solver: Option<&'a dyn ExternalSolver>,
    pub max_pivots: usize,
}

impl<'a> RepairOptions<'a> {
    pub fn new(norm: NormObjective) -> Self {
        Self { norm, mask: None, solver: None, max_pivots: MAX_PIVOTS }
    }

    pub fn with_mask(mut self, mask: &'a RepairMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_solver(mut self, solver: &'a dyn ExternalSolver) -> Self {
        self.solver = Some(solver);
        self
    }
}

impl fmt::Debug for RepairOptions<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RepairOptions")
            .field("norm", &self.norm)
            .field("mask", &self.mask)
            .field("solver", &self.solver.map(|s| s.name().to_string()))
            .field("max_pivots", &self.max_pivots)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairStatus {
    Repaired,
    Infeasible,
}

impl RepairStatus {
    pub fn name(self) -> &'static str {
        match self {
            RepairStatus::Repaired => "repaired",
            RepairStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub regions: Duration,
    pub jacobians: Duration,
    pub lp: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone)]
pub struct RepairResult {
    pub status: RepairStatus,
    pub repaired: Option<Ddnn>,
    /// Change of the layer's value-channel parameters, weights row-major
    /// then biases.
    pub delta: Option<Vec<f64>>,
    pub norm_value: Option<f64>,
    pub norm: NormObjective,
    pub layer: usize,
    pub layout: ParamLayout,
    /// Number of key points; equals the number of spec points for point
    /// repair.
    pub key_point_count: usize,
    pub timings: Timings,
    /// The LP that was solved.
    pub lp: LinearProgram,
}

impl RepairResult {
    pub fn is_repaired(&self) -> bool {
        self.status == RepairStatus::Repaired
    }
}

/// Repairs value layer `layer` (1-based) so that the network satisfies
/// every point of `spec`.
///
/// `patterns`, when given, holds one activation pattern per spec point and
/// fixes the linearization used at that point.
pub fn point_repair(
    net: &dyn Network,
    layer: usize,
    spec: &PointSpec,
    opts: &RepairOptions<'_>,
    patterns: Option<&[ActivationPattern]>,
) -> Result<RepairResult> {
    let started = Instant::now();
    let ddnn = net.to_ddnn();
    let mut result = repair_core(&ddnn, layer, spec, opts, patterns, true)?;
    result.timings.total = started.elapsed();
    Ok(result)
}

fn repair_core(
    ddnn: &Ddnn,
    layer: usize,
    spec: &PointSpec,
    opts: &RepairOptions<'_>,
    patterns: Option<&[ActivationPattern]>,
    strict_mask: bool,
) -> Result<RepairResult> {
    layer_slot(layer, ddnn.layer_count())?;
    spec.check_dims(ddnn.input_dim(), ddnn.output_dim())?;
    if let Some(p) = patterns {
        if p.len() != spec.len() {
            return Err(Error::Dimension(format!("{} patterns for {} points", p.len(), spec.len())));
        }
        if !ddnn.is_pwl() {
            return Err(Error::UnsupportedActivation(
                "pattern overrides need a piecewise-linear activation channel".into(),
            ));
        }
    }
    let layout = layout_of(ddnn, layer)?;
    let mask = match opts.mask {
        Some(m) => {
            if strict_mask {
                if let Some(other) = m.layers().into_iter().find(|&l| l != layer) {
                    return Err(Error::InvalidInput(format!(
                        "mask frees parameters of layer {other} but layer {layer} is being repaired"
                    )));
                }
            }
            Some(m.for_layer(layer, layout)?)
        }
        None => None,
    };

    let t = Instant::now();
    let mut rows = Vec::new();
    for (i, item) in spec.items().iter().enumerate() {
        let jac = param_jacobian(ddnn, layer, &item.point, patterns.map(|p| &p[i]))?;
        let a = item.constraint.a();
        let coeff = a.dot(&jac.matrix);
        let rhs = item.constraint.b() - &a.dot(&jac.base);
        for (r, b) in coeff.rows().into_iter().zip(rhs) {
            rows.push(DeltaRow { coeff: r.to_vec(), rhs: b });
        }
    }
    let jacobians = t.elapsed();

    let t = Instant::now();
    let lp = encode_min_norm(&rows, layout.len(), opts.norm, mask.as_deref())?;
    let outcome = match opts.solver {
        Some(s) => solve_external(&lp, s)?,
        None => solve_with_limit(&lp, opts.max_pivots)?,
    };
    let lp_time = t.elapsed();

    let timings = Timings { jacobians, lp: lp_time, ..Timings::default() };
    let mut result = RepairResult {
        status: RepairStatus::Infeasible,
        repaired: None,
        delta: None,
        norm_value: None,
        norm: opts.norm,
        layer,
        layout,
        key_point_count: spec.len(),
        timings,
        lp,
    };
    match outcome {
        LpOutcome::Infeasible => Ok(result),
        LpOutcome::Unbounded => Err(Error::SolverProtocol("min-norm LP reported unbounded".into())),
        LpOutcome::Optimal { x, .. } => {
            let mut delta = x[..layout.len()].to_vec();
            if let Some(m) = &mask {
                delta.iter_mut().zip(m).filter(|(_, free)| !**free).for_each(|(d, _)| *d = 0.0);
            }
            let (dw, db) = layout.split(&delta)?;
            let current = &ddnn.value_layers()[layer - 1];
            let repaired = ddnn.set_value_layer(layer, current.weights() + &dw, current.bias() + &db)?;
            result.status = RepairStatus::Repaired;
            result.norm_value = Some(opts.norm.of(&delta));
            result.delta = Some(delta);
            result.repaired = Some(repaired);
            Ok(result)
        }
    }
}

/// Repairs value layer `layer` so that the network satisfies `spec` at
/// every point of every polytope.
///
/// The polytopes are split into linear regions of the activation channel
/// and each region vertex becomes a spec point, evaluated under its
/// region's pattern.
pub fn polytope_repair(
    net: &dyn Network,
    layer: usize,
    spec: &PolytopeSpec,
    opts: &RepairOptions<'_>,
) -> Result<RepairResult> {
    polytope_repair_inner(&net.to_ddnn(), layer, spec, opts, true)
}

fn polytope_repair_inner(
    ddnn: &Ddnn,
    layer: usize,
    spec: &PolytopeSpec,
    opts: &RepairOptions<'_>,
    strict_mask: bool,
) -> Result<RepairResult> {
    let started = Instant::now();
    if !ddnn.is_pwl() {
        return Err(Error::UnsupportedActivation(
            "polytope repair needs piecewise-linear activations".into(),
        ));
    }
    layer_slot(layer, ddnn.layer_count())?;
    let t = Instant::now();
    let polytopes: Vec<Polytope> = spec.items().iter().map(|i| i.polytope.clone()).collect();
    let keys = key_points(&ddnn.activation_network(), &polytopes)?;
    let regions = t.elapsed();

    let mut items = Vec::with_capacity(keys.len());
    let mut patterns = Vec::with_capacity(keys.len());
    for k in keys {
        items.push(PointConstraint {
            point: k.point,
            constraint: spec.items()[k.source_polytope].constraint.clone(),
        });
        patterns.push(k.pattern);
    }
    let points = PointSpec::new(items)?;
    let mut result = repair_core(ddnn, layer, &points, opts, Some(&patterns), strict_mask)?;
    result.timings.regions = regions;
    result.timings.total = started.elapsed();
    Ok(result)
}

/// Either kind of specification.
#[derive(Debug, Clone, PartialEq)]
pub enum RepairSpec {
    Points(PointSpec),
    Polytopes(PolytopeSpec),
}

/// Repairs each layer independently. A mask restricts every layer to the
/// parameters it names for that layer.
pub fn repair_all_layers(net: &dyn Network, spec: &RepairSpec, opts: &RepairOptions<'_>) -> Vec<Result<RepairResult>> {
    let ddnn = net.to_ddnn();
    (1..=ddnn.layer_count())
        .map(|layer| match spec {
            RepairSpec::Points(s) => {
                let started = Instant::now();
                repair_core(&ddnn, layer, s, opts, None, false).map(|mut r| {
                    r.timings.total = started.elapsed();
                    r
                })
            }
            RepairSpec::Polytopes(s) => polytope_repair_inner(&ddnn, layer, s, opts, false),
        })
        .collect()
}
