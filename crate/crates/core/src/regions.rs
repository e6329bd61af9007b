//! Linear regions of a piecewise-linear network restricted to a segment or
//! a planar convex polygon, and the key points derived from them.
//!
//! Both routines push the restriction domain through the network one layer
//! at a time. On every current piece each layer's pre-activation is an
//! affine function of the domain parameter, so it is enough to track its
//! values at the piece's vertices; a ReLU unit whose sign differs between
//! two vertices is split at the interpolated zero crossing.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::network::{ActivationKind, ActivationPattern, Dnn, Sign};

/// Crossings closer than this (in segment parameter units) to a piece end
/// or to each other are not split.
pub const SEGMENT_MARGIN: f64 = 1e-12;
/// Vertex sign classification threshold when splitting polygons.
pub const POLYGON_SIGN_EPS: f64 = 1e-10;
/// Polygon splits that would leave a piece smaller than this are skipped.
pub const MIN_POLYGON_AREA: f64 = 1e-18;
/// Maximum distance of a vertex from the plane of a [`Polygon2D`].
pub const COPLANARITY_TOL: f64 = 1e-9;

/// A line segment in input space.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    start: Vec<f64>,
    end: Vec<f64>,
}

impl Segment {
    pub fn new(start: Vec<f64>, end: Vec<f64>) -> Result<Self> {
        if start.len() != end.len() || start.is_empty() {
            return Err(Error::Dimension(format!(
                "segment endpoints have lengths {} and {}",
                start.len(),
                end.len()
            )));
        }
        if start.iter().chain(&end).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("segment endpoint is not finite".into()));
        }
        if start == end {
            return Err(Error::InvalidInput("segment has zero length".into()));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn end(&self) -> &[f64] {
        &self.end
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    /// `start + t (end - start)`, exact at `t = 0` and `t = 1`.
    pub fn point_at(&self, t: f64) -> Vec<f64> {
        if t == 0.0 {
            return self.start.clone();
        }
        if t == 1.0 {
            return self.end.clone();
        }
        self.start
            .iter()
            .zip(&self.end)
            .map(|(a, b)| a + t * (b - a))
            .collect()
    }

    pub fn length(&self) -> f64 {
        dist(&self.start, &self.end)
    }
}

/// Orthonormal 2-D coordinates on the plane of a polygon.
#[derive(Debug, Clone, PartialEq)]
struct Plane {
    origin: Vec<f64>,
    e1: Vec<f64>,
    e2: Vec<f64>,
}

impl Plane {
    fn coords(&self, x: &[f64]) -> ([f64; 2], f64) {
        let w: Vec<f64> = x.iter().zip(&self.origin).map(|(a, o)| a - o).collect();
        let u = dot(&w, &self.e1);
        let v = dot(&w, &self.e2);
        let residual = w
            .iter()
            .zip(self.e1.iter().zip(&self.e2))
            .map(|(wi, (a, b))| (wi - u * a - v * b).powi(2))
            .sum::<f64>()
            .sqrt();
        ([u, v], residual)
    }

    fn point(&self, uv: [f64; 2]) -> Vec<f64> {
        self.origin
            .iter()
            .zip(self.e1.iter().zip(&self.e2))
            .map(|(o, (a, b))| o + uv[0] * a + uv[1] * b)
            .collect()
    }
}

/// A convex polygon lying in a 2-D affine subspace of input space.
///
/// The plane is parameterized with the first vertex as origin, the first
/// edge as the first axis and Gram–Schmidt on the remaining vertices for
/// the second axis. In those coordinates the polygon is counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    vertices: Vec<Vec<f64>>,
    plane: Plane,
    uv: Vec<[f64; 2]>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let dim = vertices[0].len();
        if dim < 2 || vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::Dimension("polygon vertices must share a dimension of at least 2".into()));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("polygon vertex is not finite".into()));
        }
        for i in 0..vertices.len() {
            if vertices[i] == vertices[(i + 1) % vertices.len()] {
                return Err(Error::InvalidInput(format!("polygon repeats vertex {i}")));
            }
        }
        let origin = vertices[0].clone();
        let e1 = normalized(&sub(&vertices[1], &origin));
        let scale = vertices.iter().map(|v| dist(v, &origin)).fold(0.0, f64::max);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for v in &vertices[2..] {
            let w = sub(v, &origin);
            let proj = dot(&w, &e1);
            let orth: Vec<f64> = w.iter().zip(&e1).map(|(a, b)| a - proj * b).collect();
            let n = norm(&orth);
            if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
                best = Some((n, orth));
            }
        }
        let (n, orth) = best.expect("at least one remaining vertex");
        if n <= 1e-12 * scale.max(1.0) {
            return Err(Error::InvalidInput("polygon is degenerate (collinear vertices)".into()));
        }
        let e2: Vec<f64> = orth.iter().map(|v| v / n).collect();
        let plane = Plane { origin, e1, e2 };

        let mut uv = Vec::with_capacity(vertices.len());
        for (i, v) in vertices.iter().enumerate() {
            let (c, residual) = plane.coords(v);
            if residual > COPLANARITY_TOL {
                return Err(Error::InvalidInput(format!(
                    "polygon vertex {i} is {residual:.3e} away from the polygon's plane"
                )));
            }
            uv.push(c);
        }
        let k = uv.len();
        for i in 0..k {
            let (a, b, c) = (uv[i], uv[(i + 1) % k], uv[(i + 2) % k]);
            let turn = cross(sub2(b, a), sub2(c, b));
            if turn < -1e-12 * scale.max(1.0).powi(2) {
                return Err(Error::InvalidInput("polygon is not convex".into()));
            }
        }
        if shoelace(&uv) <= MIN_POLYGON_AREA {
            return Err(Error::InvalidInput("polygon has no area".into()));
        }
        Ok(Self { vertices, plane, uv })
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn area(&self) -> f64 {
        shoelace(&self.uv)
    }

    /// Maps plane coordinates back to input space.
    pub fn point_at(&self, uv: [f64; 2]) -> Vec<f64> {
        self.plane.point(uv)
    }

    /// Plane coordinates of the vertices.
    pub fn plane_coords(&self) -> &[[f64; 2]] {
        &self.uv
    }
}

/// Bounded convex input region of a specification.
#[derive(Debug, Clone, PartialEq)]
pub enum Polytope {
    Segment(Segment),
    Polygon(Polygon2D),
}

impl Polytope {
    pub fn dim(&self) -> usize {
        match self {
            Polytope::Segment(s) => s.dim(),
            Polytope::Polygon(p) => p.dim(),
        }
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            Polytope::Segment(s) => vec![s.start.clone(), s.end.clone()],
            Polytope::Polygon(p) => p.vertices.clone(),
        }
    }
}

/// Geometry of one linear region.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionShape {
    /// Sub-interval `[t0, t1]` of a segment with its input-space endpoints.
    Interval {
        t0: f64,
        t1: f64,
        start: Vec<f64>,
        end: Vec<f64>,
    },
    /// Convex sub-polygon, vertices in input space and in plane coordinates.
    Polygon { vertices: Vec<Vec<f64>>, plane: Vec<[f64; 2]> },
}

/// A linear region together with the activation pattern holding inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub shape: RegionShape,
    pub pattern: ActivationPattern,
}

impl Piece {
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match &self.shape {
            RegionShape::Interval { start, end, .. } => vec![start.clone(), end.clone()],
            RegionShape::Polygon { vertices, .. } => vertices.clone(),
        }
    }

    /// Interval length or polygon area, in input-space units.
    pub fn measure(&self) -> f64 {
        match &self.shape {
            RegionShape::Interval { start, end, .. } => dist(start, end),
            RegionShape::Polygon { plane, .. } => shoelace(plane),
        }
    }

    /// Midpoint of an interval or vertex average of a polygon.
    pub fn interior_point(&self) -> Vec<f64> {
        let verts = self.vertices();
        let n = verts.len() as f64;
        let mut c = vec![0.0; verts[0].len()];
        for v in &verts {
            c.iter_mut().zip(v).for_each(|(ci, vi)| *ci += vi / n);
        }
        c
    }
}

/// Decomposition of a polytope into linear regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    pub pieces: Vec<Piece>,
}

impl RegionPartition {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Sorted interior breakpoints of a segment partition, in `t`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .pieces
            .iter()
            .filter_map(|p| match p.shape {
                RegionShape::Interval { t0, .. } if t0 > 0.0 => Some(t0),
                _ => None,
            })
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    pub fn total_measure(&self) -> f64 {
        self.pieces.iter().map(Piece::measure).sum()
    }
}

/// A region vertex, tagged with the pattern of the region it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyPoint {
    pub point: Vec<f64>,
    pub pattern: ActivationPattern,
    /// Index of the polytope (in the input list) this point came from.
    pub source_polytope: usize,
}

struct LinePoint {
    t: f64,
    values: Array1<f64>,
}

/// Linear regions of `dnn` along `seg`.
pub fn exactline(dnn: &Dnn, seg: &Segment) -> Result<RegionPartition> {
    dnn.require_pwl()?;
    if seg.dim() != dnn.input_dim() {
        return Err(Error::Dimension(format!(
            "segment lives in dimension {}, network expects {}",
            seg.dim(),
            dnn.input_dim()
        )));
    }
    let mut points = vec![
        LinePoint { t: 0.0, values: Array1::from(seg.start.clone()) },
        LinePoint { t: 1.0, values: Array1::from(seg.end.clone()) },
    ];
    for layer in dnn.layers() {
        let pre: Vec<Array1<f64>> = points.iter().map(|p| layer.pre_activation(p.values.view())).collect();
        let mut next = Vec::with_capacity(points.len());
        for i in 0..points.len() {
            let (ta, za) = (points[i].t, &pre[i]);
            next.push(LinePoint { t: ta, values: za.clone() });
            if layer.activation() != ActivationKind::Relu || i + 1 == points.len() {
                continue;
            }
            let (tb, zb) = (points[i + 1].t, &pre[i + 1]);
            let mut crossings: Vec<f64> = za
                .iter()
                .zip(zb.iter())
                .filter(|(a, b)| (**a < 0.0 && **b > 0.0) || (**a > 0.0 && **b < 0.0))
                .map(|(a, b)| a / (a - b))
                .filter(|lam| {
                    let t = ta + lam * (tb - ta);
                    t > ta + SEGMENT_MARGIN && t < tb - SEGMENT_MARGIN
                })
                .collect();
            crossings.sort_by(f64::total_cmp);
            let mut last_t = ta;
            for lam in crossings {
                let t = ta + lam * (tb - ta);
                if t - last_t <= SEGMENT_MARGIN {
                    continue;
                }
                last_t = t;
                next.push(LinePoint { t, values: za + &((zb - za) * lam) });
            }
        }
        for p in &mut next {
            let kind = layer.activation();
            p.values.mapv_inplace(|z| kind.apply(z));
        }
        points = next;
    }

    let mut pieces: Vec<Piece> = Vec::with_capacity(points.len() - 1);
    for pair in points.windows(2) {
        let (t0, t1) = (pair[0].t, pair[1].t);
        let pattern = dnn.activation_pattern(&seg.point_at(0.5 * (t0 + t1)))?;
        match pieces.last_mut() {
            Some(Piece { shape: RegionShape::Interval { t1: prev_t1, end, .. }, pattern: prev })
                if *prev == pattern =>
            {
                *prev_t1 = t1;
                *end = seg.point_at(t1);
            }
            _ => pieces.push(Piece {
                shape: RegionShape::Interval { t0, t1, start: seg.point_at(t0), end: seg.point_at(t1) },
                pattern,
            }),
        }
    }
    Ok(RegionPartition { pieces })
}

#[derive(Clone)]
struct PlaneVertex {
    uv: [f64; 2],
    x: Array1<f64>,
    values: Array1<f64>,
}

impl PlaneVertex {
    fn lerp(&self, other: &Self, lam: f64) -> Self {
        Self {
            uv: [
                self.uv[0] + lam * (other.uv[0] - self.uv[0]),
                self.uv[1] + lam * (other.uv[1] - self.uv[1]),
            ],
            x: &self.x + &((&other.x - &self.x) * lam),
            values: &self.values + &((&other.values - &self.values) * lam),
        }
    }
}

fn classify(z: f64) -> i8 {
    if z > POLYGON_SIGN_EPS {
        1
    } else if z < -POLYGON_SIGN_EPS {
        -1
    } else {
        0
    }
}

/// Splits a convex polygon along the zero line of coordinate `j` of its
/// vertex values. Returns the polygon unchanged when the line misses it or
/// when either side would be a sliver.
fn split_polygon(poly: Vec<PlaneVertex>, j: usize) -> Vec<Vec<PlaneVertex>> {
    let cls: Vec<i8> = poly.iter().map(|v| classify(v.values[j])).collect();
    if !cls.contains(&1) || !cls.contains(&-1) {
        return vec![poly];
    }
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (&poly[i], &poly[(i + 1) % n]);
        let (ca, cb) = (cls[i], cls[(i + 1) % n]);
        if ca >= 0 {
            pos.push(a.clone());
        }
        if ca <= 0 {
            neg.push(a.clone());
        }
        if ca * cb < 0 {
            let (za, zb) = (a.values[j], b.values[j]);
            let mut p = a.lerp(b, za / (za - zb));
            p.values[j] = 0.0;
            pos.push(p.clone());
            neg.push(p);
        }
    }
    let area = |p: &[PlaneVertex]| shoelace(&p.iter().map(|v| v.uv).collect::<Vec<_>>());
    if area(&pos) < MIN_POLYGON_AREA || area(&neg) < MIN_POLYGON_AREA {
        return vec![poly];
    }
    vec![pos, neg]
}

/// Linear regions of `dnn` over the planar polygon `poly`.
pub fn plane_transfer(dnn: &Dnn, poly: &Polygon2D) -> Result<RegionPartition> {
    dnn.require_pwl()?;
    if poly.dim() != dnn.input_dim() {
        return Err(Error::Dimension(format!(
            "polygon lives in dimension {}, network expects {}",
            poly.dim(),
            dnn.input_dim()
        )));
    }
    let initial: Vec<PlaneVertex> = poly
        .vertices
        .iter()
        .zip(&poly.uv)
        .map(|(x, uv)| PlaneVertex { uv: *uv, x: Array1::from(x.clone()), values: Array1::from(x.clone()) })
        .collect();
    let mut polys = vec![initial];
    for layer in dnn.layers() {
        for p in &mut polys {
            for v in p.iter_mut() {
                v.values = layer.pre_activation(v.values.view());
            }
        }
        match layer.activation() {
            ActivationKind::Relu => {
                for j in 0..layer.out_dim() {
                    polys = polys.into_iter().flat_map(|p| split_polygon(p, j)).collect();
                }
                for p in &mut polys {
                    let n = p.len() as f64;
                    // mean of vertex values equals the value at the vertex centroid
                    let signs: Vec<Sign> = (0..layer.out_dim())
                        .map(|j| Sign::of(p.iter().map(|v| v.values[j]).sum::<f64>() / n))
                        .collect();
                    for v in p.iter_mut() {
                        v.values.iter_mut().zip(&signs).for_each(|(z, s)| *z *= s.slope());
                    }
                }
            }
            kind => {
                for p in &mut polys {
                    for v in p.iter_mut() {
                        v.values.mapv_inplace(|z| kind.apply(z));
                    }
                }
            }
        }
    }

    let mut pieces = Vec::with_capacity(polys.len());
    for p in polys {
        let mut verts: Vec<PlaneVertex> = Vec::with_capacity(p.len());
        for v in p {
            if verts.last().is_none_or(|l| dist2(l.uv, v.uv) > 1e-12) {
                verts.push(v);
            }
        }
        while verts.len() > 1 && dist2(verts[0].uv, verts[verts.len() - 1].uv) <= 1e-12 {
            verts.pop();
        }
        let n = verts.len() as f64;
        let mut centre = vec![0.0; poly.dim()];
        for v in &verts {
            centre.iter_mut().zip(v.x.iter()).for_each(|(c, xi)| *c += xi / n);
        }
        let pattern = dnn.activation_pattern(&centre)?;
        pieces.push(Piece {
            pattern,
            shape: RegionShape::Polygon {
                vertices: verts.iter().map(|v| v.x.to_vec()).collect(),
                plane: verts.iter().map(|v| v.uv).collect(),
            },
        });
    }
    Ok(RegionPartition { pieces })
}

/// Linear regions of `dnn` over either kind of polytope.
pub fn partition(dnn: &Dnn, polytope: &Polytope) -> Result<RegionPartition> {
    match polytope {
        Polytope::Segment(s) => exactline(dnn, s),
        Polytope::Polygon(p) => plane_transfer(dnn, p),
    }
}

/// Every vertex of every linear region of every polytope, tagged with the
/// owning region's pattern. Points shared by several regions appear once
/// per region.
pub fn key_points(dnn: &Dnn, polytopes: &[Polytope]) -> Result<Vec<KeyPoint>> {
    let mut out = Vec::new();
    for (idx, polytope) in polytopes.iter().enumerate() {
        for piece in partition(dnn, polytope)?.pieces {
            for point in piece.vertices() {
                out.push(KeyPoint { point, pattern: piece.pattern.clone(), source_polytope: idx });
            }
        }
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm(&sub(a, b))
}

fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|v| v / n).collect()
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Signed area (positive for counter-clockwise order).
pub(crate) fn shoelace(pts: &[[f64; 2]]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n).map(|i| cross(pts[i], pts[(i + 1) % n])).sum::<f64>()
}
