//! JSON specification files.
//!
//! ```json
//! {
//!   "points": [
//!     { "point": [0.5], "constraints": { "A": [[-1.0], [1.0]], "b": [1.0, -0.8] } },
//!     { "point": [0.2, 0.3], "classify_as": 1, "margin": 0.001 }
//!   ],
//!   "polytopes": [
//!     { "segment": { "start": [0.5], "end": [1.5] }, "constraints": { "A": [[1.0]], "b": [-0.4] } },
//!     { "polygon": { "vertices": [[0, 0], [1, 0], [0, 1]] }, "classify_as": 0 }
//!   ]
//! }
//! ```
//!
//! Both lists are optional. Each item carries either `constraints`
//! (`A y <= b`) or `classify_as` with an optional `margin`.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::regions::{Polygon2D, Polytope, Segment};
use crate::repair::{OutputConstraint, PointConstraint, PointSpec, PolytopeConstraint, PolytopeSpec, DEFAULT_MARGIN};

use super::network_file::from_json;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintsDoc {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PointDoc {
    point: Vec<f64>,
    constraints: Option<ConstraintsDoc>,
    classify_as: Option<usize>,
    margin: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentDoc {
    start: Vec<f64>,
    end: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolygonDoc {
    vertices: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolytopeDoc {
    segment: Option<SegmentDoc>,
    polygon: Option<PolygonDoc>,
    constraints: Option<ConstraintsDoc>,
    classify_as: Option<usize>,
    margin: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    #[serde(default)]
    points: Vec<PointDoc>,
    #[serde(default)]
    polytopes: Vec<PolytopeDoc>,
}

/// Contents of a specification file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecFile {
    pub points: PointSpec,
    pub polytopes: PolytopeSpec,
}

fn output_constraint(
    constraints: Option<ConstraintsDoc>,
    classify_as: Option<usize>,
    margin: Option<f64>,
    out_dim: usize,
    label: &str,
) -> Result<OutputConstraint> {
    let err = |m: String| Error::InvalidInput(format!("{label}: {m}"));
    match (constraints, classify_as) {
        (Some(c), None) => {
            if margin.is_some() {
                return Err(err("`margin` only applies to `classify_as`".into()));
            }
            if let Some(r) = c.a.iter().position(|r| r.len() != out_dim) {
                return Err(err(format!("row {r} of A has {} entries, network has {out_dim} outputs", c.a[r].len())));
            }
            let k = c.a.len();
            let a = Array2::from_shape_vec((k, out_dim), c.a.concat()).expect("rectangular");
            OutputConstraint::new(a, Array1::from(c.b)).map_err(|e| err(e.to_string()))
        }
        (None, Some(l)) => {
            let m = margin.unwrap_or(DEFAULT_MARGIN);
            if !(m.is_finite() && m >= 0.0) {
                return Err(err(format!("margin must be a finite non-negative number, got {m}")));
            }
            OutputConstraint::classify(l, out_dim, m).map_err(|e| err(e.to_string()))
        }
        (Some(_), Some(_)) => Err(err("give either `constraints` or `classify_as`, not both".into())),
        (None, None) => Err(err("missing `constraints` or `classify_as`".into())),
    }
}

/// Parses a spec for a network with `input_dim` inputs and `out_dim` outputs.
pub fn parse_spec(text: &str, input_dim: usize, out_dim: usize) -> Result<SpecFile> {
    let doc: SpecDoc = from_json(text, "spec file")?;
    let mut points = Vec::with_capacity(doc.points.len());
    for (i, p) in doc.points.into_iter().enumerate() {
        let label = format!("points[{i}]");
        if p.point.len() != input_dim {
            return Err(Error::InvalidInput(format!(
                "{label}: point has {} coordinates, network has {input_dim} inputs",
                p.point.len()
            )));
        }
        let constraint = output_constraint(p.constraints, p.classify_as, p.margin, out_dim, &label)?;
        points.push(PointConstraint { point: p.point, constraint });
    }
    let mut polytopes = Vec::with_capacity(doc.polytopes.len());
    for (i, p) in doc.polytopes.into_iter().enumerate() {
        let label = format!("polytopes[{i}]");
        let err = |m: String| Error::InvalidInput(format!("{label}: {m}"));
        let polytope = match (p.segment, p.polygon) {
            (Some(s), None) => Polytope::Segment(Segment::new(s.start, s.end).map_err(|e| err(e.to_string()))?),
            (None, Some(g)) => Polytope::Polygon(Polygon2D::new(g.vertices).map_err(|e| err(e.to_string()))?),
            _ => return Err(err("give exactly one of `segment` or `polygon`".into())),
        };
        if polytope.dim() != input_dim {
            return Err(err(format!("polytope lives in {} dimensions, network has {input_dim} inputs", polytope.dim())));
        }
        let constraint = output_constraint(p.constraints, p.classify_as, p.margin, out_dim, &label)?;
        polytopes.push(PolytopeConstraint { polytope, constraint });
    }
    Ok(SpecFile { points: PointSpec::new(points)?, polytopes: PolytopeSpec::new(polytopes)? })
}

pub fn load_spec(path: impl AsRef<Path>, input_dim: usize, out_dim: usize) -> Result<SpecFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_spec(&text, input_dim, out_dim).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
        other => other,
    })
}
