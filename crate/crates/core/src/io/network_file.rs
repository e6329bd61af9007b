//! JSON network files.
//!
//! ```json
//! {
//!   "kind": "dnn",
//!   "layers": [
//!     { "weights": [[-1.0], [1.0], [1.0]], "bias": [0.0, 0.0, -1.0], "activation": "relu" },
//!     { "weights": [[-1.0, -1.0, 1.0]], "bias": [0.0], "activation": "identity" }
//!   ]
//! }
//! ```
//!
//! A decoupled network uses `"kind": "ddnn"` with `activation_layers` and
//! `value_layers` in place of `layers`. Unknown fields are rejected.

use std::borrow::Cow;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Deserialize;

use crate::ddnn::{Ddnn, Network};
use crate::error::{Error, Result};
use crate::network::{ActivationKind, Dnn, Layer};

use super::float::fmt_g17;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDoc {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    kind: String,
    layers: Option<Vec<LayerDoc>>,
    activation_layers: Option<Vec<LayerDoc>>,
    value_layers: Option<Vec<LayerDoc>>,
}

/// A network read from a file, in whichever form it was stored.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedNetwork {
    Dnn(Dnn),
    Ddnn(Ddnn),
}

impl LoadedNetwork {
    pub fn kind(&self) -> &'static str {
        match self {
            LoadedNetwork::Dnn(_) => "dnn",
            LoadedNetwork::Ddnn(_) => "ddnn",
        }
    }

    pub fn as_network(&self) -> &dyn Network {
        match self {
            LoadedNetwork::Dnn(n) => n,
            LoadedNetwork::Ddnn(n) => n,
        }
    }

    /// The network whose linear regions govern this one.
    pub fn activation_network(&self) -> Cow<'_, Dnn> {
        match self {
            LoadedNetwork::Dnn(n) => Cow::Borrowed(n),
            LoadedNetwork::Ddnn(n) => Cow::Owned(n.activation_network()),
        }
    }
}

impl Network for LoadedNetwork {
    fn input_dim(&self) -> usize {
        self.as_network().input_dim()
    }
    fn output_dim(&self) -> usize {
        self.as_network().output_dim()
    }
    fn eval(&self, x: &[f64]) -> Result<Array1<f64>> {
        self.as_network().eval(x)
    }
    fn to_ddnn(&self) -> Cow<'_, Ddnn> {
        match self {
            LoadedNetwork::Dnn(n) => Cow::Owned(Ddnn::decouple(n)),
            LoadedNetwork::Ddnn(n) => Cow::Borrowed(n),
        }
    }
}

impl From<Dnn> for LoadedNetwork {
    fn from(n: Dnn) -> Self {
        LoadedNetwork::Dnn(n)
    }
}

impl From<Ddnn> for LoadedNetwork {
    fn from(n: Ddnn) -> Self {
        LoadedNetwork::Ddnn(n)
    }
}

/// Deserializes JSON, reporting the failing field path and position.
pub(crate) fn from_json<'de, T: Deserialize<'de>>(text: &'de str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." || path.is_empty() {
            Error::Parse(format!("{what}: {inner}"))
        } else {
            Error::Parse(format!("{what}: field `{path}`: {inner}"))
        }
    })?;
    Ok(value)
}

fn build_layer(doc: LayerDoc, label: &str) -> Result<Layer> {
    let activation = ActivationKind::from_name(&doc.activation).ok_or_else(|| {
        Error::InvalidInput(format!("{label}: unknown activation `{}`", doc.activation))
    })?;
    let rows = doc.weights.len();
    let cols = doc.weights.first().map_or(0, Vec::len);
    if let Some(r) = doc.weights.iter().position(|r| r.len() != cols) {
        return Err(Error::InvalidInput(format!(
            "{label}: weight row {r} has {} entries, row 0 has {cols}",
            doc.weights[r].len()
        )));
    }
    if doc.bias.len() != rows {
        return Err(Error::InvalidInput(format!(
            "{label}: bias has {} entries but weights have {rows} rows",
            doc.bias.len()
        )));
    }
    let weights = Array2::from_shape_vec((rows, cols), doc.weights.concat()).expect("rectangular");
    Layer::new(weights, Array1::from(doc.bias), activation).map_err(|e| Error::InvalidInput(format!("{label}: {e}")))
}

fn build_layers(docs: Vec<LayerDoc>, prefix: &str) -> Result<Vec<Layer>> {
    docs.into_iter()
        .enumerate()
        .map(|(i, d)| build_layer(d, &format!("{prefix}{}", i + 1)))
        .collect()
}

pub fn parse_network(text: &str) -> Result<LoadedNetwork> {
    let doc: NetworkDoc = from_json(text, "network file")?;
    let bad = |m: &str| Err(Error::InvalidInput(format!("network file: {m}")));
    match (doc.kind.as_str(), doc.layers, doc.activation_layers, doc.value_layers) {
        ("dnn", Some(layers), None, None) => Ok(LoadedNetwork::Dnn(Dnn::new(build_layers(layers, "layer ")?)?)),
        ("dnn", ..) => bad("kind `dnn` takes exactly the field `layers`"),
        ("ddnn", None, Some(act), Some(val)) => Ok(LoadedNetwork::Ddnn(Ddnn::new(
            build_layers(act, "activation layer ")?,
            build_layers(val, "value layer ")?,
        )?)),
        ("ddnn", ..) => bad("kind `ddnn` takes exactly the fields `activation_layers` and `value_layers`"),
        (other, ..) => bad(&format!("unknown kind `{other}` (expected `dnn` or `ddnn`)")),
    }
}

pub fn load_network(path: impl AsRef<Path>) -> Result<LoadedNetwork> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    parse_network(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        Error::InvalidInput(m) => Error::InvalidInput(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn write_layers(out: &mut String, name: &str, layers: &[Layer], last: bool) {
    let _ = writeln!(out, "  \"{name}\": [");
    for (i, l) in layers.iter().enumerate() {
        let rows: Vec<String> = l
            .weights()
            .rows()
            .into_iter()
            .map(|r| format!("[{}]", r.iter().map(|v| fmt_g17(*v)).collect::<Vec<_>>().join(", ")))
            .collect();
        let bias: Vec<String> = l.bias().iter().map(|v| fmt_g17(*v)).collect();
        let _ = writeln!(out, "    {{");
        let _ = writeln!(out, "      \"activation\": \"{}\",", l.activation().name());
        let _ = writeln!(out, "      \"weights\": [{}],", rows.join(", "));
        let _ = writeln!(out, "      \"bias\": [{}]", bias.join(", "));
        let _ = writeln!(out, "    }}{}", if i + 1 < layers.len() { "," } else { "" });
    }
    let _ = writeln!(out, "  ]{}", if last { "" } else { "," });
}

/// Serializes with 17 significant digits, so parsing gives back the same
/// network bit for bit.
pub fn print_network(net: &LoadedNetwork) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"kind\": \"{}\",", net.kind());
    match net {
        LoadedNetwork::Dnn(n) => write_layers(&mut out, "layers", n.layers(), true),
        LoadedNetwork::Ddnn(n) => {
            write_layers(&mut out, "activation_layers", n.act_layers(), false);
            write_layers(&mut out, "value_layers", n.value_layers(), true);
        }
    }
    out.push_str("}\n");
    out
}

pub fn save_network(net: &LoadedNetwork, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, print_network(net))?;
    Ok(())
}
