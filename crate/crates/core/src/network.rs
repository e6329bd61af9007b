//! Dense feed-forward networks: evaluation and activation patterns.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Activation function applied coordinate-wise after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Relu,
    Tanh,
    Identity,
}

impl ActivationKind {
    /// Relu and Identity are piecewise-linear; Tanh is not.
    pub fn is_pwl(self) -> bool {
        matches!(self, ActivationKind::Relu | ActivationKind::Identity)
    }

    pub fn apply(self, z: f64) -> f64 {
        match self {
            ActivationKind::Relu => relu(z),
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Identity => z,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(ActivationKind::Relu),
            "tanh" => Some(ActivationKind::Tanh),
            "identity" => Some(ActivationKind::Identity),
            _ => None,
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[inline]
fn relu(z: f64) -> f64 {
    if z >= 0.0 {
        z
    } else {
        0.0
    }
}

/// Which linear piece of a ReLU is in effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    /// Pre-activation `>= 0`; the unit passes its input through.
    NonNegative,
    /// Pre-activation `< 0`; the unit outputs zero.
    Negative,
}

impl Sign {
    pub fn of(z: f64) -> Self {
        if z >= 0.0 {
            Sign::NonNegative
        } else {
            Sign::Negative
        }
    }

    /// Slope of the ReLU piece selected by this tag.
    pub fn slope(self) -> f64 {
        match self {
            Sign::NonNegative => 1.0,
            Sign::Negative => 0.0,
        }
    }

    #[inline]
    fn mask(self, z: f64) -> f64 {
        match self {
            Sign::NonNegative => z,
            Sign::Negative => 0.0,
        }
    }
}

/// Per-layer, per-neuron ReLU piece assignment.
///
/// There is one entry per network layer. Relu layers hold one tag per
/// neuron; Identity layers hold an empty list. Networks with Tanh layers
/// have no pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    layers: Vec<Vec<Sign>>,
}

impl ActivationPattern {
    pub fn new(layers: Vec<Vec<Sign>>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Vec<Sign>] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> &[Sign] {
        &self.layers[i]
    }

    /// Checks that this pattern has exactly the shape `dnn` requires.
    pub fn check_shape(&self, layers: &[Layer]) -> Result<()> {
        if self.layers.len() != layers.len() {
            return Err(Error::Dimension(format!(
                "pattern covers {} layers, network has {}",
                self.layers.len(),
                layers.len()
            )));
        }
        for (i, (tags, layer)) in self.layers.iter().zip(layers).enumerate() {
            let expected = match layer.activation {
                ActivationKind::Relu => layer.out_dim(),
                ActivationKind::Identity => 0,
                ActivationKind::Tanh => {
                    return Err(Error::UnsupportedActivation(format!(
                        "layer {} uses tanh, which has no activation pattern",
                        i + 1
                    )))
                }
            };
            if tags.len() != expected {
                return Err(Error::Dimension(format!(
                    "pattern has {} tags for layer {}, expected {}",
                    tags.len(),
                    i + 1,
                    expected
                )));
            }
        }
        Ok(())
    }

    /// Compact bit string: one `1`/`0` per ReLU (NonNegative/Negative),
    /// layers separated by `|`.
    pub fn to_bits(&self) -> String {
        self.layers
            .iter()
            .map(|tags| {
                tags.iter()
                    .map(|s| match s {
                        Sign::NonNegative => '1',
                        Sign::Negative => '0',
                    })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

impl fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bits())
    }
}

/// One dense layer: `activation(weights · v + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Array2<f64>,
    bias: Array1<f64>,
    activation: ActivationKind,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: ActivationKind) -> Result<Self> {
        let (rows, cols) = weights.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "layer weights must be non-empty, got {rows}x{cols}"
            )));
        }
        if bias.len() != rows {
            return Err(Error::Dimension(format!(
                "bias length {} does not match {} weight rows",
                bias.len(),
                rows
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("layer contains a non-finite entry".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Builds a layer from nested row vectors.
    pub fn from_rows(rows: &[Vec<f64>], bias: &[f64], activation: ActivationKind) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("weight rows have differing lengths".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let weights = Array2::from_shape_vec((rows.len(), cols), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(weights, Array1::from(bias.to_vec()), activation)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Number of parameters (weights then biases).
    pub fn param_count(&self) -> usize {
        self.out_dim() * (self.in_dim() + 1)
    }

    pub fn pre_activation(&self, input: ArrayView1<'_, f64>) -> Array1<f64> {
        self.weights.dot(&input) + &self.bias
    }

    /// Returns a copy with the same shape and activation but new parameters.
    pub fn with_params(&self, weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.dim() != self.weights.dim() || bias.len() != self.bias.len() {
            return Err(Error::Dimension(format!(
                "expected {}x{} weights and {} biases, got {}x{} and {}",
                self.out_dim(),
                self.in_dim(),
                self.out_dim(),
                weights.nrows(),
                weights.ncols(),
                bias.len()
            )));
        }
        Self::new(weights, bias, self.activation)
    }
}

/// Intermediate vectors of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTrace {
    pub input: Array1<f64>,
    /// `W v + b` for each layer.
    pub pre_activations: Vec<Array1<f64>>,
    /// Post-activation vector of each layer; the last one is the output.
    pub post_activations: Vec<Array1<f64>>,
}

impl EvalTrace {
    pub fn output(&self) -> &Array1<f64> {
        self.post_activations.last().expect("trace of a non-empty network")
    }
}

/// A feed-forward network made of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dnn {
    layers: Vec<Layer>,
}

impl Dnn {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        check_chain(&layers)?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn is_pwl(&self) -> bool {
        self.layers.iter().all(|l| l.activation.is_pwl())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Array1<f64>> {
        self.check_input(x)?;
        let mut v = Array1::from(x.to_vec());
        for layer in &self.layers {
            let z = layer.pre_activation(v.view());
            v = z.mapv(|zi| layer.activation.apply(zi));
        }
        Ok(v)
    }

    pub fn eval_trace(&self, x: &[f64]) -> Result<EvalTrace> {
        self.check_input(x)?;
        let input = Array1::from(x.to_vec());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut post_activations: Vec<Array1<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let v = post_activations.last().unwrap_or(&input);
            let z = layer.pre_activation(v.view());
            let out = z.mapv(|zi| layer.activation.apply(zi));
            pre_activations.push(z);
            post_activations.push(out);
        }
        Ok(EvalTrace {
            input,
            pre_activations,
            post_activations,
        })
    }

    /// Pattern of ReLU pieces at `x`; zero pre-activations are tagged
    /// `NonNegative`.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<ActivationPattern> {
        self.require_pwl()?;
        let trace = self.eval_trace(x)?;
        let layers = self
            .layers
            .iter()
            .zip(&trace.pre_activations)
            .map(|(layer, z)| match layer.activation {
                ActivationKind::Relu => z.iter().map(|&zi| Sign::of(zi)).collect(),
                _ => Vec::new(),
            })
            .collect();
        Ok(ActivationPattern::new(layers))
    }

    /// Evaluates with every ReLU forced onto the piece named by `pattern`,
    /// regardless of the actual pre-activation signs.
    pub fn eval_with_pattern(&self, x: &[f64], pattern: &ActivationPattern) -> Result<Array1<f64>> {
        self.check_input(x)?;
        pattern.check_shape(&self.layers)?;
        let mut v = Array1::from(x.to_vec());
        for (layer, tags) in self.layers.iter().zip(pattern.layers()) {
            let mut z = layer.pre_activation(v.view());
            if layer.activation == ActivationKind::Relu {
                z.iter_mut().zip(tags).for_each(|(zi, s)| *zi = s.mask(*zi));
            }
            v = z;
        }
        Ok(v)
    }

    pub(crate) fn require_pwl(&self) -> Result<()> {
        match self.layers.iter().position(|l| !l.activation.is_pwl()) {
            Some(i) => Err(Error::UnsupportedActivation(format!(
                "layer {} uses {}, which is not piecewise-linear",
                i + 1,
                self.layers[i].activation
            ))),
            None => Ok(()),
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("input contains a non-finite entry".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_chain(layers: &[Layer]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::InvalidInput("network must have at least one layer".into()));
    }
    for (i, pair) in layers.windows(2).enumerate() {
        if pair[1].in_dim() != pair[0].out_dim() {
            return Err(Error::Dimension(format!(
                "layer {} expects {} inputs but layer {} produces {}",
                i + 2,
                pair[1].in_dim(),
                i + 1,
                pair[0].out_dim()
            )));
        }
    }
    Ok(())
}
