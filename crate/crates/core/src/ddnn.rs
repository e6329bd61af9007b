//! Decoupled networks.
//!
//! A [`Ddnn`] carries two parallel copies of every layer. The activation
//! channel runs like an ordinary network and, at each layer, fixes a
//! linearization of the activation function around its own pre-activation.
//! The value channel pushes the input through its own affine maps followed
//! by those frozen linearizations. The output of the value channel is the
//! output of the network.
//!
//! Editing value-channel parameters never moves the linear regions (they
//! are decided by the activation channel alone), and the output is an
//! affine function of any single value layer's parameters.

use std::borrow::Cow;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::network::{check_chain, ActivationKind, ActivationPattern, Dnn, Layer};

/// Diagonal affine map `y ↦ slope ⊙ y + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearization {
    pub slope: Array1<f64>,
    pub intercept: Array1<f64>,
}

impl Linearization {
    pub fn apply(&self, y: &Array1<f64>) -> Array1<f64> {
        &self.slope * y + &self.intercept
    }

    fn identity(n: usize) -> Self {
        Self {
            slope: Array1::ones(n),
            intercept: Array1::zeros(n),
        }
    }
}

/// First-order expansion of `kind` around `z`.
///
/// ReLU at exactly zero linearizes to the zero line.
pub fn linearize(kind: ActivationKind, z: &Array1<f64>) -> Linearization {
    match kind {
        ActivationKind::Relu => Linearization {
            slope: z.mapv(|zi| if zi > 0.0 { 1.0 } else { 0.0 }),
            intercept: Array1::zeros(z.len()),
        },
        ActivationKind::Tanh => {
            let slope = z.mapv(|zi| {
                let t = zi.tanh();
                1.0 - t * t
            });
            let intercept = ndarray::Zip::from(z)
                .and(&slope)
                .map_collect(|&zi, &s| zi.tanh() - s * zi);
            Linearization { slope, intercept }
        }
        ActivationKind::Identity => Linearization::identity(z.len()),
    }
}

/// Network with separate activation-channel and value-channel parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddnn {
    act_layers: Vec<Layer>,
    val_layers: Vec<Layer>,
}

impl Ddnn {
    pub fn new(act_layers: Vec<Layer>, val_layers: Vec<Layer>) -> Result<Self> {
        check_chain(&act_layers)?;
        if act_layers.len() != val_layers.len() {
            return Err(Error::Dimension(format!(
                "{} activation layers but {} value layers",
                act_layers.len(),
                val_layers.len()
            )));
        }
        for (i, (a, v)) in act_layers.iter().zip(&val_layers).enumerate() {
            if a.weights().dim() != v.weights().dim() || a.activation() != v.activation() {
                return Err(Error::Dimension(format!(
                    "layer {}: activation and value channels differ in shape or activation",
                    i + 1
                )));
            }
        }
        Ok(Self {
            act_layers,
            val_layers,
        })
    }

    /// Both channels start as copies of `dnn`; the result computes the same
    /// function.
    pub fn decouple(dnn: &Dnn) -> Self {
        Self {
            act_layers: dnn.layers().to_vec(),
            val_layers: dnn.layers().to_vec(),
        }
    }

    pub fn act_layers(&self) -> &[Layer] {
        &self.act_layers
    }

    pub fn value_layers(&self) -> &[Layer] {
        &self.val_layers
    }

    pub fn layer_count(&self) -> usize {
        self.act_layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.act_layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.act_layers[self.act_layers.len() - 1].out_dim()
    }

    /// The activation channel viewed as an ordinary network. Its linear
    /// regions are the regions of this decoupled network.
    pub fn activation_network(&self) -> Dnn {
        Dnn::new(self.act_layers.clone()).expect("activation channel is a valid chain")
    }

    pub fn is_pwl(&self) -> bool {
        self.act_layers.iter().all(|l| l.activation().is_pwl())
    }

    /// Returns a copy whose value layer `layer` (1-based) holds the given
    /// parameters. The activation channel is shared unchanged.
    pub fn set_value_layer(&self, layer: usize, weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        let slot = layer_slot(layer, self.layer_count())?;
        let mut val_layers = self.val_layers.clone();
        val_layers[slot] = val_layers[slot].with_params(weights, bias)?;
        Ok(Self {
            act_layers: self.act_layers.clone(),
            val_layers,
        })
    }

    /// Linearizations fixed by the activation channel at `x`, one per layer.
    pub fn linearizations(&self, x: &[f64]) -> Result<Vec<Linearization>> {
        self.check_input(x)?;
        let mut v = Array1::from(x.to_vec());
        let mut out = Vec::with_capacity(self.layer_count());
        for layer in &self.act_layers {
            let z = layer.pre_activation(v.view());
            out.push(linearize(layer.activation(), &z));
            v = z.mapv(|zi| layer.activation().apply(zi));
        }
        Ok(out)
    }

    /// Linearizations implied by an activation pattern, as if the region
    /// owning that pattern extended to the point being evaluated.
    pub fn pattern_linearizations(&self, pattern: &ActivationPattern) -> Result<Vec<Linearization>> {
        pattern.check_shape(&self.act_layers)?;
        Ok(self
            .act_layers
            .iter()
            .zip(pattern.layers())
            .map(|(layer, tags)| match layer.activation() {
                ActivationKind::Relu => Linearization {
                    slope: tags.iter().map(|s| s.slope()).collect(),
                    intercept: Array1::zeros(tags.len()),
                },
                _ => Linearization::identity(layer.out_dim()),
            })
            .collect())
    }

    /// Value-channel forward pass under the given frozen linearizations.
    /// Returns the post-linearization vector of every layer.
    pub fn value_trace(&self, x: &[f64], lins: &[Linearization]) -> Result<Vec<Array1<f64>>> {
        self.check_input(x)?;
        if lins.len() != self.layer_count() {
            return Err(Error::Dimension(format!(
                "{} linearizations for {} layers",
                lins.len(),
                self.layer_count()
            )));
        }
        let mut v = Array1::from(x.to_vec());
        let mut out = Vec::with_capacity(self.layer_count());
        for (layer, lin) in self.val_layers.iter().zip(lins) {
            v = lin.apply(&layer.pre_activation(v.view()));
            out.push(v.clone());
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Array1<f64>> {
        let lins = self.linearizations(x)?;
        Ok(self.value_trace(x, &lins)?.pop().expect("non-empty network"))
    }

    /// Evaluation with linearizations taken from `pattern` instead of the
    /// activation channel.
    pub fn eval_with_pattern(&self, x: &[f64], pattern: &ActivationPattern) -> Result<Array1<f64>> {
        let lins = self.pattern_linearizations(pattern)?;
        Ok(self.value_trace(x, &lins)?.pop().expect("non-empty network"))
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

impl From<&Dnn> for Ddnn {
    fn from(dnn: &Dnn) -> Self {
        Ddnn::decouple(dnn)
    }
}

/// Anything that maps inputs to outputs and can be viewed as a decoupled
/// network.
pub trait Network {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Array1<f64>>;
    fn to_ddnn(&self) -> Cow<'_, Ddnn>;
}

impl Network for Dnn {
    fn input_dim(&self) -> usize {
        Dnn::input_dim(self)
    }
    fn output_dim(&self) -> usize {
        Dnn::output_dim(self)
    }
    fn eval(&self, x: &[f64]) -> Result<Array1<f64>> {
        Dnn::eval(self, x)
    }
    fn to_ddnn(&self) -> Cow<'_, Ddnn> {
        Cow::Owned(Ddnn::decouple(self))
    }
}

impl Network for Ddnn {
    fn input_dim(&self) -> usize {
        Ddnn::input_dim(self)
    }
    fn output_dim(&self) -> usize {
        Ddnn::output_dim(self)
    }
    fn eval(&self, x: &[f64]) -> Result<Array1<f64>> {
        Ddnn::eval(self, x)
    }
    fn to_ddnn(&self) -> Cow<'_, Ddnn> {
        Cow::Borrowed(self)
    }
}

/// Converts a 1-based layer number into a slot index.
pub(crate) fn layer_slot(layer: usize, count: usize) -> Result<usize> {
    if layer == 0 || layer > count {
        Err(Error::LayerIndex { layer, count })
    } else {
        Ok(layer - 1)
    }
}
