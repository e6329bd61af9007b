//! Exact Jacobian of a decoupled network's output with respect to the
//! parameters of one value-channel layer.
//!
//! Columns are ordered weights first (row-major) and then biases, so for a
//! layer with `out` units and `inp` inputs the weight `(r, c)` owns column
//! `r * inp + c` and bias `r` owns column `out * inp + r`.

use ndarray::{s, Array1, Array2};

use crate::ddnn::{layer_slot, Ddnn};
use crate::error::{Error, Result};
use crate::network::ActivationPattern;

/// Maps layer parameters to flat column indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub out_dim: usize,
    pub in_dim: usize,
}

impl ParamLayout {
    pub fn new(out_dim: usize, in_dim: usize) -> Self {
        Self { out_dim, in_dim }
    }

    pub fn len(&self) -> usize {
        self.out_dim * (self.in_dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.out_dim && col < self.in_dim);
        row * self.in_dim + col
    }

    pub fn bias(&self, row: usize) -> usize {
        debug_assert!(row < self.out_dim);
        self.out_dim * self.in_dim + row
    }

    /// Splits a flat delta into its weight and bias blocks.
    pub fn split(&self, delta: &[f64]) -> Result<(Array2<f64>, Array1<f64>)> {
        if delta.len() != self.len() {
            return Err(Error::Dimension(format!(
                "delta has {} entries, layer has {} parameters",
                delta.len(),
                self.len()
            )));
        }
        let (w, b) = delta.split_at(self.out_dim * self.in_dim);
        let w = Array2::from_shape_vec((self.out_dim, self.in_dim), w.to_vec()).expect("sized above");
        Ok((w, Array1::from(b.to_vec())))
    }

    /// Human-readable name of a column, e.g. `L2.w[0][3]` or `L2.b[1]`.
    pub fn name(&self, layer: usize, index: usize) -> String {
        let nw = self.out_dim * self.in_dim;
        if index < nw {
            format!("L{layer}.w[{}][{}]", index / self.in_dim, index % self.in_dim)
        } else {
            format!("L{layer}.b[{}]", index - nw)
        }
    }
}

/// Output at zero delta together with the exact parameter Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamJacobian {
    pub base: Array1<f64>,
    /// `output_dim × layout.len()`.
    pub matrix: Array2<f64>,
    pub layout: ParamLayout,
}

impl ParamJacobian {
    /// `base + matrix · delta`.
    pub fn predict(&self, delta: &[f64]) -> Array1<f64> {
        &self.base + &self.matrix.dot(&Array1::from(delta.to_vec()))
    }

    /// Sub-matrix holding only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((self.matrix.nrows(), cols.len()));
        for (k, &c) in cols.iter().enumerate() {
            out.column_mut(k).assign(&self.matrix.column(c));
        }
        out
    }
}

pub fn layout_of(ddnn: &Ddnn, layer: usize) -> Result<ParamLayout> {
    let slot = layer_slot(layer, ddnn.layer_count())?;
    let l = &ddnn.value_layers()[slot];
    Ok(ParamLayout::new(l.out_dim(), l.in_dim()))
}

/// Jacobian of `ddnn(x)` with respect to value layer `layer` (1-based).
///
/// With `pattern_override`, the linearizations come from the pattern rather
/// than from the activation channel at `x`; this is how vertices on region
/// boundaries are attributed to one particular region.
pub fn param_jacobian(
    ddnn: &Ddnn,
    layer: usize,
    x: &[f64],
    pattern_override: Option<&ActivationPattern>,
) -> Result<ParamJacobian> {
    let slot = layer_slot(layer, ddnn.layer_count())?;
    let lins = match pattern_override {
        Some(p) => ddnn.pattern_linearizations(p)?,
        None => ddnn.linearizations(x)?,
    };
    let trace = ddnn.value_trace(x, &lins)?;
    let input = Array1::from(x.to_vec());
    let v_in = if slot == 0 { &input } else { &trace[slot - 1] };
    let base = trace.last().expect("non-empty network").clone();

    let values = ddnn.value_layers();
    let m = ddnn.output_dim();
    // downstream: output ← layer `slot` post-linearization output
    let mut downstream = Array2::<f64>::eye(m);
    for k in (slot + 1..values.len()).rev() {
        let mut scaled = downstream;
        for (mut col, &sl) in scaled.columns_mut().into_iter().zip(lins[k].slope.iter()) {
            col *= sl;
        }
        downstream = scaled.dot(values[k].weights());
    }

    let layout = ParamLayout::new(values[slot].out_dim(), values[slot].in_dim());
    let slope = &lins[slot].slope;
    let mut matrix = Array2::zeros((m, layout.len()));
    for r in 0..layout.out_dim {
        let g = downstream.column(r).to_owned() * slope[r];
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        for c in 0..layout.in_dim {
            matrix.column_mut(layout.weight(r, c)).assign(&(&g * v_in[c]));
        }
        matrix.column_mut(layout.bias(r)).assign(&g);
    }
    Ok(ParamJacobian { base, matrix, layout })
}

/// Largest absolute gap between the analytic Jacobian and central
/// differences of `ddnn` in each value-layer parameter.
pub fn finite_difference_check(ddnn: &Ddnn, layer: usize, x: &[f64], h: f64) -> Result<f64> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    let jac = param_jacobian(ddnn, layer, x, None)?;
    let slot = layer - 1;
    let layer_ref = &ddnn.value_layers()[slot];
    let (w0, b0) = (layer_ref.weights().clone(), layer_ref.bias().clone());
    let layout = jac.layout;
    let mut worst = 0.0f64;
    for k in 0..layout.len() {
        let shifted = |step: f64| -> Result<Array1<f64>> {
            let (mut w, mut b) = (w0.clone(), b0.clone());
            let nw = layout.out_dim * layout.in_dim;
            if k < nw {
                w[[k / layout.in_dim, k % layout.in_dim]] += step;
            } else {
                b[k - nw] += step;
            }
            ddnn.set_value_layer(layer, w, b)?.eval(x)
        };
        let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        let err = (&fd - &jac.matrix.slice(s![.., k]))
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        worst = worst.max(err);
    }
    Ok(worst)
}
