//! Two-layer MLP that projects concatenated bi-temporal features into the
//! language model embedding space: `Linear(2D, H) -> GELU -> Linear(H, L)`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::ops::{affine, gelu, gelu_grad, random_matrix};
use super::weights_file::TensorStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectorWeights {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Gradients of a scalar loss with respect to the connector input and every
/// parameter, shaped like the values they differentiate.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectorGrads {
    pub input: Array2<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl ConnectorWeights {
    /// Hidden width used when none is given: twice the input width.
    pub fn default_hidden(input_dim: usize) -> usize {
        2 * input_dim
    }

    pub fn random(input_dim: usize, hidden: usize, output_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || output_dim == 0 {
            return Err(Error::invalid("connector dimensions must be positive"));
        }
        let s1 = 1.0 / (input_dim as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        Ok(Self {
            w1: random_matrix(input_dim, hidden, s1, rng),
            b1: Array1::zeros(hidden),
            w2: random_matrix(hidden, output_dim, s2, rng),
            b2: Array1::zeros(output_dim),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn check(&self) -> Result<()> {
        let h = self.hidden_dim();
        if self.b1.len() != h || self.w2.nrows() != h || self.b2.len() != self.output_dim() {
            return Err(Error::shape(format!(
                "inconsistent connector shapes: w1 {:?}, b1 {}, w2 {:?}, b2 {}",
                self.w1.dim(),
                self.b1.len(),
                self.w2.dim(),
                self.b2.len()
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        self.check()?;
        if x.ncols() != self.input_dim() {
            return Err(Error::shape(format!(
                "connector expects {} input features, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn to_store(&self, store: &mut TensorStore, prefix: &str) {
        store.insert2(format!("{prefix}fc1.weight"), &self.w1);
        store.insert1(format!("{prefix}fc1.bias"), &self.b1);
        store.insert2(format!("{prefix}fc2.weight"), &self.w2);
        store.insert1(format!("{prefix}fc2.bias"), &self.b2);
    }

    pub fn from_store(store: &TensorStore, prefix: &str) -> Result<Self> {
        let w = Self {
            w1: store.get2(&format!("{prefix}fc1.weight"))?,
            b1: store.get1(&format!("{prefix}fc1.bias"))?,
            w2: store.get2(&format!("{prefix}fc2.weight"))?,
            b2: store.get1(&format!("{prefix}fc2.bias"))?,
        };
        w.check()?;
        Ok(w)
    }
}

/// Maps `T x 2D` features to `T x L` visual tokens.
pub fn connector_forward(x: &Array2<f64>, weights: &ConnectorWeights) -> Result<Array2<f64>> {
    weights.check_input(x)?;
    let hidden = affine(x, &weights.w1, &weights.b1).mapv_into(gelu);
    Ok(affine(&hidden, &weights.w2, &weights.b2))
}

/// Backpropagates `grad_out` (dLoss/dOutput, `T x L`) through the connector.
pub fn connector_backward(
    x: &Array2<f64>,
    weights: &ConnectorWeights,
    grad_out: &Array2<f64>,
) -> Result<ConnectorGrads> {
    weights.check_input(x)?;
    if grad_out.dim() != (x.nrows(), weights.output_dim()) {
        return Err(Error::shape(format!(
            "output gradient {:?} does not match ({}, {})",
            grad_out.dim(),
            x.nrows(),
            weights.output_dim()
        )));
    }
    let pre = affine(x, &weights.w1, &weights.b1);
    let act = pre.mapv(gelu);

    let w2 = act.t().dot(grad_out);
    let b2 = grad_out.sum_axis(Axis(0));
    let grad_act = grad_out.dot(&weights.w2.t());
    let grad_pre = grad_act * pre.mapv(gelu_grad);
    let w1 = x.t().dot(&grad_pre);
    let b1 = grad_pre.sum_axis(Axis(0));
    let input = grad_pre.dot(&weights.w1.t());
    Ok(ConnectorGrads { input, w1, b1, w2, b2 })
}
