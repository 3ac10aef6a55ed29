use std::fmt;
use std::str::FromStr;

use crate::edf::sigmoid;
use crate::error::{Error, Result};
use crate::numerics::{axpy, Matrix};

/// Pre-activations of an exponential output are clamped to this range.
pub const EXP_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
    Sigmoid,
    /// `½ tanh(a) + ½`, which equals `sigmoid(2a)`.
    TanhCanonical,
    /// `exp(a)` with `a` clamped to `±EXP_CLAMP`.
    Exp,
}

impl Activation {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Relu => a.max(0.0),
            Activation::Linear => a,
            Activation::Sigmoid => sigmoid(a),
            Activation::TanhCanonical => 0.5 * a.tanh() + 0.5,
            Activation::Exp => a.clamp(-EXP_CLAMP, EXP_CLAMP).exp(),
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Relu => (a > 0.0) as u8 as f64,
            Activation::Linear => 1.0,
            Activation::Sigmoid => {
                let s = sigmoid(a);
                s * (1.0 - s)
            }
            Activation::TanhCanonical => {
                let t = a.tanh();
                0.5 * (1.0 - t * t)
            }
            Activation::Exp => {
                if a.abs() <= EXP_CLAMP {
                    a.exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Scale `ρ` such that this activation is `F′(ρ·a)` for its family, or
    /// `None` for activations that are not an output link.
    pub fn canonical_rho(self) -> Option<f64> {
        match self {
            Activation::Linear | Activation::Sigmoid | Activation::Exp => Some(1.0),
            Activation::TanhCanonical => Some(2.0),
            Activation::Relu => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
            Activation::Sigmoid => "sigmoid",
            Activation::TanhCanonical => "tanh_canonical",
            Activation::Exp => "exp",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
            Activation::Sigmoid => 2,
            Activation::TanhCanonical => 3,
            Activation::Exp => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => Activation::Relu,
            1 => Activation::Linear,
            2 => Activation::Sigmoid,
            3 => Activation::TanhCanonical,
            4 => Activation::Exp,
            c => return Err(Error::Format(format!("unknown activation code {c}"))),
        })
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "relu" => Activation::Relu,
            "linear" => Activation::Linear,
            "sigmoid" => Activation::Sigmoid,
            "tanh_canonical" | "tanh" => Activation::TanhCanonical,
            "exp" => Activation::Exp,
            other => return Err(Error::Domain(format!("unknown activation {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Fully connected layer `h = act(W x + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(spec: LayerSpec) -> Result<Self> {
        if spec.in_dim == 0 || spec.out_dim == 0 {
            return Err(Error::InvalidArchitecture(format!(
                "layer dimensions must be positive, got {}x{}",
                spec.out_dim, spec.in_dim
            )));
        }
        Ok(Self {
            w: Matrix::zeros(spec.out_dim, spec.in_dim),
            b: vec![0.0; spec.out_dim],
            activation: spec.activation,
        })
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            in_dim: self.w.cols(),
            out_dim: self.w.rows(),
            activation: self.activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn param_count(&self) -> usize {
        self.w.rows() * self.w.cols() + self.b.len()
    }

    /// Pre-activations `X Wᵀ + b` for a batch stored row-wise.
    pub fn pre_activation(&self, x: &Matrix) -> Result<Matrix> {
        let mut a = x.matmul_transposed(&self.w)?;
        for r in 0..a.rows() {
            for (v, &bi) in a.row_mut(r).iter_mut().zip(&self.b) {
                *v += bi;
            }
        }
        Ok(a)
    }

    /// Returns `(pre-activation, activation)`.
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let a = self.pre_activation(x)?;
        let act = self.activation;
        let h = a.map(|v| act.apply(v));
        Ok((a, h))
    }

    /// Accumulates parameter gradients from `d_pre` (gradient at the
    /// pre-activation) and input `x`; returns the gradient at the input.
    pub(crate) fn backward(&self, x: &Matrix, d_pre: &Matrix, grad: &mut DenseGrad) -> Matrix {
        for r in 0..x.rows() {
            let xr = x.row(r);
            for (i, &g) in d_pre.row(r).iter().enumerate() {
                if g != 0.0 {
                    axpy(g, xr, grad.w.row_mut(i));
                    grad.b[i] += g;
                }
            }
        }
        d_pre.matmul(&self.w).expect("gradient shape matches layer output")
    }
}

/// Gradient buffers shaped like a [`Dense`] layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl DenseGrad {
    pub fn zeros_like(layer: &Dense) -> Self {
        Self {
            w: Matrix::zeros(layer.out_dim(), layer.in_dim()),
            b: vec![0.0; layer.out_dim()],
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.w.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        self.b.iter_mut().for_each(|v| *v *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.b.iter().all(|v| v.is_finite())
    }
}
