use std::fmt;
use std::str::FromStr;

use super::layer::{Activation, Dense, DenseGrad, LayerSpec};
use crate::edf::{EdfFamily, FamilyKind};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Two hidden layers on each side.
    Deep,
    /// Two-layer encoder whose second layer has width `d`, affine decoder.
    Canonical,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Deep => "deep",
            Architecture::Canonical => "canonical",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deep" => Ok(Architecture::Deep),
            "canonical" => Ok(Architecture::Canonical),
            other => Err(Error::Domain(format!("unknown architecture {other:?}"))),
        }
    }
}

/// Output activation used for a family unless overridden.
pub fn default_output_activation(kind: FamilyKind) -> Activation {
    match kind {
        FamilyKind::Gaussian => Activation::Linear,
        FamilyKind::Bernoulli | FamilyKind::Binomial => Activation::Sigmoid,
        FamilyKind::Poisson => Activation::Exp,
    }
}

fn output_activation_allowed(kind: FamilyKind, act: Activation) -> bool {
    matches!(
        (kind, act),
        (FamilyKind::Gaussian, Activation::Linear)
            | (FamilyKind::Bernoulli | FamilyKind::Binomial, Activation::Sigmoid | Activation::TanhCanonical)
            | (FamilyKind::Poisson, Activation::Exp)
    )
}

/// VAE with a diagonal Gaussian encoder and an EDF decoder. The decoder's
/// last pre-activation `a` gives the natural parameter `θ = ρ·a`.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub encoder_trunk: Vec<Dense>,
    pub mu_head: Dense,
    pub logvar_head: Dense,
    pub decoder: Vec<Dense>,
    pub family: EdfFamily,
    pub beta: f64,
    pub kappa: usize,
}

fn hidden(width: f64) -> usize {
    (width.ceil() as usize).max(1)
}

fn stack(dims: &[usize], hidden_act: Activation, last_act: Activation) -> Result<Vec<Dense>> {
    let n = dims.len() - 1;
    (0..n)
        .map(|i| {
            Dense::new(LayerSpec {
                in_dim: dims[i],
                out_dim: dims[i + 1],
                activation: if i + 1 == n { last_act } else { hidden_act },
            })
        })
        .collect()
}

/// Layer widths: deep `d → ⌈2000s⌉ → ⌈1000s⌉ → κ` and back; canonical
/// `d → ⌈2000s⌉ → d → κ` with an affine `κ → d` decoder. All parameters are
/// zero; apply an initializer before use.
pub fn build_architecture(
    arch: Architecture,
    d: usize,
    kappa: usize,
    family: EdfFamily,
    beta: f64,
    hidden_scale: f64,
) -> Result<VaeModel> {
    if d == 0 || kappa == 0 {
        return Err(Error::InvalidArchitecture(format!("need d, kappa >= 1, got d={d}, kappa={kappa}")));
    }
    if !(hidden_scale > 0.0) || !hidden_scale.is_finite() {
        return Err(Error::InvalidArchitecture(format!("hidden_scale must be positive, got {hidden_scale}")));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite and >= 0, got {beta}")));
    }
    let h1 = hidden(2000.0 * hidden_scale);
    let h2 = hidden(1000.0 * hidden_scale);
    let out = default_output_activation(family.kind());
    let (trunk_dims, dec_dims) = match arch {
        Architecture::Deep => (vec![d, h1, h2], vec![kappa, h2, h1, d]),
        Architecture::Canonical => (vec![d, h1, d], vec![kappa, d]),
    };
    let encoder_trunk = stack(&trunk_dims, Activation::Relu, Activation::Relu)?;
    let trunk_out = *trunk_dims.last().unwrap();
    let head = LayerSpec {
        in_dim: trunk_out,
        out_dim: kappa,
        activation: Activation::Linear,
    };
    let model = VaeModel {
        encoder_trunk,
        mu_head: Dense::new(head)?,
        logvar_head: Dense::new(head)?,
        decoder: stack(&dec_dims, Activation::Relu, out)?,
        family,
        beta,
        kappa,
    };
    model.with_output_activation(out)
}

impl VaeModel {
    pub fn d(&self) -> usize {
        self.encoder_trunk.first().map_or(self.mu_head.in_dim(), Dense::in_dim)
    }

    pub fn output_activation(&self) -> Activation {
        self.decoder.last().expect("decoder has layers").activation
    }

    /// Switches the decoder's output link (e.g. sigmoid to tanh for a
    /// Bernoulli model) and sets the family's `ρ` to match.
    pub fn with_output_activation(mut self, act: Activation) -> Result<Self> {
        if !output_activation_allowed(self.family.kind(), act) {
            return Err(Error::InvalidArchitecture(format!(
                "{act} is not a canonical output activation for {}",
                self.family.kind()
            )));
        }
        self.decoder.last_mut().expect("decoder has layers").activation = act;
        self.family = self.family.with_rho(act.canonical_rho().expect("output activations have a scale"))?;
        Ok(self)
    }

    /// Checks layer chaining, head shapes and the output link.
    pub fn validate(&self) -> Result<()> {
        let chain = |layers: &[Dense], start: usize, what: &str| -> Result<usize> {
            let mut dim = start;
            for (i, l) in layers.iter().enumerate() {
                if l.in_dim() != dim {
                    return Err(Error::InvalidArchitecture(format!(
                        "{what} layer {i} expects input {} but receives {dim}",
                        l.in_dim()
                    )));
                }
                dim = l.out_dim();
            }
            Ok(dim)
        };
        let trunk_out = chain(&self.encoder_trunk, self.d(), "encoder")?;
        for (name, h) in [("mu", &self.mu_head), ("logvar", &self.logvar_head)] {
            if h.in_dim() != trunk_out || h.out_dim() != self.kappa || h.activation != Activation::Linear {
                return Err(Error::InvalidArchitecture(format!("{name} head must be linear {trunk_out} -> {}", self.kappa)));
            }
        }
        if self.decoder.is_empty() {
            return Err(Error::InvalidArchitecture("decoder has no layers".into()));
        }
        let out = chain(&self.decoder, self.kappa, "decoder")?;
        if out != self.d() {
            return Err(Error::InvalidArchitecture(format!("decoder outputs {out}, data has {}", self.d())));
        }
        let act = self.output_activation();
        if !output_activation_allowed(self.family.kind(), act) || act.canonical_rho() != Some(self.family.rho()) {
            return Err(Error::InvalidArchitecture(format!(
                "output activation {act} does not match {}",
                self.family
            )));
        }
        Ok(())
    }

    /// Layers in parameter order: trunk, μ head, log-variance head, decoder.
    pub fn layers(&self) -> Vec<&Dense> {
        let mut v: Vec<&Dense> = self.encoder_trunk.iter().collect();
        v.push(&self.mu_head);
        v.push(&self.logvar_head);
        v.extend(self.decoder.iter());
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Dense> {
        let mut v: Vec<&mut Dense> = self.encoder_trunk.iter_mut().collect();
        v.push(&mut self.mu_head);
        v.push(&mut self.logvar_head);
        v.extend(self.decoder.iter_mut());
        v
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self.layers().into_iter().map(DenseGrad::zeros_like).collect(),
        }
    }

    /// Encoder trunk output for a batch.
    pub fn trunk(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = x.clone();
        for l in &self.encoder_trunk {
            h = l.forward(&h)?.1;
        }
        Ok(h)
    }

    /// Posterior means `μ_z(x)` and log-variances for each row of `x`.
    pub fn encode(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let h = self.trunk(x)?;
        Ok((self.mu_head.pre_activation(&h)?, self.logvar_head.pre_activation(&h)?))
    }

    /// Decoder pre-activations `a`; the natural parameter is `ρ·a`.
    pub fn decode_pre_activation(&self, z: &Matrix) -> Result<Matrix> {
        let mut h = z.clone();
        let n = self.decoder.len();
        for (i, l) in self.decoder.iter().enumerate() {
            if i + 1 == n {
                return l.pre_activation(&h);
            }
            h = l.forward(&h)?.1;
        }
        unreachable!("decoder has layers")
    }

    /// Conditional means `E[X | z]`.
    pub fn decode_mean(&self, z: &Matrix) -> Result<Matrix> {
        let a = self.decode_pre_activation(z)?;
        let act = self.output_activation();
        let n = self.family.trials().max(1) as f64;
        Ok(a.map(|v| n * act.apply(v)))
    }
}

/// Gradients for every layer, in [`VaeModel::layers`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseGrad>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .map(|g| g.w.max_abs().max(g.b.iter().fold(0.0, |m, v| m.max(v.abs()))))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseGrad::is_finite)
    }
}
