use super::layer::{Activation, Dense};
use super::model::VaeModel;
use crate::closed_form::{variational_optima, MleSolution};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Smallest posterior variance whose logarithm is used as a head bias.
pub const LOGVAR_FLOOR: f64 = 1e-12;

fn he_layer(layer: &mut Dense, rng: &mut Rng) {
    let sd = (2.0 / layer.in_dim() as f64).sqrt();
    for w in layer.w.as_mut_slice() {
        *w = sd * rng.standard_normal();
    }
    layer.b.iter_mut().for_each(|b| *b = 0.0);
}

/// He initialization: weights `Normal(0, 2/fan_in)`, biases zero.
pub fn init_bench(model: &mut VaeModel, rng: &mut Rng) {
    for layer in model.layers_mut() {
        he_layer(layer, rng);
    }
}

/// Weights of the log-variance head under MLE-B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogvarWeights {
    /// He draws on the copied input, as for the remaining layers.
    #[default]
    He,
    /// Zero, so the head outputs `log diag Σ̂_z` for every input and the
    /// encoder is exactly the closed-form posterior.
    Zero,
}

/// Initializes from the closed-form solution of the affine model with
/// [`LogvarWeights::He`].
pub fn init_mle_b(model: &mut VaeModel, sol: &MleSolution, rng: &mut Rng) -> Result<()> {
    init_mle_b_with(model, sol, rng, LogvarWeights::He)
}

/// Initializes from the closed-form solution of the affine model.
///
/// * decoder output layer: `Ŵ/ρ` on its first `κ` inputs (zero elsewhere)
///   and bias `b̂/ρ`, so that `θ = Ŵz + b̂` for a single-layer decoder;
/// * encoder trunk: the first `d` units of every trunk layer copy the input,
///   which is exact because ReLU is the identity on `[0, ∞)` data; further
///   units keep their He weights but feed nothing into the next layer;
/// * μ head: `μ̂_z(x)` on the copied input;
/// * log-variance head: bias `log diag Σ̂_z`; weights per `logvar` on the
///   copied input and zero on the extra trunk units.
///
/// All remaining layers are He-initialized from `rng`. For Gaussian models
/// the dispersion is taken from `sol`.
pub fn init_mle_b_with(model: &mut VaeModel, sol: &MleSolution, rng: &mut Rng, logvar: LogvarWeights) -> Result<()> {
    let d = model.d();
    let kappa = model.kappa;
    if sol.d() != d || sol.kappa() != kappa {
        return Err(Error::DimensionMismatch(format!(
            "solution is {}x{}, model is {d}x{kappa}",
            sol.d(),
            sol.kappa()
        )));
    }
    if sol.family.kind() != model.family.kind() || sol.family.trials() != model.family.trials() {
        return Err(Error::DimensionMismatch(format!(
            "solution family {} does not match model family {}",
            sol.family, model.family
        )));
    }
    for l in &model.encoder_trunk {
        if l.out_dim() < d || l.in_dim() < d {
            return Err(Error::InvalidArchitecture(format!(
                "encoder layer {}x{} is narrower than d = {d}; the trunk cannot pass the input through",
                l.out_dim(),
                l.in_dim()
            )));
        }
        if !matches!(l.activation, Activation::Relu | Activation::Linear) {
            return Err(Error::InvalidArchitecture(format!(
                "pass-through needs relu or linear trunk activations, found {}",
                l.activation
            )));
        }
    }
    let out = model.decoder.last().expect("decoder has layers");
    if out.in_dim() < kappa {
        return Err(Error::InvalidArchitecture(format!(
            "decoder output layer has {} inputs, fewer than kappa = {kappa}",
            out.in_dim()
        )));
    }

    init_bench(model, rng);
    let fam = if model.family.kind() == crate::edf::FamilyKind::Gaussian {
        model.family.with_dispersion(sol.dispersion())?
    } else {
        model.family
    };
    model.family = fam;
    let rho = fam.rho();

    let out = model.decoder.last_mut().expect("decoder has layers");
    out.w = Matrix::from_fn(out.out_dim(), out.in_dim(), |i, j| {
        if j < kappa {
            sol.w_hat[(i, j)] / rho
        } else {
            0.0
        }
    });
    out.b = sol.b_hat.iter().map(|b| b / rho).collect();

    for l in &mut model.encoder_trunk {
        for i in 0..d {
            let row = l.w.row_mut(i);
            row.iter_mut().for_each(|v| *v = 0.0);
            row[i] = 1.0;
        }
        l.b.iter_mut().for_each(|b| *b = 0.0);
    }

    let opt = variational_optima(sol);
    let trunk_out = model.mu_head.in_dim();
    model.mu_head.w = Matrix::from_fn(kappa, trunk_out, |i, j| if j < d { opt.mu_map_weight[(i, j)] } else { 0.0 });
    model.mu_head.b = opt.mu_map_bias.clone();
    for i in 0..kappa {
        let row = model.logvar_head.w.row_mut(i);
        let start = if logvar == LogvarWeights::Zero { 0 } else { d };
        row[start..].iter_mut().for_each(|v| *v = 0.0);
    }
    model.logvar_head.b = opt.sigma_z.diag().iter().map(|v| v.max(LOGVAR_FLOOR).ln()).collect();
    Ok(())
}
