use super::layer::{Activation, Dense, DenseGrad, EXP_CLAMP};
use super::model::{Gradients, VaeModel};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

/// Rows processed at once during evaluation.
const EVAL_CHUNK: usize = 512;

/// ELBO averaged over data points, with the Monte-Carlo standard error of
/// that average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboEstimate {
    pub mean: f64,
    /// Uses the within-datum sample variance when at least two samples per
    /// datum were drawn; with one sample it falls back to the spread across
    /// data points, which bounds the Monte-Carlo error from above.
    pub std_err: f64,
}

struct Stack {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
}

fn forward_stack(layers: &[Dense], x: &Matrix, last_pre_only: bool) -> Result<(Stack, Matrix)> {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut h = x.clone();
    let n = layers.len();
    for (i, l) in layers.iter().enumerate() {
        let a = l.pre_activation(&h)?;
        let next = if last_pre_only && i + 1 == n {
            a.clone()
        } else {
            let act = l.activation;
            a.map(|v| act.apply(v))
        };
        inputs.push(std::mem::replace(&mut h, next));
        pre.push(a);
    }
    Ok((Stack { inputs, pre }, h))
}

/// Backpropagates `d_last` (gradient at the last layer's pre-activation)
/// through `layers`, accumulating into `grads`; returns the input gradient.
fn backward_stack(layers: &[Dense], stack: &Stack, d_last: Matrix, grads: &mut [DenseGrad]) -> Matrix {
    let mut d_pre = d_last;
    for i in (0..layers.len()).rev() {
        let d_in = layers[i].backward(&stack.inputs[i], &d_pre, &mut grads[i]);
        if i == 0 {
            return d_in;
        }
        let act = layers[i - 1].activation;
        let prev = &stack.pre[i - 1];
        d_pre = Matrix::from_fn(d_in.rows(), d_in.cols(), |r, c| d_in[(r, c)] * act.derivative(prev[(r, c)]));
    }
    unreachable!("stacks are nonempty")
}

/// Natural parameter `θ = ρ·a` and `dθ/da` for an output pre-activation.
#[inline]
fn natural(model: &VaeModel, a: f64) -> (f64, f64) {
    let rho = model.family.rho();
    if model.output_activation() == Activation::Exp {
        if a.abs() <= EXP_CLAMP {
            (rho * a, rho)
        } else {
            (rho * a.clamp(-EXP_CLAMP, EXP_CLAMP), 0.0)
        }
    } else {
        (rho * a, rho)
    }
}

fn kl_row(mu: &[f64], lv: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(lv)
        .map(|(&m, &l)| l.exp() + m * m - 1.0 - l)
        .sum::<f64>()
}

fn check_batch(model: &VaeModel, x: &Matrix) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::DimensionMismatch("empty batch".into()));
    }
    if x.cols() != model.d() {
        return Err(Error::DimensionMismatch(format!(
            "batch has {} columns, model expects {}",
            x.cols(),
            model.d()
        )));
    }
    Ok(())
}

/// Reparameterized samples `z = μ + exp(½ logvar) ⊙ ε`, returning `(z, ε)`.
fn sample_latent(mu: &Matrix, lv: &Matrix, rng: &mut Rng) -> (Matrix, Matrix) {
    let mut eps = Matrix::zeros(mu.rows(), mu.cols());
    rng.fill_standard_normal(eps.as_mut_slice());
    let z = Matrix::from_fn(mu.rows(), mu.cols(), |r, c| mu[(r, c)] + (0.5 * lv[(r, c)]).exp() * eps[(r, c)]);
    (z, eps)
}

/// ELBO of a minibatch (mean over rows, `mc_samples` reparameterized draws
/// per row) and the gradient of the loss `−ELBO` with respect to every
/// parameter.
pub fn elbo_minibatch(model: &VaeModel, batch: &Matrix, rng: &mut Rng, mc_samples: usize) -> Result<(f64, Gradients)> {
    check_batch(model, batch)?;
    let s = mc_samples.max(1);
    let b = batch.rows();
    let kappa = model.kappa;
    let n_trunk = model.encoder_trunk.len();
    let fam = model.family;
    let phi = fam.dispersion();
    let beta = model.beta;
    let mut grads = model.zero_gradients();

    let (trunk, h) = forward_stack(&model.encoder_trunk, batch, false)?;
    let mu = model.mu_head.pre_activation(&h)?;
    let lv = model.logvar_head.pre_activation(&h)?;

    let mut d_mu = Matrix::zeros(b, kappa);
    let mut d_lv = Matrix::zeros(b, kappa);
    let weight = 1.0 / (b * s) as f64;
    let mut loglik = 0.0;
    for _ in 0..s {
        let (z, eps) = sample_latent(&mu, &lv, rng);
        let (dec, a) = forward_stack(&model.decoder, &z, true)?;
        let mut d_a = Matrix::zeros(b, model.d());
        for r in 0..b {
            let xr = batch.row(r);
            let ar = a.row(r);
            let dr = d_a.row_mut(r);
            for j in 0..xr.len() {
                let (theta, dtheta) = natural(model, ar[j]);
                loglik += (xr[j] * theta - fam.f(theta)) / phi + fam.k(xr[j]);
                dr[j] = -(xr[j] - fam.f1(theta)) / phi * dtheta * weight;
            }
        }
        let dz = backward_stack(&model.decoder, &dec, d_a, &mut grads.layers[n_trunk + 2..]);
        for r in 0..b {
            for c in 0..kappa {
                let g = dz[(r, c)];
                d_mu[(r, c)] += g;
                d_lv[(r, c)] += g * eps[(r, c)] * 0.5 * (0.5 * lv[(r, c)]).exp();
            }
        }
    }
    let mut kl = 0.0;
    for r in 0..b {
        kl += kl_row(mu.row(r), lv.row(r));
        for c in 0..kappa {
            d_mu[(r, c)] += beta * mu[(r, c)] / b as f64;
            d_lv[(r, c)] += beta * 0.5 * (lv[(r, c)].exp() - 1.0) / b as f64;
        }
    }
    let value = loglik * weight - beta * kl / b as f64;
    if !value.is_finite() {
        return Err(Error::NonFinite("minibatch ELBO".into()));
    }

    let head_grads = &mut grads.layers[n_trunk..n_trunk + 2];
    let dh_mu = model.mu_head.backward(&h, &d_mu, &mut head_grads[0]);
    let dh_lv = model.logvar_head.backward(&h, &d_lv, &mut head_grads[1]);
    let dh = dh_mu.add(&dh_lv)?;
    if n_trunk > 0 {
        let act = model.encoder_trunk[n_trunk - 1].activation;
        let last_pre = &trunk.pre[n_trunk - 1];
        let d_last = Matrix::from_fn(b, dh.cols(), |r, c| dh[(r, c)] * act.derivative(last_pre[(r, c)]));
        backward_stack(&model.encoder_trunk, &trunk, d_last, &mut grads.layers[..n_trunk]);
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("minibatch gradient".into()));
    }
    Ok((value, grads))
}

/// Per-datum ELBO estimates: the mean over `mc_samples` draws and the sample
/// variance of the reconstruction term across those draws.
pub fn elbo_per_datum(model: &VaeModel, x: &Matrix, rng: &mut Rng, mc_samples: usize) -> Result<Vec<(f64, f64)>> {
    check_batch(model, x)?;
    let s = mc_samples.max(1);
    let fam = model.family;
    let phi = fam.dispersion();
    let mut out = Vec::with_capacity(x.rows());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + EVAL_CHUNK).min(x.rows());
        let chunk = x.slice_rows(start, end);
        let (mu, lv) = model.encode(&chunk)?;
        let b = chunk.rows();
        let mut sum = vec![0.0; b];
        let mut sum_sq = vec![0.0; b];
        let mut base = vec![0.0; b];
        for r in 0..b {
            base[r] = chunk.row(r).iter().map(|&v| fam.k(v)).sum::<f64>() - model.beta * kl_row(mu.row(r), lv.row(r));
        }
        for _ in 0..s {
            let (z, _) = sample_latent(&mu, &lv, rng);
            let a = model.decode_pre_activation(&z)?;
            for r in 0..b {
                let ll: f64 = chunk
                    .row(r)
                    .iter()
                    .zip(a.row(r))
                    .map(|(&xv, &av)| {
                        let theta = natural(model, av).0;
                        (xv * theta - fam.f(theta)) / phi
                    })
                    .sum();
                sum[r] += ll;
                sum_sq[r] += ll * ll;
            }
        }
        for r in 0..b {
            let m = sum[r] / s as f64;
            let var = if s > 1 {
                ((sum_sq[r] - s as f64 * m * m) / (s - 1) as f64).max(0.0)
            } else {
                0.0
            };
            out.push((m + base[r], var));
        }
        start = end;
    }
    if out.iter().any(|(m, _)| !m.is_finite()) {
        return Err(Error::NonFinite("ELBO evaluation".into()));
    }
    Ok(out)
}

pub fn evaluate(model: &VaeModel, x: &Matrix, rng: &mut Rng, mc_samples: usize) -> Result<ElboEstimate> {
    let per = elbo_per_datum(model, x, rng, mc_samples)?;
    let n = per.len() as f64;
    let mean = per.iter().map(|p| p.0).sum::<f64>() / n;
    let std_err = if mc_samples >= 2 {
        (per.iter().map(|p| p.1).sum::<f64>() / mc_samples as f64).sqrt() / n
    } else if per.len() > 1 {
        let var = per.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(ElboEstimate { mean, std_err })
}
