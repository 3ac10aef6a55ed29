use log::warn;

use super::mle::{transform_data, AffineDecoder};
use crate::edf::EdfFamily;
use crate::error::{Error, Result};
use crate::numerics::{cholesky, cholesky_solve, dot, least_squares, log_det_spd, norm_sq, Matrix};

fn check_data(dec: &AffineDecoder, x: &Matrix, family: &EdfFamily) -> Result<()> {
    if x.cols() != dec.d() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns, decoder expects {}",
            x.cols(),
            dec.d()
        )));
    }
    if x.rows() == 0 {
        return Err(Error::DimensionMismatch("empty data matrix".into()));
    }
    for &v in x.as_slice() {
        family.check_support(v, true)?;
    }
    Ok(())
}

/// `D(φ) = 2dF(0)/φ − (1/N) Σᵢ [‖xᵢ − F′(0)‖²/(F″(0)φ) + 2 Σⱼ K(xᵢⱼ, φ)]`.
///
/// `K` is evaluated on the relaxed support so `[0,1]`-valued data is accepted.
pub fn dispersion_term(x: &Matrix, family: &EdfFamily) -> Result<f64> {
    let c = family.constants();
    let phi = family.dispersion();
    let d = x.cols() as f64;
    let mut acc = 0.0;
    for r in x.row_iter() {
        let mut sq = 0.0;
        let mut k = 0.0;
        for &v in r {
            family.check_support(v, true)?;
            sq += (v - c.f1) * (v - c.f1);
            k += family.k(v);
        }
        acc += sq / (c.f2 * phi) + 2.0 * k;
    }
    Ok(2.0 * d * c.f0 / phi - acc / x.rows() as f64)
}

/// `L̂(W, b) = −½(tr(C⁻¹S) + β log|C| + βd log(F″(0)/φ) + D(φ))` with
/// `C = (φ/F″(0)) I + WWᵀ/β` and `S` the transformed-data scatter about `b`.
///
/// `C` is never formed; inverse and determinant go through the `κ × κ`
/// capacitance matrix, so the cost is `O(N d κ)`.
pub fn objective_hat(dec: &AffineDecoder, x: &Matrix, family: &EdfFamily, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("objective_hat needs finite beta > 0, got {beta}")));
    }
    check_data(dec, x, family)?;
    let c = family.constants();
    let phi = family.dispersion();
    let (d, kappa) = (dec.d(), dec.kappa());
    let a = phi / c.f2;
    let v = dec.w.scale(1.0 / beta.sqrt());
    let mut m = v.gram();
    for i in 0..kappa {
        m[(i, i)] += a;
    }
    let m_chol = cholesky(&m)?;
    let log_det_c = (d - kappa) as f64 * a.ln() + log_det_spd(&m)?;

    let y = transform_data(x, family);
    let mut resid = vec![0.0; d];
    let mut quad = 0.0;
    for yi in y.row_iter() {
        for ((r, &yv), &bv) in resid.iter_mut().zip(yi).zip(&dec.b) {
            *r = yv - bv;
        }
        let vt_r = v.matvec_transposed(&resid)?;
        let sol = cholesky_solve(&m_chol, &vt_r);
        quad += (norm_sq(&resid) - dot(&vt_r, &sol)) / a;
    }
    let trace_term = quad / x.rows() as f64;
    let total = trace_term
        + beta * log_det_c
        + beta * d as f64 * (c.f2 / phi).ln()
        + dispersion_term(x, family)?;
    let value = -0.5 * total;
    if !value.is_finite() {
        return Err(Error::NonFinite("objective_hat".into()));
    }
    Ok(value)
}

/// Maximizers of the surrogate for fixed `(W, b)`:
/// `Σ̂ = (I + F″(0)/(βφ) WᵀW)⁻¹` and `μ̂ᵢ = (F″(0)/(βφ)) Σ̂ Wᵀ(yᵢ − b)`.
pub fn optimal_variational(
    dec: &AffineDecoder,
    x: &Matrix,
    family: &EdfFamily,
    beta: f64,
) -> Result<(Vec<Vec<f64>>, Matrix)> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("optimal_variational needs beta > 0, got {beta}")));
    }
    check_data(dec, x, family)?;
    let c = family.constants();
    let s = c.f2 / (beta * family.dispersion());
    let mut prec = dec.w.gram().scale(s);
    for i in 0..dec.kappa() {
        prec[(i, i)] += 1.0;
    }
    let sigma = crate::numerics::inverse_spd(&prec)?;
    let y = transform_data(x, family);
    let mut mus = Vec::with_capacity(x.rows());
    let mut resid = vec![0.0; dec.d()];
    for yi in y.row_iter() {
        for ((r, &yv), &bv) in resid.iter_mut().zip(yi).zip(&dec.b) {
            *r = yv - bv;
        }
        let wt = dec.w.matvec_transposed(&resid)?;
        mus.push(sigma.matvec(&wt)?.iter().map(|v| v * s).collect());
    }
    Ok((mus, sigma))
}

/// `½(tr Σ − log|Σ| + ‖μ‖² − κ)`, the KL divergence from `Normal(μ, Σ)` to
/// the standard normal.
pub fn kl_diag_gaussian(mu: &[f64], sigma: &Matrix) -> Result<f64> {
    if sigma.shape() != (mu.len(), mu.len()) {
        return Err(Error::DimensionMismatch(format!(
            "covariance {:?} does not match mean of length {}",
            sigma.shape(),
            mu.len()
        )));
    }
    let log_det = log_det_spd(sigma)?;
    Ok(0.5 * (sigma.trace() - log_det + norm_sq(mu) - mu.len() as f64))
}

/// `‖W z₀ + b‖` for the least-squares `z₀`; zero when `b ∈ range(W)`.
pub fn kernel_residual(dec: &AffineDecoder) -> Result<f64> {
    let neg_b: Vec<f64> = dec.b.iter().map(|v| -v).collect();
    let z0 = least_squares(&dec.w, &neg_b, 1e-12)?;
    let theta = dec.theta(&z0)?;
    Ok(norm_sq(&theta).sqrt())
}

/// Per-datum covariance lookup: one shared matrix or one per row.
pub(crate) fn covariance_for(sigma_z: &[Matrix], i: usize, n: usize) -> Result<&Matrix> {
    match sigma_z.len() {
        1 => Ok(&sigma_z[0]),
        len if len == n => Ok(&sigma_z[i]),
        len => Err(Error::DimensionMismatch(format!(
            "expected 1 or {n} covariance matrices, got {len}"
        ))),
    }
}

/// Mean `Wμ + b` and variances `diag(W Σ Wᵀ)` of `ϑ(z)` for `z ~ Normal(μ, Σ)`.
pub(crate) fn theta_moments(dec: &AffineDecoder, mu: &[f64], sigma: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = dec.theta(mu)?;
    let ws = dec.w.matmul(sigma)?;
    let v = (0..dec.d())
        .map(|j| dot(ws.row(j), dec.w.row(j)).max(0.0))
        .collect();
    Ok((m, v))
}

/// Surrogate ELBO for arbitrary variational parameters: the second-order
/// expansion of `log P(x | ϑ)` around `ϑ = 0`, taken in expectation over
/// `z ~ Normal(μᵢ, Σᵢ)`, minus `β·KL`, averaged over the rows of `x`.
///
/// `sigma_z` holds either one shared covariance or one per row. When
/// `b ∉ range(W)` the expansion point is not attained by any `z`; a warning
/// is logged with the residual from [`kernel_residual`].
pub fn approx_objective_general(
    dec: &AffineDecoder,
    mu_z: &[Vec<f64>],
    sigma_z: &[Matrix],
    x: &Matrix,
    family: &EdfFamily,
    beta: f64,
) -> Result<f64> {
    check_data(dec, x, family)?;
    let n = x.rows();
    if mu_z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} means for {n} data points",
            mu_z.len()
        )));
    }
    let residual = kernel_residual(dec)?;
    if residual > 1e-8 * (1.0 + norm_sq(&dec.b).sqrt()) {
        warn!("bias is not in the range of W (residual {residual:e}); expanding at theta = 0");
    }
    let c = family.constants();
    let phi = family.dispersion();
    let mut total = 0.0;
    for (i, (xi, mu)) in x.row_iter().zip(mu_z).enumerate() {
        let sigma = covariance_for(sigma_z, i, n)?;
        if mu.len() != dec.kappa() {
            return Err(Error::DimensionMismatch(format!(
                "mean of length {}, latent dimension {}",
                mu.len(),
                dec.kappa()
            )));
        }
        let (m, v) = theta_moments(dec, mu, sigma)?;
        let mut expected = 0.0;
        for ((&xv, &mj), &vj) in xi.iter().zip(&m).zip(&v) {
            expected += (xv * mj - c.f0 - c.f1 * mj - 0.5 * c.f2 * (mj * mj + vj)) / phi + family.k(xv);
        }
        total += expected - beta * kl_diag_gaussian(mu, sigma)?;
    }
    Ok(total / n as f64)
}
