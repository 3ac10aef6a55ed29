use super::mle::AffineDecoder;
use super::objective::{covariance_for, theta_moments};
use crate::edf::{EdfFamily, FamilyKind};
use crate::error::{Error, Result};
use crate::numerics::{cholesky, gaussian_raw_moment, Matrix, Rng};

/// Total Monte-Carlo draws used for the Poisson expected remainder.
pub const POISSON_REMAINDER_SAMPLES: usize = 100_000;
const POISSON_REMAINDER_SEED: u64 = 0x5eed_0f7a11;

/// Bracket on the second-order Taylor remainder at one latent point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderBounds {
    pub lower: f64,
    pub upper: f64,
    /// Range of the mean-value factor `M` (Binomial only).
    pub m_range: Option<(f64, f64)>,
}

pub fn remainder_bounds(dec: &AffineDecoder, z: &[f64], family: &EdfFamily) -> Result<RemainderBounds> {
    let theta = dec.theta(z)?;
    Ok(bounds_at(&theta, family))
}

fn bounds_at(theta: &[f64], family: &EdfFamily) -> RemainderBounds {
    match family.kind() {
        FamilyKind::Gaussian => RemainderBounds {
            lower: 0.0,
            upper: 0.0,
            m_range: None,
        },
        FamilyKind::Bernoulli | FamilyKind::Binomial => {
            let n = family.trials() as f64;
            RemainderBounds {
                lower: 0.0,
                upper: n / 192.0 * theta.iter().map(|t| t.powi(4)).sum::<f64>(),
                m_range: Some((0.0, 1.0)),
            }
        }
        FamilyKind::Poisson => {
            let (mut lower, mut upper) = (0.0, 0.0);
            for &t in theta {
                let a = -t.powi(3) * t.exp() / 6.0;
                let b = -t.powi(3) / 6.0;
                lower += a.min(b);
                upper += a.max(b);
            }
            RemainderBounds {
                lower,
                upper,
                m_range: None,
            }
        }
    }
}

/// `E[R₂]` at `M = 1` for `z ~ Normal(μᵢ, Σᵢ)`, averaged over data points.
///
/// Binomial uses Gaussian fourth moments of `ϑⱼ(z)`. Poisson has no closed
/// form and is estimated from [`POISSON_REMAINDER_SAMPLES`] draws with a fixed
/// seed, using the upper end `Σⱼ −ϑⱼ³/6` of its bracket.
pub fn expected_remainder(
    dec: &AffineDecoder,
    mu_z: &[Vec<f64>],
    sigma_z: &[Matrix],
    family: &EdfFamily,
) -> Result<f64> {
    let n = mu_z.len();
    if n == 0 {
        return Err(Error::DimensionMismatch("expected_remainder needs at least one mean".into()));
    }
    match family.kind() {
        FamilyKind::Gaussian => Ok(0.0),
        FamilyKind::Bernoulli | FamilyKind::Binomial => {
            let trials = family.trials() as f64;
            let mut total = 0.0;
            for (i, mu) in mu_z.iter().enumerate() {
                let sigma = covariance_for(sigma_z, i, n)?;
                let (m, v) = theta_moments(dec, mu, sigma)?;
                for (&mj, &vj) in m.iter().zip(&v) {
                    total += gaussian_raw_moment(mj, vj, 4)?;
                }
            }
            Ok(trials / 192.0 * total / n as f64)
        }
        FamilyKind::Poisson => {
            let mut rng = Rng::new(POISSON_REMAINDER_SEED);
            let per_point = POISSON_REMAINDER_SAMPLES.div_ceil(n);
            let kappa = dec.kappa();
            let mut eps = vec![0.0; kappa];
            let mut z = vec![0.0; kappa];
            let mut total = 0.0;
            for (i, mu) in mu_z.iter().enumerate() {
                let sigma = covariance_for(sigma_z, i, n)?;
                let l = cholesky(sigma)?;
                let mut acc = 0.0;
                for _ in 0..per_point {
                    rng.fill_standard_normal(&mut eps);
                    for r in 0..kappa {
                        z[r] = mu[r] + (0..=r).map(|c| l[(r, c)] * eps[c]).sum::<f64>();
                    }
                    let theta = dec.theta(&z)?;
                    acc += theta.iter().map(|t| -t.powi(3) / 6.0).sum::<f64>();
                }
                total += acc / per_point as f64;
            }
            Ok(total / n as f64)
        }
    }
}
