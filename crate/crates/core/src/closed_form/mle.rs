use log::warn;

use crate::edf::{EdfFamily, FamilyKind};
use crate::error::{Error, Result};
use crate::numerics::{sample_covariance, sym_eig, Matrix};

/// Floor applied to a vanishing Gaussian dispersion estimate.
pub const DISPERSION_FLOOR: f64 = 1e-12;

/// Decoder location map `θ(z) = W z + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDecoder {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl AffineDecoder {
    pub fn new(w: Matrix, b: Vec<f64>) -> Result<Self> {
        if w.rows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "weight has {} rows but bias has {} entries",
                w.rows(),
                b.len()
            )));
        }
        if w.rows() == 0 || w.cols() == 0 {
            return Err(Error::DimensionMismatch("decoder needs d >= 1 and kappa >= 1".into()));
        }
        if !w.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine decoder parameters".into()));
        }
        Ok(Self { w, b })
    }

    pub fn d(&self) -> usize {
        self.w.rows()
    }

    pub fn kappa(&self) -> usize {
        self.w.cols()
    }

    pub fn theta(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut t = self.w.matvec(z)?;
        for (ti, bi) in t.iter_mut().zip(&self.b) {
            *ti += bi;
        }
        Ok(t)
    }
}

/// Elementwise `(x − F′(0)) / F″(0)`.
pub fn transform_data(x: &Matrix, family: &EdfFamily) -> Matrix {
    let c = family.constants();
    x.map(|v| (v - c.f1) / c.f2)
}

/// How the Gaussian dispersion is chosen during [`mle_fit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DispersionMode {
    /// Use the variance lost to the dimension reduction.
    Estimate,
    /// Use a fixed value, e.g. `0.5` for the plain-MSE convention.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct MleOptions {
    pub beta: f64,
    pub kappa: usize,
    /// Defaults to the identity, which makes `Σ̂_z` diagonal.
    pub rotation: Option<Matrix>,
    pub gaussian_dispersion: DispersionMode,
}

impl MleOptions {
    pub fn new(beta: f64, kappa: usize) -> Self {
        Self {
            beta,
            kappa,
            rotation: None,
            gaussian_dispersion: DispersionMode::Estimate,
        }
    }

    pub fn with_rotation(mut self, r: Matrix) -> Self {
        self.rotation = Some(r);
        self
    }

    pub fn with_fixed_dispersion(mut self, phi: f64) -> Self {
        self.gaussian_dispersion = DispersionMode::Fixed(phi);
        self
    }
}

/// Maximum likelihood estimates of the affine decoder under the surrogate
/// objective, together with the spectral quantities they are built from.
#[derive(Debug, Clone)]
pub struct MleSolution {
    pub b_hat: Vec<f64>,
    /// `d × κ`, equal to `U_κ L R`.
    pub w_hat: Matrix,
    pub rotation_r: Matrix,
    /// All `d` eigenvalues of the transformed sample covariance, descending.
    pub eigenvalues: Vec<f64>,
    /// Gaussian only: `Σ_{i>κ} λ_i / (d − βκ)` when defined.
    pub sigma2_hat: Option<f64>,
    /// `βφ / F″(0)`.
    pub cutoff: f64,
    pub active_mask: Vec<bool>,
    pub beta: f64,
    /// Observation family carrying the dispersion actually used.
    pub family: EdfFamily,
    /// Set when the Gaussian estimate vanished and [`DISPERSION_FLOOR`] was used.
    pub dispersion_floored: bool,
}

impl MleSolution {
    pub fn d(&self) -> usize {
        self.w_hat.rows()
    }

    pub fn kappa(&self) -> usize {
        self.w_hat.cols()
    }

    pub fn dispersion(&self) -> f64 {
        self.family.dispersion()
    }

    pub fn active_count(&self) -> usize {
        self.active_mask.iter().filter(|&&a| a).count()
    }

    pub fn decoder(&self) -> AffineDecoder {
        AffineDecoder {
            w: self.w_hat.clone(),
            b: self.b_hat.clone(),
        }
    }

    /// Sample mean of the untransformed data, `F′(0) + F″(0)·b̂`.
    pub fn data_mean(&self) -> Vec<f64> {
        let c = self.family.constants();
        self.b_hat.iter().map(|b| c.f1 + c.f2 * b).collect()
    }

    /// Diagonal of `K_κ`: `max(λ_j, cutoff)` for `j < κ`.
    pub fn k_diag(&self) -> Vec<f64> {
        self.eigenvalues[..self.kappa()]
            .iter()
            .map(|&l| if l >= self.cutoff { l } else { self.cutoff })
            .collect()
    }
}

pub fn mle_fit(x: &Matrix, family: &EdfFamily, opts: &MleOptions) -> Result<MleSolution> {
    let (n, d) = x.shape();
    let kappa = opts.kappa;
    let beta = opts.beta;
    if n == 0 || d == 0 {
        return Err(Error::DimensionMismatch("mle_fit needs a nonempty data matrix".into()));
    }
    if kappa == 0 || kappa > d {
        return Err(Error::DimensionMismatch(format!(
            "latent dimension {kappa} must lie in 1..={d}"
        )));
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite and >= 0, got {beta}")));
    }
    let consts = family.constants();
    if consts.f2 > 1.0 {
        return Err(Error::Unsupported(format!(
            "{family} has F''(0) = {} > 1; the closed-form W estimate needs F''(0) <= 1",
            consts.f2
        )));
    }
    for &v in x.as_slice() {
        family.check_support(v, true)?;
    }
    let rotation = match &opts.rotation {
        Some(r) => {
            if r.shape() != (kappa, kappa) {
                return Err(Error::DimensionMismatch(format!(
                    "rotation must be {kappa}x{kappa}"
                )));
            }
            let dev = r.gram().sub(&Matrix::identity(kappa))?.max_abs();
            if dev > 1e-10 {
                return Err(Error::Domain(format!("rotation is not orthogonal (deviation {dev:e})")));
            }
            r.clone()
        }
        None => Matrix::identity(kappa),
    };

    let y = transform_data(x, family);
    let b_hat = y.column_means();
    let s_hat = sample_covariance(&y, &b_hat)?;
    let eig = sym_eig(&s_hat)?;
    // roundoff can leave tiny negative eigenvalues of a PSD matrix
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();

    let tail: f64 = eigenvalues[kappa..].iter().sum();
    let limit = d as f64 / kappa as f64;
    let sigma2_hat = (beta < limit).then(|| tail / (d as f64 - beta * kappa as f64));

    let mut dispersion_floored = false;
    let fitted_family = if family.kind() == FamilyKind::Gaussian {
        let phi = match opts.gaussian_dispersion {
            DispersionMode::Fixed(phi) => phi,
            DispersionMode::Estimate => {
                let s2 = sigma2_hat.ok_or(Error::SigmaEstimatorUndefined { beta, limit })?;
                if s2 <= DISPERSION_FLOOR {
                    warn!("sigma^2 estimate {s2:e} vanished (rank(S) <= kappa); flooring at {DISPERSION_FLOOR:e}");
                    dispersion_floored = true;
                    DISPERSION_FLOOR
                } else {
                    s2
                }
            }
        };
        family.with_dispersion(phi)?
    } else {
        *family
    };

    let phi = fitted_family.dispersion();
    let cutoff = beta * phi / consts.f2;
    let active_mask: Vec<bool> = eigenvalues[..kappa].iter().map(|&l| l > cutoff).collect();
    let scales: Vec<f64> = eigenvalues[..kappa]
        .iter()
        .zip(&active_mask)
        .map(|(&l, &a)| if a { (l - cutoff).sqrt() } else { 0.0 })
        .collect();
    let u_l = Matrix::from_fn(d, kappa, |i, j| eig.eigenvectors[(i, j)] * scales[j]);
    let w_hat = u_l.matmul(&rotation)?;

    Ok(MleSolution {
        b_hat,
        w_hat,
        rotation_r: rotation,
        eigenvalues,
        sigma2_hat: if family.kind() == FamilyKind::Gaussian {
            sigma2_hat
        } else {
            None
        },
        cutoff,
        active_mask,
        beta,
        family: fitted_family,
        dispersion_floored,
    })
}

/// Posterior mean `μ̂_z(x) = A x + c` and shared covariance `Σ̂_z` at the MLE.
#[derive(Debug, Clone)]
pub struct VariationalOptima {
    pub sigma_z: Matrix,
    /// `κ × d`, acting on untransformed observations.
    pub mu_map_weight: Matrix,
    pub mu_map_bias: Vec<f64>,
}

impl VariationalOptima {
    pub fn mu(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut m = self.mu_map_weight.matvec(x)?;
        for (mi, ci) in m.iter_mut().zip(&self.mu_map_bias) {
            *mi += ci;
        }
        Ok(m)
    }
}

/// `Σ̂_z = (βφ/F″(0)) Rᵀ K_κ⁻¹ R` and `μ̂_z(x) = Rᵀ K_κ⁻¹ L U_κᵀ (x − x̄) / F″(0)`.
///
/// With `β = 0` the covariance degenerates to zero.
pub fn variational_optima(sol: &MleSolution) -> VariationalOptima {
    let kappa = sol.kappa();
    let f2 = sol.family.constants().f2;
    let r = &sol.rotation_r;
    let k_inv: Vec<f64> = sol
        .k_diag()
        .iter()
        .map(|&k| if k > 0.0 { 1.0 / k } else { 0.0 })
        .collect();
    // Rᵀ diag(s) R
    let sandwich = |s: &[f64]| {
        Matrix::from_fn(kappa, kappa, |i, j| {
            (0..kappa).map(|k| r[(k, i)] * s[k] * r[(k, j)]).sum()
        })
    };
    let scale = sol.beta * sol.dispersion() / f2;
    let sigma_z = sandwich(&k_inv.iter().map(|v| v * scale).collect::<Vec<_>>());
    // L Uᵀ = R Ŵᵀ, so the map is Rᵀ K⁻¹ R Ŵᵀ / F″(0)
    let rkr = sandwich(&k_inv);
    let mu_map_weight = rkr
        .matmul(&sol.w_hat.transpose())
        .expect("kappa-by-kappa times kappa-by-d")
        .scale(1.0 / f2);
    let x_bar = sol.data_mean();
    let mu_map_bias: Vec<f64> = mu_map_weight
        .matvec(&x_bar)
        .expect("weight columns match data dimension")
        .iter()
        .map(|v| -v)
        .collect();
    VariationalOptima {
        sigma_z,
        mu_map_weight,
        mu_map_bias,
    }
}

/// Predicted activity `(λ_j − cutoff)/λ_j` for `λ_j` above the cut-off, else 0.
pub fn activity_predict(sol: &MleSolution) -> Vec<f64> {
    sol.eigenvalues[..sol.kappa()]
        .iter()
        .map(|&l| if l > sol.cutoff { (l - sol.cutoff) / l } else { 0.0 })
        .collect()
}
