//! Exponential dispersion family observation models.
//!
//! A member is described by its log-normalizer `F`, the base measure `K` and
//! the dispersion `φ`:
//!
//! ```text
//! log p(x | θ) = (x·θ − F(θ)) / φ + K(x, φ)
//! ```
//!
//! `F′(θ)` is the conditional mean and `F″(θ)` the variance scale. The
//! textbook identity is `Var(X) = φ·F″(θ)`; [`EdfFamily::variance_response`]
//! returns the bare `F″` and [`EdfFamily::conditional_variance`] the product,
//! so callers pick the convention they need.
//!
//! Linearly canonical activations `m(a) = F′(ρ·a)` are supported through the
//! `rho` scale: a decoder pre-activation `a` maps to the natural parameter
//! `θ = ρ·a`, and everything downstream works with `θ`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    Gaussian,
    Bernoulli,
    Binomial,
    Poisson,
}

impl FamilyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Binomial => "binomial",
            FamilyKind::Poisson => "poisson",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            FamilyKind::Gaussian => 0,
            FamilyKind::Bernoulli => 1,
            FamilyKind::Binomial => 2,
            FamilyKind::Poisson => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => FamilyKind::Gaussian,
            1 => FamilyKind::Bernoulli,
            2 => FamilyKind::Binomial,
            3 => FamilyKind::Poisson,
            other => return Err(Error::Format(format!("unknown family code {other}"))),
        })
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(FamilyKind::Gaussian),
            "bernoulli" => Ok(FamilyKind::Bernoulli),
            "binomial" => Ok(FamilyKind::Binomial),
            "poisson" => Ok(FamilyKind::Poisson),
            other => Err(Error::Domain(format!("unknown family '{other}'"))),
        }
    }
}

/// `F(0)`, `F′(0)`, `F″(0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdfConstants {
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdfFamily {
    kind: FamilyKind,
    trials: u32,
    dispersion: f64,
    rho: f64,
}

impl EdfFamily {
    pub fn new(kind: FamilyKind, trials: u32, dispersion: f64, rho: f64) -> Result<Self> {
        if !(dispersion > 0.0) || !dispersion.is_finite() {
            return Err(Error::Domain(format!("dispersion must be positive, got {dispersion}")));
        }
        if rho == 0.0 || !rho.is_finite() {
            return Err(Error::Domain("canonical scale rho must be nonzero".into()));
        }
        let trials = match kind {
            FamilyKind::Bernoulli => {
                if trials != 1 {
                    return Err(Error::Domain("bernoulli has exactly one trial".into()));
                }
                1
            }
            FamilyKind::Binomial => {
                if trials == 0 {
                    return Err(Error::Domain("binomial needs at least one trial".into()));
                }
                trials
            }
            _ => 1,
        };
        if kind != FamilyKind::Gaussian && dispersion != 1.0 {
            return Err(Error::Domain(format!("{kind} has fixed dispersion 1")));
        }
        Ok(Self {
            kind,
            trials,
            dispersion,
            rho,
        })
    }

    pub fn gaussian(variance: f64) -> Result<Self> {
        Self::new(FamilyKind::Gaussian, 1, variance, 1.0)
    }

    pub fn bernoulli() -> Self {
        Self {
            kind: FamilyKind::Bernoulli,
            trials: 1,
            dispersion: 1.0,
            rho: 1.0,
        }
    }

    pub fn binomial(trials: u32) -> Result<Self> {
        Self::new(FamilyKind::Binomial, trials, 1.0, 1.0)
    }

    pub fn poisson() -> Self {
        Self {
            kind: FamilyKind::Poisson,
            trials: 1,
            dispersion: 1.0,
            rho: 1.0,
        }
    }

    pub fn with_rho(self, rho: f64) -> Result<Self> {
        Self::new(self.kind, self.trials, self.dispersion, rho)
    }

    /// Same family with a different dispersion; only meaningful for Gaussian.
    pub fn with_dispersion(self, dispersion: f64) -> Result<Self> {
        Self::new(self.kind, self.trials, dispersion, self.rho)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn trials(&self) -> u32 {
        self.trials
    }

    pub fn dispersion(&self) -> f64 {
        self.dispersion
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Bernoulli and Binomial share every formula.
    fn is_binomial_like(&self) -> bool {
        matches!(self.kind, FamilyKind::Bernoulli | FamilyKind::Binomial)
    }

    pub fn constants(&self) -> EdfConstants {
        EdfConstants {
            f0: self.f(0.0),
            f1: self.f1(0.0),
            f2: self.f2(0.0),
        }
    }

    // Unchecked kernels used by the hot paths.

    #[inline]
    pub(crate) fn f(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 0.5 * theta * theta,
            FamilyKind::Bernoulli | FamilyKind::Binomial => self.trials as f64 * softplus(theta),
            FamilyKind::Poisson => theta.exp(),
        }
    }

    #[inline]
    pub(crate) fn f1(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => theta,
            FamilyKind::Bernoulli | FamilyKind::Binomial => self.trials as f64 * sigmoid(theta),
            FamilyKind::Poisson => theta.exp(),
        }
    }

    #[inline]
    pub(crate) fn f2(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 1.0,
            FamilyKind::Bernoulli | FamilyKind::Binomial => {
                let s = sigmoid(theta);
                self.trials as f64 * s * (1.0 - s)
            }
            FamilyKind::Poisson => theta.exp(),
        }
    }

    /// `F(θ)`.
    pub fn log_normalizer(&self, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        Ok(self.f(theta))
    }

    /// `F′(ρ·θ)`, the mean of `X` under a linearly canonical activation.
    pub fn mean_response(&self, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        Ok(self.f1(self.rho * theta))
    }

    /// `F″(θ)`.
    pub fn variance_response(&self, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        Ok(self.f2(theta))
    }

    /// `φ·F″(θ)`, the conditional variance under the standard EDF identity.
    pub fn conditional_variance(&self, theta: f64) -> Result<f64> {
        Ok(self.dispersion * self.variance_response(theta)?)
    }

    /// `K(x, φ)`; `x` must lie in the family's support.
    pub fn base_measure(&self, x: f64) -> Result<f64> {
        self.check_support(x, false)?;
        Ok(self.k(x))
    }

    /// `K(x, φ)` for continuous relaxations of the support: any `x ∈ [0, n]`
    /// for Bernoulli/Binomial and any `x ≥ 0` for Poisson. This is how
    /// `[0,1]`-scaled image data is fed to a Bernoulli likelihood.
    pub fn base_measure_relaxed(&self, x: f64) -> Result<f64> {
        self.check_support(x, true)?;
        Ok(self.k(x))
    }

    #[inline]
    pub(crate) fn k(&self, x: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => {
                let phi = self.dispersion;
                -x * x / (2.0 * phi) - 0.5 * (2.0 * PI * phi).ln()
            }
            FamilyKind::Bernoulli => 0.0,
            FamilyKind::Binomial => {
                let n = self.trials as f64;
                ln_gamma(n + 1.0) - ln_gamma(x + 1.0) - ln_gamma(n - x + 1.0)
            }
            FamilyKind::Poisson => -ln_gamma(x + 1.0),
        }
    }

    /// `(x·θ − F(θ))/φ + K(x, φ)`, with `x` restricted to the exact support.
    pub fn log_density(&self, x: f64, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        self.check_support(x, false)?;
        Ok(self.log_density_unchecked(x, theta))
    }

    /// Like [`log_density`](Self::log_density) over the relaxed support.
    pub fn log_density_relaxed(&self, x: f64, theta: f64) -> Result<f64> {
        check_finite(theta)?;
        self.check_support(x, true)?;
        Ok(self.log_density_unchecked(x, theta))
    }

    #[inline]
    pub(crate) fn log_density_unchecked(&self, x: f64, theta: f64) -> f64 {
        (x * theta - self.f(theta)) / self.dispersion + self.k(x)
    }

    pub fn check_support(&self, x: f64, relaxed: bool) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::Domain(format!("observation {x} is not finite")));
        }
        let ok = match self.kind {
            FamilyKind::Gaussian => true,
            FamilyKind::Bernoulli | FamilyKind::Binomial => {
                let n = self.trials as f64;
                if relaxed {
                    (0.0..=n).contains(&x)
                } else {
                    x.fract() == 0.0 && (0.0..=n).contains(&x)
                }
            }
            FamilyKind::Poisson => x >= 0.0 && (relaxed || x.fract() == 0.0),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "observation {x} outside the {} support",
                self.kind
            )))
        }
    }

    /// Fourth derivative of `F` at `θ`, used for remainder checks.
    pub fn fourth_derivative(&self, theta: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => 0.0,
            FamilyKind::Poisson => theta.exp(),
            _ if self.is_binomial_like() => {
                let s = sigmoid(theta);
                self.trials as f64 * s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s)
            }
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for EdfFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FamilyKind::Binomial => write!(f, "binomial(n={})", self.trials)?,
            FamilyKind::Gaussian => write!(f, "gaussian(phi={})", self.dispersion)?,
            k => write!(f, "{k}")?,
        }
        if self.rho != 1.0 {
            write!(f, " rho={}", self.rho)?;
        }
        Ok(())
    }
}

fn check_finite(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("natural parameter {theta} is not finite")))
    }
}

/// `log(1 + eᶿ)` without overflow.
#[inline]
pub fn softplus(theta: f64) -> f64 {
    if theta > 0.0 {
        theta + (-theta).exp().ln_1p()
    } else {
        theta.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(theta: f64) -> f64 {
    if theta >= 0.0 {
        1.0 / (1.0 + (-theta).exp())
    } else {
        let e = theta.exp();
        e / (1.0 + e)
    }
}
