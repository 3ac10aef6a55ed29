//! Closed-form analysis of VAEs with an affine decoder: the surrogate
//! objective, maximum likelihood estimates, optimal variational parameters,
//! predicted latent activity and Taylor-remainder bounds.

mod io;
mod mle;
mod objective;
mod remainder;

pub(crate) use io::{read_dim, read_f64s, read_family, write_f64s, write_family};
pub use mle::{
    activity_predict, mle_fit, transform_data, variational_optima, AffineDecoder, DispersionMode,
    MleOptions, MleSolution, VariationalOptima, DISPERSION_FLOOR,
};
pub use objective::{
    approx_objective_general, dispersion_term, kernel_residual, kl_diag_gaussian, objective_hat,
    optimal_variational,
};
pub use remainder::{expected_remainder, remainder_bounds, RemainderBounds, POISSON_REMAINDER_SAMPLES};
