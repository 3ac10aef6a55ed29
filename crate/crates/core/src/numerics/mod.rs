//! Deterministic numerical kernels shared by the rest of the crate.

mod linalg;
mod matrix;
mod rng;
mod stats;

pub use linalg::{
    cholesky, cholesky_solve, inverse_spd, least_squares, log_det_spd, sym_eig,
    EigenDecomposition,
};
pub use matrix::{axpy, dot, norm_sq, Matrix};
pub use rng::Rng;
pub use stats::{column_variances, gaussian_raw_moment, mean_and_std_err, sample_covariance};
