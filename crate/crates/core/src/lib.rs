//! Exponential-dispersion-family VAEs: closed-form analysis of the affine
//! decoder case and a small training stack to compare against.
//!
//! The crate is organised bottom-up. [`numerics`] and [`edf`] provide the
//! dense linear algebra and observation models; [`closed_form`] computes the
//! maximum likelihood decoder and predicted activity; [`nn`] trains VAEs
//! from He or MLE-based initializations; [`data`] and [`activity`] cover
//! ingestion and latent activity statistics.

pub mod activity;
pub mod closed_form;
pub mod data;
pub mod edf;
pub mod error;
pub mod nn;
pub mod numerics;

pub use closed_form::{AffineDecoder, MleOptions, MleSolution, VariationalOptima};
pub use edf::{EdfFamily, FamilyKind};
pub use error::{Error, Result};
pub use numerics::{Matrix, Rng};
