//! Littlewood-Paley analysis, Besov norms and pseudospectral b-family solvers
//! on a large periodic box, plus the experiment harness built on them.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for `f32`
//! and `f64`); the aliases below fix the usual double-precision choice.

// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod besov;
pub mod error;
pub mod experiments;
pub mod initial_data;
pub mod littlewood_paley;
pub mod scalar;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;
pub use spectral::{Field, Grid, Spectrum};

pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type Spectrum64 = Spectrum<f64>;
pub type Grid32 = Grid<f32>;
pub type Field32 = Field<f32>;
