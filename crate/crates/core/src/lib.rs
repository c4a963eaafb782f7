//! Fourier-multiplier operators on a periodic grid: symbols and their
//! audits, evolution systems, Littlewood–Paley blocks, g-functions, and
//! numerical checks of kernel estimates.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the double-precision instances used by the harness.

// `!(x > 0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod gfunction;
pub mod kernel_audit;
pub mod lp_decomp;
pub mod quadrature;
pub mod scalar;
pub mod spectral;
pub mod symbols;

pub use error::{Error, Result};
pub use scalar::Real;
pub use spectral::{Field, GridSpec, SpectralField};
pub use symbols::SymbolSpec;

pub use num_complex::Complex;

pub type Grid64 = GridSpec<f64>;
pub type Field64 = Field<f64>;
pub type Spectrum64 = SpectralField<f64>;
pub type Symbol64 = SymbolSpec<f64>;

pub type Grid32 = GridSpec<f32>;
pub type Field32 = Field<f32>;
pub type Symbol32 = SymbolSpec<f32>;
