//! Finite-lattice laboratory for magnetic Schrödinger operators on the plane:
//! Landau-band spectral projections, operator locality, real-space Chern
//! indices, and Wannierization attempts with quantitative decay and
//! truncation estimates.
//!
//! Modules are layered bottom-up: [`geometry`] → [`operator`] → [`spectral`]
//! → [`index`] → [`wannier`]. Dense matrices are `faer` matrices over
//! [`c64`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod export;
pub mod geometry;
pub mod index;
pub mod linalg;
pub mod model;
pub mod operator;
pub mod spectral;
pub mod wannier;

pub use error::{Error, Result};
pub use faer::Mat;
pub use num_complex::Complex64 as c64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
