//! Numerical toolkit for the semilinear Klein-Gordon equation with small
//! mass in de Sitter spacetime.
//!
//! Layers, bottom up:
//!
//! - [`special`]: the Gauss hypergeometric function of the kernel family.
//! - [`cone_kernel`]: light-cone geometry and the source kernel.
//! - [`descent`]: spherical means and dimensional descent.
//! - [`goperator`]: quadrature evaluation of the source-to-solution operator.
//! - [`blowup_ode`]: the comparison ODE and blow-up certificates.
//! - [`semilinear`]: finite-difference and Picard solvers for the 1-D
//!   nonlocal equation.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup_ode;
pub mod cone_kernel;
pub mod descent;
pub mod error;
pub mod goperator;
pub mod quadrature;
pub mod semilinear;
pub mod special;

pub use error::{Error, Result};
