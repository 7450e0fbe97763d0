//! Numerical Finsler differential geometry.
//!
//! The crate computes the full Chern-connection curvature stack of analytic
//! Finsler structures through exact truncated jet arithmetic, and integrates
//! the Finslerian Ricci and Ricci-DeTurck flows on sphere-bundle grids over
//! the 2-torus with a Fourier pseudo-spectral method of lines.
//!
//! Layering, bottom up:
//! - [`jet`]: dense truncated jets, the derivative engine;
//! - [`expr`]: analytic coefficient expressions evaluable over jets;
//! - [`structure`]: Finsler structures (Riemannian, Randers, grid-backed),
//!   fundamental and Cartan tensors, frames, validity checks;
//! - [`connection`]: spray, nonlinear connection, Chern coefficients,
//!   horizontal covariant derivatives;
//! - [`curvature`]: hh-curvature, reduced curvature, Ricci scalar and tensor,
//!   flag curvature and isotropy diagnostics;
//! - [`deturck`]: the gauge vector field, Lie-derivative term, the second-order
//!   map operator, diffeomorphism integration and structure pullback;
//! - [`flow`]: grid states, spectral differentiation, time stepping,
//!   diagnostics, exact-solution residuals and the flow correspondence driver.

pub mod connection;
pub mod curvature;
pub mod deturck;
pub mod error;
pub mod expr;
pub mod flow;
pub mod jet;
pub mod linalg;
pub mod parallel;
pub mod sampling;
pub mod structure;

pub use error::{FinslerError, Result};
