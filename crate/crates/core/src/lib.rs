//! Reduced-energy analysis for the problem of prescribing scalar curvature
//! `K0 (1 + eps K)` in the unit ball and boundary mean curvature
//! `H0 (1 + eps H)` on its boundary sphere.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: the inversion between the half-space and the ball, and the
//!   spherical-cap lift.
//! - [`fields`]: the perturbations as ambient polynomials (or user closures).
//! - [`quadrature`]: Gauss-Legendre cubature on the half-space and its
//!   boundary, together with the closed-form constants.
//! - [`bubble`]: the bubble family, its kernel and its residuals.
//! - [`reduction`]: the reduced energy, its boundary trace and the checks of
//!   its constant part, its limit at infinity and its small-scale expansion.
//! - [`morse`]: critical points of the boundary trace and the existence
//!   criteria built on them.
//! - [`checks`] and [`config`]: the shared verification suites and the JSON
//!   problem configuration used by the `curvred` binary.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bubble;
pub mod checks;
pub mod config;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod morse;
pub mod quadrature;
pub mod reduction;

pub use bubble::{BubbleParams, ConcentrationBox, ModelConstants};
pub use error::{Error, Result};
pub use fields::{AmbientField, AmbientPolynomial, FieldPair, Monomial};
pub use geometry::{BallPoint, HalfSpacePoint, SpherePoint};
pub use quadrature::{IntegralResult, QuadratureSpec};
