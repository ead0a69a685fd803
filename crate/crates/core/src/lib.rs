//! Conformal Einstein classification of pseudo-Riemannian metrics.
//!
//! The library decides whether a metric given in closed form is locally
//! conformally related to an Einstein metric, in dimensions 4 through 8.
//! The decision procedure rests on the algebra of Weyl tensor chains:
//! dimension-dependent trace identities single out a candidate conformal
//! vector in closed form, and the candidate is then checked against the
//! defining differential conditions.
//!
//! Layering, bottom up:
//! - [`symexpr`]: immutable symbolic expressions with exact rational
//!   constants, differentiation, evaluation, simplification.
//! - [`tensor`]: dense tensors over exact or float scalars.
//! - [`curvature`]: metric specs, curvature bundles, covariant derivatives.
//! - [`weyl`]: pointwise Weyl chain algebra, characteristic coefficients,
//!   the closed-form linear solver.
//! - [`identities`]: randomized verification of the dimension-dependent
//!   identities the solver relies on, with negative controls.
//! - [`conformal`]: conformal vector extraction routes and the classifier.
//! - [`metricfile`] / [`catalog`]: the metric file format and built-ins.

pub mod catalog;
pub mod conformal;
pub mod curvature;
pub mod error;
pub mod identities;
pub mod metricfile;
pub mod scalar;
pub mod symexpr;
pub mod tensor;
pub mod weyl;

pub use error::{Error, Result};
pub use scalar::{Mode, Scalar};
