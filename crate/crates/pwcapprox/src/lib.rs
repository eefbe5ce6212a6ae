//! Piecewise-concave approximation of functions over a box.
//!
//! A piecewise-concave function is the pointwise maximum of finitely many
//! concave pieces; despite the name it is generally nonconcave. This crate
//! builds such approximations to a user-specified sup-norm tolerance with
//! three constructions, and certifies the structural properties each
//! construction guarantees:
//!
//! * [`univariate`] — max of concave parabolas on a uniform grid, one per
//!   subinterval, for Lipschitz targets on an interval.
//! * [`dc`] — difference-of-convex shift plus tangent planes, for smooth
//!   multivariate targets.
//! * [`separable`] — per-coordinate univariate builds summed across
//!   coordinates, for separable targets.
//!
//! [`analysis`] measures sup-norm error on dense grids and checks the
//! underestimation, locality, midpoint-exactness, and slope guarantees.
//! [`expr`] parses the target expression; [`model`] holds the piece data
//! model and the JSON model-file format.

pub mod analysis;
pub mod dc;
pub mod expr;
pub mod model;
pub mod separable;
pub mod univariate;

pub use expr::ExprAst;
pub use model::{Approximation, BoxDomain, DiagQuadPiece, Meta, ModelFile, PwcFunction};
pub use separable::SumForm;
pub use univariate::{Kappa, UniGrid};
