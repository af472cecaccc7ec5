//! Reduced one-dimensional `(A, Q)` blood-flow model for arteries with an
//! axially varying reference radius.
//!
//! Units are CGS throughout. `A = R^2` carries no factor of pi, so the
//! volumetric flow rate is `pi * Q`.

// Positivity checks are written `!(x > 0.0)` on purpose so NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dg;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod model;
pub mod postprocess;
pub mod record;

pub use error::{GeometryError, ModelError, PostprocessError, SolverError};
pub use geometry::{GeometryDerivatives, Severity, VesselGeometry};
pub use model::{C0Variant, ConservedState, Correction, PhysicalParams};
pub use record::SolutionRecord;
