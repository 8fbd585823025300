//! Numerical toolkit for dynamics with two time parameters `(t1, t2)`.
//!
//! * [`classical`]: admissibility of force tensors, characteristic fields
//!   and a reference integrator for rank-one forces.
//! * [`quantum`]: commuting generators, element-wise evolution and
//!   fluctuation diagnostics.
//! * [`continuity`]: conserved charges and separability of two-time
//!   densities.
//! * [`dirac`]: plane waves of a Dirac operator in `2 + 1` dimensions with
//!   metric `(+, +, -)`.

pub mod classical;
pub mod continuity;
pub mod dirac;
pub mod error;
pub mod matrix;
pub mod numeric;
pub mod quantum;

pub use error::{Error, Result};
pub use matrix::SmallMatrix;
pub use numeric::{central_difference, Grid2T, TimePlanePoint, Tolerances};
