#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

//! Numerical toolkit for weighted interpolation problems on the plane, the
//! cylinder and surfaces with asymptotically flat ends.

pub mod bergman;
pub mod density;
pub mod divisors;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod quadrature;
pub mod sequences;
pub mod weights;

pub use error::{Error, Result};
pub use exec::Exec;
pub use geometry::ComplexPoint;
