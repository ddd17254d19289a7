//! Numerical laboratory for planar quadratic systems with two parallel
//! straight line-isoclines.

pub mod cycles;
pub mod error;
pub mod flow;
pub mod isocline;
pub mod numfmt;
pub mod portrait;
pub mod rotation;
pub mod scenario;
pub mod separatrix;
pub mod singular;
pub mod vectorfield;

pub use error::{QlcError, Result};
