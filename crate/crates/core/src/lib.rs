//! Exact-arithmetic generalized derivatives and multiplier certificates.
//!
//! The crate computes convex subdifferentials, Clarke generalized gradients
//! and quasidifferentials of piecewise-defined functions at a point, and
//! decides Karush-Kuhn-Tucker / Fritz-John multiplier systems and constraint
//! qualifications by reduction to exact rational linear programming.

pub mod error;
pub mod lp;
pub mod num;

pub use error::{Error, Result};
pub mod geometry;
pub mod expr;
pub mod certificate;
pub mod convex;
pub mod program;
pub mod clarke;
pub mod ekeland;
pub mod quasidiff;
pub mod smooth;
pub mod setvalued;
pub mod problem;
pub mod report;
pub mod corpus;
