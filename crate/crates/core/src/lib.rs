//! Levi-Civita connections of compatible Lorentzian metrics on shearfree
//! manifolds of Kahler-Sasaki type, evaluated in an adapted frame.

#![allow(clippy::needless_range_loop)]

pub mod adapted_frame;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod fields;
pub mod kahler_base;
pub mod metric;
pub mod oracle;
pub mod scenarios;
pub mod tensor;

pub use error::{Error, EvalError, ParseError, Result};
