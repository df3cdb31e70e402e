#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Weighted porous medium equation in one space dimension: finite-volume
//! solver, diagnostics, and an auditor for weighted Poincare inequalities.

pub mod diagnostics;
pub mod error;
pub mod interp;
pub mod poincare;
pub mod quad;
pub mod scenarios;
pub mod solver;
pub mod weights;

pub use error::{Error, Result};
