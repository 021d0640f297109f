//! Mixed-dimensional finite element exterior calculus on stratified planar domains.

pub mod complex;
pub mod dense;
pub mod diagnostics;
pub mod element;
pub mod error;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod mesh;
pub mod solver;
pub mod spaces;
pub mod sparse;

pub use error::{Error, Result};
