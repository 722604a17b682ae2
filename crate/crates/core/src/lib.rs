//! Discrete conformal parameterisation of disk-like triangle meshes.
//!
//! The crate assembles a cotangent Laplacian with optional per-face area ratios,
//! minimises the discrete conformal energy over maps to the plane with a free
//! circular boundary, and evaluates computable a-priori bounds on the
//! discretisation error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycentric;
pub mod beltrami;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod harmonic;
pub mod laplacian;
pub mod mesh;
pub mod minimizer;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};
