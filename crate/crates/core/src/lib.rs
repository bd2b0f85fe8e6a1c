//! Divergence-free and curl-free vector field approximation from scattered
//! samples with matrix-valued radial kernels on a partition of unity.
//!
//! Each overlapping patch gets its own div-free (or curl-free) kernel
//! interpolant together with the scalar potential it is derived from. The
//! patch potentials are reconciled by additive shifts solved on glue points,
//! blended with Shepard weights, and the global field is obtained by applying
//! the surface curl (or gradient) to the blended potential, so the result is
//! analytically div-free (curl-free).
//!
//! Points are always stored as 3-vectors. Planar problems live in the
//! `z = 0` plane, and 2D Euclidean curl-free problems use the first two
//! components.

pub mod cover;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod glue;
pub mod io;
pub mod kernel;
pub mod local;
pub mod points;
pub mod pum;
pub mod spatial;
pub mod testbed;

#[cfg(test)]
mod testutil;

pub use cover::{Cover, Patch, WeightEval};
pub use error::{Error, Result};
pub use geometry::{Surface, TangentFrame};
pub use glue::{GlueGraph, ShiftSolution, ShiftSystem};
pub use kernel::{KernelFamily, RadialKernel};
pub use local::{FitMode, LocalFit, SampleSet};
pub use pum::{PumApproximant, PumConfig};

/// A point (or vector) in the embedding space.
pub type Point = nalgebra::Vector3<f64>;
