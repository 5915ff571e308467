//! Neural surface maps.
//!
//! Surfaces and maps between them are represented as small dense networks
//! over a canonical 2D domain. Networks are overfitted to piecewise-linear
//! mesh parameterizations, composed with trainable warps of the domain, and
//! optimized for low distortion without changing the underlying geometry.

pub mod autodiff;
pub mod neuralmap;
pub mod domain;
pub mod mesh;
pub mod energies;
pub mod analytic;
pub mod composition;
pub mod optimize;
