//! Numerical laboratory for the pluriclosed flow on the flat complex torus.
//!
//! The crate computes the Chern-connection tensor calculus of a Hermitian
//! metric on ℂⁿ/(ℤ+iℤ)ⁿ (Christoffel symbols, torsion, curvature, traces,
//! covariant derivatives, Laplacians), integrates the flow ∂ₜg = −S + Q
//! (optionally coupled to the (2,0)-form heat flow ∂ₜφ = Δφ), and verifies
//! the exact identities and estimate-shaped bounds of the theory as
//! numerical residuals and monitors.
//!
//! Layout conventions are fixed once in [`tensor::TensorField`]; every
//! module follows them.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub mod chart;
pub mod chern;
pub mod cli;
pub mod config;
pub mod einsum;
pub mod flow;
pub mod identity;
pub mod error;
pub mod initial;
pub mod linalg;
pub mod metric;
pub mod ops;
pub mod prng;
pub mod report;
pub mod snapshot;
pub mod tensor;

pub use chart::{DerivDirection, TorusChart};
pub use error::{Error, Result};
pub use metric::HermitianMetric;
pub use tensor::TensorField;
