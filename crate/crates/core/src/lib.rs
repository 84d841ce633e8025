//! Inverse mean curvature flow of star-shaped, S³-invariant hypersurfaces in
//! quaternionic hyperbolic space HH^n, reduced to radial profiles ρ(θ) over the
//! base distance θ of the quaternionic Hopf fibration.

pub mod ambient;
pub mod config;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod harness;
pub mod limit;

pub use error::{Error, Result};
