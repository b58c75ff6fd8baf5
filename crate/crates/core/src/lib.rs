//! Matched-asymptotic blow-up profiles for the 1-equivariant Schrodinger map
//! flow `u_t = u x Delta u`, with a geometric integrator and diagnostics.

pub mod assembler;
pub mod error;
pub mod evolve;
pub mod fit;
pub mod formal;
pub mod geometry;
pub mod grid;
pub mod harmonic;
pub mod inner;
pub mod io;
pub mod jet;
pub mod laurent;
pub mod linop;
pub mod modulation;
pub mod ode;
pub mod params;
pub mod quad;
pub mod remote;
pub mod selfsim;
pub mod taylor;

pub use error::{Error, Result};
pub use geometry::{RadialField, SphereField, StereoField, Vec3, VectorField};
pub use grid::{RadialGrid, Spacing};
pub use harmonic::HarmonicProfile;
pub use params::BlowupParams;
