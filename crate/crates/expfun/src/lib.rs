//! Exponential functionals of drifted simple random walks.
//!
//! The central object is the almost surely convergent series
//! Y = sum_k exp(S_k - k nu), equivalently the sum of running products of
//! i.i.d. positive multipliers. The crate computes its exact positive
//! moments by binomial recursion, the universal integer coefficient
//! triangle behind that recursion, the self-similar (and typically
//! singular) structure of its distribution through the associated iterated
//! function system, and the diffusion limit: lattice refinements Y_m built
//! on a coupled hierarchy of walks converge to the exponential functional
//! of Brownian motion, whose reciprocal is gamma distributed.
//!
//! Everything randomized is addressed by (seed, stream) pairs, so results
//! are reproducible bit for bit at any parallelism degree.

pub mod descent;
pub mod error;
pub mod export;
pub mod fit;
pub mod hierarchy;
pub mod ifs;
pub mod law;
pub mod moments;
pub mod numeric;
pub mod rng;
pub mod sample;

pub use error::{Error, Result};
pub use law::{Atom, StepLaw};
pub use rng::RngStream;
pub use sample::{sample_y, FunctionalSample, TruncationKind};
