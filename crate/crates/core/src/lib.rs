//! Parallel stochastic lattice simulation.
//!
//! Two models share one set of schedulers:
//!
//! * [`kpz`]: the 2+1 dimensional octahedron model of KPZ surface growth,
//!   stored as two bit planes of slopes.
//! * [`kmc`]: Metropolis/Kawasaki kinetic Monte Carlo of a binary alloy on
//!   the fcc lattice, stored as one bit per simple-cubic site.
//!
//! Updates are driven either sequentially or through one of the domain
//! decompositions in [`decomposition`] (dead border, double tiling with
//! single-hit updates, two-layer nesting, cache blocking). Every worker owns
//! an independent stream from [`rng`]. The [`harness`] module runs whole
//! experiments and measures throughput.

pub mod decomposition;
pub mod error;
pub mod harness;
pub mod kmc;
pub mod kpz;
pub mod lattice;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
