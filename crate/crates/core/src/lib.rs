//! Joint compressed sensing and wave manipulation on a binary programmable
//! metasurface.
//!
//! The surface is an `n x n` grid of cells, each with a binary actuation
//! state. A beam-steering configuration occupies the grid; every other cell
//! (both indices even, 1-based) is periodically overwritten with a binary
//! sensing pattern derived from one row of a compressed-sensing sampling
//! matrix. A single detector records the received power for each deployed
//! configuration and the impinging wavefront is recovered by sparse
//! reconstruction.
//!
//! Module map:
//!
//! * [`geometry`]: cell grid, configurations, mask, interleaving, reshaping.
//! * [`em`]: incident field, 1-bit steering synthesis, far field, diagrams.
//! * [`decomposition`]: real vector to weighted binary rows and back.
//! * [`cs`]: sampling matrices and sparse solvers.
//! * [`pipeline`]: measurement backends and the joint sense/steer run.
//! * [`experiment`]: experiment configuration, efficiency sweeps, exports.

pub mod cs;
pub mod decomposition;
pub mod em;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod pipeline;

pub use error::{Error, Result};
