//! Parallel solvers for the 2D Eikonal equation on regular grids.
//!
//! One upwind update operator ([`operator`]) runs under five schedules
//! ([`solver`]): fast marching, a topology-driven sweep, fast sweeping, the
//! fast iterative method, and asynchronous marching over a concurrent
//! soft-priority worklist ([`worklist`]). With the monotone operator variant
//! every schedule and thread count reaches the same arrival field bit for bit.

pub mod cli;
pub mod error;
pub mod generate;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod operator;
pub mod solver;
pub mod worklist;

pub use error::{Error, Result};
pub use grid::{ArrivalGrid, GridShape, Seed, SeedSet, VelocityGrid};
pub use metrics::{ResidualReport, UpdateCounters};
pub use operator::{StencilInputs, UpdateVariant};
pub use solver::{solve, Method, SolveConfig, SolveResult, Tracking};
