//! Laplacian support vector machines trained in the primal.
//!
//! The objective combines the squared hinge loss on labeled points with an
//! ambient RKHS penalty and a graph-Laplacian smoothness penalty over all
//! training points. It is minimized by Newton's method or by
//! preconditioned conjugate gradient with early stopping.

pub mod data;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod models;
pub mod problem;
pub mod solvers;
pub mod stopping;

#[cfg(test)]
pub(crate) mod testutil;

pub use data::{DataFormat, Dataset, Role, Split, SplitPlan};
pub use error::{LapsvmError, Result};
pub use graph::{EdgeWeight, GraphSpec, Laplacian};
pub use kernels::{DistanceExponent, GramMatrix, KernelSpec};
pub use models::{ModelSpec, Prediction, Solver, TrainSet, TrainedModel};
pub use problem::{Operators, PrimalState, Problem};
pub use solvers::{NewtonConfig, PcgConfig, Preconditioner, SolveReport, StopReason};
pub use stopping::{StopKind, StopRule};
