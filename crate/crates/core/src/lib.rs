//! Variational mechanics and optimal control on Lie algebroids and Lie
//! groupoids, in local coordinates.
//!
//! Continuous problems live on an algebroid given by an anchor `rho(q)` and
//! structure functions `C^c_ab(q)`; discrete problems live on `Q x Q` or on a
//! groupoid chart. Derivatives are central differences unless a field carries
//! an analytic gradient.

pub mod continuous;
pub mod discrete;
pub mod error;
pub mod geometry;
pub mod groupoid;
pub mod numerics;
pub mod trajectory;

pub use error::{Error, Result};
pub use geometry::{AlgebroidStructure, Arity, CotangentValue, FiberVelocity, ScalarField, StructureTensor};
pub use numerics::{Matrix, SolverConfig};
pub use trajectory::Trajectory;
