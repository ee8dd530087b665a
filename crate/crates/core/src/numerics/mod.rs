//! Finite differences, dense linear solves, Newton's method and RK4.

pub mod diff;
pub mod linalg;
pub mod newton;
pub mod rk4;

pub use diff::{fd_grad, fd_hess, fd_jac};
pub use linalg::{linsolve, Lu, Matrix};
pub use newton::{newton, newton_with_jacobian, NewtonReport};
pub use rk4::rk4;

/// Tolerances and step sizes shared by every solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub max_iter: usize,
    pub fd_step_scale: f64,
    pub rk_dt: f64,
    /// Reciprocal condition numbers below this are treated as singular.
    pub condition_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            max_iter: 50,
            fd_step_scale: diff::first_step_scale(),
            rk_dt: 1e-3,
            condition_floor: 1e-10,
        }
    }
}
