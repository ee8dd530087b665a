//! Continuous-time dynamics on a Lie algebroid: Euler-Lagrange and Hamel
//! equations, Hamilton's equations, vakonomic systems, Dirac constraints and
//! the maximum principle.

pub mod hamiltonian;
pub mod lagrangian;
pub mod pontryagin;
pub mod vakonomic;

pub use hamiltonian::{
    dirac_multipliers, dirac_secondary_residual, hamilton_vector_field, legendre_transform, poisson_bracket,
    LegendreTransform,
};
pub use lagrangian::{el_residual, hamel_residual, hamel_vector_field, lagrangian_energy, mu_from_lagrangian};
pub use pontryagin::{
    extremal_vector_field, pontryagin_residual, pontryagin_shooting, ControlSystem, PontryaginResidual,
    PontryaginSolution, PontryaginState, Terminal,
};
pub use vakonomic::{vakonomic_vector_field, VakonomicProblem};

use crate::error::{Error, Result};
use crate::geometry::AlgebroidStructure;

/// Time-dependent vector field `x' = f(t, x)`.
pub type Rhs = Box<dyn Fn(f64, &[f64]) -> Result<Vec<f64>> + Send + Sync>;

/// First jet of a curve in the algebroid: `(t, q, y, qdot, ydot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub t: f64,
    pub q: Vec<f64>,
    pub y: Vec<f64>,
    pub qdot: Vec<f64>,
    pub ydot: Vec<f64>,
}

impl Jet {
    /// Jet whose base velocity is `rho(q) y`.
    pub fn admissible(structure: &AlgebroidStructure, t: f64, q: &[f64], y: &[f64], ydot: &[f64]) -> Result<Jet> {
        let rho = structure.anchor(q)?;
        if y.len() != structure.fiber_rank() {
            return Err(Error::DimensionMismatch {
                context: "jet y",
                expected: structure.fiber_rank(),
                found: y.len(),
            });
        }
        Ok(Jet {
            t,
            q: q.to_vec(),
            y: y.to_vec(),
            qdot: rho.mul_vec(y),
            ydot: ydot.to_vec(),
        })
    }
}

pub(crate) fn check_finite(v: &[f64], context: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}
