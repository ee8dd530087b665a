//! Vakonomic (variational constrained) dynamics in quasi-coordinates.
//!
//! The last `r` fiber coordinates are constrained, `y^alpha = Phi^alpha(q, y^a)`,
//! and the free ones are `y^a`, `a < m - r`. With
//! `G = l - mu~_alpha Phi^alpha` the full momentum is
//! `mu~ = (dG/dy^a, mu~_alpha)` and the base covector is `mu = dG/dq`. The
//! equations are the algebroid Euler-Lagrange equations for that covector:
//!
//! ```text
//! d/dt mu~_A - rho^i_A mu_i + C^C_AB y^B mu~_C = 0,   A = a or alpha
//! qdot = rho (y^a, Phi(q, y^a))
//! ```
//!
//! The `alpha` rows give `d/dt mu~_alpha` explicitly; the `a` rows are solved
//! for `ydot^a` with the Hessian `d^2 G / dy^a dy^b`.

use crate::error::{Error, Result};
use crate::geometry::{AlgebroidStructure, Arity, ScalarField};
use crate::numerics::linalg::factor_checked;
use crate::numerics::SolverConfig;

use super::{check_finite, Rhs};

/// Constrained Lagrangian `l(q, y^a)` and constraints `Phi^alpha(q, y^a)` on an algebroid.
#[derive(Clone, Debug)]
pub struct VakonomicProblem {
    pub structure: AlgebroidStructure,
    pub lagrangian: ScalarField,
    pub constraints: Vec<ScalarField>,
}

impl VakonomicProblem {
    pub fn new(structure: AlgebroidStructure, lagrangian: ScalarField, constraints: Vec<ScalarField>) -> Result<Self> {
        let (n, m, r) = (structure.base_dim(), structure.fiber_rank(), constraints.len());
        if r > m {
            return Err(Error::InvalidArgument(format!("{r} constraints exceed fiber rank {m}")));
        }
        let a = lagrangian.arity();
        if a.base != n || a.fiber != m - r || a.control != 0 {
            return Err(Error::InvalidArgument(format!(
                "constrained Lagrangian arity {a:?} must be (q: {n}, y: {})",
                m - r
            )));
        }
        if let Some(bad) = constraints.iter().find(|c| c.arity() != a) {
            return Err(Error::InvalidArgument(format!(
                "constraint arity {:?} differs from Lagrangian arity {a:?}",
                bad.arity()
            )));
        }
        Ok(VakonomicProblem {
            structure,
            lagrangian,
            constraints,
        })
    }

    pub fn free_dim(&self) -> usize {
        self.structure.fiber_rank() - self.constraints.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    /// State length `n + (m - r) + r`: `(q, y^a, mu~_alpha)`.
    pub fn state_dim(&self) -> usize {
        self.structure.base_dim() + self.structure.fiber_rank()
    }

    /// `G = l - mu~_alpha Phi^alpha` for fixed multiplier momenta.
    fn augmented(&self, mu: &[f64]) -> ScalarField {
        if self.constraints.is_empty() {
            return self.lagrangian.clone();
        }
        let arity: Arity = self.lagrangian.arity();
        let l = self.lagrangian.clone();
        let cs = self.constraints.clone();
        let mu_v = mu.to_vec();
        let value = move |x: &[f64]| l.eval(x) - cs.iter().zip(&mu_v).map(|(c, m)| m * c.eval(x)).sum::<f64>();
        let field = ScalarField::new(arity, value);
        if self.lagrangian.has_gradient() && self.constraints.iter().all(|c| c.has_gradient()) {
            let l = self.lagrangian.clone();
            let cs = self.constraints.clone();
            let mu_v = mu.to_vec();
            field.with_gradient(move |x| {
                let mut g = l.gradient(x);
                for (c, m) in cs.iter().zip(&mu_v) {
                    for (gi, ci) in g.iter_mut().zip(c.gradient(x)) {
                        *gi -= m * ci;
                    }
                }
                g
            })
        } else {
            field
        }
    }
}

/// Vector field on `(q, y^a, mu~_alpha)`.
pub fn vakonomic_vector_field(problem: &VakonomicProblem) -> Result<Rhs> {
    let pb = problem.clone();
    let floor = SolverConfig::default().condition_floor;
    Ok(Box::new(move |t, state| {
        let n = pb.structure.base_dim();
        let m = pb.structure.fiber_rank();
        let r = pb.constraint_count();
        let f = m - r;
        if state.len() != n + m {
            return Err(Error::DimensionMismatch {
                context: "vakonomic state",
                expected: n + m,
                found: state.len(),
            });
        }
        let q = &state[..n];
        let y_free = &state[n..n + f];
        let mu_con = &state[n + f..];
        let arity = pb.lagrangian.arity();
        let x = arity.pack(t, q, y_free, &[]);

        let mut y_full = y_free.to_vec();
        y_full.extend(pb.constraints.iter().map(|c| c.eval(&x)));

        let g = pb.augmented(mu_con);
        let p_free = g.partial(&x, arity.fiber_range());
        let mu_base = g.partial(&x, arity.base_range());
        let mut mu_full = p_free;
        mu_full.extend_from_slice(mu_con);

        let rho = pb.structure.anchor(q)?;
        let c = pb.structure.structure(q)?;
        let qdot = rho.mul_vec(&y_full);
        let anchored = rho.tr_mul_vec(&mu_base);
        let bracket = c.contract(&y_full, &mu_full);

        let mu_dot: Vec<f64> = (f..m).map(|k| anchored[k] - bracket[k]).collect();

        let hyy = g.hessian_block(&x, arity.fiber_range(), arity.fiber_range());
        let hyq = g.hessian_block(&x, arity.fiber_range(), arity.base_range());
        let mixed = hyq.mul_vec(&qdot);
        let mut rhs: Vec<f64> = (0..f).map(|k| anchored[k] - bracket[k] - mixed[k]).collect();
        if let Some(ti) = arity.time_index() {
            let hyt = g.hessian_block(&x, arity.fiber_range(), ti..ti + 1);
            for (v, h) in rhs.iter_mut().zip(hyt.column(0)) {
                *v -= h;
            }
        }
        // d/dt of -mu~_alpha dPhi^alpha/dy^a contributes the mu~_alpha rates.
        for (cons, md) in pb.constraints.iter().zip(&mu_dot) {
            let dphi = cons.partial(&x, arity.fiber_range());
            for (v, d) in rhs.iter_mut().zip(dphi) {
                *v += md * d;
            }
        }
        let lu = factor_checked(&hyy, floor, "vakonomic fiber Hessian").map_err(|e| match e {
            Error::Singular { .. } | Error::IllConditioned { .. } => {
                Error::DegenerateLagrangian { point: state.to_vec() }
            }
            other => other,
        })?;
        let ydot = lu.solve(&rhs);

        let mut out = qdot;
        out.extend(ydot);
        out.extend(mu_dot);
        check_finite(&out, "vakonomic_vector_field")?;
        Ok(out)
    }))
}
