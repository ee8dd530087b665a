//! Euler-Lagrange residuals on an algebroid and the Hamel vector field.

use crate::error::{Error, Result};
use crate::geometry::{AlgebroidStructure, CotangentValue, ScalarField};
use crate::numerics::diff::{fd_jac_columns, first_step_scale};
use crate::numerics::linalg::{factor_checked, norm_inf};
use crate::numerics::SolverConfig;

use super::{check_finite, Jet, Rhs};

/// Relative tolerance on `|qdot - rho(q) y|` for a jet to count as admissible.
pub const ADMISSIBILITY_TOL: f64 = 1e-8;

pub(crate) fn check_admissible(structure: &AlgebroidStructure, jet: &Jet) -> Result<()> {
    let defect = structure.admissibility_defect(&jet.q, &jet.qdot, &jet.y)?;
    let d = norm_inf(&defect);
    if d > ADMISSIBILITY_TOL * norm_inf(&jet.qdot).max(1.0) {
        return Err(Error::NotAdmissible { defect: d });
    }
    Ok(())
}

fn check_jet_dims(structure: &AlgebroidStructure, jet: &Jet) -> Result<()> {
    let (n, m) = (structure.base_dim(), structure.fiber_rank());
    for (len, want, what) in [
        (jet.q.len(), n, "jet q"),
        (jet.qdot.len(), n, "jet qdot"),
        (jet.y.len(), m, "jet y"),
        (jet.ydot.len(), m, "jet ydot"),
    ] {
        if len != want {
            return Err(Error::DimensionMismatch {
                context: what,
                expected: want,
                found: len,
            });
        }
    }
    Ok(())
}

fn check_lagrangian(structure: &AlgebroidStructure, l: &ScalarField) -> Result<()> {
    let a = l.arity();
    if a.base != structure.base_dim() || a.fiber != structure.fiber_rank() || a.control != 0 {
        return Err(Error::InvalidArgument(format!(
            "Lagrangian arity {a:?} does not match algebroid (n = {}, m = {})",
            structure.base_dim(),
            structure.fiber_rank()
        )));
    }
    Ok(())
}

/// Covector field `(q, y) -> (dL/dq, dL/dy)` of an autonomous Lagrangian.
pub fn mu_from_lagrangian(l: &ScalarField) -> impl Fn(&[f64], &[f64]) -> CotangentValue + Send + Sync + '_ {
    move |q, y| {
        let a = l.arity();
        let x = a.pack(0.0, q, y, &[]);
        CotangentValue {
            base: l.partial(&x, a.base_range()),
            fiber: l.partial(&x, a.fiber_range()),
        }
    }
}

/// Generalized Euler-Lagrange residual for a covector field `mu(q, y)`:
///
/// `d/dt mu~_a - rho^j_a mu_j + C^c_ab y^b mu~_c`,
///
/// with the time derivative of `mu~` taken along the jet by the chain rule.
pub fn el_residual(
    structure: &AlgebroidStructure,
    mu_field: &dyn Fn(&[f64], &[f64]) -> CotangentValue,
    jet: &Jet,
) -> Result<Vec<f64>> {
    check_jet_dims(structure, jet)?;
    check_admissible(structure, jet)?;
    let (n, m) = (structure.base_dim(), structure.fiber_rank());
    let mu = mu_field(&jet.q, &jet.y);
    if mu.base.len() != n || mu.fiber.len() != m {
        return Err(Error::DimensionMismatch {
            context: "mu_field output",
            expected: n + m,
            found: mu.base.len() + mu.fiber.len(),
        });
    }
    let mut z = jet.q.clone();
    z.extend_from_slice(&jet.y);
    let fiber_part = |z: &[f64]| mu_field(&z[..n], &z[n..]).fiber;
    let jac = fd_jac_columns(&fiber_part, &z, 0..n + m, first_step_scale());
    let mut zdot = jet.qdot.clone();
    zdot.extend_from_slice(&jet.ydot);
    let dmu = jac.mul_vec(&zdot);

    let rho = structure.anchor(&jet.q)?;
    let c = structure.structure(&jet.q)?;
    let anchored = rho.tr_mul_vec(&mu.base);
    let bracket = c.contract(&jet.y, &mu.fiber);
    let r: Vec<f64> = (0..m).map(|a| dmu[a] - anchored[a] + bracket[a]).collect();
    check_finite(&r, "el_residual")?;
    Ok(r)
}

/// Hamel residual `d/dt(dL/dy^a) - rho^i_a dL/dq^i + C^c_ab y^b dL/dy^c`.
pub fn hamel_residual(structure: &AlgebroidStructure, l: &ScalarField, jet: &Jet) -> Result<Vec<f64>> {
    check_lagrangian(structure, l)?;
    check_jet_dims(structure, jet)?;
    check_admissible(structure, jet)?;
    let a = l.arity();
    let x = a.pack(jet.t, &jet.q, &jet.y, &[]);
    let p = l.partial(&x, a.fiber_range());
    let dldq = l.partial(&x, a.base_range());
    let hyy = l.hessian_block(&x, a.fiber_range(), a.fiber_range());
    let hyq = l.hessian_block(&x, a.fiber_range(), a.base_range());
    let mut dp: Vec<f64> = hyy
        .mul_vec(&jet.ydot)
        .iter()
        .zip(hyq.mul_vec(&jet.qdot))
        .map(|(u, v)| u + v)
        .collect();
    if let Some(ti) = a.time_index() {
        let hyt = l.hessian_block(&x, a.fiber_range(), ti..ti + 1);
        for (d, h) in dp.iter_mut().zip(hyt.column(0)) {
            *d += h;
        }
    }
    let rho = structure.anchor(&jet.q)?;
    let c = structure.structure(&jet.q)?;
    let anchored = rho.tr_mul_vec(&dldq);
    let bracket = c.contract(&jet.y, &p);
    let r: Vec<f64> = (0..p.len()).map(|i| dp[i] - anchored[i] + bracket[i]).collect();
    check_finite(&r, "hamel_residual")?;
    Ok(r)
}

/// Vector field `(q, y) -> (rho(q) y, ydot)` solving the Hamel equations
/// `M ydot = rho^T dL/dq - C(y, dL/dy) - (d^2L/dy dq) rho y - d^2L/dy dt`
/// with `M = d^2L/dy^2`. A singular `M` is reported as a degenerate Lagrangian.
pub fn hamel_vector_field(structure: &AlgebroidStructure, l: &ScalarField) -> Result<Rhs> {
    check_lagrangian(structure, l)?;
    let structure = structure.clone();
    let l = l.clone();
    let floor = SolverConfig::default().condition_floor;
    Ok(Box::new(move |t, state| {
        let (n, m) = (structure.base_dim(), structure.fiber_rank());
        if state.len() != n + m {
            return Err(Error::DimensionMismatch {
                context: "hamel state",
                expected: n + m,
                found: state.len(),
            });
        }
        let (q, y) = state.split_at(n);
        let a = l.arity();
        let x = a.pack(t, q, y, &[]);
        let rho = structure.anchor(q)?;
        let c = structure.structure(q)?;
        let qdot = rho.mul_vec(y);
        let p = l.partial(&x, a.fiber_range());
        let dldq = l.partial(&x, a.base_range());
        let hyy = l.hessian_block(&x, a.fiber_range(), a.fiber_range());
        let hyq = l.hessian_block(&x, a.fiber_range(), a.base_range());
        let anchored = rho.tr_mul_vec(&dldq);
        let bracket = c.contract(y, &p);
        let mixed = hyq.mul_vec(&qdot);
        let mut rhs: Vec<f64> = (0..m).map(|i| anchored[i] - bracket[i] - mixed[i]).collect();
        if let Some(ti) = a.time_index() {
            let hyt = l.hessian_block(&x, a.fiber_range(), ti..ti + 1);
            for (r, h) in rhs.iter_mut().zip(hyt.column(0)) {
                *r -= h;
            }
        }
        let lu = factor_checked(&hyy, floor, "Lagrangian fiber Hessian").map_err(|e| match e {
            Error::Singular { .. } | Error::IllConditioned { .. } => {
                Error::DegenerateLagrangian { point: state.to_vec() }
            }
            other => other,
        })?;
        let ydot = lu.solve(&rhs);
        let mut out = qdot;
        out.extend(ydot);
        check_finite(&out, "hamel_vector_field")?;
        Ok(out)
    }))
}

/// Energy `y . dL/dy - L`.
pub fn lagrangian_energy(l: &ScalarField, t: f64, q: &[f64], y: &[f64]) -> f64 {
    let a = l.arity();
    let x = a.pack(t, q, y, &[]);
    let p = l.partial(&x, a.fiber_range());
    p.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - l.eval(&x)
}
