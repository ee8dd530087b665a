//! Hamilton's equations on the dual bundle, the Legendre transform and the
//! Dirac consistency conditions.

use crate::error::{Error, Result};
use crate::geometry::{AlgebroidStructure, Arity, ScalarField};
use crate::numerics::linalg::{factor_checked, linsolve};
use crate::numerics::{newton_with_jacobian, Matrix, SolverConfig};

use super::{check_finite, Rhs};

/// Vector field `(q, p) -> (qdot, pdot)` with
/// `qdot = rho dH/dp` and `pdot_a = -rho^j_a dH/dq^j - C^c_ab (dH/dp_b) p_c`.
pub fn hamilton_vector_field(structure: &AlgebroidStructure, h: &ScalarField) -> Result<Rhs> {
    let a = h.arity();
    if a.base != structure.base_dim() || a.fiber != structure.fiber_rank() || a.control != 0 {
        return Err(Error::InvalidArgument(format!(
            "Hamiltonian arity {a:?} does not match algebroid (n = {}, m = {})",
            structure.base_dim(),
            structure.fiber_rank()
        )));
    }
    let structure = structure.clone();
    let h = h.clone();
    Ok(Box::new(move |t, state| {
        let n = structure.base_dim();
        if state.len() != n + structure.fiber_rank() {
            return Err(Error::DimensionMismatch {
                context: "Hamiltonian state",
                expected: n + structure.fiber_rank(),
                found: state.len(),
            });
        }
        let (q, p) = state.split_at(n);
        let x = a.pack(t, q, p, &[]);
        let g = h.gradient(&x);
        let dhdq = &g[a.base_range()];
        let dhdp = &g[a.fiber_range()];
        let rho = structure.anchor(q)?;
        let c = structure.structure(q)?;
        let mut out = rho.mul_vec(dhdp);
        let anchored = rho.tr_mul_vec(dhdq);
        let bracket = c.contract(dhdp, p);
        out.extend(anchored.iter().zip(&bracket).map(|(u, v)| -u - v));
        check_finite(&out, "hamilton_vector_field")?;
        Ok(out)
    }))
}

/// Legendre transform of a regular Lagrangian.
///
/// The fiber derivative `dL/dy (q, y) = p` is inverted by Newton's method.
/// The resulting Hamiltonian carries an analytic gradient from the envelope
/// identities `dH/dp = y*` and `dH/dq = -dL/dq (q, y*)`.
#[derive(Clone, Debug)]
pub struct LegendreTransform {
    lagrangian: ScalarField,
    config: SolverConfig,
}

impl LegendreTransform {
    pub fn new(structure: &AlgebroidStructure, l: &ScalarField, config: SolverConfig) -> Result<Self> {
        let a = l.arity();
        if a.base != structure.base_dim() || a.fiber != structure.fiber_rank() || a.control != 0 {
            return Err(Error::InvalidArgument(format!(
                "Lagrangian arity {a:?} does not match algebroid"
            )));
        }
        Ok(LegendreTransform {
            lagrangian: l.clone(),
            config,
        })
    }

    /// Fiber velocity `y*` with `dL/dy (t, q, y*) = p`.
    pub fn velocity(&self, t: f64, q: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let l = &self.lagrangian;
        let a = l.arity();
        let degenerate = |e: Error| match e {
            Error::Singular { .. } | Error::IllConditioned { .. } | Error::DegenerateRoot { .. } => {
                let mut point = q.to_vec();
                point.extend_from_slice(p);
                Error::DegenerateLagrangian { point }
            }
            other => other,
        };
        let f = |y: &[f64]| -> Result<Vec<f64>> {
            let x = a.pack(t, q, y, &[]);
            Ok(l.partial(&x, a.fiber_range())
                .iter()
                .zip(p)
                .map(|(u, v)| u - v)
                .collect())
        };
        let jac = |y: &[f64]| -> Result<Matrix> {
            let x = a.pack(t, q, y, &[]);
            Ok(l.hessian_block(&x, a.fiber_range(), a.fiber_range()))
        };
        // Seed from the fiber-linearization at y = 0 when it is regular.
        let zero = vec![0.0; p.len()];
        let seed = match jac(&zero)
            .and_then(|m0| Ok((m0, f(&zero)?)))
            .and_then(|(m0, r0)| linsolve(&m0, &r0, self.config.condition_floor))
        {
            Ok((dy, _)) => dy.iter().map(|d| -d).collect(),
            Err(_) => p.to_vec(),
        };
        let rep = newton_with_jacobian(f, jac, &seed, &self.config).map_err(degenerate)?;
        Ok(rep.x)
    }

    /// `H(q, p) = p . y* - L(q, y*)` with its envelope gradient. Evaluation
    /// failures surface as NaN values.
    pub fn hamiltonian(&self) -> ScalarField {
        let la = self.lagrangian.arity();
        let arity = Arity {
            time: la.time,
            base: la.base,
            fiber: la.fiber,
            control: 0,
        };
        let me = self.clone();
        let me2 = self.clone();
        let split = move |x: &[f64]| -> (f64, Vec<f64>, Vec<f64>) {
            let t = if arity.time { x[0] } else { 0.0 };
            (t, x[arity.base_range()].to_vec(), x[arity.fiber_range()].to_vec())
        };
        let value = move |x: &[f64]| -> f64 {
            let (t, q, p) = split(x);
            match me.velocity(t, &q, &p) {
                Ok(y) => {
                    let lx = arity.pack(t, &q, &y, &[]);
                    p.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() - me.lagrangian.eval(&lx)
                }
                Err(_) => f64::NAN,
            }
        };
        let gradient = move |x: &[f64]| -> Vec<f64> {
            let (t, q, p) = split(x);
            match me2.velocity(t, &q, &p) {
                Ok(y) => {
                    let lx = arity.pack(t, &q, &y, &[]);
                    let lg = me2.lagrangian.gradient(&lx);
                    let mut g = Vec::with_capacity(arity.len());
                    if arity.time {
                        g.push(-lg[0]);
                    }
                    g.extend(lg[arity.base_range()].iter().map(|v| -v));
                    g.extend(y);
                    g
                }
                Err(_) => vec![f64::NAN; arity.len()],
            }
        };
        ScalarField::new(arity, value).with_gradient(gradient)
    }
}

/// Hamiltonian of a regular Lagrangian, see [`LegendreTransform`].
pub fn legendre_transform(structure: &AlgebroidStructure, l: &ScalarField) -> Result<ScalarField> {
    Ok(LegendreTransform::new(structure, l, SolverConfig::default())?.hamiltonian())
}

fn canonical_parts(f: &ScalarField, q: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = f.arity();
    if a.time || a.control != 0 || a.base != q.len() || a.fiber != p.len() {
        return Err(Error::InvalidArgument(format!(
            "phase-space function arity {a:?} does not match (q, p) of sizes ({}, {})",
            q.len(),
            p.len()
        )));
    }
    let x = a.pack(0.0, q, p, &[]);
    let g = f.gradient(&x);
    Ok((g[a.base_range()].to_vec(), g[a.fiber_range()].to_vec()))
}

/// Canonical Poisson bracket `{F, G} = dF/dq . dG/dp - dF/dp . dG/dq`.
pub fn poisson_bracket(f: &ScalarField, g: &ScalarField, q: &[f64], p: &[f64]) -> Result<f64> {
    let (fq, fp) = canonical_parts(f, q, p)?;
    let (gq, gp) = canonical_parts(g, q, p)?;
    Ok(dot(&fq, &gp) - dot(&fp, &gq))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_canonical(q: &[f64], p: &[f64], lambda: Option<&[f64]>, r: usize) -> Result<()> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            context: "canonical phase space (p)",
            expected: q.len(),
            found: p.len(),
        });
    }
    if let Some(l) = lambda {
        if l.len() != r {
            return Err(Error::DimensionMismatch {
                context: "Dirac multipliers",
                expected: r,
                found: l.len(),
            });
        }
    }
    Ok(())
}

/// Consistency residual of the primary constraints `Phi^a(q, p)` under the
/// total Hamiltonian `H + lambda_b Phi^b`:
///
/// `dPhi^a/dq^i (dH/dp_i + lambda_b dPhi^b/dp_i) - dPhi^a/dp_i (dH/dq^i + lambda_b dPhi^b/dq^i)`.
pub fn dirac_secondary_residual(
    h: &ScalarField,
    constraints: &[ScalarField],
    q: &[f64],
    p: &[f64],
    lambda: &[f64],
) -> Result<Vec<f64>> {
    check_canonical(q, p, Some(lambda), constraints.len())?;
    let (hq, hp) = canonical_parts(h, q, p)?;
    let parts: Vec<(Vec<f64>, Vec<f64>)> = constraints
        .iter()
        .map(|c| canonical_parts(c, q, p))
        .collect::<Result<_>>()?;
    let n = q.len();
    let mut total_q = hq;
    let mut total_p = hp;
    for ((cq, cp), l) in parts.iter().zip(lambda) {
        for i in 0..n {
            total_q[i] += l * cq[i];
            total_p[i] += l * cp[i];
        }
    }
    let r: Vec<f64> = parts
        .iter()
        .map(|(cq, cp)| dot(cq, &total_p) - dot(cp, &total_q))
        .collect();
    check_finite(&r, "dirac_secondary_residual")?;
    Ok(r)
}

/// Multipliers solving `{Phi^a, Phi^b} lambda_b = -{Phi^a, H}`. Fails when the
/// constraint bracket matrix is singular (first-class constraints).
pub fn dirac_multipliers(
    h: &ScalarField,
    constraints: &[ScalarField],
    q: &[f64],
    p: &[f64],
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    check_canonical(q, p, None, constraints.len())?;
    let r = constraints.len();
    let mut bracket = Matrix::zeros(r, r);
    let mut rhs = vec![0.0; r];
    for a in 0..r {
        rhs[a] = -poisson_bracket(&constraints[a], h, q, p)?;
        for b in 0..r {
            bracket[(a, b)] = poisson_bracket(&constraints[a], &constraints[b], q, p)?;
        }
    }
    let lu = factor_checked(&bracket, config.condition_floor, "constraint bracket matrix")?;
    Ok(lu.solve(&rhs))
}
