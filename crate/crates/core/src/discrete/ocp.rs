//! Discrete optimal control by stacked Newton on the discrete
//! Pontryagin system.
//!
//! With `H(q, mu, u) = mu . Gamma_d(q, u) + L(q, u)` the necessary conditions
//! for minimizing `sum_k L(q_k, u_k)` subject to `q_{k+1} = Gamma_d(q_k, u_k)` are
//!
//! ```text
//! mu_k = dH/dq (q_k, mu_{k+1}, u_k)
//! 0    = dH/du (q_k, mu_{k+1}, u_k)
//! q_{k+1} = Gamma_d(q_k, u_k)
//! ```
//!
//! for `k = 0..N-1`, plus `mu_N = 0` (free endpoint) or `q_N` prescribed.
//! Here `mu_{k+1}` plays the role of `mu1(k+1) = -mu2(k)`.

use crate::continuous::Terminal;
use crate::error::{Error, Result};
use crate::geometry::{Arity, ControlField, ScalarField};
use crate::numerics::linalg::factor_checked;
use crate::numerics::{newton, Matrix, SolverConfig};

#[derive(Clone, Debug)]
pub struct DiscreteOcp {
    pub dynamics: ControlField,
    pub cost: ScalarField,
    pub q0: Vec<f64>,
    pub steps: usize,
    pub terminal: Terminal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteOcpSolution {
    /// `q_0..q_N`.
    pub states: Vec<Vec<f64>>,
    /// `mu_0..mu_N`.
    pub costates: Vec<Vec<f64>>,
    /// `u_0..u_{N-1}`.
    pub controls: Vec<Vec<f64>>,
    pub cost: f64,
    pub residual: f64,
}

impl DiscreteOcp {
    pub fn new(
        dynamics: ControlField,
        cost: ScalarField,
        q0: Vec<f64>,
        steps: usize,
        terminal: Terminal,
    ) -> Result<Self> {
        let n = dynamics.base_dim();
        let k = dynamics.control_dim();
        if dynamics.out_dim() != n {
            return Err(Error::InvalidArgument(format!(
                "discrete dynamics must map into R^{n}, got R^{}",
                dynamics.out_dim()
            )));
        }
        if cost.arity() != Arity::qu(n, k) {
            return Err(Error::InvalidArgument(format!(
                "cost arity {:?} must be (q: {n}, u: {k})",
                cost.arity()
            )));
        }
        if q0.len() != n {
            return Err(Error::DimensionMismatch {
                context: "discrete OCP q0",
                expected: n,
                found: q0.len(),
            });
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("discrete OCP needs at least one step".into()));
        }
        if let Terminal::Fixed(qt) = &terminal {
            if qt.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "discrete OCP terminal state",
                    expected: n,
                    found: qt.len(),
                });
            }
        }
        Ok(DiscreteOcp {
            dynamics,
            cost,
            q0,
            steps,
            terminal,
        })
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.dynamics.base_dim(), self.dynamics.control_dim(), self.steps)
    }

    /// `(dH/dq, dH/du)` at `(q, mu_next, u)`.
    fn partials(&self, q: &[f64], mu_next: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = self.cost.arity();
        let x = a.pack(0.0, q, &[], u);
        let g = self.cost.gradient(&x);
        let mut hq = self.dynamics.jac_q(q, u).tr_mul_vec(mu_next);
        let mut hu = self.dynamics.jac_u(q, u).tr_mul_vec(mu_next);
        for (h, l) in hq.iter_mut().zip(&g[a.base_range()]) {
            *h += l;
        }
        for (h, l) in hu.iter_mut().zip(&g[a.control_range()]) {
            *h += l;
        }
        (hq, hu)
    }

    /// `d^2 H / du^2` at `(q, mu_next, u)`.
    fn control_hessian(&self, q: &[f64], mu_next: &[f64], u: &[f64]) -> Matrix {
        let k = u.len();
        let hu = |z: &[f64]| self.partials(q, mu_next, z).1;
        let mut h = crate::numerics::diff::fd_jac_columns(&hu, u, 0..k, crate::numerics::diff::first_step_scale());
        h.symmetrize();
        h
    }

    fn unpack<'a>(&self, z: &'a [f64]) -> (Vec<&'a [f64]>, Vec<&'a [f64]>, Vec<&'a [f64]>) {
        let (n, k, big_n) = self.dims();
        let qs: Vec<&[f64]> = (0..big_n).map(|i| &z[i * n..(i + 1) * n]).collect();
        let off = big_n * n;
        let mus: Vec<&[f64]> = (0..=big_n).map(|i| &z[off + i * n..off + (i + 1) * n]).collect();
        let off = off + (big_n + 1) * n;
        let us: Vec<&[f64]> = (0..big_n).map(|i| &z[off + i * k..off + (i + 1) * k]).collect();
        (qs, mus, us)
    }

    fn residual(&self, z: &[f64]) -> Vec<f64> {
        let (_, _, big_n) = self.dims();
        let (qs, mus, us) = self.unpack(z);
        let state = |i: usize| -> &[f64] {
            if i == 0 {
                &self.q0
            } else {
                qs[i - 1]
            }
        };
        let mut out = Vec::with_capacity(z.len());
        for i in 0..big_n {
            let (hq, hu) = self.partials(state(i), mus[i + 1], us[i]);
            out.extend(mus[i].iter().zip(&hq).map(|(m, h)| m - h));
            out.extend(hu);
            let next = self.dynamics.eval(state(i), us[i]);
            out.extend(state(i + 1).iter().zip(&next).map(|(a, b)| a - b));
        }
        match &self.terminal {
            Terminal::ZeroCostate => out.extend_from_slice(mus[big_n]),
            Terminal::Fixed(qt) => out.extend(state(big_n).iter().zip(qt).map(|(a, b)| a - b)),
        }
        out
    }
}

/// Forward-simulates `controls` and returns the states and the total cost.
pub fn discrete_ocp_cost(problem: &DiscreteOcp, controls: &[Vec<f64>]) -> (Vec<Vec<f64>>, f64) {
    let a = problem.cost.arity();
    let mut states = vec![problem.q0.clone()];
    let mut cost = 0.0;
    for u in controls {
        let q = states.last().unwrap().clone();
        cost += problem.cost.eval(&a.pack(0.0, &q, &[], u));
        states.push(problem.dynamics.eval(&q, u));
    }
    (states, cost)
}

/// Solves the discrete Pontryagin system by Newton's method on all unknowns
/// at once, starting from zero controls and costates. Rejects problems whose
/// control Hessian is singular at that starting point.
pub fn discrete_ocp_solve(problem: &DiscreteOcp, config: &SolverConfig) -> Result<DiscreteOcpSolution> {
    let (n, k, big_n) = problem.dims();
    let zero_u = vec![vec![0.0; k]; big_n];
    let (states, _) = discrete_ocp_cost(problem, &zero_u);
    let zero_mu = vec![0.0; n];
    for (i, u) in zero_u.iter().enumerate() {
        let h = problem.control_hessian(&states[i], &zero_mu, u);
        if k > 0 && factor_checked(&h, config.condition_floor, "control Hessian").is_err() {
            return Err(Error::SingularControl);
        }
    }
    let mut z0: Vec<f64> = states[1..].iter().flatten().copied().collect();
    z0.extend(std::iter::repeat_n(0.0, (big_n + 1) * n + big_n * k));

    let rep = newton(|z| Ok(problem.residual(z)), &z0, config).map_err(|e| match e {
        Error::Singular { .. } | Error::IllConditioned { .. } => Error::SingularControl,
        other => other,
    })?;
    let (qs, mus, us) = problem.unpack(&rep.x);
    let mut states = vec![problem.q0.clone()];
    states.extend(qs.iter().map(|q| q.to_vec()));
    let controls: Vec<Vec<f64>> = us.iter().map(|u| u.to_vec()).collect();
    let (_, cost) = discrete_ocp_cost(problem, &controls);
    Ok(DiscreteOcpSolution {
        states,
        costates: mus.iter().map(|m| m.to_vec()).collect(),
        controls,
        cost,
        residual: rep.residual,
    })
}
