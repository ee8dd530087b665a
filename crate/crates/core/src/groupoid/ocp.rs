//! Discrete optimal control on a groupoid.
//!
//! The control selects the chart velocity `v_k = Gamma(q_k, u_k)` and the
//! state moves to `q_{k+1} = b(q_k, v_k)`. With multipliers `mu1(k)` in
//! `R^n` and `mu2(k)` in `R^m`, the necessary conditions for minimizing
//! `sum_k Ld(q_k, u_k)` are, for `k = 0..N-1`,
//!
//! ```text
//! dLd/dq - mu1(k) - mu2(k) dGamma/dq = 0
//! dLd/du - mu2(k) dGamma/du          = 0
//! q_{k+1} - b(q_k, v_k)              = 0
//! mu1(k+1) rho(q_{k+1}) + mu2(k) L(q_k, v_k) - mu2(k+1) R(q_{k+1}, v_{k+1}) = 0
//! ```
//!
//! where the last line runs over `k = 0..N-2` and is closed by
//! `mu2(N-1) L(q_{N-1}, v_{N-1}) = 0` (free endpoint) or `q_N = q_T`.

use super::GroupoidModel;
use crate::continuous::Terminal;
use crate::error::{Error, Result};
use crate::geometry::{Arity, ControlField, ScalarField};
use crate::numerics::linalg::norm_inf;
use crate::numerics::{newton, SolverConfig};

#[derive(Clone, Debug)]
pub struct GroupoidOcp {
    pub model: GroupoidModel,
    /// `Gamma(q, u)`, valued in chart coordinates.
    pub gamma: ControlField,
    pub cost: ScalarField,
    pub q0: Vec<f64>,
    pub steps: usize,
    pub terminal: Terminal,
}

/// A candidate solution: `q_1..q_N`, `u_0..u_{N-1}`, `mu1(0..N-1)`,
/// `mu2(0..N-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupoidOcpIterate {
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub mu1: Vec<Vec<f64>>,
    pub mu2: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupoidOcpResidual {
    pub base: Vec<Vec<f64>>,
    pub control: Vec<Vec<f64>>,
    pub dynamics: Vec<Vec<f64>>,
    /// `N - 1` costate equations followed by the terminal condition.
    pub costate: Vec<Vec<f64>>,
}

impl GroupoidOcpResidual {
    pub fn max_abs(&self) -> f64 {
        [&self.base, &self.control, &self.dynamics, &self.costate]
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| norm_inf(v))
            .fold(0.0, f64::max)
    }

    fn flatten(self) -> Vec<f64> {
        let mut out = Vec::new();
        let big_n = self.base.len();
        for k in 0..big_n {
            out.extend_from_slice(&self.base[k]);
            out.extend_from_slice(&self.control[k]);
            out.extend_from_slice(&self.dynamics[k]);
            out.extend_from_slice(&self.costate[k]);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupoidOcpSolution {
    /// `q_0..q_N`.
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub mu1: Vec<Vec<f64>>,
    pub mu2: Vec<Vec<f64>>,
    pub cost: f64,
    pub residual: f64,
}

impl GroupoidOcp {
    pub fn new(
        model: GroupoidModel,
        gamma: ControlField,
        cost: ScalarField,
        q0: Vec<f64>,
        steps: usize,
        terminal: Terminal,
    ) -> Result<Self> {
        let (n, m) = (model.base_dim(), model.fiber_dim());
        let k = gamma.control_dim();
        if gamma.base_dim() != n || gamma.out_dim() != m {
            return Err(Error::InvalidArgument(format!(
                "Gamma must map (q: {n}, u) into chart coordinates R^{m}"
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
                context: "groupoid OCP q0",
                expected: n,
                found: q0.len(),
            });
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("groupoid OCP needs at least one step".into()));
        }
        if let Terminal::Fixed(qt) = &terminal {
            if n != m {
                return Err(Error::InvalidArgument(format!(
                    "a fixed endpoint needs base and fiber dimensions to agree (n = {n}, m = {m})"
                )));
            }
            if qt.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "groupoid OCP terminal state",
                    expected: n,
                    found: qt.len(),
                });
            }
        }
        Ok(GroupoidOcp {
            model,
            gamma,
            cost,
            q0,
            steps,
            terminal,
        })
    }

    fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.model.base_dim(),
            self.model.fiber_dim(),
            self.gamma.control_dim(),
            self.steps,
        )
    }

    fn pack(&self, it: &GroupoidOcpIterate) -> Vec<f64> {
        it.states
            .iter()
            .chain(&it.controls)
            .chain(&it.mu1)
            .chain(&it.mu2)
            .flatten()
            .copied()
            .collect()
    }

    fn unpack(&self, z: &[f64]) -> GroupoidOcpIterate {
        let (n, m, k, big_n) = self.dims();
        let mut off = 0;
        let mut take = |len: usize| {
            let out: Vec<Vec<f64>> = (0..big_n)
                .map(|i| z[off + i * len..off + (i + 1) * len].to_vec())
                .collect();
            off += big_n * len;
            out
        };
        let states = take(n);
        let controls = take(k);
        let mu1 = take(n);
        let mu2 = take(m);
        GroupoidOcpIterate {
            states,
            controls,
            mu1,
            mu2,
        }
    }

    /// Forward simulation of `controls` from `q0`: states and total cost.
    pub fn simulate(&self, controls: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
        let a = self.cost.arity();
        let mut states = vec![self.q0.clone()];
        let mut cost = 0.0;
        for u in controls {
            let q = states.last().unwrap().clone();
            let v = self.gamma.eval(&q, u);
            self.model.check_chart(&v)?;
            cost += self.cost.eval(&a.pack(0.0, &q, &[], u));
            states.push(self.model.target(&q, &v));
        }
        Ok((states, cost))
    }
}

fn check_blocks(blocks: &[Vec<f64>], count: usize, len: usize, context: &'static str) -> Result<()> {
    if blocks.len() != count {
        return Err(Error::DimensionMismatch {
            context,
            expected: count,
            found: blocks.len(),
        });
    }
    if let Some(b) = blocks.iter().find(|b| b.len() != len) {
        return Err(Error::DimensionMismatch {
            context,
            expected: len,
            found: b.len(),
        });
    }
    Ok(())
}

/// Residual blocks of the groupoid Pontryagin system at `it`.
pub fn groupoid_ocp_residual(problem: &GroupoidOcp, it: &GroupoidOcpIterate) -> Result<GroupoidOcpResidual> {
    let (n, m, k, big_n) = problem.dims();
    check_blocks(&it.states, big_n, n, "groupoid OCP states")?;
    check_blocks(&it.controls, big_n, k, "groupoid OCP controls")?;
    check_blocks(&it.mu1, big_n, n, "groupoid OCP mu1")?;
    check_blocks(&it.mu2, big_n, m, "groupoid OCP mu2")?;
    let model = &problem.model;
    let a = problem.cost.arity();
    let state = |i: usize| -> &[f64] {
        if i == 0 {
            &problem.q0
        } else {
            &it.states[i - 1]
        }
    };
    let velocities: Vec<Vec<f64>> = (0..big_n)
        .map(|i| problem.gamma.eval(state(i), &it.controls[i]))
        .collect();
    for v in &velocities {
        model.check_chart(v)?;
    }

    let mut res = GroupoidOcpResidual {
        base: Vec::with_capacity(big_n),
        control: Vec::with_capacity(big_n),
        dynamics: Vec::with_capacity(big_n),
        costate: Vec::with_capacity(big_n),
    };
    for i in 0..big_n {
        let (q, u, mu1, mu2) = (state(i), &it.controls[i], &it.mu1[i], &it.mu2[i]);
        let g = problem.cost.gradient(&a.pack(0.0, q, &[], u));
        let gq = problem.gamma.jac_q(q, u).tr_mul_vec(mu2);
        let gu = problem.gamma.jac_u(q, u).tr_mul_vec(mu2);
        res.base
            .push((0..n).map(|j| g[a.base_range()][j] - mu1[j] - gq[j]).collect());
        res.control
            .push((0..k).map(|j| g[a.control_range()][j] - gu[j]).collect());
        let next = model.target(q, &velocities[i]);
        res.dynamics
            .push(state(i + 1).iter().zip(&next).map(|(x, y)| x - y).collect());

        let left = model.left(q, &velocities[i])?.tr_mul_vec(mu2);
        if i + 1 < big_n {
            let q_next = state(i + 1);
            let a1 = model.anchor(q_next)?.tr_mul_vec(&it.mu1[i + 1]);
            let c = model.right(q_next, &velocities[i + 1])?.tr_mul_vec(&it.mu2[i + 1]);
            res.costate.push((0..m).map(|j| a1[j] + left[j] - c[j]).collect());
        } else {
            match &problem.terminal {
                Terminal::ZeroCostate => res.costate.push(left),
                Terminal::Fixed(qt) => res
                    .costate
                    .push(state(big_n).iter().zip(qt).map(|(x, y)| x - y).collect()),
            }
        }
    }
    Ok(res)
}

/// Solves the groupoid Pontryagin system by stacked Newton from zero
/// controls and multipliers. Rejects problems in which the control does not
/// enter the dynamics.
pub fn groupoid_ocp_solve(problem: &GroupoidOcp, config: &SolverConfig) -> Result<GroupoidOcpSolution> {
    let (n, m, k, big_n) = problem.dims();
    let zero_u = vec![vec![0.0; k]; big_n];
    let (states, _) = problem.simulate(&zero_u)?;
    let enters = states[..big_n]
        .iter()
        .any(|q| problem.gamma.jac_u(q, &vec![0.0; k]).max_abs() > config.condition_floor);
    if k == 0 || !enters {
        return Err(Error::SingularControl);
    }
    let guess = GroupoidOcpIterate {
        states: states[1..].to_vec(),
        controls: zero_u,
        mu1: vec![vec![0.0; n]; big_n],
        mu2: vec![vec![0.0; m]; big_n],
    };
    let z0 = problem.pack(&guess);
    let rep = newton(
        |z| Ok(groupoid_ocp_residual(problem, &problem.unpack(z))?.flatten()),
        &z0,
        config,
    )
    .map_err(|e| match e {
        Error::Singular { .. } | Error::IllConditioned { .. } => Error::SingularControl,
        other => other,
    })?;
    let it = problem.unpack(&rep.x);
    let (_, cost) = problem.simulate(&it.controls)?;
    let mut states = vec![problem.q0.clone()];
    states.extend(it.states);
    Ok(GroupoidOcpSolution {
        states,
        controls: it.controls,
        mu1: it.mu1,
        mu2: it.mu2,
        cost,
        residual: rep.residual,
    })
}
