//! Pontryagin maximum principle on an algebroid.
//!
//! For a control field `Gamma(q, u)` in the fibers and a running cost
//! `L(q, u)`, the Pontryagin Hamiltonian is `H = mu~ . Gamma - L` and extremals
//! satisfy
//!
//! ```text
//! qdot = rho Gamma,   dH/du = 0,
//! d/dt mu~_a = -dH/dq^i rho^i_a - C^c_ab Gamma^b mu~_c.
//! ```

use crate::error::{Error, Result};
use crate::geometry::{AlgebroidStructure, Arity, ControlField, ScalarField};
use crate::numerics::linalg::norm_inf;
use crate::numerics::rk4::rk4_visit;
use crate::numerics::{newton, SolverConfig};
use crate::trajectory::Trajectory;

use super::{check_finite, Rhs};

#[derive(Clone, Debug)]
pub struct ControlSystem {
    pub structure: AlgebroidStructure,
    pub gamma: ControlField,
    pub cost: ScalarField,
}

/// Point of the extended phase space `(q, mu~, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PontryaginState {
    pub q: Vec<f64>,
    pub mu: Vec<f64>,
    pub u: Vec<f64>,
}

/// Residual blocks of the Pontryagin system.
#[derive(Clone, Debug, PartialEq)]
pub struct PontryaginResidual {
    /// `dH/du`.
    pub stationarity: Vec<f64>,
    /// `d/dt mu~ + dH/dq rho + C(Gamma, mu~)`.
    pub costate: Vec<f64>,
    /// `qdot - rho Gamma`.
    pub primal: Vec<f64>,
}

impl PontryaginResidual {
    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.stationarity)
            .max(norm_inf(&self.costate))
            .max(norm_inf(&self.primal))
    }
}

/// Terminal condition for shooting.
#[derive(Clone, Debug, PartialEq)]
pub enum Terminal {
    /// Free endpoint, `mu~(T) = 0`.
    ZeroCostate,
    /// Prescribed `q(T)`; needs as many fiber directions as base coordinates.
    Fixed(Vec<f64>),
}

impl ControlSystem {
    pub fn new(structure: AlgebroidStructure, gamma: ControlField, cost: ScalarField) -> Result<Self> {
        let (n, m) = (structure.base_dim(), structure.fiber_rank());
        let k = gamma.control_dim();
        if gamma.base_dim() != n || gamma.out_dim() != m {
            return Err(Error::InvalidArgument(format!(
                "control field maps R^{} x R^{k} -> R^{}, algebroid needs R^{n} x R^{k} -> R^{m}",
                gamma.base_dim(),
                gamma.out_dim()
            )));
        }
        if cost.arity() != Arity::qu(n, k) {
            return Err(Error::InvalidArgument(format!(
                "cost arity {:?} must be (q: {n}, u: {k})",
                cost.arity()
            )));
        }
        Ok(ControlSystem { structure, gamma, cost })
    }

    pub fn control_dim(&self) -> usize {
        self.gamma.control_dim()
    }

    /// `H = mu~ . Gamma(q, u) - L(q, u)`.
    pub fn hamiltonian(&self, q: &[f64], mu: &[f64], u: &[f64]) -> f64 {
        let x = self.cost.arity().pack(0.0, q, &[], u);
        dot(mu, &self.gamma.eval(q, u)) - self.cost.eval(&x)
    }

    /// `(dH/dq, dH/du)`.
    pub fn hamiltonian_partials(&self, q: &[f64], mu: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = self.cost.arity();
        let x = a.pack(0.0, q, &[], u);
        let lq = self.cost.partial(&x, a.base_range());
        let lu = self.cost.partial(&x, a.control_range());
        let hq = self.gamma.jac_q(q, u).tr_mul_vec(mu);
        let hu = self.gamma.jac_u(q, u).tr_mul_vec(mu);
        (
            hq.iter().zip(&lq).map(|(a, b)| a - b).collect(),
            hu.iter().zip(&lu).map(|(a, b)| a - b).collect(),
        )
    }

    /// Solves `dH/du (q, mu~, u) = 0` for `u` by Newton's method.
    pub fn solve_control(&self, q: &[f64], mu: &[f64], seed: &[f64], config: &SolverConfig) -> Result<Vec<f64>> {
        let f = |u: &[f64]| Ok(self.hamiltonian_partials(q, mu, u).1);
        match newton(f, seed, config) {
            Ok(rep) => Ok(rep.x),
            Err(Error::Singular { .. }) | Err(Error::IllConditioned { .. }) | Err(Error::DegenerateRoot { .. }) => {
                Err(Error::SingularControl)
            }
            Err(e) => Err(e),
        }
    }

    /// Right-hand side of the extremal flow at `(q, mu~)` with control `u`:
    /// `(rho Gamma, -rho^T dH/dq - C(Gamma, mu~))`.
    pub fn extremal_rates(&self, q: &[f64], mu: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let rho = self.structure.anchor(q)?;
        let c = self.structure.structure(q)?;
        let gamma = self.gamma.eval(q, u);
        let (hq, _) = self.hamiltonian_partials(q, mu, u);
        let qdot = rho.mul_vec(&gamma);
        let anchored = rho.tr_mul_vec(&hq);
        let bracket = c.contract(&gamma, mu);
        let mu_dot: Vec<f64> = anchored.iter().zip(&bracket).map(|(a, b)| -a - b).collect();
        Ok((qdot, mu_dot))
    }

    /// Reduced Hamiltonian `H*(q, mu~) = H(q, mu~, u*(q, mu~))` with its
    /// envelope gradient `(dH/dq, Gamma)` at the optimal control.
    pub fn reduced_hamiltonian(&self, config: SolverConfig) -> ScalarField {
        let (n, m, k) = (
            self.structure.base_dim(),
            self.structure.fiber_rank(),
            self.control_dim(),
        );
        let arity = Arity::qy(n, m);
        let a = self.clone();
        let b = self.clone();
        let value = move |x: &[f64]| {
            let (q, mu) = x.split_at(n);
            match a.solve_control(q, mu, &vec![0.0; k], &config) {
                Ok(u) => a.hamiltonian(q, mu, &u),
                Err(_) => f64::NAN,
            }
        };
        let gradient = move |x: &[f64]| {
            let (q, mu) = x.split_at(n);
            match b.solve_control(q, mu, &vec![0.0; k], &config) {
                Ok(u) => {
                    let (mut g, _) = b.hamiltonian_partials(q, mu, &u);
                    g.extend(b.gamma.eval(q, &u));
                    g
                }
                Err(_) => vec![f64::NAN; n + m],
            }
        };
        ScalarField::new(arity, value).with_gradient(gradient)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Residual blocks at a state, given the time derivatives of `q` and `mu~`.
pub fn pontryagin_residual(
    system: &ControlSystem,
    state: &PontryaginState,
    qdot: &[f64],
    mu_dot: &[f64],
) -> Result<PontryaginResidual> {
    let (n, m, k) = (
        system.structure.base_dim(),
        system.structure.fiber_rank(),
        system.control_dim(),
    );
    for (len, want, what) in [
        (state.q.len(), n, "pontryagin q"),
        (state.mu.len(), m, "pontryagin mu"),
        (state.u.len(), k, "pontryagin u"),
        (qdot.len(), n, "pontryagin qdot"),
        (mu_dot.len(), m, "pontryagin mu_dot"),
    ] {
        if len != want {
            return Err(Error::DimensionMismatch {
                context: what,
                expected: want,
                found: len,
            });
        }
    }
    let (_, hu) = system.hamiltonian_partials(&state.q, &state.mu, &state.u);
    let (qdot_ext, mu_dot_ext) = system.extremal_rates(&state.q, &state.mu, &state.u)?;
    let res = PontryaginResidual {
        stationarity: hu,
        costate: mu_dot.iter().zip(&mu_dot_ext).map(|(a, b)| a - b).collect(),
        primal: qdot.iter().zip(&qdot_ext).map(|(a, b)| a - b).collect(),
    };
    check_finite(&res.stationarity, "pontryagin stationarity")?;
    check_finite(&res.costate, "pontryagin costate")?;
    check_finite(&res.primal, "pontryagin primal")?;
    Ok(res)
}

/// Extremal flow on `(q, mu~)` with the control eliminated through `dH/du = 0`.
pub fn extremal_vector_field(system: &ControlSystem, config: SolverConfig) -> Rhs {
    let sys = system.clone();
    Box::new(move |_, state| {
        let n = sys.structure.base_dim();
        let (q, mu) = state.split_at(n);
        let u = sys.solve_control(q, mu, &vec![0.0; sys.control_dim()], &config)?;
        let (mut qdot, mu_dot) = sys.extremal_rates(q, mu, &u)?;
        qdot.extend(mu_dot);
        check_finite(&qdot, "extremal_vector_field")?;
        Ok(qdot)
    })
}

#[derive(Clone, Debug)]
pub struct PontryaginSolution {
    /// Columns `q1.., mu1.., u1..`.
    pub trajectory: Trajectory,
    pub mu0: Vec<f64>,
    pub shooting_residual: f64,
}

/// Single shooting on the initial costate `mu~(0)`.
pub fn pontryagin_shooting(
    system: &ControlSystem,
    q0: &[f64],
    terminal: &Terminal,
    horizon: f64,
    mu0_guess: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<PontryaginSolution> {
    let (n, m, k) = (
        system.structure.base_dim(),
        system.structure.fiber_rank(),
        system.control_dim(),
    );
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if q0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "pontryagin q0",
            expected: n,
            found: q0.len(),
        });
    }
    if let Terminal::Fixed(qt) = terminal {
        if qt.len() != n {
            return Err(Error::DimensionMismatch {
                context: "pontryagin terminal state",
                expected: n,
                found: qt.len(),
            });
        }
        if m != n {
            return Err(Error::InvalidArgument(format!(
                "fixed-endpoint shooting needs fiber rank {m} equal to base dimension {n}"
            )));
        }
    }
    let rhs = extremal_vector_field(system, *config);
    let integrate_to_end = |mu0: &[f64]| -> Result<Vec<f64>> {
        let mut x0 = q0.to_vec();
        x0.extend_from_slice(mu0);
        rk4_visit(&rhs, &x0, 0.0, horizon, config.rk_dt, |_, _| Ok(()))
    };
    let shoot = |mu0: &[f64]| -> Result<Vec<f64>> {
        let end = integrate_to_end(mu0)?;
        Ok(match terminal {
            Terminal::ZeroCostate => end[n..].to_vec(),
            Terminal::Fixed(qt) => end[..n].iter().zip(qt).map(|(a, b)| a - b).collect(),
        })
    };
    let guess = match mu0_guess {
        Some(g) if g.len() == m => g.to_vec(),
        Some(g) => {
            return Err(Error::DimensionMismatch {
                context: "pontryagin mu0 guess",
                expected: m,
                found: g.len(),
            })
        }
        None => vec![0.0; m],
    };
    let rep = newton(shoot, &guess, config)?;

    let mut labels: Vec<String> = (1..=n).map(|i| format!("q{i}")).collect();
    labels.extend((1..=m).map(|i| format!("mu{i}")));
    labels.extend((1..=k).map(|i| format!("u{i}")));
    let mut traj = Trajectory::new("t", labels);
    let mut x0 = q0.to_vec();
    x0.extend_from_slice(&rep.x);
    let mut u_prev = vec![0.0; k];
    rk4_visit(&rhs, &x0, 0.0, horizon, config.rk_dt, |t, x| {
        let u = system.solve_control(&x[..n], &x[n..], &u_prev, config)?;
        let mut row = x.to_vec();
        row.extend_from_slice(&u);
        u_prev = u;
        traj.push(t, row)
    })?;
    Ok(PontryaginSolution {
        trajectory: traj,
        mu0: rep.x,
        shooting_residual: rep.residual,
    })
}
