//! Discrete mechanics on `Q x Q`: discrete Euler-Lagrange steps, holonomic
//! constraints with multipliers, and discrete optimal control.

mod ocp;

pub use ocp::{discrete_ocp_cost, discrete_ocp_solve, DiscreteOcp, DiscreteOcpSolution};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::diff::fd_partial5;
use crate::numerics::{newton, SolverConfig};
use crate::trajectory::Trajectory;

type PairFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
type SlotFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Real function of a pair of configurations `(a, b)` in `R^n x R^n`.
#[derive(Clone)]
pub struct PairField {
    n: usize,
    f: PairFn,
    slots: Option<(SlotFn, SlotFn)>,
}

/// Discrete Lagrangian `L_d(q_k, q_{k+1})`.
pub type DiscreteLagrangian = PairField;

impl fmt::Debug for PairField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PairField")
            .field("n", &self.n)
            .field("analytic_slots", &self.slots.is_some())
            .finish()
    }
}

impl PairField {
    pub fn new(n: usize, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PairField {
            n,
            f: Arc::new(f),
            slots: None,
        }
    }

    /// Attaches analytic slot derivatives `D1` and `D2`.
    pub fn with_slot_derivatives(
        mut self,
        d1: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        d2: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.slots = Some((Arc::new(d1), Arc::new(d2)));
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        (self.f)(a, b)
    }

    fn packed(&self, a: &[f64], b: &[f64], range: std::ops::Range<usize>) -> Vec<f64> {
        let n = self.n;
        let mut x = a.to_vec();
        x.extend_from_slice(b);
        let f = |z: &[f64]| (self.f)(&z[..n], &z[n..]);
        fd_partial5(&f, &x, range)
    }

    /// Derivative in the first slot.
    pub fn d1(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        match &self.slots {
            Some((d1, _)) => d1(a, b),
            None => self.packed(a, b, 0..self.n),
        }
    }

    /// Derivative in the second slot.
    pub fn d2(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        match &self.slots {
            Some((_, d2)) => d2(a, b),
            None => self.packed(a, b, self.n..2 * self.n),
        }
    }
}

fn check_len(v: &[f64], n: usize, context: &'static str) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: v.len(),
        });
    }
    Ok(())
}

/// `D1 L_d(q, q_next) + D2 L_d(q_prev, q)`.
pub fn del_residual(ld: &DiscreteLagrangian, q_prev: &[f64], q: &[f64], q_next: &[f64]) -> Result<Vec<f64>> {
    let n = ld.dim();
    check_len(q_prev, n, "del_residual q_prev")?;
    check_len(q, n, "del_residual q")?;
    check_len(q_next, n, "del_residual q_next")?;
    let a = ld.d1(q, q_next);
    let b = ld.d2(q_prev, q);
    Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect())
}

/// Solves the discrete Euler-Lagrange equation for `q_next`. The default
/// guess is the linear extrapolation `2 q - q_prev`.
pub fn del_step(
    ld: &DiscreteLagrangian,
    q_prev: &[f64],
    q: &[f64],
    guess: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    let n = ld.dim();
    check_len(q_prev, n, "del_step q_prev")?;
    check_len(q, n, "del_step q")?;
    let d2 = ld.d2(q_prev, q);
    let x0: Vec<f64> = match guess {
        Some(g) => {
            check_len(g, n, "del_step guess")?;
            g.to_vec()
        }
        None => q.iter().zip(q_prev).map(|(a, b)| 2.0 * a - b).collect(),
    };
    let f = |x: &[f64]| Ok(ld.d1(q, x).iter().zip(&d2).map(|(a, b)| a + b).collect());
    Ok(newton(f, &x0, config)?.x)
}

/// Discrete momentum `D2 L_d(q_prev, q)`.
pub fn discrete_momentum(ld: &DiscreteLagrangian, q_prev: &[f64], q: &[f64]) -> Vec<f64> {
    ld.d2(q_prev, q)
}

fn q_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("q{i}")).collect()
}

/// Runs `steps` DEL steps from `(q0, q1)`. The result holds `q_0..q_{steps+1}`
/// stamped by index.
pub fn del_solve(
    ld: &DiscreteLagrangian,
    q0: &[f64],
    q1: &[f64],
    steps: usize,
    config: &SolverConfig,
) -> Result<Trajectory> {
    let n = ld.dim();
    check_len(q0, n, "del_solve q0")?;
    check_len(q1, n, "del_solve q1")?;
    let mut traj = Trajectory::new("k", q_labels(n));
    traj.push(0.0, q0.to_vec())?;
    traj.push(1.0, q1.to_vec())?;
    let (mut prev, mut cur) = (q0.to_vec(), q1.to_vec());
    for k in 0..steps {
        let next = del_step(ld, &prev, &cur, None, config)?;
        traj.push((k + 2) as f64, next.clone())?;
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(traj)
}

/// One step of the constrained DEL system
///
/// ```text
/// D1(L_d + lambda_next . Phi)(q, q_next) + D2(L_d + lambda . Phi)(q_prev, q) = 0
/// Phi(q, q_next) = 0
/// ```
///
/// where `lambda` belongs to the pair `(q_prev, q)` and `lambda_next` to
/// `(q, q_next)`. Returns `(q_next, lambda_next)`.
pub fn discrete_constrained_step(
    ld: &DiscreteLagrangian,
    constraints: &[PairField],
    q_prev: &[f64],
    q: &[f64],
    lambda: &[f64],
    guess: Option<(&[f64], &[f64])>,
    config: &SolverConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = ld.dim();
    let r = constraints.len();
    if r > n {
        return Err(Error::InvalidArgument(format!(
            "{r} constraints over-determine a {n}-dimensional step"
        )));
    }
    if let Some(c) = constraints.iter().find(|c| c.dim() != n) {
        return Err(Error::DimensionMismatch {
            context: "constraint dimension",
            expected: n,
            found: c.dim(),
        });
    }
    check_len(q_prev, n, "constrained step q_prev")?;
    check_len(q, n, "constrained step q")?;
    check_len(lambda, r, "constrained step lambda")?;

    let mut back = ld.d2(q_prev, q);
    for (c, l) in constraints.iter().zip(lambda) {
        for (b, d) in back.iter_mut().zip(c.d2(q_prev, q)) {
            *b += l * d;
        }
    }
    let mut z0: Vec<f64> = match guess {
        Some((g, _)) => {
            check_len(g, n, "constrained step guess")?;
            g.to_vec()
        }
        None => q.iter().zip(q_prev).map(|(a, b)| 2.0 * a - b).collect(),
    };
    match guess {
        Some((_, lg)) => {
            check_len(lg, r, "constrained step multiplier guess")?;
            z0.extend_from_slice(lg);
        }
        None => z0.extend_from_slice(lambda),
    }
    let f = |z: &[f64]| -> Result<Vec<f64>> {
        let (x, lam) = z.split_at(n);
        let mut out = ld.d1(q, x);
        for (o, b) in out.iter_mut().zip(&back) {
            *o += b;
        }
        for (c, l) in constraints.iter().zip(lam) {
            for (o, d) in out.iter_mut().zip(c.d1(q, x)) {
                *o += l * d;
            }
        }
        out.extend(constraints.iter().map(|c| c.eval(q, x)));
        Ok(out)
    };
    let z = newton(f, &z0, config)?.x;
    let (x, lam) = z.split_at(n);
    Ok((x.to_vec(), lam.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slot_derivatives_of_quadratic() {
        let ld = PairField::new(2, |a, b| {
            let d0 = b[0] - a[0];
            let d1 = b[1] - a[1];
            0.5 * (d0 * d0 + 3.0 * d1 * d1)
        });
        let (a, b) = ([0.1, 0.2], [0.4, -0.3]);
        let d1 = ld.d1(&a, &b);
        let d2 = ld.d2(&a, &b);
        assert!((d1[0] + 0.3).abs() < 1e-10 && (d1[1] - 1.5).abs() < 1e-10);
        assert!((d2[0] - 0.3).abs() < 1e-10 && (d2[1] + 1.5).abs() < 1e-10);
    }

    #[test]
    fn constant_lagrangian_has_no_step() {
        let ld = PairField::new(1, |_, _| 1.0);
        assert!(del_step(&ld, &[0.0], &[1.0], None, &SolverConfig::default()).is_err());
    }

    #[test]
    fn too_many_constraints_rejected() {
        let ld = PairField::new(1, |a, b| 0.5 * (b[0] - a[0]).powi(2));
        let c = PairField::new(1, |_, b| b[0]);
        let r = discrete_constrained_step(
            &ld,
            &[c.clone(), c],
            &[0.0],
            &[0.0],
            &[0.0, 0.0],
            None,
            &SolverConfig::default(),
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
