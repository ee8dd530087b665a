//! Damped Newton iteration for square nonlinear systems.

use super::diff::fd_jac_with;
use super::linalg::{factor_checked, norm_inf, Matrix};
use super::SolverConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Residual max-norm at every iterate, starting with the initial guess.
    pub residual_history: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
}

/// Number of trailing steps inspected for linear (degenerate-root) convergence.
const DEGENERATE_WINDOW: usize = 6;
const DEGENERATE_RATIO: f64 = 0.125;

/// Newton's method with a finite-difference Jacobian.
pub fn newton(f: impl Fn(&[f64]) -> Result<Vec<f64>>, x0: &[f64], cfg: &SolverConfig) -> Result<NewtonReport> {
    let jac = |x: &[f64]| -> Result<Matrix> {
        let err = std::cell::RefCell::new(None);
        let j = fd_jac_with(
            |z| match f(z) {
                Ok(v) => v,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    vec![f64::NAN; x.len()]
                }
            },
            x,
            cfg.fd_step_scale,
        );
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(j),
        }
    };
    newton_with_jacobian(&f, jac, x0, cfg)
}

/// Newton's method with a caller-supplied Jacobian.
pub fn newton_with_jacobian(
    f: impl Fn(&[f64]) -> Result<Vec<f64>>,
    jac: impl Fn(&[f64]) -> Result<Matrix>,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<NewtonReport> {
    let eval = |x: &[f64]| -> Result<(Vec<f64>, f64)> {
        let r = f(x)?;
        if r.len() != x.len() {
            return Err(Error::DimensionMismatch {
                context: "newton (residual length)",
                expected: x.len(),
                found: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "newton residual",
            });
        }
        let n = norm_inf(&r);
        Ok((r, n))
    };

    let mut x = x0.to_vec();
    let (mut r, mut rn) = eval(&x)?;
    let mut history = vec![rn];
    let mut iterates = vec![x.clone()];

    if rn <= cfg.newton_tol {
        // Accept the guess only if it is a regular root.
        factor_checked(&jac(&x)?, cfg.condition_floor, "newton Jacobian")?;
        return Ok(NewtonReport {
            x,
            iterations: 0,
            residual: rn,
            residual_history: history,
            iterates,
        });
    }

    for it in 1..=cfg.max_iter {
        let j = jac(&x)?;
        let lu = factor_checked(&j, cfg.condition_floor, "newton Jacobian")?;
        let dx = lu.solve(&r);

        // Backtrack on the residual norm; fall back to the full step.
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..10 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - alpha * d).collect();
            if let Ok((rt, rtn)) = eval(&trial) {
                if rtn < rn {
                    accepted = Some((trial, rt, rtn));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let (xn, rnew, rnn) = match accepted {
            Some(v) => v,
            None => {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - d).collect();
                let (rt, rtn) = eval(&trial)?;
                (trial, rt, rtn)
            }
        };
        x = xn;
        r = rnew;
        rn = rnn;
        history.push(rn);
        iterates.push(x.clone());

        if rn <= cfg.newton_tol {
            if is_linear_tail(&history) {
                return Err(Error::DegenerateRoot { residual: rn });
            }
            return Ok(NewtonReport {
                x,
                iterations: it,
                residual: rn,
                residual_history: history,
                iterates,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        residual: rn,
    })
}

/// True when the last few steps each reduced the residual by no more than a
/// constant factor, which is how Newton behaves near a singular root.
fn is_linear_tail(history: &[f64]) -> bool {
    if history.len() <= DEGENERATE_WINDOW {
        return false;
    }
    history
        .windows(2)
        .rev()
        .take(DEGENERATE_WINDOW)
        .all(|w| w[0] > 0.0 && w[1] / w[0] >= DEGENERATE_RATIO)
}
