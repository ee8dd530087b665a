//! Classical fourth-order Runge-Kutta with a fixed step.

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Integrates `x' = rhs(t, x)` from `t0` to `t1` with step `dt`. When `dt`
/// does not divide the interval the last step is shortened to land on `t1`.
pub fn rk4(rhs: impl Fn(f64, &[f64]) -> Result<Vec<f64>>, x0: &[f64], t0: f64, t1: f64, dt: f64) -> Result<Trajectory> {
    let mut traj = Trajectory::new("t", Trajectory::generic_labels(x0.len()));
    rk4_visit(rhs, x0, t0, t1, dt, |t, x| {
        traj.push(t, x.to_vec())?;
        Ok(())
    })?;
    Ok(traj)
}

/// Like [`rk4`] but hands every sample to `visit` instead of storing it.
/// Returns the final state.
pub fn rk4_visit(
    rhs: impl Fn(f64, &[f64]) -> Result<Vec<f64>>,
    x0: &[f64],
    t0: f64,
    t1: f64,
    dt: f64,
    mut visit: impl FnMut(f64, &[f64]) -> Result<()>,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("rk4 step must be positive, got {dt}")));
    }
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidArgument(format!("rk4 interval [{t0}, {t1}] is invalid")));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "rk4 initial state",
        });
    }
    let span = t1 - t0;
    let ratio = span / dt;
    let nearest = ratio.round();
    let (full, partial) = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        (nearest as usize, false)
    } else {
        (ratio.floor() as usize, true)
    };

    let eval = |t: f64, x: &[f64]| -> Result<Vec<f64>> {
        let v = rhs(t, x)?;
        if v.len() != x.len() {
            return Err(Error::DimensionMismatch {
                context: "rk4 right-hand side",
                expected: x.len(),
                found: v.len(),
            });
        }
        if v.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite {
                context: "rk4 right-hand side",
            });
        }
        Ok(v)
    };

    let mut x = x0.to_vec();
    visit(t0, &x)?;
    let total = full + usize::from(partial);
    for k in 0..total {
        let t = t0 + k as f64 * dt;
        let (h, t_next) = if k + 1 == total {
            (t1 - t, t1)
        } else {
            (dt, t0 + (k + 1) as f64 * dt)
        };
        x = step(&eval, t, &x, h)?;
        visit(t_next, &x)?;
    }
    Ok(x)
}

/// One RK4 step of size `h`.
pub fn step(rhs: &impl Fn(f64, &[f64]) -> Result<Vec<f64>>, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(u, v)| u + s * v).collect() };
    let k1 = rhs(t, x)?;
    let k2 = rhs(t + 0.5 * h, &axpy(x, 0.5 * h, &k1))?;
    let k3 = rhs(t + 0.5 * h, &axpy(x, 0.5 * h, &k2))?;
    let k4 = rhs(t + h, &axpy(x, h, &k3))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let traj = rk4(|_, x| Ok(vec![-x[0]]), &[1.0], 0.0, 1.0, 0.01).unwrap();
        let (t, x) = traj.last().unwrap();
        assert_eq!(t, 1.0);
        assert!((x[0] - (-1f64).exp()).abs() < 1e-9);
        assert_eq!(traj.len(), 101);
    }

    #[test]
    fn shortened_final_step_lands_on_t1() {
        let traj = rk4(|_, _| Ok(vec![1.0]), &[0.0], 0.0, 1.05, 0.1).unwrap();
        let (t, x) = traj.last().unwrap();
        assert_eq!(t, 1.05);
        assert!((x[0] - 1.05).abs() < 1e-14);
        assert_eq!(traj.len(), 12);
    }

    #[test]
    fn zero_length_interval_returns_initial_state() {
        let traj = rk4(|_, x| Ok(vec![x[0]]), &[2.0], 1.0, 1.0, 0.1).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.states[0], vec![2.0]);
    }

    #[test]
    fn invalid_step_rejected() {
        assert!(rk4(|_, x| Ok(x.to_vec()), &[1.0], 0.0, 1.0, 0.0).is_err());
        assert!(rk4(|_, x| Ok(x.to_vec()), &[1.0], 0.0, 1.0, -0.1).is_err());
    }
}
