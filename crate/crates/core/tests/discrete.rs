use varmech_core::continuous::Terminal;
use varmech_core::discrete::*;
use varmech_core::geometry::{ControlField, ScalarField};
use varmech_core::numerics::linalg::max_abs_diff;
use varmech_core::{Error, SolverConfig};

fn free_particle(n: usize, h: f64) -> DiscreteLagrangian {
    PairField::new(n, move |a, b| {
        0.5 * h * a.iter().zip(b).map(|(x, y)| ((y - x) / h).powi(2)).sum::<f64>()
    })
}

fn midpoint_sho(h: f64) -> DiscreteLagrangian {
    PairField::new(1, move |a, b| {
        let v = (b[0] - a[0]) / h;
        let m = 0.5 * (a[0] + b[0]);
        h * (0.5 * v * v - 0.5 * m * m)
    })
}

#[test]
fn free_particle_is_linear_extrapolation() {
    let cfg = SolverConfig::default();
    let ld = free_particle(2, 0.1);
    let traj = del_solve(&ld, &[0.0, 1.0], &[0.1, 0.95], 1000, &cfg).unwrap();
    for w in traj.states.windows(3) {
        let expected: Vec<f64> = (0..2).map(|i| 2.0 * w[1][i] - w[0][i]).collect();
        assert!(max_abs_diff(&w[2], &expected) <= cfg.newton_tol);
    }
}

#[test]
fn translation_invariant_momentum_is_conserved() {
    let cfg = SolverConfig::default();
    let h = 0.05;
    // Anharmonic kinetic term, invariant under every shift.
    let ld = PairField::new(2, move |a, b| {
        let v0 = (b[0] - a[0]) / h;
        let v1 = (b[1] - a[1]) / h;
        h * (0.5 * (v0 * v0 + v1 * v1) + 0.1 * v0.powi(4) + 0.05 * (v0 * v1).powi(2))
    });
    let traj = del_solve(&ld, &[0.0, 0.0], &[0.05, -0.02], 1000, &cfg).unwrap();
    let p0 = discrete_momentum(&ld, &traj.states[0], &traj.states[1]);
    for w in traj.states.windows(2) {
        let p = discrete_momentum(&ld, &w[0], &w[1]);
        assert!(max_abs_diff(&p, &p0) <= 10.0 * cfg.newton_tol, "{p:?} vs {p0:?}");
    }
}

fn midpoint_error(h: f64, t_end: f64) -> f64 {
    let cfg = SolverConfig::default();
    let steps = (t_end / h).round() as usize;
    let traj = del_solve(&midpoint_sho(h), &[1.0], &[h.cos()], steps - 1, &cfg).unwrap();
    traj.states
        .iter()
        .enumerate()
        .map(|(k, q)| (q[0] - (k as f64 * h).cos()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn midpoint_rule_is_second_order() {
    let ratio = midpoint_error(0.02, 10.0) / midpoint_error(0.01, 10.0);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn midpoint_energy_has_no_drift() {
    let h = 0.01;
    let cfg = SolverConfig::default();
    let traj = del_solve(&midpoint_sho(h), &[1.0], &[h.cos()], 1000, &cfg).unwrap();
    let energy = |a: f64, b: f64| {
        let v = (b - a) / h;
        let m = 0.5 * (a + b);
        0.5 * v * v + 0.5 * m * m
    };
    let e0 = energy(traj.states[0][0], traj.states[1][0]);
    for w in traj.states.windows(2) {
        assert!((energy(w[0][0], w[1][0]) - e0).abs() <= 1e-4);
    }
}

#[test]
fn frozen_coordinate_constraint() {
    let cfg = SolverConfig::default();
    let h = 0.1;
    let ld = free_particle(2, h);
    let phi = PairField::new(2, |a, b| b[0] - a[0]);
    let (x, lam) = discrete_constrained_step(&ld, &[phi], &[0.3, 0.0], &[0.3, 0.2], &[0.7], None, &cfg).unwrap();
    assert!((x[0] - 0.3).abs() < 1e-10);
    assert!((x[1] - 0.4).abs() < 1e-10);
    assert!((lam[0] - 0.7).abs() < 1e-9);
}

#[test]
fn circle_constraint_keeps_step_length() {
    // |q_next - q| = h; the solution continues in the direction of q - q_prev.
    let cfg = SolverConfig::default();
    let h = 0.1;
    let ld = free_particle(2, h);
    let phi = PairField::new(2, move |a, b| (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) - h * h);
    let q_prev = [0.0, 0.0];
    let q = [0.06, 0.08];
    let (x, lam) = discrete_constrained_step(&ld, &[phi], &q_prev, &q, &[0.0], None, &cfg).unwrap();
    let dir = [0.6, 0.8];
    let expected = [q[0] + h * dir[0], q[1] + h * dir[1]];
    assert!(max_abs_diff(&x, &expected) < 1e-9, "{x:?}");
    assert!(lam[0].abs() < 1e-7);

    // Previous step shorter than h: multiplier compensates.
    let q = [0.03, 0.04];
    let (x, lam) = discrete_constrained_step(&ld, &[phi_circle(h)], &q_prev, &q, &[0.0], None, &cfg).unwrap();
    let expected = [q[0] + h * dir[0], q[1] + h * dir[1]];
    assert!(max_abs_diff(&x, &expected) < 1e-9);
    // (1/h + 2 lam') h = (1/h) |q - q_prev|
    let lam_expected = (0.05 / h - 1.0) / (2.0 * h);
    assert!((lam[0] - lam_expected).abs() < 1e-7, "{} vs {lam_expected}", lam[0]);
}

fn phi_circle(h: f64) -> PairField {
    PairField::new(2, move |a, b| (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) - h * h)
}

fn scalar_lqr(a: f64, b: f64, q: f64, r: f64, h: f64, steps: usize) -> DiscreteOcp {
    DiscreteOcp::new(
        ControlField::new(1, 1, 1, move |x, u| vec![a * x[0] + b * u[0]]),
        ScalarField::from_qu(1, 1, move |x, u| 0.5 * h * (q * x[0] * x[0] + r * u[0] * u[0])),
        vec![1.0],
        steps,
        Terminal::ZeroCostate,
    )
    .unwrap()
}

#[test]
fn lqr_matches_riccati() {
    let (a, b, q, r, h, steps) = (1.0, 0.1, 1.0, 0.5, 0.1, 20);
    let sol = discrete_ocp_solve(&scalar_lqr(a, b, q, r, h, steps), &SolverConfig::default()).unwrap();

    let mut p = 0.0;
    let mut gains = vec![0.0; steps];
    for k in (0..steps).rev() {
        let gain = b * p * a / (r * h + b * b * p);
        gains[k] = gain;
        p = q * h + a * a * p - a * b * p * gain;
    }
    let mut x = 1.0;
    for k in 0..steps {
        let u = -gains[k] * x;
        assert!(
            (sol.controls[k][0] - u).abs() <= 1e-8,
            "k={k}: {} vs {u}",
            sol.controls[k][0]
        );
        x = a * x + b * u;
    }
}

#[test]
fn lqr_is_locally_optimal() {
    let pb = scalar_lqr(1.0, 0.1, 1.0, 0.5, 0.1, 20);
    let sol = discrete_ocp_solve(&pb, &SolverConfig::default()).unwrap();
    for k in 0..20 {
        for d in [-1e-4, 1e-4] {
            let mut u = sol.controls.clone();
            u[k][0] += d;
            let (_, c) = discrete_ocp_cost(&pb, &u);
            assert!(c >= sol.cost - 1e-9);
        }
    }
}

#[test]
fn one_step_fixed_endpoint_matches_grid_search() {
    let h = 0.5;
    let pb = DiscreteOcp::new(
        ControlField::new(1, 2, 1, move |x, u| vec![x[0] + h * (u[0] + u[1])]),
        ScalarField::from_qu(1, 2, move |_, u| 0.5 * h * (u[0] * u[0] + 2.0 * u[1] * u[1])),
        vec![0.0],
        1,
        Terminal::Fixed(vec![1.0]),
    )
    .unwrap();
    let sol = discrete_ocp_solve(&pb, &SolverConfig::default()).unwrap();
    // u0 + u1 = 2; search u0 on a fine grid.
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=40000 {
        let u0 = -1.0 + 4.0 * i as f64 / 40000.0;
        let u1 = 2.0 - u0;
        let c = 0.5 * h * (u0 * u0 + 2.0 * u1 * u1);
        if c < best.0 {
            best = (c, u0);
        }
    }
    assert!((sol.controls[0][0] - best.1).abs() < 2e-4);
    assert!((sol.cost - best.0).abs() < 1e-7);
    assert!((sol.states[1][0] - 1.0).abs() < 1e-10);
}

#[test]
fn cost_free_problem_is_rejected() {
    let h = 0.1;
    let pb = DiscreteOcp::new(
        ControlField::new(1, 1, 1, move |x, u| vec![x[0] + h * u[0]]),
        ScalarField::from_qu(1, 1, |_, _| 0.0),
        vec![1.0],
        5,
        Terminal::ZeroCostate,
    )
    .unwrap();
    assert_eq!(
        discrete_ocp_solve(&pb, &SolverConfig::default()),
        Err(Error::SingularControl)
    );
}
