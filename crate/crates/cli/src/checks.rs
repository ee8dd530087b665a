//! The invariant suite run by `varmech check`.
//!
//! Each check returns a short measurement on success and the violated bound
//! on failure. Checks are independent and run in parallel.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use varmech_core::continuous::{
    dirac_secondary_residual, el_residual, hamel_residual, hamel_vector_field, hamilton_vector_field,
    legendre_transform, mu_from_lagrangian, pontryagin_residual, pontryagin_shooting, vakonomic_vector_field,
    ControlSystem, Jet, PontryaginState, Terminal, VakonomicProblem,
};
use varmech_core::discrete::{
    del_residual, del_solve, discrete_momentum, discrete_ocp_cost, discrete_ocp_solve, DiscreteOcp, PairField,
};
use varmech_core::geometry::{
    coordinate_frame, frame_from_vectorfields, lie_algebra, nonholonomic_structure, ControlField, NonholonomicFrame,
    VectorFn,
};
use varmech_core::groupoid::{
    discrete_euler_poincare_solve, groupoid_del_residual, lie_poisson_update, pair_groupoid, so3, GroupoidElement,
};
use varmech_core::numerics::linalg::{dot, max_abs_diff, norm2};
use varmech_core::numerics::{fd_grad, newton, rk4};
use varmech_core::{AlgebroidStructure, Matrix, ScalarField, SolverConfig, StructureTensor};

use crate::catalog;
use crate::expr::{parse_expr, Env};
use crate::run::{lagrangian_system, run_spec, Overrides};
use crate::table::Table;

/// Deliberate faults, used to confirm that the suite can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Fixture {
    /// Negate the structure functions on the Euler-Poincare side of the
    /// Euler-Poincare/Lie-Poisson comparison.
    pub flip_structure_sign: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn(&Fixture) -> Result<String, String>;

pub const CHECKS: &[(&str, Check)] = &[
    ("core/bracket-skew", bracket_skew),
    ("core/projector-law", projector_law),
    ("core/frame-recovery", frame_recovery),
    ("core/gradient-agreement", gradient_agreement),
    ("continuous/operator-identity", operator_identity),
    ("continuous/frame-invariance", frame_invariance),
    ("continuous/legendre-equivalence", legendre_equivalence),
    ("continuous/lie-poisson-casimir", lie_poisson_casimir),
    ("continuous/martinet-first-integral", martinet_first_integral),
    ("continuous/vakonomic-reduction", vakonomic_reduction),
    ("continuous/pontryagin-consistency", pontryagin_consistency),
    ("continuous/euler-poincare-lie-poisson", euler_poincare_lie_poisson),
    ("continuous/dirac-secondary", dirac_secondary),
    ("continuous/lq-pontryagin", lq_pontryagin),
    ("discrete/free-particle", discrete_free_particle),
    ("discrete/noether", discrete_noether),
    ("discrete/midpoint-order", midpoint_order),
    ("discrete/constrained-feasibility", constrained_feasibility),
    ("discrete/ocp-optimality", ocp_optimality),
    ("discrete/lqr-riccati", lqr_riccati),
    ("groupoid/identity-block", identity_block),
    ("groupoid/pair-equivalence", pair_equivalence),
    ("groupoid/casimir-exactness", casimir_exactness),
    ("groupoid/momentum-consistency", momentum_consistency),
    ("numerics/rk4-order", rk4_order),
    ("numerics/newton-quadratic", newton_quadratic),
    ("numerics/fd-gradient", fd_gradient),
    ("cli/csv-roundtrip", csv_roundtrip),
    ("cli/catalog-completeness", catalog_completeness),
    ("cli/parser-roundtrip", parser_roundtrip),
    ("cli/sho-run", sho_run),
];

/// Runs every check whose name contains `only` (all of them when `None`).
pub fn run_checks(only: Option<&str>, fixture: &Fixture) -> Vec<CheckReport> {
    CHECKS
        .par_iter()
        .filter(|(name, _)| only.is_none_or(|pat| name.contains(pat)))
        .map(|(name, check)| {
            let start = Instant::now();
            let outcome =
                std::panic::catch_unwind(|| check(fixture)).unwrap_or_else(|_| Err("check panicked".to_string()));
            let seconds = start.elapsed().as_secs_f64();
            let (passed, detail) = match outcome {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckReport {
                name,
                passed,
                detail,
                seconds,
            }
        })
        .collect()
}

fn bound(label: &str, value: f64, tol: f64) -> Result<String, String> {
    if value <= tol {
        Ok(format!("{label} {value:.2e} <= {tol:.0e}"))
    } else {
        Err(format!("{label} {value:.3e} exceeds {tol:.0e}"))
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sample(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

fn vf(f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> VectorFn {
    Arc::new(f)
}

fn knife_edge_fields() -> Vec<VectorFn> {
    vec![vf(|q| vec![q[2].cos(), q[2].sin(), 0.0]), vf(|_| vec![0.0, 0.0, 1.0])]
}

fn martinet_frame() -> AlgebroidStructure {
    frame_from_vectorfields(
        3,
        vec![
            vf(|_| vec![0.0, 1.0, 0.0]),
            vf(|q| vec![1.0, 0.0, 0.5 * q[1] * q[1]]),
            vf(|_| vec![0.0, 0.0, 1.0]),
        ],
    )
    .expect("Martinet frame is valid")
}

fn bracket_skew(_: &Fixture) -> Result<String, String> {
    let mut structures: Vec<(&str, AlgebroidStructure, f64)> = vec![
        ("coordinate", coordinate_frame(3).map_err(fail)?, 3.0),
        ("so3", lie_algebra(StructureTensor::so3()).map_err(fail)?, 1.0),
        ("martinet", martinet_frame(), 2.0),
        (
            "knife-edge",
            nonholonomic_structure(3, knife_edge_fields(), Arc::new(|_: &[f64]| Matrix::identity(3))).map_err(fail)?,
            3.0,
        ),
    ];
    structures.push((
        "polar",
        frame_from_vectorfields(2, vec![vf(|_| vec![1.0, 0.0]), vf(|q| vec![0.0, q[0]])]).map_err(fail)?,
        1.0,
    ));
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    for (name, s, r) in &structures {
        for _ in 0..100 {
            let mut q = sample(&mut rng, s.base_dim(), *r);
            if *name == "polar" {
                q[0] = 0.5 + q[0].abs();
            }
            worst = worst.max(s.structure(&q).map_err(fail)?.skew_defect());
        }
    }
    bound("max |C^c_ab + C^c_ba|", worst, 1e-7)
}

fn projector_law(_: &Fixture) -> Result<String, String> {
    let metric = Arc::new(|q: &[f64]| {
        Matrix::from_fn(3, 3, |i, j| match (i, j) {
            (0, 0) => 1.0 + q[0] * q[0],
            (1, 1) => 2.0,
            (2, 2) => 1.0,
            (0, 1) | (1, 0) => 0.3,
            _ => 0.0,
        })
    });
    let frame = NonholonomicFrame::new(3, knife_edge_fields(), metric.clone()).map_err(fail)?;
    let mut rng = rng(2);
    let (mut idem, mut sym): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let q = sample(&mut rng, 3, 2.0);
        let p = frame.projector(&q).map_err(fail)?;
        idem = idem.max(p.mul(&p).sub(&p).max_abs());
        let g = metric(&q);
        let v = sample(&mut rng, 3, 1.0);
        let w = sample(&mut rng, 3, 1.0);
        let a = dot(&g.mul_vec(&p.mul_vec(&v)), &w);
        let b = dot(&g.mul_vec(&v), &p.mul_vec(&w));
        sym = sym.max((a - b).abs());
    }
    Ok(format!(
        "{}; {}",
        bound("|P^2 - P|", idem, 1e-10)?,
        bound("|g(Pv,w) - g(v,Pw)|", sym, 1e-10)?
    ))
}

fn frame_recovery(_: &Fixture) -> Result<String, String> {
    let fields = (0..3)
        .map(|i| vf(move |_| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect()))
        .collect();
    let s = frame_from_vectorfields(3, fields).map_err(fail)?;
    let mut rng = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        worst = worst.max(s.structure(&sample(&mut rng, 3, 5.0)).map_err(fail)?.max_abs());
    }
    bound("max |C|", worst, 1e-9)
}

fn gradient_agreement(_: &Fixture) -> Result<String, String> {
    let f = ScalarField::from_qy(2, 1, |q, y| q[0].sin() * y[0] * y[0] + (0.5 * q[1]).exp() - q[0] * q[1])
        .with_gradient(|x| {
            vec![
                x[0].cos() * x[2] * x[2] - x[1],
                0.5 * (0.5 * x[1]).exp() - x[0],
                2.0 * x[0].sin() * x[2],
            ]
        });
    let mut rng = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = sample(&mut rng, 3, 2.0);
        worst = worst.max(f.gradient_check(&x).ok_or("no analytic gradient")?);
    }
    bound("relative gradient gap", worst, 1e-6)
}

fn catalog_lagrangians() -> Result<Vec<(&'static str, AlgebroidStructure, ScalarField)>, String> {
    ["free_particle", "sho", "pendulum", "knife_edge", "rigid_body"]
        .into_iter()
        .map(|name| {
            let spec = catalog::load(name).ok_or(format!("catalog entry {name} missing"))?;
            let (s, l) = lagrangian_system(&spec).map_err(fail)?;
            Ok((name, s, l))
        })
        .collect()
}

fn operator_identity(_: &Fixture) -> Result<String, String> {
    let systems = catalog_lagrangians()?;
    let mut rng = rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (_, s, l) = &systems[rng.random_range(0..systems.len())];
        let (n, m) = (s.base_dim(), s.fiber_rank());
        let q = sample(&mut rng, n, 1.5);
        let y = sample(&mut rng, m, 1.5);
        let ydot = sample(&mut rng, m, 1.5);
        let jet = Jet::admissible(s, 0.0, &q, &y, &ydot).map_err(fail)?;
        let a = hamel_residual(s, l, &jet).map_err(fail)?;
        let mu = mu_from_lagrangian(l);
        let b = el_residual(s, &mu, &jet).map_err(fail)?;
        worst = worst.max(max_abs_diff(&a, &b));
    }
    bound("max |hamel - el|", worst, 1e-7)
}

fn frame_invariance(_: &Fixture) -> Result<String, String> {
    let potential = |q: &[f64]| 0.5 * q[0] * q[0] + 0.25 * q[1].powi(4) + 0.1 * q[0] * q[1];
    let l = ScalarField::from_qy(2, 2, move |q, v| 0.5 * (v[0] * v[0] + v[1] * v[1]) - potential(q));
    let flat = coordinate_frame(2).map_err(fail)?;
    let dt = 1e-3;
    let traj = rk4(
        hamel_vector_field(&flat, &l).map_err(fail)?,
        &[0.8, -0.3, 0.1, 0.6],
        0.0,
        1.0,
        dt,
    )
    .map_err(fail)?;

    // Y1 = d1, Y2 = sin(q1) d1 + d2; rho^{-1} qdot = (v1 - sin(q1) v2, v2).
    let rho = |q: &[f64]| Matrix::from_fn(2, 2, |i, j| [[1.0, q[0].sin()], [0.0, 1.0]][i][j]);
    let frame =
        frame_from_vectorfields(2, vec![vf(|_| vec![1.0, 0.0]), vf(|q| vec![q[0].sin(), 1.0])]).map_err(fail)?;
    let lf = ScalarField::from_qy(2, 2, move |q, y| {
        let v = rho(q).mul_vec(y);
        0.5 * (v[0] * v[0] + v[1] * v[1]) - potential(q)
    });
    let to_frame = |x: &[f64]| vec![x[2] - x[0].sin() * x[3], x[3]];
    let mut worst: f64 = 0.0;
    for k in 1..traj.len() - 1 {
        let x = &traj.states[k];
        let y = to_frame(x);
        let (a, b) = (to_frame(&traj.states[k - 1]), to_frame(&traj.states[k + 1]));
        let ydot: Vec<f64> = (0..2).map(|i| (b[i] - a[i]) / (2.0 * dt)).collect();
        let jet = Jet::admissible(&frame, traj.times[k], &x[..2], &y, &ydot).map_err(fail)?;
        worst = worst.max(
            hamel_residual(&frame, &lf, &jet)
                .map_err(fail)?
                .iter()
                .fold(0.0, |m, v| m.max(v.abs())),
        );
    }
    bound("max frame residual", worst, 1e-5)
}

fn legendre_equivalence(_: &Fixture) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for name in ["sho", "pendulum", "free_particle"] {
        let spec = catalog::load(name).ok_or("catalog entry missing")?;
        let (s, l) = lagrangian_system(&spec).map_err(fail)?;
        let h = legendre_transform(&s, &l).map_err(fail)?;
        let x0 = [0.7, 0.4];
        let p0 = l.partial(&x0, 1..2);
        let a = rk4(hamel_vector_field(&s, &l).map_err(fail)?, &x0, 0.0, 1.0, 1e-3).map_err(fail)?;
        let b = rk4(
            hamilton_vector_field(&s, &h).map_err(fail)?,
            &[x0[0], p0[0]],
            0.0,
            1.0,
            1e-3,
        )
        .map_err(fail)?;
        for (xa, xb) in a.states.iter().zip(&b.states) {
            worst = worst.max((xa[0] - xb[0]).abs());
        }
    }
    bound("max |q_L - q_H|", worst, 1e-6)
}

fn rigid_body_hamiltonian(inertia: [f64; 3]) -> ScalarField {
    ScalarField::from_qy(0, 3, move |_, p| {
        0.5 * (0..3).map(|i| p[i] * p[i] / inertia[i]).sum::<f64>()
    })
    .with_gradient(move |x| (0..3).map(|i| x[i] / inertia[i]).collect())
}

fn lie_poisson_casimir(_: &Fixture) -> Result<String, String> {
    let s = lie_algebra(StructureTensor::so3()).map_err(fail)?;
    let rhs = hamilton_vector_field(&s, &rigid_body_hamiltonian([1.0, 2.0, 3.0])).map_err(fail)?;
    let traj = rk4(rhs, &[0.4, -1.6, 1.5], 0.0, 1.0, 1e-3).map_err(fail)?;
    let c0 = dot(&traj.states[0], &traj.states[0]);
    let drift = traj.states.iter().map(|p| (dot(p, p) - c0).abs()).fold(0.0, f64::max);
    bound("|p|^2 drift", drift, 1e-9)
}

fn martinet_first_integral(_: &Fixture) -> Result<String, String> {
    let spec = catalog::load("martinet").ok_or("catalog entry missing")?;
    let out = run_spec(&spec, &Overrides::default()).map_err(fail)?;
    let drift = out.get("mu3_drift").ok_or("summary lacks mu3_drift")?;

    let l = ScalarField::from_qy(3, 2, |_, y| 0.5 * (y[0] * y[0] + y[1] * y[1]));
    let phi = ScalarField::from_qy(3, 2, |_, _| 0.0);
    let pb = VakonomicProblem::new(martinet_frame(), l, vec![phi]).map_err(fail)?;
    let rhs = vakonomic_vector_field(&pb).map_err(fail)?;
    let traj = rk4(&rhs, &[0.0, 0.2, 0.0, 1.0, 0.5, 0.8], 0.0, 1.0, 1e-3).map_err(fail)?;
    let mut worst: f64 = 0.0;
    for x in &traj.states {
        let d = rhs(0.0, x).map_err(fail)?;
        let (q2, y1, y2, mu) = (x[1], x[3], x[4], x[5]);
        let residuals = [
            d[3] + mu * q2 * y2,
            d[4] - mu * q2 * y1,
            d[5],
            d[0] - y2,
            d[1] - y1,
            d[2] - 0.5 * q2 * q2 * y2,
        ];
        worst = residuals.iter().fold(worst, |m, r| m.max(r.abs()));
    }
    Ok(format!(
        "{}; {}",
        bound("mu3 drift", drift, 1e-9)?,
        bound("max ODE residual", worst, 1e-8)?
    ))
}

fn vakonomic_reduction(_: &Fixture) -> Result<String, String> {
    let s = frame_from_vectorfields(2, vec![vf(|_| vec![1.0, 0.0]), vf(|q| vec![q[1], 1.0])]).map_err(fail)?;
    let l = ScalarField::from_qy(2, 2, |q, y| 0.5 * y[0] * y[0] + y[1] * y[1] + q[0] * y[1] - q[1] * q[1]);
    let pb = VakonomicProblem::new(s.clone(), l.clone(), vec![]).map_err(fail)?;
    let vak = vakonomic_vector_field(&pb).map_err(fail)?;
    let ham = hamel_vector_field(&s, &l).map_err(fail)?;
    let mut rng = rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = sample(&mut rng, 4, 2.0);
        worst = worst.max(max_abs_diff(&vak(0.0, &x).map_err(fail)?, &ham(0.0, &x).map_err(fail)?));
    }
    bound("max |vakonomic - hamel|", worst, 1e-10)
}

fn pontryagin_consistency(_: &Fixture) -> Result<String, String> {
    let s = frame_from_vectorfields(2, vec![vf(|_| vec![1.0, 0.0]), vf(|q| vec![q[1], 1.0])]).map_err(fail)?;
    let gamma = ControlField::new(2, 2, 2, |q, u| vec![u[0] + 0.2 * q[1] * u[1], u[1] - 0.1 * q[0]]);
    let cost = ScalarField::from_qu(2, 2, |q, u| 0.5 * (u[0] * u[0] + 2.0 * u[1] * u[1]) + 0.5 * q[0] * q[0]);
    let system = ControlSystem::new(s.clone(), gamma, cost).map_err(fail)?;
    let cfg = SolverConfig::default();
    let reduced = system.reduced_hamiltonian(cfg);
    let flow = hamilton_vector_field(&s, &reduced).map_err(fail)?;
    let mut rng = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let q = sample(&mut rng, 2, 1.0);
        let mu = sample(&mut rng, 2, 1.0);
        let u = system.solve_control(&q, &mu, &[0.0; 2], &cfg).map_err(fail)?;
        let x: Vec<f64> = q.iter().chain(&mu).copied().collect();
        let d = flow(0.0, &x).map_err(fail)?;
        let state = PontryaginState { q, mu, u };
        let r = pontryagin_residual(&system, &state, &d[..2], &d[2..]).map_err(fail)?;
        worst = worst.max(r.primal.iter().chain(&r.costate).fold(0.0, |m, v| m.max(v.abs())));
    }
    bound("max primal/costate residual", worst, 1e-7)
}

fn euler_poincare_lie_poisson(fx: &Fixture) -> Result<String, String> {
    let inertia = [1.0, 2.0, 3.0];
    let s = lie_algebra(StructureTensor::so3()).map_err(fail)?;
    let ep_structure = if fx.flip_structure_sign {
        s.with_negated_structure()
    } else {
        s.clone()
    };
    let l = ScalarField::from_qy(0, 3, move |_, y| {
        0.5 * (0..3).map(|i| inertia[i] * y[i] * y[i]).sum::<f64>()
    });
    let ep = rk4(
        hamel_vector_field(&ep_structure, &l).map_err(fail)?,
        &[0.4, -0.8, 0.5],
        0.0,
        1.0,
        1e-3,
    )
    .map_err(fail)?;
    let p0 = [0.4, -1.6, 1.5];
    let lp = rk4(
        hamilton_vector_field(&s, &rigid_body_hamiltonian(inertia)).map_err(fail)?,
        &p0,
        0.0,
        1.0,
        1e-3,
    )
    .map_err(fail)?;
    let c0 = norm2(&p0);
    let (mut gap, mut casimir): (f64, f64) = (0.0, 0.0);
    for (xi, p) in ep.states.iter().zip(&lp.states) {
        let mu: Vec<f64> = (0..3).map(|i| inertia[i] * xi[i]).collect();
        gap = gap.max(max_abs_diff(&mu, p));
        casimir = casimir.max((norm2(p) - c0).abs());
    }
    Ok(format!(
        "{}; {}",
        bound("max |I xi - p|", gap, 1e-6)?,
        bound("Casimir drift", casimir, 1e-8)?
    ))
}

fn dirac_secondary(_: &Fixture) -> Result<String, String> {
    let h = ScalarField::from_qy(2, 2, |q, p| 0.5 * (p[0] * p[0] + p[1] * p[1]) + q[0])
        .with_gradient(|x| vec![1.0, 0.0, x[2], x[3]]);
    let phi = ScalarField::from_qy(2, 2, |q, _| q[1]).with_gradient(|_| vec![0.0, 1.0, 0.0, 0.0]);
    let constraints = [phi];
    let mut rng = rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (q, p, lambda) = (
            sample(&mut rng, 2, 2.0),
            sample(&mut rng, 2, 2.0),
            sample(&mut rng, 1, 2.0),
        );
        let r = dirac_secondary_residual(&h, &constraints, &q, &p, &lambda).map_err(fail)?;
        worst = worst.max((r[0] - p[1]).abs());
    }
    bound("max |residual - p2|", worst, 1e-10)
}

/// Five-point central derivative of column `j` at sample `k` (2 <= k < len - 2).
fn five_point(states: &[Vec<f64>], k: usize, j: usize, dt: f64) -> f64 {
    (states[k - 2][j] - 8.0 * states[k - 1][j] + 8.0 * states[k + 1][j] - states[k + 2][j]) / (12.0 * dt)
}

fn lq_pontryagin(_: &Fixture) -> Result<String, String> {
    let spec = catalog::load("lq_pontryagin").ok_or("catalog entry missing")?;
    let out = run_spec(&spec, &Overrides::default()).map_err(fail)?;
    let t_end: f64 = 1.0;
    let mut worst: f64 = 0.0;
    for r in &out.table.rows {
        let t = r[0];
        let q = (t - t_end).cosh() / t_end.cosh();
        let mu = (t - t_end).sinh() / t_end.cosh();
        worst = worst
            .max((r[1] - q).abs())
            .max((r[2] - mu).abs())
            .max((r[3] - mu).abs());
    }

    let system = ControlSystem::new(
        coordinate_frame(1).map_err(fail)?,
        ControlField::new(1, 1, 1, |_, u| vec![u[0]]),
        ScalarField::from_qu(1, 1, |q, u| 0.5 * (q[0] * q[0] + u[0] * u[0])),
    )
    .map_err(fail)?;
    let sol = pontryagin_shooting(
        &system,
        &[1.0],
        &Terminal::ZeroCostate,
        t_end,
        None,
        &SolverConfig::default(),
    )
    .map_err(fail)?;
    let states = &sol.trajectory.states;
    let dt = sol.trajectory.times[1] - sol.trajectory.times[0];
    let mut blocks: f64 = 0.0;
    for k in 2..states.len() - 2 {
        let x = &states[k];
        let state = PontryaginState {
            q: vec![x[0]],
            mu: vec![x[1]],
            u: vec![x[2]],
        };
        let qdot = [five_point(states, k, 0, dt)];
        let mu_dot = [five_point(states, k, 1, dt)];
        blocks = blocks.max(
            pontryagin_residual(&system, &state, &qdot, &mu_dot)
                .map_err(fail)?
                .max_abs(),
        );
    }
    Ok(format!(
        "{}; {}",
        bound("max deviation from cosh profile", worst, 1e-5)?,
        bound("max residual block", blocks, 1e-8)?
    ))
}

fn discrete_free_particle(_: &Fixture) -> Result<String, String> {
    let cfg = SolverConfig::default();
    let h = 0.1;
    let ld = PairField::new(2, move |a, b| {
        0.5 * h * a.iter().zip(b).map(|(x, y)| ((y - x) / h).powi(2)).sum::<f64>()
    });
    let traj = del_solve(&ld, &[0.0, 1.0], &[0.1, 0.95], 1000, &cfg).map_err(fail)?;
    let worst = traj
        .states
        .windows(3)
        .map(|w| {
            (0..2)
                .map(|i| (w[2][i] - (2.0 * w[1][i] - w[0][i])).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    bound("max |q_next - (2q - q_prev)|", worst, cfg.newton_tol)
}

fn discrete_noether(_: &Fixture) -> Result<String, String> {
    let cfg = SolverConfig::default();
    let h = 0.05;
    // Midpoint rule for L(q, y) = |y|^2/2 + y1^4/10 + (y1 y2)^2/20, which does not depend on q.
    let ld = PairField::new(2, move |a, b| {
        let v0 = (b[0] - a[0]) / h;
        let v1 = (b[1] - a[1]) / h;
        h * (0.5 * (v0 * v0 + v1 * v1) + 0.1 * v0.powi(4) + 0.05 * (v0 * v1).powi(2))
    });
    let mut rng = rng(9);
    for _ in 0..20 {
        let (a, b, s) = (
            sample(&mut rng, 2, 1.0),
            sample(&mut rng, 2, 1.0),
            sample(&mut rng, 2, 3.0),
        );
        let a2: Vec<f64> = a.iter().zip(&s).map(|(x, d)| x + d).collect();
        let b2: Vec<f64> = b.iter().zip(&s).map(|(x, d)| x + d).collect();
        let gap = (ld.eval(&a, &b) - ld.eval(&a2, &b2)).abs();
        if gap > 1e-9 * ld.eval(&a, &b).abs().max(1.0) {
            return Err(format!("L_d is not translation invariant (gap {gap:e})"));
        }
    }
    let traj = del_solve(&ld, &[0.0, 0.0], &[0.05, -0.02], 1000, &cfg).map_err(fail)?;
    let p0 = discrete_momentum(&ld, &traj.states[0], &traj.states[1]);
    let drift = traj
        .states
        .windows(2)
        .map(|w| max_abs_diff(&discrete_momentum(&ld, &w[0], &w[1]), &p0))
        .fold(0.0, f64::max);
    bound("momentum drift", drift, 10.0 * cfg.newton_tol)
}

pub fn midpoint_sho_error(h: f64, t_end: f64) -> Result<f64, String> {
    let ld = PairField::new(1, move |a, b| {
        let v = (b[0] - a[0]) / h;
        let m = 0.5 * (a[0] + b[0]);
        h * (0.5 * v * v - 0.5 * m * m)
    });
    let steps = (t_end / h).round() as usize;
    let traj = del_solve(&ld, &[1.0], &[h.cos()], steps - 1, &SolverConfig::default()).map_err(fail)?;
    Ok(traj
        .states
        .iter()
        .enumerate()
        .map(|(k, q)| (q[0] - (k as f64 * h).cos()).abs())
        .fold(0.0, f64::max))
}

fn midpoint_order(_: &Fixture) -> Result<String, String> {
    let ratio = midpoint_sho_error(0.02, 10.0)? / midpoint_sho_error(0.01, 10.0)?;
    if (3.5..=4.5).contains(&ratio) {
        Ok(format!("error ratio {ratio:.3} in [3.5, 4.5]"))
    } else {
        Err(format!("error ratio {ratio:.3} outside [3.5, 4.5]"))
    }
}

fn constrained_feasibility(_: &Fixture) -> Result<String, String> {
    let spec = catalog::load("discrete_planar_pendulum").ok_or("catalog entry missing")?;
    let out = run_spec(&spec, &Overrides::default()).map_err(fail)?;
    let gap = out
        .get("constraint_residual")
        .ok_or("summary lacks constraint_residual")?;
    bound("max |Phi|", gap, SolverConfig::default().newton_tol)
}

fn scalar_lqr(a: f64, b: f64, q: f64, r: f64, h: f64, steps: usize) -> Result<DiscreteOcp, String> {
    DiscreteOcp::new(
        ControlField::new(1, 1, 1, move |x, u| vec![a * x[0] + b * u[0]]),
        ScalarField::from_qu(1, 1, move |x, u| 0.5 * h * (q * x[0] * x[0] + r * u[0] * u[0])),
        vec![1.0],
        steps,
        Terminal::ZeroCostate,
    )
    .map_err(fail)
}

fn ocp_optimality(_: &Fixture) -> Result<String, String> {
    let h = 0.1;
    let nonlinear = DiscreteOcp::new(
        ControlField::new(2, 1, 2, move |x, u| {
            vec![x[0] + h * x[1], x[1] + h * (u[0] - x[0].sin())]
        }),
        ScalarField::from_qu(2, 1, move |x, u| {
            0.5 * h * (x[0] * x[0] + 0.1 * x[1] * x[1] + u[0] * u[0])
        }),
        vec![1.0, 0.0],
        15,
        Terminal::ZeroCostate,
    )
    .map_err(fail)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    for pb in [scalar_lqr(1.0, 0.1, 1.0, 0.5, 0.1, 20)?, nonlinear] {
        let sol = discrete_ocp_solve(&pb, &SolverConfig::default()).map_err(fail)?;
        for k in 0..sol.controls.len() {
            for j in 0..sol.controls[k].len() {
                for d in [-1e-4, 1e-4] {
                    let mut u = sol.controls.clone();
                    u[k][j] += d;
                    let (_, c) = discrete_ocp_cost(&pb, &u);
                    worst = worst.max(sol.cost - c);
                }
            }
        }
    }
    bound("largest cost decrease", worst, 1e-9)
}

fn lqr_riccati(_: &Fixture) -> Result<String, String> {
    let (a, b, q, r, h, steps) = (1.0, 0.1, 1.0, 0.5, 0.1, 20);
    let sol = discrete_ocp_solve(&scalar_lqr(a, b, q, r, h, steps)?, &SolverConfig::default()).map_err(fail)?;
    let mut p = 0.0;
    let mut gains = vec![0.0; steps];
    for k in (0..steps).rev() {
        gains[k] = b * p * a / (r * h + b * b * p);
        p = q * h + a * a * p - a * b * p * gains[k];
    }
    let mut x = 1.0;
    let mut worst: f64 = 0.0;
    for (k, gain) in gains.iter().enumerate() {
        let u = -gain * x;
        worst = worst.max((sol.controls[k][0] - u).abs());
        x = a * x + b * u;
    }
    bound("max |u - u_riccati|", worst, 1e-8)
}

fn identity_block(_: &Fixture) -> Result<String, String> {
    let mut rng = rng(10);
    let mut parts = Vec::new();
    for (name, model, r) in [("pair", pair_groupoid(2), 2.0), ("so3", so3().model, 1.0)] {
        let samples: Vec<_> = (0..100)
            .map(|_| {
                let q = sample(&mut rng, model.base_dim(), r);
                let v = sample(&mut rng, model.fiber_dim(), r / 2.0);
                let w = sample(&mut rng, model.fiber_dim(), r / 2.0);
                (q, v, w)
            })
            .collect();
        let rep = model.verify_identity_block(&samples).map_err(fail)?;
        parts.push(bound(&format!("{name} first"), rep.first.max(rep.values), 1e-7)?);
        parts.push(bound(&format!("{name} second"), rep.second, 1e-5)?);
    }
    Ok(parts.join("; "))
}

fn pair_equivalence(_: &Fixture) -> Result<String, String> {
    let h = 0.1;
    let hat_ld = move |a: &[f64], b: &[f64]| {
        let kin: f64 = a.iter().zip(b).map(|(x, y)| ((y - x) / h).powi(2)).sum::<f64>() * 0.5 * h;
        let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
        kin - h * (mid[0].cos() + mid[0] * mid[1] + 0.25 * mid[1].powi(4))
    };
    let pair = PairField::new(2, hat_ld);
    let ld = ScalarField::from_qy(2, 2, move |q, v| {
        let b: Vec<f64> = q.iter().zip(v).map(|(x, y)| x + y).collect();
        hat_ld(q, &b)
    });
    let model = pair_groupoid(2);
    let mut rng = rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let q0 = sample(&mut rng, 2, 2.0);
        let q1: Vec<f64> = q0.iter().map(|x| x + rng.random_range(-0.2..0.2)).collect();
        let q2: Vec<f64> = q1.iter().map(|x| x + rng.random_range(-0.2..0.2)).collect();
        let g = GroupoidElement::new(q0.clone(), q1.iter().zip(&q0).map(|(a, b)| a - b).collect());
        let hh = GroupoidElement::new(q1.clone(), q2.iter().zip(&q1).map(|(a, b)| a - b).collect());
        let r = groupoid_del_residual(&model, &ld, &g, &hh).map_err(fail)?;
        worst = worst.max(max_abs_diff(&r, &del_residual(&pair, &q0, &q1, &q2).map_err(fail)?));
    }
    bound("max |groupoid - pair residual|", worst, 1e-6)
}

fn casimir_exactness(_: &Fixture) -> Result<String, String> {
    let group = so3();
    let mut rng = rng(12);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let v = sample(&mut rng, 3, 1.7);
        let mu = sample(&mut rng, 3, 1.0);
        let out = lie_poisson_update(&group, &v, &mu).map_err(fail)?;
        worst = worst.max((norm2(&out) - norm2(&mu)).abs());
    }
    bound("max ||Ad* mu| - |mu||", worst, 1e-13)
}

fn momentum_consistency(_: &Fixture) -> Result<String, String> {
    let cfg = SolverConfig::default();
    let group = so3();
    let h = 0.05;
    let inertia = [1.0, 2.0, 3.0];
    let ld = ScalarField::from_qy(0, 3, move |_, v| {
        0.5 / h * (0..3).map(|i| inertia[i] * v[i] * v[i]).sum::<f64>()
    });
    let v0 = vec![0.05, 0.02, -0.03];
    let sol = discrete_euler_poincare_solve(&group, &ld, &v0, 200, &cfg).map_err(fail)?;
    let mut worst: f64 = 0.0;
    let mut prev = v0;
    for (k, v) in sol.velocities.iter().enumerate() {
        let updated = lie_poisson_update(&group, &prev, &sol.momenta[k]).map_err(fail)?;
        worst = worst.max(max_abs_diff(&updated, &sol.momenta[k + 1]));
        prev = v.clone();
    }
    bound("max |mu_next - Ad* mu|", worst, 10.0 * cfg.newton_tol)
}

fn rk4_order(_: &Fixture) -> Result<String, String> {
    let err = |dt: f64| -> Result<f64, String> {
        let traj = rk4(|_, x: &[f64]| Ok(vec![x[0]]), &[1.0], 0.0, 1.0, dt).map_err(fail)?;
        Ok((traj.states.last().ok_or("empty trajectory")?[0] - 1f64.exp()).abs())
    };
    let ratio = err(0.1)? / err(0.05)?;
    if (12.0..=20.0).contains(&ratio) {
        Ok(format!("error ratio {ratio:.2} in [12, 20]"))
    } else {
        Err(format!("error ratio {ratio:.2} outside [12, 20]"))
    }
}

fn newton_quadratic(_: &Fixture) -> Result<String, String> {
    let rep = newton(|x| Ok(vec![x[0] * x[0] - 2.0]), &[1.0], &SolverConfig::default()).map_err(fail)?;
    let errors: Vec<f64> = rep.iterates.iter().map(|x| (x[0] - 2f64.sqrt()).abs()).collect();
    // The last step is only informative while rounding does not dominate.
    let informative: Vec<&[f64]> = errors.windows(2).filter(|w| w[0] > 1e-7).collect();
    let w = informative.last().ok_or("too few iterates")?;
    if w[1] <= 10.0 * w[0] * w[0] {
        Ok(format!("error {:.1e} -> {:.1e}", w[0], w[1]))
    } else {
        Err(format!("error {:.1e} -> {:.1e} is not quadratic", w[0], w[1]))
    }
}

fn fd_gradient(_: &Fixture) -> Result<String, String> {
    let f = |x: &[f64]| x[0].powi(3) - 2.0 * x[0] * x[1] + 0.5 * x[1].powi(2) * x[2] + 4.0 * x[2];
    let g = |x: &[f64]| {
        vec![
            3.0 * x[0] * x[0] - 2.0 * x[1],
            -2.0 * x[0] + x[1] * x[2],
            0.5 * x[1] * x[1] + 4.0,
        ]
    };
    let mut rng = rng(13);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = sample(&mut rng, 3, 2.0);
        worst = worst.max(max_abs_diff(&fd_grad(f, &x), &g(&x)));
    }
    bound("max |fd - analytic|", worst, 1e-8)
}

fn csv_roundtrip(_: &Fixture) -> Result<String, String> {
    let spec = catalog::load("pendulum").ok_or("catalog entry missing")?;
    let out = run_spec(
        &spec,
        &Overrides {
            t1: Some(0.5),
            ..Overrides::default()
        },
    )
    .map_err(fail)?;
    let back = Table::read(out.table.to_csv_string().as_bytes()).map_err(fail)?;
    let same = back.header == out.table.header
        && back.rows.len() == out.table.rows.len()
        && back
            .rows
            .iter()
            .flatten()
            .zip(out.table.rows.iter().flatten())
            .all(|(a, b)| a.to_bits() == b.to_bits());
    if same {
        Ok(format!("{} rows bit-identical", back.rows.len()))
    } else {
        Err("values changed in the CSV round trip".into())
    }
}

/// Examples that must be runnable by name.
pub const REQUIRED_CATALOG: [&str; 12] = [
    "free_particle",
    "sho",
    "pendulum",
    "martinet",
    "rigid_body",
    "so3_lie_poisson",
    "lq_pontryagin",
    "discrete_free_particle",
    "discrete_sho",
    "discrete_lqr",
    "so3_discrete_lie_poisson",
    "pair_groupoid_del",
];

fn catalog_completeness(_: &Fixture) -> Result<String, String> {
    for name in REQUIRED_CATALOG {
        if catalog::text(name).is_none() {
            return Err(format!("catalog lacks {name}"));
        }
    }
    let failures: Vec<String> = catalog::names()
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|name| {
            let spec = catalog::load(name)?;
            run_spec(&spec, &Overrides::default())
                .err()
                .map(|e| format!("{name}: {e}"))
        })
        .collect();
    if failures.is_empty() {
        Ok(format!("{} entries run", catalog::ENTRIES.len()))
    } else {
        Err(failures.join("; "))
    }
}

/// Random syntactically valid expression text over `q1..q3, y1..y3, p1,
/// u1, t, h`.
pub fn random_expression(rng: &mut impl Rng, depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..6) {
            0 => format!("{}", rng.random_range(0.0..10.0)),
            1 => format!("{}", rng.random_range(0..20)),
            2 => ["t", "h", "pi", "p1", "u1"][rng.random_range(0..5)].to_string(),
            3 => format!("{:e}", rng.random_range(1e-3..1e3)),
            _ => format!("{}{}", ["q", "y"][rng.random_range(0..2)], rng.random_range(1..4)),
        };
    }
    let a = random_expression(rng, depth - 1);
    match rng.random_range(0..10) {
        0..=4 => {
            let b = random_expression(rng, depth - 1);
            let op = ["+", "-", "*", "/", "^"][rng.random_range(0..5)];
            if rng.random_bool(0.5) {
                format!("({a}){op}({b})")
            } else {
                format!("{a} {op} {b}")
            }
        }
        5 | 6 => format!("-{a}"),
        7 => format!("({a})"),
        _ => {
            let f = ["sin", "cos", "tan", "exp", "log", "sqrt", "abs"][rng.random_range(0..7)];
            format!("{f}({a})")
        }
    }
}

/// Evaluations agree: equal, both NaN, or within `1e-12` relative.
pub fn same_value(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-12 * a.abs().max(1.0)
}

fn parser_roundtrip(_: &Fixture) -> Result<String, String> {
    let mut rng = rng(14);
    for _ in 0..200 {
        let text = random_expression(&mut rng, 5);
        let e = parse_expr(&text).map_err(|err| format!("'{text}': {err}"))?;
        let printed = e.to_string();
        let back = parse_expr(&printed).map_err(|err| format!("reprint '{printed}': {err}"))?;
        for _ in 0..5 {
            let (q, y) = (sample(&mut rng, 3, 2.0), sample(&mut rng, 3, 2.0));
            let (p, u) = (sample(&mut rng, 1, 2.0), sample(&mut rng, 1, 2.0));
            let env = Env {
                t: rng.random_range(0.0..3.0),
                h: rng.random_range(0.01..0.1),
                q: &q,
                y: &y,
                p: &p,
                u: &u,
            };
            let (a, b) = (e.eval(&env), back.eval(&env));
            if !same_value(a, b) {
                return Err(format!("'{text}' -> '{printed}': {a} vs {b}"));
            }
        }
    }
    Ok("200 expressions round-trip".into())
}

fn sho_run(_: &Fixture) -> Result<String, String> {
    let spec = catalog::load("sho").ok_or("catalog entry missing")?;
    let out = run_spec(&spec, &Overrides::default()).map_err(fail)?;
    if out.table.header != ["t", "q1", "y1"] {
        return Err(format!("unexpected header {:?}", out.table.header));
    }
    let worst = out
        .table
        .rows
        .iter()
        .map(|r| (r[1] - r[0].cos()).abs())
        .fold(0.0, f64::max);
    bound("max |q1 - cos t|", worst, 1e-6)
}
