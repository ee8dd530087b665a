//! Builds solver inputs from a [`ProblemSpec`] and runs them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;
use varmech_core::continuous::{
    hamel_vector_field, hamilton_vector_field, lagrangian_energy, pontryagin_shooting, vakonomic_vector_field,
    ControlSystem, Terminal, VakonomicProblem,
};
use varmech_core::discrete::{
    del_residual, del_solve, discrete_constrained_step, discrete_momentum, discrete_ocp_solve, DiscreteOcp, PairField,
};
use varmech_core::geometry::{
    coordinate_frame, frame_from_vectorfields, lie_algebra, nonholonomic_structure, ControlField, MatrixFn, VectorFn,
};
use varmech_core::groupoid::{
    discrete_euler_poincare_solve, groupoid_del_residual, groupoid_del_step, groupoid_ocp_solve, pair_groupoid, so3,
    GroupoidElement, GroupoidModel, GroupoidOcp,
};
use varmech_core::numerics::linalg::{norm2, norm_inf};
use varmech_core::numerics::rk4;
use varmech_core::{AlgebroidStructure, Arity, Matrix, ScalarField, SolverConfig, StructureTensor, Trajectory};

use crate::expr::{format_float, Env, Expr, Var, VarKind};
use crate::spec::{indexed, Entry, Kind, ProblemSpec, SpecError};
use crate::table::Table;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("solver failed: {0}")]
    Solver(#[from] varmech_core::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Spec(_) => 2,
            RunError::Solver(_) => 1,
        }
    }
}

/// Command-line replacements for the step parameters in a spec.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t1: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub kind: Kind,
    pub table: Table,
    /// Named scalar diagnostics, mostly drifts of conserved quantities.
    pub summary: Vec<(String, f64)>,
}

impl RunOutput {
    pub fn summary_line(&self) -> String {
        let mut s = format!("{} rows={}", self.kind.name(), self.table.rows.len());
        for (k, v) in &self.summary {
            let _ = write!(s, " {k}={}", format_float(*v));
        }
        s
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

pub fn run_spec(spec: &ProblemSpec, ov: &Overrides) -> Result<RunOutput, RunError> {
    let params = Params::new(spec, ov)?;
    let (table, summary) = match spec.kind {
        Kind::Lagrangian | Kind::EulerPoincare => run_lagrangian(spec, &params)?,
        Kind::Hamiltonian | Kind::LiePoisson => run_hamiltonian(spec, &params)?,
        Kind::Vakonomic => run_vakonomic(spec, &params)?,
        Kind::Pontryagin => run_pontryagin(spec, &params)?,
        Kind::DiscreteEl => run_discrete_el(spec, &params)?,
        Kind::DiscreteConstrained => run_discrete_constrained(spec, &params)?,
        Kind::DiscreteOcp => run_discrete_ocp(spec, &params)?,
        Kind::GroupoidDel => run_groupoid_del(spec, &params)?,
    };
    Ok(RunOutput {
        kind: spec.kind,
        table,
        summary,
    })
}

struct Params {
    dt: f64,
    t1: Option<f64>,
    steps: Option<usize>,
    config: SolverConfig,
}

impl Params {
    fn new(spec: &ProblemSpec, ov: &Overrides) -> Result<Self, SpecError> {
        let dt = ov.dt.or(spec.dt).unwrap_or(1e-3);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SpecError::general(format!("step size must be positive, got {dt}")));
        }
        if let Some(t1) = ov.t1.or(spec.t1) {
            if !(t1 > 0.0 && t1.is_finite()) {
                return Err(SpecError::general(format!("final time must be positive, got {t1}")));
            }
        }
        let config = SolverConfig {
            rk_dt: dt,
            ..SolverConfig::default()
        };
        Ok(Params {
            dt,
            t1: ov.t1.or(spec.t1),
            steps: ov.steps.or(spec.steps),
            config,
        })
    }

    fn t1(&self, spec: &ProblemSpec) -> Result<f64, SpecError> {
        self.t1
            .ok_or_else(|| SpecError::general(format!("{} problem needs 't1'", spec.kind.name())))
    }

    fn steps(&self, spec: &ProblemSpec) -> Result<usize, SpecError> {
        self.steps
            .ok_or_else(|| SpecError::general(format!("{} problem needs 'steps'", spec.kind.name())))
    }
}

/// Which variables an expression may use.
#[derive(Debug, Clone, Copy, Default)]
struct Vars {
    time: bool,
    step: bool,
    q: usize,
    y: usize,
    p: usize,
    u: usize,
}

impl Vars {
    fn count(&self, k: VarKind) -> usize {
        match k {
            VarKind::Q => self.q,
            VarKind::Y => self.y,
            VarKind::P => self.p,
            VarKind::U => self.u,
        }
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        for k in [VarKind::Q, VarKind::Y, VarKind::P, VarKind::U] {
            let c = self.count(k);
            let l = k.letter();
            match c {
                0 => {}
                1 => parts.push(format!("{l}1")),
                _ => parts.push(format!("{l}1..{l}{c}")),
            }
        }
        if self.time {
            parts.push("t".into());
        }
        if self.step {
            parts.push("h".into());
        }
        if parts.is_empty() {
            "constants only".into()
        } else {
            format!("available: {}", parts.join(", "))
        }
    }
}

fn compile(e: &Entry, vars: Vars) -> Result<Expr, SpecError> {
    let expr = e.expr()?;
    for v in expr.vars() {
        let ok = match v {
            Var::Time => vars.time,
            Var::Step => vars.step,
            Var::Indexed(k, i) => i <= vars.count(k),
        };
        if !ok {
            return Err(e.error(format!("variable {v} is not defined here ({})", vars.describe())));
        }
    }
    Ok(expr)
}

fn compile_list(e: &Entry, vars: Vars, len: usize) -> Result<Vec<Expr>, SpecError> {
    let items = e.items();
    if items.len() != len {
        return Err(e.error(format!("expected {len} comma-separated entries, found {}", items.len())));
    }
    items.iter().map(|i| compile(i, vars)).collect()
}

fn uses_time(exprs: &[&Expr]) -> bool {
    exprs.iter().any(|e| e.uses(Var::Time))
}

/// Scalar field over the packed layout `arity`; the fiber block binds to
/// `y` or `p` depending on `fiber`.
fn bind(x: &[f64], arity: Arity, fiber: VarKind, h: f64) -> Env<'_> {
    let mut e = Env {
        t: arity.time_index().map_or(0.0, |i| x[i]),
        h,
        q: &x[arity.base_range()],
        u: &x[arity.control_range()],
        ..Env::default()
    };
    if fiber == VarKind::P {
        e.p = &x[arity.fiber_range()];
    } else {
        e.y = &x[arity.fiber_range()];
    }
    e
}

/// Exact gradients come from symbolic differentiation when available.
fn field(expr: Expr, arity: Arity, fiber: VarKind, h: f64) -> ScalarField {
    let slots: Vec<Var> = (0..arity.len())
        .map(|i| {
            if arity.time_index() == Some(i) {
                Var::Time
            } else if arity.base_range().contains(&i) {
                Var::Indexed(VarKind::Q, i - arity.base_range().start + 1)
            } else if arity.fiber_range().contains(&i) {
                Var::Indexed(fiber, i - arity.fiber_range().start + 1)
            } else {
                Var::Indexed(VarKind::U, i - arity.control_range().start + 1)
            }
        })
        .collect();
    let gradient: Option<Vec<Expr>> = slots.iter().map(|v| expr.derivative(*v)).collect();
    let f = ScalarField::new(arity, move |x| expr.eval(&bind(x, arity, fiber, h)));
    match gradient {
        Some(g) => f.with_gradient(move |x| {
            let e = bind(x, arity, fiber, h);
            g.iter().map(|d| d.eval(&e)).collect()
        }),
        None => f,
    }
}

fn pair_field(expr: Expr, n: usize, h: f64) -> PairField {
    PairField::new(n, move |a, b| {
        expr.eval(&Env {
            h,
            q: a,
            y: b,
            ..Env::default()
        })
    })
}

fn control_field(exprs: Vec<Expr>, n: usize, k: usize, h: f64) -> ControlField {
    let out = exprs.len();
    ControlField::new(n, k, out, move |q, u| {
        let env = Env {
            h,
            q,
            u,
            ..Env::default()
        };
        exprs.iter().map(|e| e.eval(&env)).collect()
    })
}

fn vector_fn(exprs: Vec<Expr>) -> VectorFn {
    Arc::new(move |q: &[f64]| {
        let env = Env { q, ..Env::default() };
        exprs.iter().map(|e| e.eval(&env)).collect()
    })
}

fn check_section(spec: &ProblemSpec, name: &str, prefix: &str) -> Result<Vec<Entry>, SpecError> {
    let Some(section) = spec.section(name) else {
        return Err(SpecError::general(format!("missing section [{name}]")));
    };
    for (key, e) in section {
        let ok = key
            .strip_prefix(prefix)
            .is_some_and(|r| !r.is_empty() && r.bytes().all(|b| b.is_ascii_digit()));
        if !ok {
            return Err(SpecError::new(e.line, 0, format!("unexpected key '{key}' in [{name}]")));
        }
    }
    Ok(indexed(section, prefix)?.into_iter().cloned().collect())
}

fn build_error(e: varmech_core::Error) -> SpecError {
    SpecError::general(e.to_string())
}

/// An algebroid from the `structure` key, with a flag telling whether it is
/// `so(3)` (which has the Casimir `|mu|`).
fn algebroid(spec: &ProblemSpec) -> Result<(AlgebroidStructure, bool), SpecError> {
    let default = if matches!(spec.kind, Kind::EulerPoincare | Kind::LiePoisson) {
        "algebra"
    } else {
        "coordinate"
    };
    let s = spec.structure().map_or(default, |e| e.value.as_str());
    if matches!(spec.kind, Kind::EulerPoincare | Kind::LiePoisson) && s != "algebra" {
        let e = spec.structure().expect("non-default value came from the file");
        return Err(e.error(format!("{} problems live on a Lie algebra", spec.kind.name())));
    }
    match s {
        "coordinate" => {
            let n = spec.dim("n")?;
            check_m(spec, n)?;
            Ok((coordinate_frame(n).map_err(build_error)?, false))
        }
        "frame" => {
            let n = spec.dim("n")?;
            check_m(spec, n)?;
            let fields = check_section(spec, "frame", "field")?;
            if fields.len() != n {
                return Err(SpecError::general(format!(
                    "[frame] needs field1..field{n}, found {}",
                    fields.len()
                )));
            }
            let vars = Vars {
                q: n,
                ..Vars::default()
            };
            let fns = fields
                .iter()
                .map(|e| compile_list(e, vars, n).map(vector_fn))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((frame_from_vectorfields(n, fns).map_err(build_error)?, false))
        }
        "algebra" => {
            if let Some(n) = spec.get("n") {
                if n.integer()? != 0 {
                    return Err(n.error("a Lie algebra has n = 0"));
                }
            }
            let c = structure_constants(spec)?;
            let is_so3 = c == StructureTensor::so3();
            Ok((lie_algebra(c).map_err(build_error)?, is_so3))
        }
        "nonholonomic" => {
            let n = spec.dim("n")?;
            let fields = check_section(spec, "distribution", "field")?;
            let vars = Vars {
                q: n,
                ..Vars::default()
            };
            let fns = fields
                .iter()
                .map(|e| compile_list(e, vars, n).map(vector_fn))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(m) = spec.get("m") {
                if m.integer()? != fns.len() {
                    return Err(m.error(format!(
                        "m must equal the number of distribution fields ({})",
                        fns.len()
                    )));
                }
            }
            let metric: MatrixFn = if spec.section("metric").is_some() {
                let rows = check_section(spec, "metric", "row")?;
                if rows.len() != n {
                    return Err(SpecError::general(format!("[metric] needs row1..row{n}")));
                }
                let exprs = rows
                    .iter()
                    .map(|e| compile_list(e, vars, n))
                    .collect::<Result<Vec<_>, _>>()?;
                Arc::new(move |q: &[f64]| {
                    let env = Env { q, ..Env::default() };
                    Matrix::from_fn(n, n, |i, j| exprs[i][j].eval(&env))
                })
            } else {
                Arc::new(move |_: &[f64]| Matrix::identity(n))
            };
            Ok((nonholonomic_structure(n, fns, metric).map_err(build_error)?, false))
        }
        other => {
            let e = spec.structure().expect("non-default value came from the file");
            Err(e.error(format!(
                "unknown structure '{other}' (expected coordinate, frame, algebra or nonholonomic)"
            )))
        }
    }
}

fn check_m(spec: &ProblemSpec, n: usize) -> Result<(), SpecError> {
    if let Some(m) = spec.get("m") {
        if m.integer()? != n {
            return Err(m.error(format!("this structure has m = n = {n}")));
        }
    }
    Ok(())
}

/// `algebra = so3`, or `m` with an `[algebra]` section of entries
/// `Cc_a_b = value` (one-based; the skew partner is implied).
fn structure_constants(spec: &ProblemSpec) -> Result<StructureTensor, SpecError> {
    if let Some(e) = spec.get("algebra") {
        if e.value != "so3" {
            return Err(e.error(format!("unknown algebra '{}' (only so3 is built in)", e.value)));
        }
        if spec.section("algebra").is_some() {
            return Err(e.error("give either 'algebra = so3' or an [algebra] section, not both"));
        }
        if let Some(m) = spec.get("m") {
            if m.integer()? != 3 {
                return Err(m.error("so3 has m = 3"));
            }
        }
        return Ok(StructureTensor::so3());
    }
    let m = spec.dim("m")?;
    let mut c = StructureTensor::zeros(m);
    let mut seen = BTreeMap::new();
    for (key, e) in spec.section("algebra").into_iter().flatten() {
        let idx: Option<Vec<usize>> = key
            .strip_prefix('C')
            .map(|r| r.split('_').map(|s| s.parse().ok()).collect::<Option<Vec<usize>>>())
            .unwrap_or(None);
        let Some([ci, a, b]) = idx.as_deref().map(|v| <[usize; 3]>::try_from(v).ok()).unwrap_or(None) else {
            return Err(SpecError::new(
                e.line,
                0,
                format!("expected a key of the form Cc_a_b, found '{key}'"),
            ));
        };
        if [ci, a, b].iter().any(|&i| i == 0 || i > m) {
            return Err(SpecError::new(e.line, 0, format!("index in '{key}' outside 1..{m}")));
        }
        if a == b {
            return Err(SpecError::new(e.line, 0, format!("'{key}' has equal lower indices")));
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        if seen.insert((ci, lo, hi), key.clone()).is_some() {
            return Err(SpecError::new(
                e.line,
                0,
                format!("'{key}' repeats an earlier constant"),
            ));
        }
        c.set_skew(ci - 1, lo - 1, hi - 1, sign * e.number()?);
    }
    Ok(c)
}

/// Initial vector; may be omitted when empty.
fn initial(spec: &ProblemSpec, key: &str, len: usize) -> Result<Vec<f64>, SpecError> {
    if len == 0 && spec.get(key).is_none() {
        return Ok(Vec::new());
    }
    spec.vector(key, len)
}

fn labels(prefix: &str, range: std::ops::RangeInclusive<usize>) -> Vec<String> {
    range.map(|i| format!("{prefix}{i}")).collect()
}

fn max_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else { return 0.0 };
    it.map(|v| (v - first).abs()).fold(0.0, f64::max)
}

fn relabel(traj: Trajectory, labels: Vec<String>) -> Result<Trajectory, RunError> {
    Ok(traj.relabel(labels)?)
}

type Outcome = Result<(Table, Vec<(String, f64)>), RunError>;

/// Structure and Lagrangian of a `lagrangian` or `euler_poincare` spec.
pub fn lagrangian_system(spec: &ProblemSpec) -> Result<(AlgebroidStructure, ScalarField), SpecError> {
    lagrangian_parts(spec, spec.dt.unwrap_or(1e-3)).map(|(s, l, _)| (s, l))
}

fn lagrangian_parts(spec: &ProblemSpec, dt: f64) -> Result<(AlgebroidStructure, ScalarField, bool), SpecError> {
    if !matches!(spec.kind, Kind::Lagrangian | Kind::EulerPoincare) {
        return Err(SpecError::general(format!(
            "{} is not a Lagrangian problem",
            spec.kind.name()
        )));
    }
    // The reduced Lagrangian of an Euler-Poincare problem is written `l`.
    let key = if spec.kind == Kind::EulerPoincare { "l" } else { "L" };
    spec.check_keys(&["n", "m", key, "q0", "y0"], &[])?;
    let (s, is_so3) = algebroid(spec)?;
    let (n, m) = (s.base_dim(), s.fiber_rank());
    let vars = Vars {
        time: true,
        q: n,
        y: m,
        ..Vars::default()
    };
    let expr = compile(spec.require(key)?, vars)?;
    let arity = if uses_time(&[&expr]) {
        Arity::qy(n, m).with_time()
    } else {
        Arity::qy(n, m)
    };
    Ok((s, field(expr, arity, VarKind::Y, dt), is_so3))
}

fn run_lagrangian(spec: &ProblemSpec, p: &Params) -> Outcome {
    let (s, l, is_so3) = lagrangian_parts(spec, p.dt)?;
    let (n, m) = (s.base_dim(), s.fiber_rank());
    let timed = l.arity().time;
    let mut x0 = initial(spec, "q0", n)?;
    x0.extend(spec.vector("y0", m)?);
    let rhs = hamel_vector_field(&s, &l).map_err(build_error)?;
    let traj = rk4(&rhs, &x0, 0.0, p.t1(spec)?, p.dt)?;
    let mut summary = Vec::new();
    if !timed {
        let e = traj.states.iter().map(|x| lagrangian_energy(&l, 0.0, &x[..n], &x[n..]));
        summary.push(("energy_drift".into(), max_drift(e)));
    }
    if is_so3 {
        let c = traj.states.iter().map(|x| {
            let a = l.arity();
            norm2(&l.partial(&a.pack(0.0, &[], x, &[]), a.fiber_range()))
        });
        summary.push(("casimir_drift".into(), max_drift(c)));
    }
    let mut names = labels("q", 1..=n);
    names.extend(labels("y", 1..=m));
    Ok((Table::from_trajectory(&relabel(traj, names)?), summary))
}

fn run_hamiltonian(spec: &ProblemSpec, p: &Params) -> Outcome {
    spec.check_keys(&["n", "m", "H", "q0", "p0"], &[])?;
    let (s, is_so3) = algebroid(spec)?;
    let (n, m) = (s.base_dim(), s.fiber_rank());
    let vars = Vars {
        time: true,
        q: n,
        p: m,
        ..Vars::default()
    };
    let expr = compile(spec.require("H")?, vars)?;
    let timed = uses_time(&[&expr]);
    let arity = if timed {
        Arity::qy(n, m).with_time()
    } else {
        Arity::qy(n, m)
    };
    let h = field(expr, arity, VarKind::P, p.dt);
    let mut x0 = initial(spec, "q0", n)?;
    x0.extend(spec.vector("p0", m)?);
    let rhs = hamilton_vector_field(&s, &h).map_err(build_error)?;
    let traj = rk4(&rhs, &x0, 0.0, p.t1(spec)?, p.dt)?;
    let mut summary = Vec::new();
    if !timed {
        let e = traj.states.iter().map(|x| h.eval(x));
        summary.push(("energy_drift".into(), max_drift(e)));
    }
    if is_so3 {
        summary.push(("casimir_drift".into(), max_drift(traj.states.iter().map(|x| norm2(x)))));
    }
    let mut names = labels("q", 1..=n);
    names.extend(labels("p", 1..=m));
    Ok((Table::from_trajectory(&relabel(traj, names)?), summary))
}

fn run_vakonomic(spec: &ProblemSpec, p: &Params) -> Outcome {
    spec.check_keys(&["n", "m", "l", "q0", "y0", "mu0"], &["phi"])?;
    let (s, _) = algebroid(spec)?;
    let (n, m) = (s.base_dim(), s.fiber_rank());
    let phis = spec.indexed("phi")?;
    let r = phis.len();
    if r > m {
        return Err(SpecError::general(format!("{r} constraints exceed the fiber rank {m}")).into());
    }
    let f = m - r;
    let vars = Vars {
        time: true,
        q: n,
        y: f,
        ..Vars::default()
    };
    let l_expr = compile(spec.require("l")?, vars)?;
    let phi_exprs = phis.iter().map(|e| compile(e, vars)).collect::<Result<Vec<_>, _>>()?;
    let mut all: Vec<&Expr> = phi_exprs.iter().collect();
    all.push(&l_expr);
    let arity = if uses_time(&all) {
        Arity::qy(n, f).with_time()
    } else {
        Arity::qy(n, f)
    };
    let l = field(l_expr, arity, VarKind::Y, p.dt);
    let constraints = phi_exprs
        .into_iter()
        .map(|e| field(e, arity, VarKind::Y, p.dt))
        .collect();
    let problem = VakonomicProblem::new(s, l, constraints).map_err(build_error)?;
    let mut x0 = initial(spec, "q0", n)?;
    x0.extend(initial(spec, "y0", f)?);
    x0.extend(initial(spec, "mu0", r)?);
    let rhs = vakonomic_vector_field(&problem).map_err(build_error)?;
    let traj = rk4(&rhs, &x0, 0.0, p.t1(spec)?, p.dt)?;
    let mut names = labels("q", 1..=n);
    names.extend(labels("y", 1..=f));
    names.extend(labels("mu", f + 1..=m));
    let summary = (0..r)
        .map(|j| {
            let col = n + f + j;
            (format!("mu{}_drift", f + 1 + j), max_drift(traj.column(col)))
        })
        .collect();
    Ok((Table::from_trajectory(&relabel(traj, names)?), summary))
}

fn run_pontryagin(spec: &ProblemSpec, p: &Params) -> Outcome {
    spec.check_keys(&["n", "m", "k", "l", "q0", "qT", "mu0"], &["gamma"])?;
    let (s, _) = algebroid(spec)?;
    let (n, m) = (s.base_dim(), s.fiber_rank());
    let k = spec.dim("k")?;
    let vars = Vars {
        q: n,
        u: k,
        ..Vars::default()
    };
    let gammas = spec.indexed("gamma")?;
    if gammas.len() != m {
        return Err(SpecError::general(format!("control field needs gamma1..gamma{m}, found {}", gammas.len())).into());
    }
    let gamma_exprs = gammas.iter().map(|e| compile(e, vars)).collect::<Result<Vec<_>, _>>()?;
    let cost = field(compile(spec.require("l")?, vars)?, Arity::qu(n, k), VarKind::Y, p.dt);
    let system = ControlSystem::new(s, control_field(gamma_exprs, n, k, p.dt), cost).map_err(build_error)?;
    let q0 = initial(spec, "q0", n)?;
    let terminal = match spec.get("qT") {
        Some(_) => Terminal::Fixed(spec.vector("qT", n)?),
        None => Terminal::ZeroCostate,
    };
    let guess = spec.get("mu0").map(|_| spec.vector("mu0", m)).transpose()?;
    let sol = pontryagin_shooting(&system, &q0, &terminal, p.t1(spec)?, guess.as_deref(), &p.config)?;
    let hamiltonian = sol
        .trajectory
        .states
        .iter()
        .map(|x| system.hamiltonian(&x[..n], &x[n..n + m], &x[n + m..]));
    let summary = vec![
        ("shooting_residual".into(), sol.shooting_residual),
        ("hamiltonian_drift".into(), max_drift(hamiltonian)),
    ];
    Ok((Table::from_trajectory(&sol.trajectory), summary))
}

fn discrete_vars(n: usize) -> Vars {
    Vars {
        step: true,
        q: n,
        y: n,
        ..Vars::default()
    }
}

fn run_discrete_el(spec: &ProblemSpec, p: &Params) -> Outcome {
    spec.check_keys(&["n", "Ld", "q0", "q1"], &[])?;
    let n = spec.dim("n")?;
    let ld = pair_field(compile(spec.require("Ld")?, discrete_vars(n))?, n, p.dt);
    let q0 = spec.vector("q0", n)?;
    let q1 = spec.vector("q1", n)?;
    let traj = del_solve(&ld, &q0, &q1, p.steps(spec)?, &p.config)?;
    let momenta: Vec<Vec<f64>> = traj
        .states
        .windows(2)
        .map(|w| discrete_momentum(&ld, &w[0], &w[1]))
        .collect();
    let drift = momenta
        .iter()
        .map(|mu| {
            mu.iter()
                .zip(&momenta[0])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let residual = traj
        .states
        .windows(3)
        .map(|w| del_residual(&ld, &w[0], &w[1], &w[2]).map(|r| norm_inf(&r)))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let summary = vec![("momentum_drift".into(), drift), ("del_residual".into(), residual)];
    Ok((Table::from_trajectory(&traj), summary))
}

fn run_discrete_constrained(spec: &ProblemSpec, p: &Params) -> Outcome {
    spec.check_keys(&["n", "Ld", "q0", "q1", "lambda0"], &["phi"])?;
    let n = spec.dim("n")?;
    let vars = discrete_vars(n);
    let ld = pair_field(compile(spec.require("Ld")?, vars)?, n, p.dt);
    let constraints = spec
        .indexed("phi")?
        .iter()
        .map(|e| compile(e, vars).map(|x| pair_field(x, n, p.dt)))
        .collect::<Result<Vec<_>, _>>()?;
    let r = constraints.len();
    if r > n {
        return Err(SpecError::general(format!("{r} constraints over-determine a {n}-dimensional step")).into());
    }
    let q0 = spec.vector("q0", n)?;
    let q1 = spec.vector("q1", n)?;
    let mut lambda = spec.vector_or_zero("lambda0", r)?;
    let steps = p.steps(spec)?;
    let constraint_gap = |a: &[f64], b: &[f64]| constraints.iter().map(|c| c.eval(a, b).abs()).fold(0.0, f64::max);
    let mut gap = constraint_gap(&q0, &q1);

    let mut rows = vec![row(0, &[&q0, &vec![f64::NAN; r]]), row(1, &[&q1, &lambda])];
    let (mut prev, mut cur) = (q0, q1);
    for k in 0..steps {
        let (next, lambda_next) = discrete_constrained_step(&ld, &constraints, &prev, &cur, &lambda, None, &p.config)?;
        gap = gap.max(constraint_gap(&cur, &next));
        rows.push(row(k + 2, &[&next, &lambda_next]));
        lambda = lambda_next;
        prev = std::mem::replace(&mut cur, next);
    }
    let mut header = vec!["k".to_string()];
    header.extend(labels("q", 1..=n));
    header.extend(labels("lambda", 1..=r));
    Ok((Table { header, rows }, vec![("constraint_residual".into(), gap)]))
}

fn row(k: usize, parts: &[&[f64]]) -> Vec<f64> {
    let mut r = vec![k as f64];
    for p in parts {
        r.extend_from_slice(p);
    }
    r
}

fn groupoid_model(spec: &ProblemSpec) -> Result<Option<(GroupoidModel, bool)>, SpecError> {
    match spec.structure().map(|e| (e, e.value.as_str())) {
        None | Some((_, "coordinate")) => Ok(None),
        Some((_, "pair_groupoid")) => {
            let n = spec.dim("n")?;
            check_m(spec, n)?;
            Ok(Some((pair_groupoid(n), false)))
        }
        Some((_, "so3")) => {
            if let Some(n) = spec.get("n") {
                if n.integer()? != 0 {
                    return Err(n.error("SO(3) has a single base point, n = 0"));
                }
            }
            Ok(Some((so3().model, true)))
        }
        Some((e, other)) => Err(e.error(format!("unknown groupoid '{other}' (expected pair_groupoid or so3)"))),
    }
}

fn run_discrete_ocp(spec: &ProblemSpec, p: &Params) -> Outcome {
    spec.check_keys(&["n", "m", "k", "l", "q0", "qT"], &["gamma"])?;
    let group = groupoid_model(spec)?;
    let (n, out) = match &group {
        Some((g, _)) => (g.base_dim(), g.fiber_dim()),
        None => {
            let n = spec.dim("n")?;
            (n, n)
        }
    };
    let k = spec.dim("k")?;
    let vars = Vars {
        step: true,
        q: n,
        u: k,
        ..Vars::default()
    };
    let gammas = spec.indexed("gamma")?;
    if gammas.len() != out {
        return Err(SpecError::general(format!("dynamics needs gamma1..gamma{out}, found {}", gammas.len())).into());
    }
    let gamma = control_field(
        gammas.iter().map(|e| compile(e, vars)).collect::<Result<Vec<_>, _>>()?,
        n,
        k,
        p.dt,
    );
    let cost = field(compile(spec.require("l")?, vars)?, Arity::qu(n, k), VarKind::Y, p.dt);
    let q0 = initial(spec, "q0", n)?;
    let terminal = match spec.get("qT") {
        Some(_) => Terminal::Fixed(spec.vector("qT", n)?),
        None => Terminal::ZeroCostate,
    };
    let steps = p.steps(spec)?;
    let nan_u = vec![f64::NAN; k];
    let mut header = vec!["k".to_string()];
    header.extend(labels("q", 1..=n));
    let mut rows = Vec::new();
    let summary = match group {
        None => {
            let problem = DiscreteOcp::new(gamma, cost, q0, steps, terminal).map_err(build_error)?;
            let sol = discrete_ocp_solve(&problem, &p.config)?;
            header.extend(labels("mu", 1..=n));
            header.extend(labels("u", 1..=k));
            for (i, (q, mu)) in sol.states.iter().zip(&sol.costates).enumerate() {
                rows.push(row(i, &[q, mu, sol.controls.get(i).unwrap_or(&nan_u)]));
            }
            vec![("cost".into(), sol.cost), ("residual".into(), sol.residual)]
        }
        Some((model, _)) => {
            let m = model.fiber_dim();
            let problem = GroupoidOcp::new(model, gamma, cost, q0, steps, terminal).map_err(build_error)?;
            let sol = groupoid_ocp_solve(&problem, &p.config)?;
            header.extend(labels("u", 1..=k));
            header.extend(labels("mu1_", 1..=n));
            header.extend(labels("mu2_", 1..=m));
            let (nan1, nan2) = (vec![f64::NAN; n], vec![f64::NAN; m]);
            for (i, q) in sol.states.iter().enumerate() {
                let u = sol.controls.get(i).unwrap_or(&nan_u);
                let a = sol.mu1.get(i).unwrap_or(&nan1);
                let b = sol.mu2.get(i).unwrap_or(&nan2);
                rows.push(row(i, &[q, u, a, b]));
            }
            vec![("cost".into(), sol.cost), ("residual".into(), sol.residual)]
        }
    };
    Ok((Table { header, rows }, summary))
}

fn run_groupoid_del(spec: &ProblemSpec, p: &Params) -> Outcome {
    spec.check_keys(&["n", "m", "Ld", "q0", "v0"], &[])?;
    let Some((model, is_so3)) = groupoid_model(spec)? else {
        return Err(SpecError::general("groupoid_del needs structure = pair_groupoid or so3").into());
    };
    let (n, m) = (model.base_dim(), model.fiber_dim());
    let vars = Vars {
        step: true,
        q: n,
        y: m,
        ..Vars::default()
    };
    let ld = field(compile(spec.require("Ld")?, vars)?, Arity::qy(n, m), VarKind::Y, p.dt);
    let q0 = initial(spec, "q0", n)?;
    let v0 = spec.vector("v0", m)?;
    model.check_chart(&v0).map_err(build_error)?;
    let steps = p.steps(spec)?;
    let mut header = vec!["k".to_string()];
    if is_so3 {
        let group = so3();
        let sol = discrete_euler_poincare_solve(&group, &ld, &v0, steps, &p.config)?;
        header.extend(labels("v", 1..=3));
        header.extend(labels("mu", 1..=3));
        let velocities = std::iter::once(&v0).chain(&sol.velocities);
        let rows = velocities
            .zip(&sol.momenta)
            .enumerate()
            .map(|(k, (v, mu))| row(k, &[v, mu]))
            .collect();
        let casimir = max_drift(sol.momenta.iter().map(|mu| norm2(mu)));
        return Ok((Table { header, rows }, vec![("casimir_drift".into(), casimir)]));
    }
    header.extend(labels("q", 1..=n));
    header.extend(labels("v", 1..=m));
    let mut g = GroupoidElement::new(q0, v0);
    let mut rows = vec![row(0, &[&g.q, &g.v])];
    let mut residual: f64 = 0.0;
    for k in 0..steps {
        let next = groupoid_del_step(&model, &ld, &g, None, &p.config)?;
        residual = residual.max(norm_inf(&groupoid_del_residual(&model, &ld, &g, &next)?));
        rows.push(row(k + 1, &[&next.q, &next.v]));
        g = next;
    }
    Ok((Table { header, rows }, vec![("del_residual".into(), residual)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Result<RunOutput, RunError> {
        run_spec(&ProblemSpec::parse(text)?, &Overrides::default())
    }

    #[test]
    fn undeclared_variable_is_a_spec_error() {
        let err = run("kind = lagrangian\nn = 1\nL = y2^2\nq0 = 0\ny0 = 1\nt1 = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        match err {
            RunError::Spec(e) => assert_eq!((e.line, e.col), (3, 5)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let err = run("kind = lagrangian\nn = 1\nL = y1^2\nq0 = 0\ny0 = 1\nt1 = 1\nH = 1\n").unwrap_err();
        assert!(matches!(err, RunError::Spec(SpecError { line: 7, .. })));
    }

    #[test]
    fn algebra_constants_from_section() {
        let text = "kind = euler_poincare\nm = 3\nl = 0.5*(y1^2 + 2*y2^2 + 3*y3^2)\ny0 = 0.4, -0.8, 0.5\nt1 = 0.1\n\
                    [algebra]\nC3_1_2 = 1\nC1_2_3 = 1\nC2_1_3 = -1\n";
        let out = run(text).unwrap();
        assert!(out.get("casimir_drift").unwrap() < 1e-10);
    }

    #[test]
    fn degenerate_lagrangian_is_a_solver_error() {
        let err = run("kind = lagrangian\nn = 1\nL = q1\nq0 = 0\ny0 = 1\nt1 = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
