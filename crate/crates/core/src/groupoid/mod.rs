//! Discrete mechanics on a Lie groupoid, in one symmetric chart.
//!
//! An element `g` is written `(q, v)`: `q` is its source and `v` its chart
//! coordinate, with `v = 0` the identity at `q`. The target is `b(q, v)` and
//! the product of composable `(q, v)` and `(b(q, v), w)` is `(q, p(q, v, w))`.
//! From these the anchor and the translation differentials are
//!
//! ```text
//! rho(q)   = db/dv (q, 0)
//! L(q, v)  = dp/dw (q, v, 0)
//! R(q, w)  = dp/dv (q, 0, w)
//! ```
//!
//! A Lie group is the case `n = 0`.

mod lie;
mod ocp;
pub mod so3;

pub use lie::{discrete_euler_poincare_solve, lie_poisson_update, EulerPoincareSolution, LieGroupModel};
pub use ocp::{
    groupoid_ocp_residual, groupoid_ocp_solve, GroupoidOcp, GroupoidOcpIterate, GroupoidOcpResidual,
    GroupoidOcpSolution,
};
pub use so3::so3;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{Arity, ScalarField};
use crate::numerics::diff::{fd_hess_block, fd_jac_columns, first_step_scale};
use crate::numerics::linalg::{max_abs_diff, norm2};
use crate::numerics::{newton, Matrix, SolverConfig};

/// Largest allowed gap `|q_next - b(q, v)|` for a composable pair.
pub const COMPOSABILITY_TOL: f64 = 1e-10;

type TargetFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
type ProductFn = Arc<dyn Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync>;
type AnchorFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;
type TranslationFn = Arc<dyn Fn(&[f64], &[f64]) -> Matrix + Send + Sync>;

#[derive(Clone)]
pub struct GroupoidModel {
    n: usize,
    m: usize,
    target: TargetFn,
    product: ProductFn,
    chart_radius: f64,
    anchor: Option<AnchorFn>,
    left: Option<TranslationFn>,
    right: Option<TranslationFn>,
}

impl fmt::Debug for GroupoidModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupoidModel")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("chart_radius", &self.chart_radius)
            .field("analytic_anchor", &self.anchor.is_some())
            .field("analytic_left", &self.left.is_some())
            .field("analytic_right", &self.right.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupoidElement {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl GroupoidElement {
    pub fn new(q: Vec<f64>, v: Vec<f64>) -> Self {
        GroupoidElement { q, v }
    }
}

/// Largest deviations in the identity relations of a model over a set of
/// sample points.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityBlockReport {
    /// `b(q, 0) = q`, `p(q, v, 0) = v`, `p(q, 0, w) = w`.
    pub values: f64,
    /// `dp/dv (q, v, 0) = I` and `dp/dw (q, 0, w) = I`.
    pub first: f64,
    /// `d2p/dv dv (q, v, 0) = 0` and `d2p/dw dw (q, 0, w) = 0`.
    pub second: f64,
    /// `d2p/dw dv (q, 0, w)`, which is the derivative of `R` and is not zero
    /// in general. Reported for information only.
    pub mixed: f64,
}

impl GroupoidModel {
    pub fn new(
        n: usize,
        m: usize,
        target: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        product: impl Fn(&[f64], &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        GroupoidModel {
            n,
            m,
            target: Arc::new(target),
            product: Arc::new(product),
            chart_radius: f64::INFINITY,
            anchor: None,
            left: None,
            right: None,
        }
    }

    /// Restricts the chart to `|v| < radius`.
    pub fn with_chart_radius(mut self, radius: f64) -> Self {
        self.chart_radius = radius;
        self
    }

    pub fn with_anchor(mut self, f: impl Fn(&[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.anchor = Some(Arc::new(f));
        self
    }

    pub fn with_left(mut self, f: impl Fn(&[f64], &[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.left = Some(Arc::new(f));
        self
    }

    pub fn with_right(mut self, f: impl Fn(&[f64], &[f64]) -> Matrix + Send + Sync + 'static) -> Self {
        self.right = Some(Arc::new(f));
        self
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn fiber_dim(&self) -> usize {
        self.m
    }

    pub fn chart_radius(&self) -> f64 {
        self.chart_radius
    }

    fn check_q(&self, q: &[f64], context: &'static str) -> Result<()> {
        if q.len() != self.n {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.n,
                found: q.len(),
            });
        }
        Ok(())
    }

    /// Dimension and chart-bound check for a chart coordinate.
    pub fn check_chart(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "groupoid chart coordinate",
                expected: self.m,
                found: v.len(),
            });
        }
        let norm = norm2(v);
        if norm.is_nan() || norm >= self.chart_radius {
            return Err(Error::ChartViolation {
                norm,
                radius: self.chart_radius,
            });
        }
        Ok(())
    }

    fn check_element(&self, g: &GroupoidElement) -> Result<()> {
        self.check_q(&g.q, "groupoid element base point")?;
        self.check_chart(&g.v)
    }

    pub fn target(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        (self.target)(q, v)
    }

    pub fn product(&self, q: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        (self.product)(q, v, w)
    }

    /// Target of `g`, i.e. the source of anything composable after it.
    pub fn target_of(&self, g: &GroupoidElement) -> Vec<f64> {
        self.target(&g.q, &g.v)
    }

    /// Finite-difference anchor `db/dv (q, 0)`, ignoring any override.
    pub fn extract_rho(&self, q: &[f64]) -> Result<Matrix> {
        self.check_q(q, "extract_rho q")?;
        if self.n == 0 {
            return Ok(Matrix::zeros(0, self.m));
        }
        let f = |v: &[f64]| self.target(q, v);
        Ok(fd_jac_columns(&f, &vec![0.0; self.m], 0..self.m, first_step_scale()))
    }

    /// Finite-difference `L(q, v) = dp/dw (q, v, 0)`.
    pub fn extract_left(&self, q: &[f64], v: &[f64]) -> Result<Matrix> {
        self.check_q(q, "extract_left q")?;
        self.check_chart(v)?;
        let f = |w: &[f64]| self.product(q, v, w);
        Ok(fd_jac_columns(&f, &vec![0.0; self.m], 0..self.m, first_step_scale()))
    }

    /// Finite-difference `R(q, w) = dp/dv (q, 0, w)`.
    pub fn extract_right(&self, q: &[f64], w: &[f64]) -> Result<Matrix> {
        self.check_q(q, "extract_right q")?;
        self.check_chart(w)?;
        let f = |v: &[f64]| self.product(q, v, w);
        Ok(fd_jac_columns(&f, &vec![0.0; self.m], 0..self.m, first_step_scale()))
    }

    /// Anchor, analytic if supplied.
    pub fn anchor(&self, q: &[f64]) -> Result<Matrix> {
        match &self.anchor {
            Some(f) => {
                self.check_q(q, "anchor q")?;
                Ok(f(q))
            }
            None => self.extract_rho(q),
        }
    }

    /// `L(q, v)`, analytic if supplied.
    pub fn left(&self, q: &[f64], v: &[f64]) -> Result<Matrix> {
        match &self.left {
            Some(f) => {
                self.check_chart(v)?;
                Ok(f(q, v))
            }
            None => self.extract_left(q, v),
        }
    }

    /// `R(q, w)`, analytic if supplied.
    pub fn right(&self, q: &[f64], w: &[f64]) -> Result<Matrix> {
        match &self.right {
            Some(f) => {
                self.check_chart(w)?;
                Ok(f(q, w))
            }
            None => self.extract_right(q, w),
        }
    }

    /// Largest deviation between analytic overrides and finite-difference
    /// extraction at the given `(q, v)` points. Zero when nothing is overridden.
    pub fn verify_overrides(&self, points: &[GroupoidElement]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for g in points {
            self.check_element(g)?;
            if let Some(f) = &self.anchor {
                worst = worst.max(f(&g.q).sub(&self.extract_rho(&g.q)?).max_abs());
            }
            if let Some(f) = &self.left {
                worst = worst.max(f(&g.q, &g.v).sub(&self.extract_left(&g.q, &g.v)?).max_abs());
            }
            if let Some(f) = &self.right {
                worst = worst.max(f(&g.q, &g.v).sub(&self.extract_right(&g.q, &g.v)?).max_abs());
            }
        }
        Ok(worst)
    }

    /// Checks the identity relations at samples `(q, v, w)`; `v` is used for
    /// the relations at `w = 0` and `w` for those at `v = 0`.
    pub fn verify_identity_block(&self, samples: &[(Vec<f64>, Vec<f64>, Vec<f64>)]) -> Result<IdentityBlockReport> {
        let m = self.m;
        let zero = vec![0.0; m];
        let eye = Matrix::identity(m);
        let mut rep = IdentityBlockReport::default();
        for (q, v, w) in samples {
            self.check_q(q, "identity block q")?;
            self.check_chart(v)?;
            self.check_chart(w)?;
            rep.values = rep
                .values
                .max(max_abs_diff(&self.target(q, &zero), q))
                .max(max_abs_diff(&self.product(q, v, &zero), v))
                .max(max_abs_diff(&self.product(q, &zero, w), w));

            let dv = fd_jac_columns(&|z: &[f64]| self.product(q, z, &zero), v, 0..m, first_step_scale());
            let dw = fd_jac_columns(&|z: &[f64]| self.product(q, &zero, z), w, 0..m, first_step_scale());
            rep.first = rep.first.max(dv.sub(&eye).max_abs()).max(dw.sub(&eye).max_abs());

            let at_v: Vec<f64> = v.iter().chain(&zero).copied().collect();
            let at_w: Vec<f64> = zero.iter().chain(w.iter()).copied().collect();
            for a in 0..m {
                let pa = |x: &[f64]| self.product(q, &x[..m], &x[m..])[a];
                let vv = fd_hess_block(&pa, &at_v, 0..m, 0..m);
                let ww = fd_hess_block(&pa, &at_w, m..2 * m, m..2 * m);
                let wv = fd_hess_block(&pa, &at_w, 0..m, m..2 * m);
                rep.second = rep.second.max(vv.max_abs()).max(ww.max_abs());
                rep.mixed = rep.mixed.max(wv.max_abs());
            }
        }
        Ok(rep)
    }

    /// Inverse element: `(b(q, v), w)` with `p(q, v, w) = 0`, by Newton from
    /// `w = -v`.
    pub fn inverse(&self, g: &GroupoidElement, config: &SolverConfig) -> Result<GroupoidElement> {
        self.check_element(g)?;
        let neg: Vec<f64> = g.v.iter().map(|x| -x).collect();
        let w = newton(|w| Ok(self.product(&g.q, &g.v, w)), &neg, config)?.x;
        Ok(GroupoidElement {
            q: self.target_of(g),
            v: w,
        })
    }

    fn check_composable(&self, g: &GroupoidElement, h: &GroupoidElement) -> Result<()> {
        let gap = max_abs_diff(&self.target_of(g), &h.q);
        if gap.is_nan() || gap > COMPOSABILITY_TOL {
            return Err(Error::NotComposable { gap });
        }
        Ok(())
    }

    fn check_lagrangian(&self, ld: &ScalarField, what: &str) -> Result<()> {
        if ld.arity() != Arity::qy(self.n, self.m) {
            return Err(Error::InvalidArgument(format!(
                "{what} arity {:?} must be (q: {}, v: {})",
                ld.arity(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }
}

/// Pair groupoid `R^n x R^n`: `b(q, v) = q + v`, `p(q, v, w) = v + w`.
pub fn pair_groupoid(n: usize) -> GroupoidModel {
    GroupoidModel::new(
        n,
        n,
        |q, v| q.iter().zip(v).map(|(a, b)| a + b).collect(),
        |_, v, w| v.iter().zip(w).map(|(a, b)| a + b).collect(),
    )
}

/// `(dL/dq, dL/dv)` at `(q, v)`.
fn split_gradient(ld: &ScalarField, q: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let a = ld.arity();
    let x = a.pack(0.0, q, v, &[]);
    let g = ld.gradient(&x);
    (g[a.base_range()].to_vec(), g[a.fiber_range()].to_vec())
}

/// The three weighted terms of the discrete Euler-Lagrange operator at a
/// composable pair, with separate covectors for the `g` and `h` slots:
/// `dq_h rho(q~) + dv_g L(g) - dv_h R(h)`.
fn weighted_residual(
    model: &GroupoidModel,
    g: &GroupoidElement,
    h: &GroupoidElement,
    dv_g: &[f64],
    dq_h: &[f64],
    dv_h: &[f64],
) -> Result<Vec<f64>> {
    let rho = model.anchor(&h.q)?;
    let left = model.left(&g.q, &g.v)?;
    let right = model.right(&h.q, &h.v)?;
    let a = rho.tr_mul_vec(dq_h);
    let b = left.tr_mul_vec(dv_g);
    let c = right.tr_mul_vec(dv_h);
    Ok((0..model.m).map(|i| a[i] + b[i] - c[i]).collect())
}

/// Discrete Euler-Lagrange residual at the composable pair `(g, h)`:
///
/// ```text
/// dLd/dq (h) rho(q~) + dLd/dv (g) L(g) - dLd/dv (h) R(h)
/// ```
pub fn groupoid_del_residual(
    model: &GroupoidModel,
    ld: &ScalarField,
    g: &GroupoidElement,
    h: &GroupoidElement,
) -> Result<Vec<f64>> {
    model.check_lagrangian(ld, "discrete Lagrangian")?;
    model.check_element(g)?;
    model.check_element(h)?;
    model.check_composable(g, h)?;
    let (_, dv_g) = split_gradient(ld, &g.q, &g.v);
    let (dq_h, dv_h) = split_gradient(ld, &h.q, &h.v);
    weighted_residual(model, g, h, &dv_g, &dq_h, &dv_h)
}

/// Next element `h = (b(q, v), w)` solving the discrete Euler-Lagrange
/// equation. The default guess is `w = v`.
pub fn groupoid_del_step(
    model: &GroupoidModel,
    ld: &ScalarField,
    g: &GroupoidElement,
    guess: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<GroupoidElement> {
    model.check_lagrangian(ld, "discrete Lagrangian")?;
    model.check_element(g)?;
    let q_next = model.target_of(g);
    let (_, dv_g) = split_gradient(ld, &g.q, &g.v);
    let left = model.left(&g.q, &g.v)?;
    let back = left.tr_mul_vec(&dv_g);
    let w0 = match guess {
        Some(w) => {
            model.check_chart(w)?;
            w.to_vec()
        }
        None => g.v.clone(),
    };
    let rho = model.anchor(&q_next)?;
    let f = |w: &[f64]| -> Result<Vec<f64>> {
        model.check_chart(w)?;
        let (dq_h, dv_h) = split_gradient(ld, &q_next, w);
        let a = rho.tr_mul_vec(&dq_h);
        let c = model.right(&q_next, w)?.tr_mul_vec(&dv_h);
        Ok((0..model.m).map(|i| a[i] + back[i] - c[i]).collect())
    };
    let w = newton(f, &w0, config)?.x;
    Ok(GroupoidElement { q: q_next, v: w })
}

/// One step of the constrained discrete Euler-Lagrange system on the
/// groupoid. `lambda` is the multiplier attached to `g = gamma(k-1)`; the
/// result is `(gamma(k), lambda_next)` with
///
/// ```text
/// d(Ld + lambda_next.Phi)/dq (h) rho + d(Ld + lambda.Phi)/dv (g) L(g)
///     - d(Ld + lambda_next.Phi)/dv (h) R(h) = 0,     Phi(h) = 0
/// ```
pub fn groupoid_constrained_step(
    model: &GroupoidModel,
    ld: &ScalarField,
    constraints: &[ScalarField],
    g: &GroupoidElement,
    lambda: &[f64],
    guess: Option<(&[f64], &[f64])>,
    config: &SolverConfig,
) -> Result<(GroupoidElement, Vec<f64>)> {
    let (n, m, r) = (model.n, model.m, constraints.len());
    model.check_lagrangian(ld, "discrete Lagrangian")?;
    for c in constraints {
        model.check_lagrangian(c, "constraint")?;
    }
    if r > m {
        return Err(Error::InvalidArgument(format!(
            "{r} constraints over-determine a {m}-dimensional step"
        )));
    }
    model.check_element(g)?;
    if lambda.len() != r {
        return Err(Error::DimensionMismatch {
            context: "groupoid constrained step lambda",
            expected: r,
            found: lambda.len(),
        });
    }
    let augmented_gradient = |q: &[f64], v: &[f64], lam: &[f64]| {
        let (mut dq, mut dv) = split_gradient(ld, q, v);
        for (c, l) in constraints.iter().zip(lam) {
            let (cq, cv) = split_gradient(c, q, v);
            dq.iter_mut().zip(&cq).for_each(|(a, b)| *a += l * b);
            dv.iter_mut().zip(&cv).for_each(|(a, b)| *a += l * b);
        }
        (dq, dv)
    };
    let q_next = model.target_of(g);
    let (_, dv_g) = augmented_gradient(&g.q, &g.v, lambda);

    let mut z0 = match guess {
        Some((w, _)) => {
            model.check_chart(w)?;
            w.to_vec()
        }
        None => g.v.clone(),
    };
    match guess {
        Some((_, l)) if l.len() == r => z0.extend_from_slice(l),
        Some((_, l)) => {
            return Err(Error::DimensionMismatch {
                context: "groupoid constrained step multiplier guess",
                expected: r,
                found: l.len(),
            })
        }
        None => z0.extend_from_slice(lambda),
    }
    let f = |z: &[f64]| -> Result<Vec<f64>> {
        let (w, lam) = z.split_at(m);
        model.check_chart(w)?;
        let h = GroupoidElement {
            q: q_next.clone(),
            v: w.to_vec(),
        };
        let (dq_h, dv_h) = augmented_gradient(&q_next, w, lam);
        let mut out = weighted_residual(model, g, &h, &dv_g, &dq_h, &dv_h)?;
        let x = Arity::qy(n, m).pack(0.0, &q_next, w, &[]);
        out.extend(constraints.iter().map(|c| c.eval(&x)));
        Ok(out)
    };
    let z = newton(f, &z0, config)?.x;
    let (w, lam) = z.split_at(m);
    Ok((
        GroupoidElement {
            q: q_next,
            v: w.to_vec(),
        },
        lam.to_vec(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_groupoid_data_is_trivial() {
        let g = pair_groupoid(2);
        let eye = Matrix::identity(2);
        assert!(g.extract_rho(&[0.3, -1.0]).unwrap().sub(&eye).max_abs() < 1e-10);
        assert!(g.extract_left(&[0.3, -1.0], &[0.5, 2.0]).unwrap().sub(&eye).max_abs() < 1e-10);
        assert!(g.extract_right(&[0.3, -1.0], &[0.5, 2.0]).unwrap().sub(&eye).max_abs() < 1e-10);
    }

    #[test]
    fn scaled_target_anchor() {
        let g = GroupoidModel::new(
            2,
            2,
            |q, v| vec![q[0] + v[0], q[1] + 2.0 * v[1]],
            |_, v, w| v.iter().zip(w).map(|(a, b)| a + b).collect(),
        );
        let rho = g.extract_rho(&[1.0, 1.0]).unwrap();
        let expected = Matrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        assert!(rho.sub(&expected).max_abs() < 1e-10);
    }

    #[test]
    fn lie_group_anchor_is_empty() {
        let rho = so3().model.extract_rho(&[]).unwrap();
        assert_eq!((rho.rows(), rho.cols()), (0, 3));
    }

    #[test]
    fn chart_violation_rejected() {
        let model = so3().model;
        assert!(matches!(
            model.extract_left(&[], &[3.1, 0.0, 0.0]),
            Err(Error::ChartViolation { .. })
        ));
    }

    #[test]
    fn non_composable_pair_rejected() {
        let model = pair_groupoid(1);
        let ld = ScalarField::from_qy(1, 1, |_, v| 0.5 * v[0] * v[0]);
        let g = GroupoidElement::new(vec![0.0], vec![1.0]);
        let h = GroupoidElement::new(vec![1.5], vec![1.0]);
        assert!(matches!(
            groupoid_del_residual(&model, &ld, &g, &h),
            Err(Error::NotComposable { .. })
        ));
    }

    #[test]
    fn inverse_of_rotation() {
        let model = so3().model;
        let g = GroupoidElement::new(vec![], vec![0.2, -0.4, 1.1]);
        let inv = model.inverse(&g, &SolverConfig::default()).unwrap();
        assert!(max_abs_diff(&inv.v, &[-0.2, 0.4, -1.1]) < 1e-9);
    }
}
