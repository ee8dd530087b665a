//! Lie groups as groupoids over a point: discrete Euler-Poincare and
//! discrete Lie-Poisson.

use std::fmt;
use std::sync::Arc;

use super::{groupoid_del_step, GroupoidElement, GroupoidModel};
use crate::error::{Error, Result};
use crate::geometry::{Arity, ScalarField};
use crate::numerics::SolverConfig;

type CoadFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// A groupoid with `n = 0` together with its coadjoint action `Ad*_g`.
#[derive(Clone)]
pub struct LieGroupModel {
    pub model: GroupoidModel,
    coad: CoadFn,
}

impl fmt::Debug for LieGroupModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LieGroupModel").field("model", &self.model).finish()
    }
}

impl LieGroupModel {
    /// Panics if `model` has a nonzero base dimension.
    pub fn new(model: GroupoidModel, coad: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        assert_eq!(model.base_dim(), 0, "a Lie group has a single base point");
        LieGroupModel {
            model,
            coad: Arc::new(coad),
        }
    }

    pub fn dim(&self) -> usize {
        self.model.fiber_dim()
    }

    /// Momentum `mu = R(v)^T dLd/dv (v)` carried by the chart velocity `v`.
    pub fn momentum(&self, ld: &ScalarField, v: &[f64]) -> Result<Vec<f64>> {
        let x = ld.arity().pack(0.0, &[], v, &[]);
        let dv = ld.partial(&x, ld.arity().fiber_range());
        Ok(self.model.right(&[], v)?.tr_mul_vec(&dv))
    }
}

/// `mu_{k+1} = Ad*_{g} mu_k` with `g` the element with chart coordinate `v`.
pub fn lie_poisson_update(group: &LieGroupModel, v: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    group.model.check_chart(v)?;
    if mu.len() != group.dim() {
        return Err(Error::DimensionMismatch {
            context: "lie_poisson_update mu",
            expected: group.dim(),
            found: mu.len(),
        });
    }
    Ok((group.coad)(v, mu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerPoincareSolution {
    /// `v_1..v_N`.
    pub velocities: Vec<Vec<f64>>,
    /// `mu_0..mu_N`, each recomputed from its velocity.
    pub momenta: Vec<Vec<f64>>,
}

/// Runs `steps` discrete Euler-Poincare steps from `v_0`, each solved by
/// Newton from the previous velocity.
pub fn discrete_euler_poincare_solve(
    group: &LieGroupModel,
    ld: &ScalarField,
    v0: &[f64],
    steps: usize,
    config: &SolverConfig,
) -> Result<EulerPoincareSolution> {
    if ld.arity() != Arity::qy(0, group.dim()) {
        return Err(Error::InvalidArgument(format!(
            "discrete Lagrangian arity {:?} must be (v: {})",
            ld.arity(),
            group.dim()
        )));
    }
    group.model.check_chart(v0)?;
    let mut velocities = Vec::with_capacity(steps);
    let mut momenta = vec![group.momentum(ld, v0)?];
    let mut g = GroupoidElement::new(Vec::new(), v0.to_vec());
    // The momentum norm is only conserved up to the per-step residual, which
    // accumulates over long runs; ask for a tighter solve when it is attainable.
    let tight = SolverConfig {
        newton_tol: config.newton_tol * 1e-4,
        ..*config
    };
    for _ in 0..steps {
        g = match groupoid_del_step(&group.model, ld, &g, None, &tight) {
            Ok(next) => next,
            Err(_) => groupoid_del_step(&group.model, ld, &g, None, config)?,
        };
        momenta.push(group.momentum(ld, &g.v)?);
        velocities.push(g.v.clone());
    }
    Ok(EulerPoincareSolution { velocities, momenta })
}
