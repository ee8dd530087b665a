//! Scalar fields on packed argument vectors `[t?, q, y, u]`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::numerics::diff::{fd_hess_block, fd_jac_columns, fd_partial, first_step_scale};
use crate::numerics::Matrix;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Layout of a packed argument vector: optional time, then base coordinates,
/// fiber coordinates (velocities, momenta or chart coordinates) and controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Arity {
    pub time: bool,
    pub base: usize,
    pub fiber: usize,
    pub control: usize,
}

impl Arity {
    pub fn qy(base: usize, fiber: usize) -> Self {
        Arity {
            time: false,
            base,
            fiber,
            control: 0,
        }
    }

    pub fn qu(base: usize, control: usize) -> Self {
        Arity {
            time: false,
            base,
            fiber: 0,
            control,
        }
    }

    pub fn with_time(mut self) -> Self {
        self.time = true;
        self
    }

    fn offset(&self) -> usize {
        usize::from(self.time)
    }

    pub fn len(&self) -> usize {
        self.offset() + self.base + self.fiber + self.control
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time_index(&self) -> Option<usize> {
        self.time.then_some(0)
    }

    pub fn base_range(&self) -> Range<usize> {
        let s = self.offset();
        s..s + self.base
    }

    pub fn fiber_range(&self) -> Range<usize> {
        let s = self.offset() + self.base;
        s..s + self.fiber
    }

    pub fn control_range(&self) -> Range<usize> {
        let s = self.offset() + self.base + self.fiber;
        s..s + self.control
    }

    /// Packs the blocks; `t` is dropped when the layout has no time slot.
    pub fn pack(&self, t: f64, q: &[f64], y: &[f64], u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(q.len(), self.base);
        debug_assert_eq!(y.len(), self.fiber);
        debug_assert_eq!(u.len(), self.control);
        let mut x = Vec::with_capacity(self.len());
        if self.time {
            x.push(t);
        }
        x.extend_from_slice(q);
        x.extend_from_slice(y);
        x.extend_from_slice(u);
        x
    }
}

/// A smooth real function with an optional analytic gradient.
///
/// Without a gradient every derivative is taken by central differences.
/// With one, Hessian blocks are central differences of the gradient.
#[derive(Clone)]
pub struct ScalarField {
    arity: Arity,
    value: ScalarFn,
    gradient: Option<VectorFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("arity", &self.arity)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(arity: Arity, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            arity,
            value: Arc::new(f),
            gradient: None,
        }
    }

    /// Field of `(q, y)` given as a two-argument closure.
    pub fn from_qy(n: usize, m: usize, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::new(Arity::qy(n, m), move |x| f(&x[..n], &x[n..n + m]))
    }

    /// Field of `(q, u)` given as a two-argument closure.
    pub fn from_qu(n: usize, k: usize, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::new(Arity::qu(n, k), move |x| f(&x[..n], &x[n..n + k]))
    }

    /// Attaches an analytic gradient over the full packed argument.
    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.arity.len());
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.partial(x, 0..x.len())
    }

    pub fn partial(&self, x: &[f64], range: Range<usize>) -> Vec<f64> {
        match &self.gradient {
            Some(g) => g(x)[range].to_vec(),
            None => fd_partial(&*self.value, x, range, first_step_scale()),
        }
    }

    /// Finite-difference gradient, ignoring any analytic one.
    pub fn fd_gradient(&self, x: &[f64]) -> Vec<f64> {
        fd_partial(&*self.value, x, 0..x.len(), first_step_scale())
    }

    /// Block of second derivatives `d^2 f / dx_i dx_j`, `i` in `rows`,
    /// `j` in `cols`. Symmetrized when `rows == cols`.
    pub fn hessian_block(&self, x: &[f64], rows: Range<usize>, cols: Range<usize>) -> Matrix {
        let mut h = match &self.gradient {
            Some(g) => {
                let rows_c = rows.clone();
                let grad_rows = |z: &[f64]| g(z)[rows_c.clone()].to_vec();
                fd_jac_columns(&grad_rows, x, cols.clone(), first_step_scale())
            }
            None => fd_hess_block(&*self.value, x, rows.clone(), cols.clone()),
        };
        if rows == cols {
            h.symmetrize();
        }
        h
    }

    /// Largest deviation between the analytic and the finite-difference
    /// gradient, relative to `max(1, |g|)`. `None` without an analytic gradient.
    pub fn gradient_check(&self, x: &[f64]) -> Option<f64> {
        let g = self.gradient.as_ref()?(x);
        let fd = self.fd_gradient(x);
        Some(
            g.iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                .fold(0.0, f64::max),
        )
    }
}

/// A map `(q, u) -> R^out`, used for control vector fields `Gamma(q, u)`.
#[derive(Clone)]
pub struct ControlField {
    base: usize,
    control: usize,
    out: usize,
    f: Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for ControlField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlField")
            .field("base", &self.base)
            .field("control", &self.control)
            .field("out", &self.out)
            .finish()
    }
}

impl ControlField {
    pub fn new(
        base: usize,
        control: usize,
        out: usize,
        f: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ControlField {
            base,
            control,
            out,
            f: Arc::new(f),
        }
    }

    pub fn base_dim(&self) -> usize {
        self.base
    }

    pub fn control_dim(&self) -> usize {
        self.control
    }

    pub fn out_dim(&self) -> usize {
        self.out
    }

    pub fn eval(&self, q: &[f64], u: &[f64]) -> Vec<f64> {
        (self.f)(q, u)
    }

    /// `d Gamma / d q`, an `out x base` matrix.
    pub fn jac_q(&self, q: &[f64], u: &[f64]) -> Matrix {
        fd_jac_columns(&|z: &[f64]| (self.f)(z, u), q, 0..q.len(), first_step_scale())
    }

    /// `d Gamma / d u`, an `out x control` matrix.
    pub fn jac_u(&self, q: &[f64], u: &[f64]) -> Matrix {
        fd_jac_columns(&|z: &[f64]| (self.f)(q, z), u, 0..u.len(), first_step_scale())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_ranges() {
        let a = Arity {
            time: true,
            base: 2,
            fiber: 3,
            control: 1,
        };
        assert_eq!(a.len(), 7);
        assert_eq!(a.base_range(), 1..3);
        assert_eq!(a.fiber_range(), 3..6);
        assert_eq!(a.control_range(), 6..7);
        assert_eq!(
            a.pack(9.0, &[1.0, 2.0], &[3.0, 4.0, 5.0], &[6.0]),
            vec![9.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
        );
    }

    #[test]
    fn analytic_and_fd_gradients_agree() {
        let f = ScalarField::from_qy(1, 1, |q, y| 0.5 * y[0] * y[0] + q[0].cos())
            .with_gradient(|x| vec![-x[0].sin(), x[1]]);
        assert!(f.gradient_check(&[0.3, -1.2]).unwrap() < 1e-8);
        let h = f.hessian_block(&[0.3, -1.2], 0..2, 0..2);
        assert!((h[(0, 0)] + 0.3f64.cos()).abs() < 1e-9);
        assert!((h[(1, 1)] - 1.0).abs() < 1e-9);
        assert!(h[(0, 1)].abs() < 1e-9);
    }
}
