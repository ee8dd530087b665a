//! Local Lie algebroid data: an anchor `rho(q)` and structure functions
//! `C^c_ab(q)` with respect to a local basis of sections.

use std::fmt;
use std::sync::Arc;

use super::fields::VectorFn;
use crate::error::{Error, Result};
use crate::numerics::diff::fd_jac;
use crate::numerics::linalg::{cholesky, factor_checked, Matrix};
use crate::numerics::SolverConfig;

pub type AnchorFn = Arc<dyn Fn(&[f64]) -> Result<Matrix> + Send + Sync>;
pub type StructureFn = Arc<dyn Fn(&[f64]) -> Result<StructureTensor> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

/// Structure functions at a point, `C^c_ab` stored at `(c, a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTensor {
    m: usize,
    data: Vec<f64>,
}

impl StructureTensor {
    pub fn zeros(m: usize) -> Self {
        StructureTensor {
            m,
            data: vec![0.0; m * m * m],
        }
    }

    /// Levi-Civita constants of `so(3)`: `C^c_ab = eps_cab`.
    pub fn so3() -> Self {
        let mut c = StructureTensor::zeros(3);
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            c.set(k, i, j, 1.0);
            c.set(k, j, i, -1.0);
        }
        c
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    fn idx(&self, c: usize, a: usize, b: usize) -> usize {
        (c * self.m + a) * self.m + b
    }

    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.data[self.idx(c, a, b)]
    }

    pub fn set(&mut self, c: usize, a: usize, b: usize, v: f64) {
        let i = self.idx(c, a, b);
        self.data[i] = v;
    }

    /// Sets `C^c_ab = v` and `C^c_ba = -v`.
    pub fn set_skew(&mut self, c: usize, a: usize, b: usize, v: f64) {
        self.set(c, a, b, v);
        self.set(c, b, a, -v);
    }

    pub fn negated(&self) -> Self {
        StructureTensor {
            m: self.m,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &StructureTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|C^c_ab + C^c_ba|`.
    pub fn skew_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.m {
            for a in 0..self.m {
                for b in a..self.m {
                    worst = worst.max((self.get(c, a, b) + self.get(c, b, a)).abs());
                }
            }
        }
        worst
    }

    /// `sum_{b,c} C^c_ab y^b mu_c` for every `a`.
    pub fn contract(&self, y: &[f64], mu: &[f64]) -> Vec<f64> {
        let m = self.m;
        debug_assert_eq!(y.len(), m);
        debug_assert_eq!(mu.len(), m);
        (0..m)
            .map(|a| {
                let mut s = 0.0;
                for c in 0..m {
                    if mu[c] == 0.0 {
                        continue;
                    }
                    for b in 0..m {
                        s += self.get(c, a, b) * y[b] * mu[c];
                    }
                }
                s
            })
            .collect()
    }
}

/// Anchor and structure functions of a Lie algebroid in a local trivialization.
#[derive(Clone)]
pub struct AlgebroidStructure {
    n: usize,
    m: usize,
    anchor: AnchorFn,
    structure: StructureFn,
    reference: Option<StructureFn>,
}

impl fmt::Debug for AlgebroidStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgebroidStructure")
            .field("base_dim", &self.n)
            .field("fiber_rank", &self.m)
            .finish()
    }
}

impl AlgebroidStructure {
    /// Builds a structure from arbitrary anchor and structure closures.
    pub fn custom(
        n: usize,
        m: usize,
        anchor: impl Fn(&[f64]) -> Result<Matrix> + Send + Sync + 'static,
        structure: impl Fn(&[f64]) -> Result<StructureTensor> + Send + Sync + 'static,
    ) -> Self {
        AlgebroidStructure {
            n,
            m,
            anchor: Arc::new(anchor),
            structure: Arc::new(structure),
            reference: None,
        }
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn fiber_rank(&self) -> usize {
        self.m
    }

    pub fn anchor(&self, q: &[f64]) -> Result<Matrix> {
        self.check_point(q)?;
        let rho = (self.anchor)(q)?;
        if rho.rows() != self.n || rho.cols() != self.m {
            return Err(Error::DimensionMismatch {
                context: "anchor matrix",
                expected: self.n * self.m,
                found: rho.rows() * rho.cols(),
            });
        }
        if !rho.is_finite() {
            return Err(Error::NonFinite { context: "anchor" });
        }
        Ok(rho)
    }

    pub fn structure(&self, q: &[f64]) -> Result<StructureTensor> {
        self.check_point(q)?;
        let c = (self.structure)(q)?;
        if c.rank() != self.m {
            return Err(Error::DimensionMismatch {
                context: "structure tensor",
                expected: self.m,
                found: c.rank(),
            });
        }
        if c.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "structure functions",
            });
        }
        Ok(c)
    }

    fn check_point(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "base point",
                expected: self.n,
                found: q.len(),
            });
        }
        Ok(())
    }

    /// Replaces the structure functions by analytic ones. The previous
    /// (typically finite-difference) functions are kept for
    /// [`verify_structure`](Self::verify_structure).
    pub fn with_structure(mut self, f: impl Fn(&[f64]) -> Result<StructureTensor> + Send + Sync + 'static) -> Self {
        self.reference = Some(self.structure.clone());
        self.structure = Arc::new(f);
        self
    }

    /// Same anchor, structure functions with the opposite sign.
    pub fn with_negated_structure(&self) -> Self {
        let inner = self.structure.clone();
        AlgebroidStructure {
            n: self.n,
            m: self.m,
            anchor: self.anchor.clone(),
            structure: Arc::new(move |q| inner(q).map(|c| c.negated())),
            reference: None,
        }
    }

    /// Largest difference between analytic structure functions and the ones
    /// they replaced, at `q`.
    pub fn verify_structure(&self, q: &[f64]) -> Result<Option<f64>> {
        match &self.reference {
            None => Ok(None),
            Some(r) => {
                let a = self.structure(q)?;
                let b = r(q)?;
                Ok(Some(a.max_abs_diff(&b)))
            }
        }
    }

    /// `qdot - rho(q) y`.
    pub fn admissibility_defect(&self, q: &[f64], qdot: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        if qdot.len() != self.n || y.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "admissibility_defect",
                expected: self.n + self.m,
                found: qdot.len() + y.len(),
            });
        }
        let rho = self.anchor(q)?;
        Ok(rho.mul_vec(y).iter().zip(qdot).map(|(a, b)| b - a).collect())
    }
}

/// Standard coordinate frame on `R^n`: `rho = I`, `C = 0`.
pub fn coordinate_frame(n: usize) -> Result<AlgebroidStructure> {
    if n == 0 {
        return Err(Error::InvalidArgument("coordinate frame needs n >= 1".into()));
    }
    Ok(AlgebroidStructure::custom(
        n,
        n,
        move |_| Ok(Matrix::identity(n)),
        move |_| Ok(StructureTensor::zeros(n)),
    ))
}

/// Lie algebra of dimension `m` (base dimension zero) with constant
/// structure constants. Rejects constants that are not skew in the lower
/// indices.
pub fn lie_algebra(constants: StructureTensor) -> Result<AlgebroidStructure> {
    let m = constants.rank();
    if m == 0 {
        return Err(Error::InvalidArgument("Lie algebra needs dimension >= 1".into()));
    }
    let tol = 1e-12 * constants.max_abs().max(1.0);
    for c in 0..m {
        for a in 0..m {
            for b in a..m {
                let sum = constants.get(c, a, b) + constants.get(c, b, a);
                if sum.abs() > tol {
                    return Err(Error::NotSkew { c, a, b, sum });
                }
            }
        }
    }
    Ok(AlgebroidStructure::custom(
        0,
        m,
        move |_| Ok(Matrix::zeros(0, m)),
        move |_| Ok(constants.clone()),
    ))
}

/// `[X, Y]^k = X^l d_l Y^k - Y^l d_l X^k` by central differences.
pub fn lie_bracket(x: &VectorFn, y: &VectorFn, q: &[f64]) -> Vec<f64> {
    let jx = fd_jac(|z| x(z), q);
    let jy = fd_jac(|z| y(z), q);
    let xv = x(q);
    let yv = y(q);
    let a = jy.mul_vec(&xv);
    let b = jx.mul_vec(&yv);
    a.iter().zip(&b).map(|(u, v)| u - v).collect()
}

/// Moving frame given by `n` pointwise independent vector fields on `R^n`.
/// The anchor columns are the fields and the structure functions solve
/// `[Y_a, Y_b] = C^c_ab Y_c`, with brackets by central differences.
pub fn frame_from_vectorfields(n: usize, fields: Vec<VectorFn>) -> Result<AlgebroidStructure> {
    if fields.len() != n {
        return Err(Error::DimensionMismatch {
            context: "frame_from_vectorfields (number of fields)",
            expected: n,
            found: fields.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("frame needs n >= 1".into()));
    }
    let fields = Arc::new(fields);
    let anchor_fields = fields.clone();
    let anchor = move |q: &[f64]| frame_matrix(n, &anchor_fields, q);
    let floor = SolverConfig::default().condition_floor;
    let structure = move |q: &[f64]| -> Result<StructureTensor> {
        let rho = frame_matrix(n, &fields, q)?;
        let lu = factor_checked(&rho, floor, "frame inversion")?;
        let mut c = StructureTensor::zeros(n);
        for a in 0..n {
            for b in (a + 1)..n {
                let br = lie_bracket(&fields[a], &fields[b], q);
                let coeff = lu.solve(&br);
                for (k, v) in coeff.into_iter().enumerate() {
                    c.set_skew(k, a, b, v);
                }
            }
        }
        Ok(c)
    };
    Ok(AlgebroidStructure::custom(n, n, anchor, structure))
}

fn frame_matrix(n: usize, fields: &[VectorFn], q: &[f64]) -> Result<Matrix> {
    let cols: Vec<Vec<f64>> = fields.iter().map(|f| f(q)).collect();
    Matrix::from_columns(n, &cols)
}

/// Distribution spanned by `m` vector fields on `R^n` with a metric, used to
/// build the nonholonomic algebroid whose bracket is the metric projection of
/// the Lie bracket back onto the distribution.
#[derive(Clone)]
pub struct NonholonomicFrame {
    n: usize,
    distribution: Arc<Vec<VectorFn>>,
    metric: MatrixFn,
}

impl NonholonomicFrame {
    pub fn new(n: usize, distribution: Vec<VectorFn>, metric: MatrixFn) -> Result<Self> {
        if distribution.is_empty() || distribution.len() > n {
            return Err(Error::InvalidArgument(format!(
                "distribution rank {} must be in 1..={n}",
                distribution.len()
            )));
        }
        Ok(NonholonomicFrame {
            n,
            distribution: Arc::new(distribution),
            metric,
        })
    }

    pub fn rank(&self) -> usize {
        self.distribution.len()
    }

    pub fn distribution_matrix(&self, q: &[f64]) -> Result<Matrix> {
        frame_matrix(self.n, &self.distribution, q)
    }

    fn metric_at(&self, q: &[f64]) -> Result<Matrix> {
        let g = (self.metric)(q);
        if g.rows() != self.n || g.cols() != self.n {
            return Err(Error::DimensionMismatch {
                context: "metric",
                expected: self.n * self.n,
                found: g.rows() * g.cols(),
            });
        }
        if cholesky(&g).is_none() {
            return Err(Error::MetricNotSpd);
        }
        Ok(g)
    }

    /// Returns `(D, g, Lu(D^T g D))`.
    fn pieces(&self, q: &[f64]) -> Result<(Matrix, Matrix, crate::numerics::Lu)> {
        let d = self.distribution_matrix(q)?;
        let g = self.metric_at(q)?;
        let gram = d.transpose().mul(&g).mul(&d);
        if cholesky(&gram).is_none() {
            return Err(Error::RankDeficient);
        }
        let lu = factor_checked(
            &gram,
            SolverConfig::default().condition_floor,
            "distribution Gram matrix",
        )
        .map_err(|_| Error::RankDeficient)?;
        Ok((d, g, lu))
    }

    /// Coordinates in the distribution basis of the `g`-orthogonal projection of `v`.
    pub fn coefficients(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let (d, g, lu) = self.pieces(q)?;
        Ok(lu.solve(&d.tr_mul_vec(&g.mul_vec(v))))
    }

    /// `P = D (D^T g D)^{-1} D^T g`.
    pub fn projector(&self, q: &[f64]) -> Result<Matrix> {
        let (d, g, lu) = self.pieces(q)?;
        let inv = lu.inverse();
        Ok(d.mul(&inv).mul(&d.transpose()).mul(&g))
    }

    pub fn structure(&self, q: &[f64]) -> Result<StructureTensor> {
        let m = self.rank();
        let (d, g, lu) = self.pieces(q)?;
        let mut c = StructureTensor::zeros(m);
        for a in 0..m {
            for b in (a + 1)..m {
                let br = lie_bracket(&self.distribution[a], &self.distribution[b], q);
                let coeff = lu.solve(&d.tr_mul_vec(&g.mul_vec(&br)));
                for (k, v) in coeff.into_iter().enumerate() {
                    c.set_skew(k, a, b, v);
                }
            }
        }
        Ok(c)
    }

    pub fn into_algebroid(self) -> AlgebroidStructure {
        let n = self.n;
        let m = self.rank();
        let a = self.clone();
        AlgebroidStructure::custom(n, m, move |q| a.distribution_matrix(q), move |q| self.structure(q))
    }
}

/// Nonholonomic algebroid of a distribution with a metric.
pub fn nonholonomic_structure(n: usize, distribution: Vec<VectorFn>, metric: MatrixFn) -> Result<AlgebroidStructure> {
    Ok(NonholonomicFrame::new(n, distribution, metric)?.into_algebroid())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vf(f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> VectorFn {
        Arc::new(f)
    }

    #[test]
    fn coordinate_frame_is_trivial() {
        let s = coordinate_frame(3).unwrap();
        let q = [0.1, 0.2, 0.3];
        assert_eq!(s.anchor(&q).unwrap(), Matrix::identity(3));
        assert_eq!(s.structure(&q).unwrap().max_abs(), 0.0);
        assert!(coordinate_frame(0).is_err());
    }

    #[test]
    fn so3_constants() {
        let c = StructureTensor::so3();
        assert_eq!(c.get(2, 0, 1), 1.0);
        assert_eq!(c.get(2, 1, 0), -1.0);
        assert_eq!(c.get(0, 1, 2), 1.0);
        assert_eq!(c.get(1, 2, 0), 1.0);
        assert_eq!(c.get(0, 0, 1), 0.0);
        let s = lie_algebra(c).unwrap();
        assert_eq!(s.base_dim(), 0);
        assert_eq!(s.anchor(&[]).unwrap().cols(), 3);
    }

    #[test]
    fn non_skew_constants_rejected() {
        let mut c = StructureTensor::zeros(2);
        c.set(0, 0, 1, 1.0);
        c.set(0, 1, 0, 1.0);
        assert!(matches!(lie_algebra(c), Err(Error::NotSkew { .. })));
    }

    #[test]
    fn frame_brackets_match_hand_computation() {
        // Y1 = d/dq1, Y2 = q1 d/dq2: [Y1, Y2] = d/dq2 = (1/q1) Y2.
        let s = frame_from_vectorfields(2, vec![vf(|_| vec![1.0, 0.0]), vf(|q| vec![0.0, q[0]])]).unwrap();
        let c = s.structure(&[2.0, 0.0]).unwrap();
        assert!((c.get(1, 0, 1) - 0.5).abs() < 1e-9);
        assert!((c.get(1, 1, 0) + 0.5).abs() < 1e-9);
        assert!(c.get(0, 0, 1).abs() < 1e-9);
    }

    #[test]
    fn degenerate_frame_rejected() {
        let s = frame_from_vectorfields(2, vec![vf(|_| vec![1.0, 0.0]), vf(|q| vec![0.0, q[0]])]).unwrap();
        assert!(s.structure(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn martinet_frame() {
        let s = frame_from_vectorfields(
            3,
            vec![
                vf(|_| vec![0.0, 1.0, 0.0]),
                vf(|q| vec![1.0, 0.0, 0.5 * q[1] * q[1]]),
                vf(|_| vec![0.0, 0.0, 1.0]),
            ],
        )
        .unwrap();
        let q = [0.3, -0.7, 1.1];
        let c = s.structure(&q).unwrap();
        for cc in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    let expected = match (cc, a, b) {
                        (2, 0, 1) => q[1],
                        (2, 1, 0) => -q[1],
                        _ => 0.0,
                    };
                    assert!((c.get(cc, a, b) - expected).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn nonholonomic_projected_bracket() {
        // D = span{d/dq2, d/dq1 + q2^2/2 d/dq3}, Euclidean metric.
        // [Y1, Y2] = q2 d/dq3 projects to (q2^3/2)/(1 + q2^4/4) Y2.
        let metric: MatrixFn = Arc::new(|_| Matrix::identity(3));
        let s = nonholonomic_structure(
            3,
            vec![vf(|_| vec![0.0, 1.0, 0.0]), vf(|q| vec![1.0, 0.0, 0.5 * q[1] * q[1]])],
            metric,
        )
        .unwrap();
        let c = s.structure(&[0.0, 1.0, 0.0]).unwrap();
        assert!((c.get(1, 0, 1) - 0.4).abs() < 1e-8);
        assert!(c.get(0, 0, 1).abs() < 1e-8);
    }

    #[test]
    fn nonholonomic_rejects_bad_input() {
        let metric: MatrixFn = Arc::new(|_| Matrix::identity(2));
        let s = nonholonomic_structure(2, vec![vf(|_| vec![1.0, 0.0]), vf(|_| vec![2.0, 0.0])], metric).unwrap();
        assert_eq!(s.structure(&[0.0, 0.0]), Err(Error::RankDeficient));

        let bad: MatrixFn = Arc::new(|_| Matrix::from_row_major(2, 2, vec![1.0, 0.0, 0.0, -1.0]).unwrap());
        let s = nonholonomic_structure(2, vec![vf(|_| vec![1.0, 0.0])], bad).unwrap();
        assert_eq!(s.structure(&[0.0, 0.0]), Err(Error::MetricNotSpd));
    }

    #[test]
    fn admissibility_defect_of_frame() {
        let s = frame_from_vectorfields(2, vec![vf(|_| vec![2.0, 0.0]), vf(|_| vec![0.0, 1.0])]).unwrap();
        let d = s.admissibility_defect(&[0.0, 0.0], &[2.0, 3.0], &[1.0, 3.0]).unwrap();
        assert_eq!(d, vec![0.0, 0.0]);
    }
}
