use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("structure constants not skew-symmetric at C[{c}][{a}][{b}] (sum {sum:e})")]
    NotSkew { c: usize, a: usize, b: usize, sum: f64 },

    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    #[error("ill-conditioned matrix in {context}: rcond {rcond:e} below floor {floor:e}")]
    IllConditioned {
        context: &'static str,
        rcond: f64,
        floor: f64,
    },

    #[error("degenerate Lagrangian at {point:?}: fiber Hessian is singular")]
    DegenerateLagrangian { point: Vec<f64> },

    #[error("Newton failed to converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Newton stalled at a degenerate root (linear convergence, residual {residual:e})")]
    DegenerateRoot { residual: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("jet is not admissible: |qdot - rho(q) y| = {defect:e}")]
    NotAdmissible { defect: f64 },

    #[error("rank-deficient distribution: Gram matrix is not positive definite")]
    RankDeficient,

    #[error("metric is not symmetric positive definite")]
    MetricNotSpd,

    #[error("chart violation: |v| = {norm} exceeds radius {radius}")]
    ChartViolation { norm: f64, radius: f64 },

    #[error("elements are not composable: |q_next - b(q, v)| = {gap:e}")]
    NotComposable { gap: f64 },

    #[error("control Hessian is singular")]
    SingularControl,
}
