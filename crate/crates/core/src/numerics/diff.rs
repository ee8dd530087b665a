//! Central finite differences.
//!
//! First derivatives use `h_i = scale * max(1, |x_i|)` with `scale` defaulting
//! to `cbrt(eps)`. Second derivatives use nested central differences with
//! `h_i = eps^(1/4) * max(1, |x_i|)`. Hessian entries that are smaller than the
//! rounding noise of the stencil are flushed to zero, so that a Hessian which is
//! identically zero comes out as exactly zero.

use super::linalg::Matrix;

/// Default first-derivative step scale, `cbrt(eps)`.
pub fn first_step_scale() -> f64 {
    f64::EPSILON.cbrt()
}

/// Default second-derivative step scale, `eps^(1/4)`.
pub fn second_step_scale() -> f64 {
    f64::EPSILON.sqrt().sqrt()
}

fn step(x: f64, scale: f64) -> f64 {
    scale * x.abs().max(1.0)
}

/// Gradient of a scalar function with the default step.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    fd_grad_with(f, x, first_step_scale())
}

pub fn fd_grad_with(f: impl Fn(&[f64]) -> f64, x: &[f64], scale: f64) -> Vec<f64> {
    fd_partial(&f, x, 0..x.len(), scale)
}

/// Partial derivatives with respect to the coordinates in `range`.
pub fn fd_partial<F: Fn(&[f64]) -> f64 + ?Sized>(
    f: &F,
    x: &[f64],
    range: std::ops::Range<usize>,
    scale: f64,
) -> Vec<f64> {
    let mut xs = x.to_vec();
    range
        .map(|i| {
            let h = step(x[i], scale);
            let xp = x[i] + h;
            let xm = x[i] - h;
            xs[i] = xp;
            let fp = f(&xs);
            xs[i] = xm;
            let fm = f(&xs);
            xs[i] = x[i];
            (fp - fm) / (xp - xm)
        })
        .collect()
}

/// Step scale for the five-point stencil, `eps^(1/5)`.
pub fn five_point_step_scale() -> f64 {
    f64::EPSILON.powf(0.2)
}

/// Fourth-order partial derivatives (five-point central stencil).
pub fn fd_partial5<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, x: &[f64], range: std::ops::Range<usize>) -> Vec<f64> {
    let scale = five_point_step_scale();
    let mut xs = x.to_vec();
    range
        .map(|i| {
            let h = step(x[i], scale);
            let mut at = |d: f64| {
                xs[i] = x[i] + d;
                let v = f(&xs);
                xs[i] = x[i];
                v
            };
            let (f2, f1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
            (8.0 * (f1 - m1) - (f2 - m2)) / (12.0 * h)
        })
        .collect()
}

/// Jacobian `J[i][j] = d F_i / d x_j` with the default step.
pub fn fd_jac(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Matrix {
    fd_jac_with(f, x, first_step_scale())
}

pub fn fd_jac_with(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], scale: f64) -> Matrix {
    fd_jac_columns(&f, x, 0..x.len(), scale)
}

/// Jacobian columns for the coordinates in `cols`.
pub fn fd_jac_columns<F: Fn(&[f64]) -> Vec<f64> + ?Sized>(
    f: &F,
    x: &[f64],
    cols: std::ops::Range<usize>,
    scale: f64,
) -> Matrix {
    let mut xs = x.to_vec();
    let mut columns = Vec::with_capacity(cols.len());
    let mut rows = None;
    for j in cols {
        let h = step(x[j], scale);
        let xp = x[j] + h;
        let xm = x[j] - h;
        xs[j] = xp;
        let fp = f(&xs);
        xs[j] = xm;
        let fm = f(&xs);
        xs[j] = x[j];
        let d = xp - xm;
        rows.get_or_insert(fp.len());
        columns.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / d).collect::<Vec<_>>());
    }
    let rows = rows.unwrap_or_else(|| f(x).len());
    Matrix::from_columns(rows, &columns).expect("fd_jac: inconsistent output length")
}

/// Symmetric Hessian by nested central differences.
pub fn fd_hess(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Matrix {
    let n = x.len();
    let mut h = fd_hess_block(&f, x, 0..n, 0..n);
    h.symmetrize();
    h
}

/// Block `d^2 f / dx_i dx_j` for `i` in `rows`, `j` in `cols`.
pub fn fd_hess_block<F: Fn(&[f64]) -> f64 + ?Sized>(
    f: &F,
    x: &[f64],
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> Matrix {
    let scale = second_step_scale();
    let mut out = Matrix::zeros(rows.len(), cols.len());
    let mut xs = x.to_vec();
    let steps: Vec<f64> = x.iter().map(|&v| step(v, scale)).collect();
    let eval = |xs: &mut Vec<f64>, i: usize, si: f64, j: usize, sj: f64| {
        xs[i] += si;
        xs[j] += sj;
        let v = f(xs);
        xs[i] = x[i];
        xs[j] = x[j];
        v
    };
    for (r, i) in rows.clone().enumerate() {
        for (c, j) in cols.clone().enumerate() {
            let (hi, hj) = (steps[i], steps[j]);
            let (fpp, fpm, fmp, fmm) = if i == j {
                let fp = eval(&mut xs, i, 2.0 * hi, i, 0.0);
                let f0 = f(x);
                let fm = eval(&mut xs, i, -2.0 * hi, i, 0.0);
                (fp, f0, f0, fm)
            } else {
                (
                    eval(&mut xs, i, hi, j, hj),
                    eval(&mut xs, i, hi, j, -hj),
                    eval(&mut xs, i, -hi, j, hj),
                    eval(&mut xs, i, -hi, j, -hj),
                )
            };
            let value = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
            let fmax = fpp.abs().max(fpm.abs()).max(fmp.abs()).max(fmm.abs());
            let noise = 8.0 * f64::EPSILON * fmax / (hi * hj);
            out[(r, c)] = if value.abs() <= noise { 0.0 } else { value };
        }
    }
    out
}
