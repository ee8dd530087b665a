//! Rotation group in exponential (rotation-vector) coordinates.

use std::f64::consts::PI;

use super::{GroupoidModel, LieGroupModel};
use crate::numerics::Matrix;

pub type Mat3 = [[f64; 3]; 3];

/// Chart radius of the built-in model, kept away from the logarithm's
/// branch locus at `|v| = pi`.
pub const CHART_RADIUS: f64 = PI - 0.1;

pub fn hat(v: &[f64]) -> Mat3 {
    [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn norm3(v: &[f64]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `I + a K + b K^2` with `K = hat(v)`.
fn poly(v: &[f64], a: f64, b: f64) -> Mat3 {
    let k = hat(v);
    let k2 = mat_mul(&k, &k);
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = if i == j { 1.0 } else { 0.0 } + a * k[i][j] + b * k2[i][j];
        }
    }
    r
}

/// Rodrigues' formula.
pub fn exp(v: &[f64]) -> Mat3 {
    let th = norm3(v);
    let t2 = th * th;
    let (a, b) = if th < 1e-4 {
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (th.sin() / th, (1.0 - th.cos()) / t2)
    };
    poly(v, a, b)
}

/// Principal logarithm, valid up to and including angle `pi`.
pub fn log(r: &Mat3) -> [f64; 3] {
    let s = [
        0.5 * (r[2][1] - r[1][2]),
        0.5 * (r[0][2] - r[2][0]),
        0.5 * (r[1][0] - r[0][1]),
    ];
    let sn = norm3(&s);
    let c = (0.5 * (r[0][0] + r[1][1] + r[2][2] - 1.0)).clamp(-1.0, 1.0);
    let th = sn.atan2(c);
    if th < 1e-4 {
        let f = 1.0 + th * th / 6.0;
        return [s[0] * f, s[1] * f, s[2] * f];
    }
    if sn > 0.5 || c > 0.0 {
        let f = th / sn;
        return [s[0] * f, s[1] * f, s[2] * f];
    }
    // Near pi the skew part is small; read the axis off the symmetric part,
    // which equals (1 - c) k k^T after removing c I.
    let one_c = 1.0 - c;
    let b = |i: usize, j: usize| 0.5 * (r[i][j] + r[j][i]) - if i == j { c } else { 0.0 };
    let i = (0..3).max_by(|&x, &y| b(x, x).total_cmp(&b(y, y))).unwrap();
    let ki = (b(i, i) / one_c).sqrt();
    let mut k = [0.0; 3];
    for (j, kj) in k.iter_mut().enumerate() {
        *kj = if j == i { ki } else { b(i, j) / (one_c * ki) };
    }
    if k[0] * s[0] + k[1] * s[1] + k[2] * s[2] < 0.0 {
        k = [-k[0], -k[1], -k[2]];
    }
    let n = norm3(&k);
    [k[0] * th / n, k[1] * th / n, k[2] * th / n]
}

/// `log(exp(v) exp(w))`.
pub fn compose(v: &[f64], w: &[f64]) -> [f64; 3] {
    log(&mat_mul(&exp(v), &exp(w)))
}

/// `1/th^2 - (1 + cos th) / (2 th sin th)`; the closed form cancels badly
/// for small angles, so a series is used there.
fn jacobian_inv_coeff(th: f64) -> f64 {
    if th < 0.3 {
        let t2 = th * th;
        1.0 / 12.0 + t2 * (1.0 / 720.0 + t2 * (1.0 / 30240.0 + t2 * (1.0 / 1209600.0 + t2 / 47900160.0)))
    } else {
        1.0 / (th * th) - (1.0 + th.cos()) / (2.0 * th * th.sin())
    }
}

fn to_matrix(m: &Mat3) -> Matrix {
    Matrix::from_fn(3, 3, |i, j| m[i][j])
}

/// Inverse right Jacobian: `log(exp(v) exp(e)) = v + Jr^{-1}(v) e + O(e^2)`.
pub fn right_jacobian_inv(v: &[f64]) -> Matrix {
    to_matrix(&poly(v, 0.5, jacobian_inv_coeff(norm3(v))))
}

/// Inverse left Jacobian: `log(exp(e) exp(v)) = v + Jl^{-1}(v) e + O(e^2)`.
pub fn left_jacobian_inv(v: &[f64]) -> Matrix {
    to_matrix(&poly(v, -0.5, jacobian_inv_coeff(norm3(v))))
}

/// `Ad*_g mu = R(v)^T mu`.
pub fn coadjoint(v: &[f64], mu: &[f64]) -> Vec<f64> {
    let r = exp(v);
    (0..3).map(|j| (0..3).map(|i| r[i][j] * mu[i]).sum()).collect()
}

/// SO(3) as a groupoid over a point, with closed-form translation
/// differentials `L = Jr^{-1}` and `R = Jl^{-1}`.
pub fn so3() -> LieGroupModel {
    let model = GroupoidModel::new(0, 3, |_, _| Vec::new(), |_, v, w| compose(v, w).to_vec())
        .with_chart_radius(CHART_RADIUS)
        .with_left(|_, v| right_jacobian_inv(v))
        .with_right(|_, w| left_jacobian_inv(w));
    LieGroupModel::new(model, coadjoint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn log_inverts_exp() {
        for v in [
            [0.0, 0.0, 0.0],
            [1e-7, -2e-7, 3e-8],
            [0.3, -0.2, 0.5],
            [1.0, 2.0, -0.5],
            [0.0, 0.0, PI - 1e-9],
            [
                PI / 3.0_f64.sqrt() - 1e-6,
                -(PI / 3.0_f64.sqrt() - 1e-6),
                PI / 3.0_f64.sqrt() - 1e-6,
            ],
        ] {
            assert!(close(&log(&exp(&v)), &v, 1e-9), "{v:?} -> {:?}", log(&exp(&v)));
        }
    }

    #[test]
    fn quarter_turn_coadjoint() {
        let mu = coadjoint(&[0.0, 0.0, PI / 2.0], &[1.0, 0.0, 0.0]);
        assert!(close(&mu, &[0.0, -1.0, 0.0], 1e-15));
    }

    #[test]
    fn jacobians_agree_at_identity() {
        let z = [0.0; 3];
        assert_eq!(right_jacobian_inv(&z), Matrix::identity(3));
        assert_eq!(left_jacobian_inv(&z), Matrix::identity(3));
    }
}
