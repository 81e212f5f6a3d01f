//! Dense reference implementations built straight from the definitions,
//! sharing no code with the library's block-diagonal machinery.

#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3};

pub fn omega(theta: f64, dim: usize, f: usize) -> f64 {
    theta.powf(-(2.0 * f as f64) / dim as f64)
}

/// Dense rotary matrix over `planes` (plane indices of a `dim`-wide schedule).
pub fn rotary(theta: f64, dim: usize, planes: std::ops::Range<usize>, m: f64) -> DMatrix<f64> {
    let n = 2 * planes.len();
    let mut out = DMatrix::zeros(n, n);
    for (i, f) in planes.enumerate() {
        let a = m * omega(theta, dim, f);
        let (s, c) = a.sin_cos();
        out[(2 * i, 2 * i)] = c;
        out[(2 * i, 2 * i + 1)] = -s;
        out[(2 * i + 1, 2 * i)] = s;
        out[(2 * i + 1, 2 * i + 1)] = c;
    }
    out
}

pub fn blkdiag(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = parts.iter().map(|p| p.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for p in parts {
        out.view_mut((at, at), (p.nrows(), p.ncols())).copy_from(p);
        at += p.nrows();
    }
    out
}

pub fn repeat4(m: &Matrix4<f64>, copies: usize) -> DMatrix<f64> {
    let d = DMatrix::from_column_slice(4, 4, m.as_slice());
    blkdiag(&vec![d; copies])
}

/// `[[K R, K t], [0, 1]]` written out entry by entry.
pub fn lifted(k: &Matrix3<f64>, r: &Matrix3<f64>, t: &Vector3<f64>) -> Matrix4<f64> {
    let mut out = Matrix4::zeros();
    for i in 0..3 {
        for j in 0..3 {
            out[(i, j)] = (0..3).map(|l| k[(i, l)] * r[(l, j)]).sum();
        }
        out[(i, 3)] = (0..3).map(|l| k[(i, l)] * t[l]).sum();
    }
    out[(3, 3)] = 1.0;
    out
}

pub fn quadratic(q: &[f64], m: &DMatrix<f64>, k: &[f64]) -> f64 {
    let q = nalgebra::DVector::from_column_slice(q);
    let k = nalgebra::DVector::from_column_slice(k);
    q.dot(&(m * k))
}

/// Dense query/key operators of the hybrid encoding with the default layout
/// `(d/6, d/6, d/3, d/3)`, forward convention.
pub struct DenseReRope {
    pub theta: f64,
    pub d: usize,
}

impl DenseReRope {
    fn widths(&self) -> (usize, usize, usize, usize) {
        (self.d / 6, self.d / 6, self.d / 3, self.d / 3)
    }

    pub fn operator(&self, tau: f64, h: f64, w: f64, camera: &Matrix4<f64>, query: bool) -> DMatrix<f64> {
        let (high, low, dh, dw) = self.widths();
        let dt = high + low;
        let side = if query { camera.transpose() } else { camera.try_inverse().expect("invertible camera") };
        blkdiag(&[
            rotary(self.theta, dt, 0..high / 2, tau),
            repeat4(&side, low / 4),
            rotary(self.theta, dh, 0..dh / 2, h),
            rotary(self.theta, dw, 0..dw / 2, w),
        ])
    }
}
