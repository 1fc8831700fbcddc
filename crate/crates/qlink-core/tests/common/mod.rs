#![allow(dead_code)]

use proptest::prelude::*;
use qlink_core::linalg::{c, CMat, C64};

/// Raw material for a random d×d complex matrix.
pub fn entries(d: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d)
}

pub fn matrix(d: usize, e: &[(f64, f64)]) -> CMat {
    CMat::from_fn(d, d, |i, j| c(e[i * d + j].0, e[i * d + j].1))
}

/// A·A† / tr, full rank with probability one.
pub fn density(d: usize, e: &[(f64, f64)]) -> CMat {
    let a = matrix(d, e);
    let p = &a * a.adjoint();
    let tr: f64 = (0..d).map(|i| p[(i, i)].re).sum();
    p.unscale(tr)
}

/// e^{iα}·Rz(β)·Ry(γ)·Rz(δ).
pub fn unitary(alpha: f64, beta: f64, gamma: f64, delta: f64) -> CMat {
    let rz = |t: f64| {
        let mut m = CMat::zeros(2, 2);
        m[(0, 0)] = C64::from_polar(1.0, -0.5 * t);
        m[(1, 1)] = C64::from_polar(1.0, 0.5 * t);
        m
    };
    let (s, co) = (0.5 * gamma).sin_cos();
    let ry = CMat::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]);
    (rz(beta) * ry * rz(delta)) * C64::from_polar(1.0, alpha)
}

pub fn angles() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    let a = -std::f64::consts::PI..std::f64::consts::PI;
    (a.clone(), a.clone(), a.clone(), a)
}
