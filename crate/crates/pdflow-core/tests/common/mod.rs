#![allow(dead_code)]

use pdflow_core::problem::{ConvexFn, LinearMap, PrimalDualPoint, ProblemSpec};
use pdflow_core::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gauss_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn psd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Matrix {
    let g = gauss_mat(rng, n, n);
    let m = g.transpose() * &g / n as f64 + Matrix::identity(n, n) * shift;
    (&m + m.transpose()) * 0.5
}

/// `f = ½xᵀQx + ⟨q,x⟩`, `g = ½‖·−b‖²`, `A` Gaussian scaled by `a_scale / √n`.
pub fn quadratic(n: usize, m: usize, mu: f64, a_scale: f64, seed: u64) -> ProblemSpec {
    let mut r = rng(seed);
    let q = psd(&mut r, n, mu);
    let lin = gauss_vec(&mut r, n);
    let a = gauss_mat(&mut r, m, n) * (a_scale / (n as f64).sqrt());
    let b = gauss_vec(&mut r, m);
    ProblemSpec::new(ConvexFn::quadratic(q, lin).unwrap(), ConvexFn::least_squares_shift(b), LinearMap::new(a).unwrap()).unwrap()
}

/// `min ½xᵀQx + ⟨q,x⟩` subject to `Ax = b` with `b = A x_feasible`.
pub fn constrained(n: usize, m: usize, seed: u64) -> (ProblemSpec, Vector) {
    let mut r = rng(seed);
    let q = psd(&mut r, n, 0.1);
    let lin = gauss_vec(&mut r, n);
    let a = gauss_mat(&mut r, m, n) / (n as f64).sqrt();
    let xf = gauss_vec(&mut r, n);
    let b = &a * &xf;
    let p = ProblemSpec::new(ConvexFn::quadratic(q, lin).unwrap(), ConvexFn::indicator_point(b), LinearMap::new(a).unwrap()).unwrap();
    (p, xf)
}

/// `min λ‖x‖₁ + ½‖Ax − b‖²` with `A` of size `m × n`.
pub fn lasso(m: usize, n: usize, lambda: f64, seed: u64) -> ProblemSpec {
    let mut r = rng(seed);
    let a = gauss_mat(&mut r, m, n) / (m as f64).sqrt();
    let mut xs = Vector::zeros(n);
    for i in 0..n / 5 {
        xs[i] = 1.0 + (i as f64) / n as f64;
    }
    let b = &a * &xs + gauss_vec(&mut r, m) * 0.01;
    ProblemSpec::new(ConvexFn::l1(lambda).unwrap(), ConvexFn::least_squares_shift(b), LinearMap::new(a).unwrap()).unwrap()
}

pub fn random_point(p: &ProblemSpec, seed: u64) -> PrimalDualPoint {
    let mut r = rng(seed);
    PrimalDualPoint::new(gauss_vec(&mut r, p.n()), gauss_vec(&mut r, p.m()))
}
