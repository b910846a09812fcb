//! Reference saddle-point solvers: direct KKT solve, forward–backward, Chambolle–Pock.

use alloc::format;
use alloc::string::ToString;

use crate::error::config;
use crate::math::{self, sqrt};
use crate::problem::{ConvexFn, FnKind, ProblemSpec};
use crate::{Error, Matrix, Result, Vector};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverResult {
    pub x: Vector,
    pub y: Vector,
    pub iterations: usize,
    /// Saddle residual of `(x, y)`.
    pub residual: f64,
    /// Method-specific stopping quantity (fixed-point residual or step displacement).
    pub displacement: f64,
    /// Filled by callers that can read a clock.
    pub wall_time: Option<f64>,
}

/// `(H, h)` with `fn(x) = ½xᵀHx + ⟨h, x⟩ + const`, for the kinds that have that form.
fn quadratic_parts(f: &ConvexFn, n: usize) -> Option<(Matrix, Vector)> {
    match f.kind() {
        FnKind::Zero => Some((Matrix::zeros(n, n), Vector::zeros(n))),
        FnKind::Quadratic { q_mat, q, .. } => Some((q_mat.clone(), q.clone())),
        FnKind::LinearFn { b } => Some((Matrix::zeros(n, n), b.clone())),
        FnKind::LeastSquaresShift { b } => Some((Matrix::identity(n, n), -b)),
        _ => None,
    }
}

pub const KKT_TOL: f64 = 1e-10;

/// Solves `[Q_f, Aᵀ; A, −H] (x, y) = (−q_f, h)` where `g* = ½yᵀHy + ⟨h, y⟩`.
///
/// Singular systems get the minimum-norm solution.
pub fn kkt_solve(p: &ProblemSpec) -> Result<SolverResult> {
    let (n, m) = (p.n(), p.m());
    let (qf, lf) = quadratic_parts(&p.f, n)
        .ok_or_else(|| Error::Capability("kkt_solve needs a quadratic or linear f".to_string()))?;
    let gs = p.g_conj()?;
    let (hg, lg) = match p.g.kind() {
        FnKind::IndicatorPoint { b } => (Matrix::zeros(m, m), b.clone()),
        _ => quadratic_parts(gs, m).ok_or_else(|| Error::Capability("kkt_solve needs g* quadratic or linear".to_string()))?,
    };
    let a = p.a.matrix();
    let mut k = Matrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&qf);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(a);
    k.view_mut((n, n), (m, m)).copy_from(&(-hg));
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-lf));
    rhs.rows_mut(n, m).copy_from(&lg);
    let mut z = math::sym_pinv_solve(&k, &rhs, 1e-12);
    // one refinement sweep
    let r = &rhs - &k * &z;
    z += math::sym_pinv_solve(&k, &r, 1e-12);
    let lin = math::norm(&(&rhs - &k * &z)) / (1.0 + math::norm(&rhs));
    if !(lin <= KKT_TOL) {
        return Err(Error::Domain(format!("saddle system is inconsistent (relative residual {lin:e})")));
    }
    let x = z.rows(0, n).into_owned();
    let y = z.rows(n, m).into_owned();
    let residual = p.saddle_residual(&x, &y)?;
    Ok(SolverResult { x, y, iterations: 1, residual, displacement: lin, wall_time: None })
}

/// Proximal gradient on `f(x) + g(Ax)` with `g` smooth; dual recovered as `∇g(Ax)`.
pub fn forward_backward(p: &ProblemSpec, step: f64, iters: usize) -> Result<SolverResult> {
    forward_backward_from(p, step, iters, &Vector::zeros(p.n()), |_, _| {})
}

/// As [`forward_backward`] from `x0`, calling `on_iter(k, x)` after every iteration.
pub fn forward_backward_from<F: FnMut(usize, &Vector)>(
    p: &ProblemSpec,
    step: f64,
    iters: usize,
    x0: &Vector,
    mut on_iter: F,
) -> Result<SolverResult> {
    if !p.g.has_gradient() {
        return Err(Error::Capability("forward_backward needs a differentiable g".to_string()));
    }
    let an = p.a.op_norm();
    let lip = p.g.smoothness() * an * an;
    if lip > 0.0 && step > (1.0 / lip) * (1.0 + 1e-12) {
        return Err(Error::DivergenceRisk { step, limit: 1.0 / lip });
    }
    if !(step > 0.0) {
        return Err(config("forward_backward: step must be positive"));
    }
    if x0.len() != p.n() {
        return Err(config("forward_backward: x0 has wrong length"));
    }
    let mut x = x0.clone();
    let mut disp = f64::INFINITY;
    let mut k = 0;
    while k < iters {
        let grad = p.a.tmul(&p.g.subgradient(&p.a.mul(&x))?);
        let xn = p.f.prox(step, &(&x - grad * step))?;
        disp = math::dist(&xn, &x) / step;
        x = xn;
        k += 1;
        on_iter(k, &x);
        if disp == 0.0 {
            break;
        }
    }
    let y = p.g.subgradient(&p.a.mul(&x))?;
    let residual = p.saddle_residual(&x, &y)?;
    Ok(SolverResult { x, y, iterations: k, residual, displacement: disp, wall_time: None })
}

/// Chambolle–Pock from the origin.
pub fn chambolle_pock(p: &ProblemSpec, sigma: f64, tau: f64, iters: usize) -> Result<SolverResult> {
    let z0 = (Vector::zeros(p.n()), Vector::zeros(p.m()));
    chambolle_pock_from(p, sigma, tau, iters, z0, 0.0, |_, _, _| {})
}

/// Default steps `σ = τ = 0.9/‖A‖`.
pub fn default_cp_steps(p: &ProblemSpec) -> (f64, f64) {
    let an = p.a.op_norm();
    let s = if an > 0.0 { 0.9 / an } else { 1.0 };
    (s, s)
}

/// `x⁺ = prox_{σf}(x − σAᵀy)`, `y⁺ = prox_{τg*}(y + τA(2x⁺ − x))`.
///
/// Stops early once the displacement `‖z⁺ − z‖` is at most `tol`.
pub fn chambolle_pock_from<F: FnMut(usize, &Vector, &Vector)>(
    p: &ProblemSpec,
    sigma: f64,
    tau: f64,
    iters: usize,
    z0: (Vector, Vector),
    tol: f64,
    mut on_iter: F,
) -> Result<SolverResult> {
    let an = p.a.op_norm();
    if !(sigma > 0.0 && tau > 0.0) || !(sigma * tau * an * an < 1.0) {
        return Err(config(format!("chambolle_pock: need sigma tau |A|^2 < 1, got {}", sigma * tau * an * an)));
    }
    let (mut x, mut y) = z0;
    if x.len() != p.n() || y.len() != p.m() {
        return Err(config("chambolle_pock: initial point has wrong dimensions"));
    }
    let mut disp = f64::INFINITY;
    let mut k = 0;
    while k < iters {
        let xn = p.f.prox(sigma, &(&x - p.a.tmul(&y) * sigma))?;
        let xbar = &xn * 2.0 - &x;
        let yn = p.g.prox_conjugate(tau, &(&y + p.a.mul(&xbar) * tau))?;
        disp = sqrt((&xn - &x).norm_squared() + (&yn - &y).norm_squared());
        k += 1;
        on_iter(k, &xn, &yn);
        x = xn;
        y = yn;
        if disp <= tol {
            break;
        }
    }
    let residual = p.saddle_residual(&x, &y)?;
    Ok(SolverResult { x, y, iterations: k, residual, displacement: disp, wall_time: None })
}

/// `‖(dx, dy)‖²` in the metric `[[I/σ, −Aᵀ], [−A, I/τ]]` in which the iteration is nonexpansive.
pub fn cp_metric_sq(p: &ProblemSpec, sigma: f64, tau: f64, dx: &Vector, dy: &Vector) -> f64 {
    dx.norm_squared() / sigma - 2.0 * p.a.mul(dx).dot(dy) + dy.norm_squared() / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LinearMap;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn unit_quadratic_saddle_is_origin() {
        let f = ConvexFn::quadratic(dmatrix![1.0], dvector![0.0]).unwrap();
        let g = ConvexFn::quadratic(dmatrix![1.0], dvector![0.0]).unwrap();
        let p = ProblemSpec::new(f, g, LinearMap::identity(1)).unwrap();
        let r = kkt_solve(&p).unwrap();
        assert!(r.x[0].abs() < 1e-15 && r.y[0].abs() < 1e-15);
    }

    #[test]
    fn constrained_scalar() {
        let f = ConvexFn::quadratic(dmatrix![1.0], dvector![0.0]).unwrap();
        let p = ProblemSpec::new(f, ConvexFn::indicator_point(dvector![1.0]), LinearMap::identity(1)).unwrap();
        let r = kkt_solve(&p).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-14);
        assert!((r.y[0] + 1.0).abs() < 1e-14);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn non_quadratic_is_unsupported() {
        let p = ProblemSpec::new(ConvexFn::l1(1.0).unwrap(), ConvexFn::indicator_point(dvector![1.0]), LinearMap::identity(1)).unwrap();
        assert!(matches!(kkt_solve(&p), Err(Error::Capability(_))));
    }

    #[test]
    fn huge_lambda_gives_zero() {
        let a = LinearMap::new(dmatrix![1.0, 0.5; -0.3, 2.0]).unwrap();
        let b = dvector![1.0, -2.0];
        let lam = 10.0 * (a.tmul(&b)).amax();
        let p = ProblemSpec::new(ConvexFn::l1(lam).unwrap(), ConvexFn::least_squares_shift(b), a).unwrap();
        let step = 1.0 / (p.a.op_norm() * p.a.op_norm());
        let r = forward_backward(&p, step, 100).unwrap();
        assert_eq!(r.x, Vector::zeros(2));
        assert!(matches!(forward_backward(&p, 2.0 * step, 10), Err(Error::DivergenceRisk { .. })));
    }

    #[test]
    fn cp_constant_on_zero_problem() {
        let p = ProblemSpec::new(
            ConvexFn::zero(2),
            ConvexFn::indicator_point(Vector::zeros(2)),
            LinearMap::new(Matrix::zeros(2, 2)).unwrap(),
        )
        .unwrap();
        let z0 = (dvector![1.0, 2.0], dvector![-1.0, 0.5]);
        let r = chambolle_pock_from(&p, 1.0, 1.0, 5, z0.clone(), -1.0, |_, _, _| {}).unwrap();
        assert_eq!((r.x, r.y), z0);
        assert!(chambolle_pock(&p, 1.0, 1.0, 1).is_ok());
        let p = ProblemSpec::new(ConvexFn::zero(1), ConvexFn::indicator_point(dvector![0.0]), LinearMap::identity(1)).unwrap();
        assert!(matches!(chambolle_pock(&p, 1.0, 1.0, 1), Err(Error::Config(_))));
    }
}
