//! Composite problem `min f(x) + g(Ax)`: linear map, convex function zoo, Lagrangian.

use alloc::format;
use alloc::string::ToString;

use crate::error::config;
use crate::math::{self, abs, sqrt};
use crate::{Error, Matrix, Result, Vector};

/// Dense operator with cached norm and thin SVD `A = U diag(s) Vᵀ`.
#[derive(Clone, Debug)]
pub struct LinearMap {
    mat: Matrix,
    norm: f64,
    u: Matrix,
    s: Vector,
    v: Matrix,
}

impl LinearMap {
    pub fn new(mat: Matrix) -> Result<Self> {
        if mat.nrows() == 0 || mat.ncols() == 0 {
            return Err(config("linear map needs positive dimensions"));
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(config("linear map has non-finite entries"));
        }
        let svd = nalgebra::SVD::new(mat.clone(), true, true);
        let (u, s, vt) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
        let svd_top = s.iter().fold(0.0f64, |a, &b| a.max(b));
        let norm = power_norm(&mat).unwrap_or(svd_top);
        Ok(Self { mat, norm, u, s, v: vt.transpose() })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(Matrix::identity(n, n)).expect("identity is a valid map")
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.cols() {
            return Err(config(format!("apply: expected length {}, got {}", self.cols(), x.len())));
        }
        Ok(&self.mat * x)
    }

    pub fn adjoint_apply(&self, y: &Vector) -> Result<Vector> {
        if y.len() != self.rows() {
            return Err(config(format!("adjoint: expected length {}, got {}", self.rows(), y.len())));
        }
        Ok(self.mat.tr_mul(y))
    }

    /// `Ax` without a dimension check.
    pub fn mul(&self, x: &Vector) -> Vector {
        &self.mat * x
    }

    /// `Aᵀy` without a dimension check.
    pub fn tmul(&self, y: &Vector) -> Vector {
        self.mat.tr_mul(y)
    }

    /// Largest singular value (power iteration on AAᵀ).
    pub fn op_norm(&self) -> f64 {
        self.norm
    }

    pub fn singular_values(&self) -> &Vector {
        &self.s
    }

    /// Left singular vectors, `m × k`, `k = min(m, n)`.
    pub fn left(&self) -> &Matrix {
        &self.u
    }

    /// Right singular vectors, `n × k`.
    pub fn right(&self) -> &Matrix {
        &self.v
    }

    /// Eigenvalues of AAᵀ on the range of `left()`; the orthogonal complement has eigenvalue 0.
    pub fn aat_eigenvalues(&self) -> Vector {
        self.s.map(|s| s * s)
    }

    /// AAᵀ rebuilt from the cached factorization.
    pub fn aat_reconstructed(&self) -> Matrix {
        let d = Matrix::from_diagonal(&self.aat_eigenvalues());
        &self.u * d * self.u.transpose()
    }
}

fn power_norm(mat: &Matrix) -> Option<f64> {
    let m = mat.nrows();
    let n = mat.ncols();
    let p = Vector::from_fn(n, |j, _| 1.0 + ((j * 7919) % 101) as f64 / 101.0);
    let mut w = mat * p;
    let mut nw = math::norm(&w);
    if nw == 0.0 {
        // start vector may lie in the kernel; try the largest row
        let mut best = 0;
        let mut bn = 0.0;
        for i in 0..m {
            let r = mat.row(i).norm_squared();
            if r > bn {
                bn = r;
                best = i;
            }
        }
        if bn == 0.0 {
            return Some(0.0);
        }
        w = Vector::zeros(m);
        w[best] = 1.0;
        nw = 1.0;
    }
    w /= nw;
    let mut lam = 0.0;
    for _ in 0..50_000 {
        let z = mat * mat.tr_mul(&w);
        let next = w.dot(&z);
        let nz = math::norm(&z);
        if nz == 0.0 {
            return Some(0.0);
        }
        w = z / nz;
        if abs(next - lam) <= 1e-14 * next {
            return Some(sqrt(next.max(0.0)));
        }
        lam = next;
    }
    None
}

/// Kind tag of a closed-form convex function.
#[derive(Clone, Debug, PartialEq)]
pub enum FnKind {
    Zero,
    /// `½xᵀQx + ⟨q, x⟩ + c`.
    Quadratic { q_mat: Matrix, q: Vector, c: f64 },
    /// `λ‖x‖₁`.
    L1 { lambda: f64 },
    /// `ι_{b}`.
    IndicatorPoint { b: Vector },
    /// `½‖x − b‖²`.
    LeastSquaresShift { b: Vector },
    /// `⟨b, x⟩`.
    LinearFn { b: Vector },
    /// Indicator of `{‖x‖_∞ ≤ radius}`.
    BoxIndicator { radius: f64 },
}

#[derive(Clone, Debug)]
pub struct ConvexFn {
    kind: FnKind,
    dim: Option<usize>,
    mu: f64,
    smooth: f64,
    eig: Option<(Vector, Matrix)>,
}

const POINT_TOL: f64 = 1e-12;

impl ConvexFn {
    pub fn zero(n: usize) -> Self {
        Self { kind: FnKind::Zero, dim: Some(n), mu: 0.0, smooth: 0.0, eig: None }
    }

    pub fn quadratic(q_mat: Matrix, q: Vector) -> Result<Self> {
        Self::quadratic_with_constant(q_mat, q, 0.0)
    }

    pub fn quadratic_with_constant(q_mat: Matrix, q: Vector, c: f64) -> Result<Self> {
        let n = q_mat.nrows();
        if q_mat.ncols() != n || q.len() != n {
            return Err(config("quadratic: Q must be square and match q"));
        }
        let scale = q_mat.iter().fold(1.0f64, |a, x| a.max(abs(*x)));
        if (&q_mat - q_mat.transpose()).iter().any(|x| abs(*x) > 1e-10 * scale) {
            return Err(config("quadratic: Q is not symmetric"));
        }
        let (vals, vecs) = math::sym_eigen(&q_mat);
        let top = vals[n - 1];
        if vals[0] < -1e-10 * scale {
            return Err(config(format!("quadratic: Q is not positive semidefinite (eigenvalue {})", vals[0])));
        }
        let q_mat = (&q_mat + q_mat.transpose()) * 0.5;
        let vals = vals.map(|v| v.max(0.0));
        Ok(Self {
            kind: FnKind::Quadratic { q_mat, q, c },
            dim: Some(n),
            mu: vals[0],
            smooth: top.max(0.0),
            eig: Some((vals, vecs)),
        })
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(config("l1: lambda must be nonnegative"));
        }
        Ok(Self { kind: FnKind::L1 { lambda }, dim: None, mu: 0.0, smooth: f64::INFINITY, eig: None })
    }

    pub fn indicator_point(b: Vector) -> Self {
        let n = b.len();
        Self { kind: FnKind::IndicatorPoint { b }, dim: Some(n), mu: 0.0, smooth: f64::INFINITY, eig: None }
    }

    pub fn least_squares_shift(b: Vector) -> Self {
        let n = b.len();
        Self { kind: FnKind::LeastSquaresShift { b }, dim: Some(n), mu: 1.0, smooth: 1.0, eig: None }
    }

    pub fn linear(b: Vector) -> Self {
        let n = b.len();
        Self { kind: FnKind::LinearFn { b }, dim: Some(n), mu: 0.0, smooth: 0.0, eig: None }
    }

    pub fn box_indicator(radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(config("box indicator: radius must be nonnegative"));
        }
        Ok(Self { kind: FnKind::BoxIndicator { radius }, dim: None, mu: 0.0, smooth: f64::INFINITY, eig: None })
    }

    pub fn kind(&self) -> &FnKind {
        &self.kind
    }

    /// Fixed dimension, or `None` for separable kinds.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn has_gradient(&self) -> bool {
        matches!(
            self.kind,
            FnKind::Zero | FnKind::Quadratic { .. } | FnKind::LeastSquaresShift { .. } | FnKind::LinearFn { .. }
        )
    }

    pub fn has_prox(&self) -> bool {
        true
    }

    pub fn strong_convexity(&self) -> f64 {
        self.mu
    }

    pub fn smoothness(&self) -> f64 {
        self.smooth
    }

    fn check_len(&self, x: &Vector, what: &str) -> Result<()> {
        match self.dim {
            Some(n) if n != x.len() => Err(config(format!("{what}: expected length {n}, got {}", x.len()))),
            _ => Ok(()),
        }
    }

    /// Extended-real value; `+∞` off the domain.
    pub fn value(&self, x: &Vector) -> f64 {
        if let Some(n) = self.dim {
            if n != x.len() {
                return f64::NAN;
            }
        }
        match &self.kind {
            FnKind::Zero => 0.0,
            FnKind::Quadratic { q_mat, q, c } => 0.5 * x.dot(&(q_mat * x)) + q.dot(x) + c,
            FnKind::L1 { lambda } => lambda * x.iter().map(|v| abs(*v)).sum::<f64>(),
            FnKind::IndicatorPoint { b } => {
                let tol = POINT_TOL * (1.0 + math::max_abs(b));
                if x.iter().zip(b.iter()).all(|(a, c)| abs(a - c) <= tol) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            FnKind::LeastSquaresShift { b } => { let d = math::dist(x, b); 0.5 * d * d },
            FnKind::LinearFn { b } => b.dot(x),
            FnKind::BoxIndicator { radius } => {
                if math::max_abs(x) <= radius * (1.0 + POINT_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Closed-form Fenchel conjugate.
    pub fn conjugate(&self) -> Result<ConvexFn> {
        match &self.kind {
            FnKind::Zero => Ok(Self::indicator_point(Vector::zeros(self.dim.unwrap_or(0)))),
            FnKind::Quadratic { q, c, .. } => {
                let (vals, vecs) = self.eig.as_ref().expect("quadratic caches its spectrum");
                let top = vals[vals.len() - 1];
                if !(vals[0] > 1e-12 * top.max(1e-300)) {
                    return Err(Error::UnsupportedConjugate(
                        "quadratic with singular Q; use the prox path".to_string(),
                    ));
                }
                let inv = vecs * Matrix::from_diagonal(&vals.map(|v| 1.0 / v)) * vecs.transpose();
                let inv = (&inv + inv.transpose()) * 0.5;
                let iq = &inv * q;
                let cc = 0.5 * q.dot(&iq) - c;
                Self::quadratic_with_constant(inv, -iq, cc)
            }
            FnKind::L1 { lambda } => Self::box_indicator(*lambda),
            FnKind::IndicatorPoint { b } => Ok(Self::linear(b.clone())),
            FnKind::LeastSquaresShift { b } => {
                let n = b.len();
                Self::quadratic(Matrix::identity(n, n), b.clone())
            }
            FnKind::LinearFn { b } => Ok(Self::indicator_point(b.clone())),
            FnKind::BoxIndicator { radius } => Self::l1(*radius),
        }
    }

    /// `argmin_w fn(w) + ‖w − u‖² / (2 step)`.
    pub fn prox(&self, step: f64, u: &Vector) -> Result<Vector> {
        if !(step > 0.0) {
            return Err(config("prox: step must be positive"));
        }
        self.check_len(u, "prox")?;
        Ok(match &self.kind {
            FnKind::Zero => u.clone(),
            FnKind::Quadratic { q, .. } => {
                let (vals, vecs) = self.eig.as_ref().expect("quadratic caches its spectrum");
                let r = u - q * step;
                let c = vecs.tr_mul(&r);
                let c = Vector::from_fn(c.len(), |i, _| c[i] / (1.0 + step * vals[i]));
                vecs * c
            }
            FnKind::L1 { lambda } => {
                let k = step * lambda;
                u.map(|v| if v > k { v - k } else if v < -k { v + k } else { 0.0 })
            }
            FnKind::IndicatorPoint { b } => b.clone(),
            FnKind::LeastSquaresShift { b } => (u + b * step) / (1.0 + step),
            FnKind::LinearFn { b } => u - b * step,
            FnKind::BoxIndicator { radius } => u.map(|v| v.clamp(-radius, *radius)),
        })
    }

    /// Prox of the conjugate through the Moreau identity.
    pub fn prox_conjugate(&self, step: f64, u: &Vector) -> Result<Vector> {
        if !(step > 0.0) {
            return Err(config("prox: step must be positive"));
        }
        let inner = self.prox(1.0 / step, &(u / step))?;
        Ok(u - inner * step)
    }

    /// Minimal-norm element of the subdifferential.
    pub fn subgradient(&self, x: &Vector) -> Result<Vector> {
        self.check_len(x, "subgradient")?;
        match &self.kind {
            FnKind::Zero => Ok(Vector::zeros(x.len())),
            FnKind::Quadratic { q_mat, q, .. } => Ok(q_mat * x + q),
            FnKind::L1 { lambda } => Ok(x.map(|v| if v > 0.0 { *lambda } else if v < 0.0 { -lambda } else { 0.0 })),
            FnKind::IndicatorPoint { .. } | FnKind::BoxIndicator { .. } => {
                if self.value(x).is_finite() {
                    Ok(Vector::zeros(x.len()))
                } else {
                    Err(Error::Domain("indicator evaluated outside its set".to_string()))
                }
            }
            FnKind::LeastSquaresShift { b } => Ok(x - b),
            FnKind::LinearFn { b } => Ok(b.clone()),
        }
    }

    /// Gradient of the Moreau envelope with parameter `mu_s`.
    pub fn moreau_grad(&self, mu_s: f64, x: &Vector) -> Result<Vector> {
        if !(mu_s > 0.0) {
            return Err(config("moreau_grad: smoothing must be positive"));
        }
        Ok((x - self.prox(mu_s, x)?) / mu_s)
    }
}

/// Stacked primal-dual pair `z = (x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualPoint {
    pub x: Vector,
    pub y: Vector,
}

impl PrimalDualPoint {
    pub fn new(x: Vector, y: Vector) -> Self {
        Self { x, y }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self { x: Vector::zeros(n), y: Vector::zeros(m) }
    }

    pub fn stacked(&self) -> Vector {
        let n = self.x.len();
        Vector::from_fn(n + self.y.len(), |i, _| if i < n { self.x[i] } else { self.y[i - n] })
    }

    pub fn from_stacked(z: &Vector, n: usize) -> Self {
        Self { x: z.rows(0, n).into_owned(), y: z.rows(n, z.len() - n).into_owned() }
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.x.norm_squared() + self.y.norm_squared())
    }

    pub fn dist(&self, other: &Self) -> f64 {
        sqrt((&self.x - &other.x).norm_squared() + (&self.y - &other.y).norm_squared())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}

/// The triple `(f, g, A)` with an optional verified saddle point.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub f: ConvexFn,
    pub g: ConvexFn,
    pub a: LinearMap,
    g_conj: Option<ConvexFn>,
    saddle: Option<PrimalDualPoint>,
}

pub const SADDLE_TOL: f64 = 1e-6;

impl ProblemSpec {
    pub fn new(f: ConvexFn, g: ConvexFn, a: LinearMap) -> Result<Self> {
        if let Some(n) = f.dim() {
            if n != a.cols() {
                return Err(config(format!("f has dimension {n} but A has {} columns", a.cols())));
            }
        }
        if let Some(m) = g.dim() {
            if m != a.rows() {
                return Err(config(format!("g has dimension {m} but A has {} rows", a.rows())));
            }
        }
        let g_conj = g.conjugate().ok();
        Ok(Self { f, g, a, g_conj, saddle: None })
    }

    /// Attach a reference saddle point after checking its residual.
    pub fn with_saddle(mut self, x: Vector, y: Vector) -> Result<Self> {
        let r = self.saddle_residual(&x, &y)?;
        if !(r <= SADDLE_TOL) {
            return Err(config(format!("reference saddle has residual {r:e}")));
        }
        self.saddle = Some(PrimalDualPoint::new(x, y));
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn saddle(&self) -> Option<&PrimalDualPoint> {
        self.saddle.as_ref()
    }

    /// Constraint vector when `g = ι_{b}`.
    pub fn b(&self) -> Option<&Vector> {
        match self.g.kind() {
            FnKind::IndicatorPoint { b } => Some(b),
            _ => None,
        }
    }

    pub fn g_conj(&self) -> Result<&ConvexFn> {
        self.g_conj
            .as_ref()
            .ok_or_else(|| Error::UnsupportedConjugate("g has no closed-form conjugate".to_string()))
    }

    /// `L(u, v) = f(u) + ⟨v, Au⟩ − g*(v)`.
    pub fn lagrangian(&self, u: &Vector, v: &Vector) -> Result<f64> {
        let au = self.a.apply(u)?;
        let gs = self.g_conj()?.value(v);
        Ok(self.f.value(u) + v.dot(&au) - gs)
    }

    /// `‖x̄ − prox_f(x̄ − Aᵀȳ)‖ + ‖ȳ − prox_{g*}(ȳ + Ax̄)‖`.
    pub fn saddle_residual(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let aty = self.a.adjoint_apply(y)?;
        let ax = self.a.apply(x)?;
        let px = self.f.prox(1.0, &(x - aty))?;
        let py = self.g.prox_conjugate(1.0, &(y + ax))?;
        Ok(math::dist(x, &px) + math::dist(y, &py))
    }
}
