//! Preconditioner coefficient families and their auxiliary integrals.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::config;
use crate::math::{abs, ceil, exp, floor, ln, sqrt};
use crate::{Error, Result};

/// Scalar coefficient function of time.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarFn {
    Constant(f64),
    /// `a t + b`.
    Affine { a: f64, b: f64 },
    /// `c e^{-κ t}`.
    Exponential { c: f64, kappa: f64 },
    /// `c / (t + 1)`.
    RationalDecay { c: f64 },
    /// Piecewise linear, constant beyond the ends.
    Table { grid: Vec<f64>, values: Vec<f64> },
    Sum(Vec<ScalarFn>),
    Scaled(f64, Box<ScalarFn>),
}

impl ScalarFn {
    pub fn table(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(config("table needs at least two (t, value) pairs"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(config("table grid must be strictly increasing"));
        }
        Ok(ScalarFn::Table { grid, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScalarFn::Constant(c) => *c,
            ScalarFn::Affine { a, b } => a * t + b,
            ScalarFn::Exponential { c, kappa } => c * exp(-kappa * t),
            ScalarFn::RationalDecay { c } => c / (t + 1.0),
            ScalarFn::Table { grid, values } => {
                let k = segment(grid, t);
                match k {
                    None if t <= grid[0] => values[0],
                    None => values[values.len() - 1],
                    Some(k) => {
                        let w = (t - grid[k]) / (grid[k + 1] - grid[k]);
                        values[k] + w * (values[k + 1] - values[k])
                    }
                }
            }
            ScalarFn::Sum(parts) => parts.iter().map(|p| p.eval(t)).sum(),
            ScalarFn::Scaled(k, f) => k * f.eval(t),
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            ScalarFn::Constant(_) => 0.0,
            ScalarFn::Affine { a, .. } => *a,
            ScalarFn::Exponential { c, kappa } => -kappa * c * exp(-kappa * t),
            ScalarFn::RationalDecay { c } => -c / ((t + 1.0) * (t + 1.0)),
            ScalarFn::Table { grid, values } => match segment(grid, t) {
                None => 0.0,
                Some(k) => (values[k + 1] - values[k]) / (grid[k + 1] - grid[k]),
            },
            ScalarFn::Sum(parts) => parts.iter().map(|p| p.deriv(t)).sum(),
            ScalarFn::Scaled(k, f) => k * f.deriv(t),
        }
    }

    /// Closed-form `∫₀ᵗ f`, when the kind admits one.
    pub fn integral(&self, t: f64) -> Option<f64> {
        match self {
            ScalarFn::Constant(c) => Some(c * t),
            ScalarFn::Affine { a, b } => Some(0.5 * a * t * t + b * t),
            ScalarFn::Exponential { c, kappa } => {
                if *kappa == 0.0 {
                    Some(c * t)
                } else {
                    Some(c * (1.0 - exp(-kappa * t)) / kappa)
                }
            }
            ScalarFn::RationalDecay { c } => Some(c * ln(1.0 + t)),
            ScalarFn::Table { .. } => Some(self.piecewise(t, |p, q, a, b| 0.5 * (p + q) * (b - a))),
            ScalarFn::Sum(parts) => parts.iter().map(|p| p.integral(t)).sum(),
            ScalarFn::Scaled(k, f) => f.integral(t).map(|v| k * v),
        }
    }

    pub fn has_closed_antiderivative(&self) -> bool {
        self.integral(1.0).is_some()
    }

    /// Closed-form `∫₀ᵗ 1/f`, when the kind admits one. Assumes `f > 0` on `[0, t]`.
    pub fn integral_reciprocal(&self, t: f64) -> Option<f64> {
        match self {
            ScalarFn::Constant(c) => Some(t / c),
            ScalarFn::Affine { a, b } => {
                if *a == 0.0 {
                    Some(t / b)
                } else {
                    Some(ln((a * t + b) / b) / a)
                }
            }
            ScalarFn::Exponential { c, kappa } => {
                if *kappa == 0.0 {
                    Some(t / c)
                } else {
                    Some((exp(kappa * t) - 1.0) / (c * kappa))
                }
            }
            ScalarFn::RationalDecay { c } => Some((0.5 * t * t + t) / c),
            ScalarFn::Table { .. } => Some(self.piecewise(t, |p, q, a, b| {
                let slope = (q - p) / (b - a);
                if abs(slope) * (b - a) <= 1e-12 * abs(p) {
                    (b - a) / p
                } else {
                    ln(q / p) / slope
                }
            })),
            ScalarFn::Sum(_) => None,
            ScalarFn::Scaled(k, f) => f.integral_reciprocal(t).map(|v| v / k),
        }
    }

    /// Sum of `piece(f(a), f(b), a, b)` over the linear pieces covering `[0, t]`.
    fn piecewise<F: Fn(f64, f64, f64, f64) -> f64>(&self, t: f64, piece: F) -> f64 {
        let ScalarFn::Table { grid, .. } = self else { return 0.0 };
        let mut knots: Vec<f64> = Vec::with_capacity(grid.len() + 2);
        knots.push(0.0);
        for &g in grid.iter() {
            if g > 0.0 && g < t {
                knots.push(g);
            }
        }
        knots.push(t);
        let mut s = 0.0;
        for w in knots.windows(2) {
            if w[1] > w[0] {
                s += piece(self.eval(w[0]), self.eval(w[1]), w[0], w[1]);
            }
        }
        s
    }
}

fn segment(grid: &[f64], t: f64) -> Option<usize> {
    if t < grid[0] || t >= grid[grid.len() - 1] {
        return None;
    }
    let k = grid.partition_point(|&g| g <= t);
    Some(k - 1)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b == a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = tol.max(REL_FLOOR * abs(whole));
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 24)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || !diff.is_finite() || abs(diff) <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const QUAD_TOL: f64 = 1e-13;
const REL_FLOOR: f64 = 1e-14;

/// Running integral `∫₀ᵗ h` cached on a uniform grid.
#[derive(Clone, Debug, Default)]
struct Cumulative {
    step: f64,
    values: Vec<f64>,
}

impl Cumulative {
    fn build<F: Fn(f64) -> f64>(f: &F, horizon: f64) -> Self {
        if !(horizon > 0.0) {
            return Self { step: 0.0, values: Vec::new() };
        }
        let panels = (ceil(horizon * 100.0) as usize).clamp(200, 20_000);
        let step = horizon / panels as f64;
        let mut values = Vec::with_capacity(panels + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for k in 0..panels {
            acc += adaptive_simpson(f, k as f64 * step, (k + 1) as f64 * step, QUAD_TOL / panels as f64);
            values.push(acc);
        }
        Self { step, values }
    }

    fn eval<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        if self.values.is_empty() {
            return adaptive_simpson(f, 0.0, t, QUAD_TOL);
        }
        let last = self.values.len() - 1;
        let k = (floor(t / self.step) as usize).min(last);
        let tk = k as f64 * self.step;
        self.values[k] + adaptive_simpson(f, tk, t, QUAD_TOL)
    }
}

/// Preconditioner family with its defining constants.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Arrow–Hurwicz: `α = δ = 1`, `β = γ = 0`.
    Plain,
    /// `α = α₀/Ξ`, `δ = δ₀/Ξ`, `γ = −ν`, `β = 0`, with `Ξ = exp∫ζ`.
    Triangular { zeta: ScalarFn, alpha0: f64, delta0: f64, nu0: f64 },
    /// `γ = −β`, `α = (α₀/β₀) β exp(−∫1/β)`, `δ` likewise.
    Antisymmetric { beta: ScalarFn, alpha0: f64, delta0: f64 },
    /// `β > γ`, `Z = (β−γ)/2`, coefficients corrected by `∫ΞW`.
    General { beta: ScalarFn, gamma: ScalarFn, alpha0: f64, delta0: f64 },
    /// `γ = β`, user-given `α`, `δ`.
    Symmetric { beta: ScalarFn, alpha: ScalarFn, delta: ScalarFn },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Plain => "plain",
            Family::Triangular { .. } => "triangular",
            Family::Antisymmetric { .. } => "antisymmetric",
            Family::General { .. } => "general",
            Family::Symmetric { .. } => "symmetric",
        }
    }
}

/// Coefficients of `P(t)` and the analysis weight `η`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreconditionerCoeffs {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub eta: f64,
}

impl PreconditionerCoeffs {
    pub fn plain() -> Self {
        Self { alpha: 1.0, beta: 0.0, gamma: 0.0, delta: 1.0, eta: 1.0 }
    }
}

/// A family bound to an operator norm, with quadrature caches.
#[derive(Clone, Debug)]
pub struct ScheduleSpec {
    family: Family,
    a_norm: f64,
    horizon: f64,
    zeta_int: Option<Cumulative>,
    xi_int: Option<Cumulative>,
    inv_int: Option<Cumulative>,
    xiw_int: Option<Cumulative>,
}

impl ScheduleSpec {
    /// Checks constants and builds caches on `[0, horizon]` (evaluation past it still works).
    pub fn new(family: Family, a_norm: f64, horizon: f64) -> Result<Self> {
        let pos = |v: f64, what: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config(format!("{what} must be positive and finite")))
            }
        };
        match &family {
            Family::Plain => {}
            Family::Triangular { alpha0, delta0, nu0, .. } => {
                pos(*alpha0, "alpha0")?;
                pos(*delta0, "delta0")?;
                if !(*nu0 >= 0.0) {
                    return Err(config("nu0 must be nonnegative"));
                }
            }
            Family::Antisymmetric { beta, alpha0, delta0 } => {
                pos(*alpha0, "alpha0")?;
                pos(*delta0, "delta0")?;
                pos(beta.eval(0.0), "beta(0)")?;
            }
            Family::General { beta, gamma, alpha0, delta0 } => {
                pos(*alpha0, "alpha0")?;
                pos(*delta0, "delta0")?;
                pos(beta.eval(0.0) - gamma.eval(0.0), "beta(0) - gamma(0)")?;
            }
            Family::Symmetric { beta, alpha, delta } => {
                pos(beta.eval(0.0), "beta(0)")?;
                pos(alpha.eval(0.0), "alpha(0)")?;
                pos(delta.eval(0.0), "delta(0)")?;
            }
        }
        if !(a_norm >= 0.0) {
            return Err(config("operator norm must be nonnegative"));
        }
        let mut s = Self { family, a_norm, horizon: horizon.max(0.0), zeta_int: None, xi_int: None, inv_int: None, xiw_int: None };
        s.build_caches();
        Ok(s)
    }

    fn build_caches(&mut self) {
        let h = self.horizon;
        match self.family.clone() {
            Family::Triangular { zeta, .. } => {
                if zeta.integral(0.0).is_none() {
                    self.zeta_int = Some(Cumulative::build(&|t| zeta.eval(t), h));
                }
                if self.xi_closed(1.0).is_none() {
                    let me = self.clone();
                    self.xi_int = Some(Cumulative::build(&|t| me.xi_raw(t), h));
                }
            }
            Family::Antisymmetric { beta, .. } | Family::Symmetric { beta, .. } => {
                if beta.integral_reciprocal(0.0).is_none() {
                    self.inv_int = Some(Cumulative::build(&|t| 1.0 / beta.eval(t), h));
                }
            }
            Family::General { .. } => {
                let z = self.z_fn();
                if z.integral_reciprocal(0.0).is_none() {
                    self.inv_int = Some(Cumulative::build(&|t| 1.0 / (0.5 * z.eval(t)), h));
                }
                let me = self.clone();
                self.xiw_int = Some(Cumulative::build(&|t| me.xi_raw(t) * me.w_at(t), h));
            }
            Family::Plain => {}
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `β − γ` as a scalar function (General family).
    fn z_fn(&self) -> ScalarFn {
        match &self.family {
            Family::General { beta, gamma, .. } => {
                ScalarFn::Sum(alloc::vec![beta.clone(), ScalarFn::Scaled(-1.0, Box::new(gamma.clone()))])
            }
            Family::Antisymmetric { beta, .. } => ScalarFn::Scaled(2.0, Box::new(beta.clone())),
            _ => ScalarFn::Constant(0.0),
        }
    }

    /// `Z = (β − γ)/2`.
    pub fn z_at(&self, t: f64) -> f64 {
        match &self.family {
            Family::General { beta, gamma, .. } => 0.5 * (beta.eval(t) - gamma.eval(t)),
            Family::Antisymmetric { beta, .. } => beta.eval(t),
            _ => 0.0,
        }
    }

    /// `W = (‖A‖/2) |β+γ| / (β−γ)`; zero outside the General family.
    pub fn w_at(&self, t: f64) -> f64 {
        match &self.family {
            Family::General { beta, gamma, .. } => {
                let (b, g) = (beta.eval(t), gamma.eval(t));
                0.5 * self.a_norm * abs(b + g) / (b - g)
            }
            _ => 0.0,
        }
    }

    fn zeta_integral(&self, t: f64) -> f64 {
        let Family::Triangular { zeta, .. } = &self.family else { return 0.0 };
        match zeta.integral(t) {
            Some(v) => v,
            None => match &self.zeta_int {
                Some(c) => c.eval(&|s| zeta.eval(s), t),
                None => adaptive_simpson(&|s| zeta.eval(s), 0.0, t, QUAD_TOL),
            },
        }
    }

    fn inv_integral(&self, t: f64) -> f64 {
        match &self.family {
            Family::Antisymmetric { beta, .. } | Family::Symmetric { beta, .. } => match beta.integral_reciprocal(t) {
                Some(v) => v,
                None => self.cached_inv(t, &|s| 1.0 / beta.eval(s)),
            },
            Family::General { beta, gamma, .. } => {
                let z = self.z_fn();
                match z.integral_reciprocal(t) {
                    Some(v) => 2.0 * v,
                    None => self.cached_inv(t, &|s| 2.0 / (beta.eval(s) - gamma.eval(s))),
                }
            }
            _ => 0.0,
        }
    }

    fn cached_inv<F: Fn(f64) -> f64>(&self, t: f64, f: &F) -> f64 {
        match &self.inv_int {
            Some(c) => c.eval(f, t),
            None => adaptive_simpson(f, 0.0, t, QUAD_TOL),
        }
    }

    fn xi_raw(&self, t: f64) -> f64 {
        match &self.family {
            Family::Triangular { .. } => exp(self.zeta_integral(t)),
            Family::General { .. } | Family::Antisymmetric { .. } => {
                let z0 = self.z_at(0.0);
                z0 / self.z_at(t) * exp(self.inv_integral(t))
            }
            _ => 1.0,
        }
    }

    fn xi_closed(&self, t: f64) -> Option<f64> {
        let Family::Triangular { zeta, .. } = &self.family else { return None };
        match zeta {
            ScalarFn::Constant(c) if *c == 0.0 => Some(t),
            ScalarFn::Constant(c) => Some((exp(c * t) - 1.0) / c),
            _ => None,
        }
    }

    /// `Ξ(t)`: `exp∫ζ` (Triangular) or `(Z₀/Z) exp∫1/Z` (General, Antisymmetric).
    pub fn xi_at(&self, t: f64) -> Result<f64> {
        match &self.family {
            Family::Triangular { .. } => Ok(self.xi_raw(t)),
            Family::General { .. } | Family::Antisymmetric { .. } => {
                let z = self.z_at(t);
                if !(z > 0.0) {
                    return Err(degenerate(t, "Z <= 0"));
                }
                Ok(self.xi_raw(t))
            }
            _ => Err(Error::UnsupportedDiagnostic(format!("Xi is not defined for the {} family", self.family.name()))),
        }
    }

    /// `∫₀ᵗ Ξ`.
    pub fn int_xi(&self, t: f64) -> Result<f64> {
        match &self.family {
            Family::Triangular { .. } => Ok(match self.xi_closed(t) {
                Some(v) => v,
                None => match &self.xi_int {
                    Some(c) => c.eval(&|s| self.xi_raw(s), t),
                    None => adaptive_simpson(&|s| self.xi_raw(s), 0.0, t, QUAD_TOL),
                },
            }),
            Family::General { .. } | Family::Antisymmetric { .. } => {
                Ok(adaptive_simpson(&|s| self.xi_raw(s), 0.0, t, QUAD_TOL))
            }
            _ => Err(Error::UnsupportedDiagnostic(format!("Xi is not defined for the {} family", self.family.name()))),
        }
    }

    /// `∫₀ᵗ Ξ W` (General family; zero otherwise).
    pub fn int_xi_w(&self, t: f64) -> f64 {
        match (&self.family, &self.xiw_int) {
            (Family::General { .. }, Some(c)) => c.eval(&|s| self.xi_raw(s) * self.w_at(s), t),
            (Family::General { .. }, None) => adaptive_simpson(&|s| self.xi_raw(s) * self.w_at(s), 0.0, t, QUAD_TOL),
            _ => 0.0,
        }
    }

    /// `∫₀ᵗ 1/β`.
    pub fn int_inv_beta(&self, t: f64) -> Result<f64> {
        let beta = match &self.family {
            Family::Antisymmetric { beta, .. } | Family::Symmetric { beta, .. } | Family::General { beta, .. } => beta,
            _ => return Err(Error::UnsupportedDiagnostic(format!("no beta weight in the {} family", self.family.name()))),
        };
        if !(beta.eval(t) > 0.0) || !(beta.eval(0.0) > 0.0) {
            return Err(degenerate(t, "beta <= 0"));
        }
        match &self.family {
            Family::General { .. } => match beta.integral_reciprocal(t) {
                Some(v) => Ok(v),
                None => Ok(adaptive_simpson(&|s| 1.0 / beta.eval(s), 0.0, t, QUAD_TOL)),
            },
            _ => Ok(self.inv_integral(t)),
        }
    }

    /// `∫₀ᵗ 1/Z`.
    pub fn int_inv_z(&self, t: f64) -> Result<f64> {
        match &self.family {
            Family::General { .. } | Family::Antisymmetric { .. } => {
                if !(self.z_at(t) > 0.0) {
                    return Err(degenerate(t, "Z <= 0"));
                }
                Ok(self.inv_integral(t))
            }
            _ => Err(Error::UnsupportedDiagnostic(format!("Z is not defined for the {} family", self.family.name()))),
        }
    }

    /// `ν = (ν₀ + ∫Ξ)/Ξ` (Triangular family).
    pub fn nu_at(&self, t: f64) -> Result<f64> {
        match &self.family {
            Family::Triangular { nu0, .. } => Ok((nu0 + self.int_xi(t)?) / self.xi_raw(t)),
            _ => Err(Error::UnsupportedDiagnostic("nu is defined for the triangular family only".to_string())),
        }
    }

    fn raw_coeffs(&self, t: f64) -> PreconditionerCoeffs {
        match &self.family {
            Family::Plain => PreconditionerCoeffs::plain(),
            Family::Triangular { alpha0, delta0, nu0, .. } => {
                let xi = self.xi_raw(t);
                let ixi = self.int_xi(t).unwrap_or(f64::NAN);
                let nu = (nu0 + ixi) / xi;
                PreconditionerCoeffs { alpha: alpha0 / xi, beta: 0.0, gamma: -nu, delta: delta0 / xi, eta: 1.0 }
            }
            Family::Antisymmetric { beta, alpha0, delta0 } => {
                let b = beta.eval(t);
                let b0 = beta.eval(0.0);
                let e = exp(-self.inv_integral(t));
                PreconditionerCoeffs {
                    alpha: alpha0 / b0 * b * e,
                    beta: b,
                    gamma: -b,
                    delta: delta0 / b0 * b * e,
                    eta: 1.0 / b,
                }
            }
            Family::General { beta, gamma, alpha0, delta0 } => {
                let xi = self.xi_raw(t);
                let j = self.int_xi_w(t);
                PreconditionerCoeffs {
                    alpha: (alpha0 - sqrt(alpha0 / delta0) * j) / xi,
                    beta: beta.eval(t),
                    gamma: gamma.eval(t),
                    delta: (delta0 - sqrt(delta0 / alpha0) * j) / xi,
                    eta: xi,
                }
            }
            Family::Symmetric { beta, alpha, delta } => {
                let b = beta.eval(t);
                PreconditionerCoeffs { alpha: alpha.eval(t), beta: b, gamma: b, delta: delta.eval(t), eta: 1.0 / b }
            }
        }
    }

    fn coeffs_ok(&self, c: &PreconditionerCoeffs, t: f64) -> bool {
        let base = c.alpha > 0.0 && c.delta > 0.0 && c.eta.is_finite() && c.beta.is_finite() && c.gamma.is_finite();
        base && match &self.family {
            Family::Antisymmetric { .. } | Family::Symmetric { .. } => c.beta > 0.0,
            Family::General { .. } => self.z_at(t) > 0.0,
            _ => true,
        }
    }

    /// `P(t)` coefficients; fails once `α` or `δ` stops being positive.
    pub fn coeffs_at(&self, t: f64) -> Result<PreconditionerCoeffs> {
        if !(t >= 0.0) {
            return Err(config("time must be nonnegative"));
        }
        let c = self.raw_coeffs(t);
        if self.coeffs_ok(&c, t) {
            return Ok(c);
        }
        // bisect for the first failing time
        let (mut lo, mut hi) = (0.0, t);
        if !self.coeffs_ok(&self.raw_coeffs(0.0), 0.0) {
            hi = 0.0;
        }
        for _ in 0..60 {
            if hi - lo <= 1e-12 * (1.0 + hi) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.coeffs_ok(&self.raw_coeffs(mid), mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let underflow = matches!(self.family, Family::Antisymmetric { .. } | Family::Triangular { .. })
            && self.raw_coeffs(hi).alpha == 0.0;
        if underflow {
            return Err(degenerate(hi, "alpha or delta underflows to zero in floating point; shorten the horizon"));
        }
        Err(degenerate(hi, "alpha, delta or beta not positive"))
    }

    /// Theoretical decay factor of the family's rate bound.
    pub fn rate_factor(&self, t: f64) -> Result<f64> {
        match &self.family {
            Family::Plain => Err(Error::NoRate),
            Family::Triangular { nu0, .. } => Ok(1.0 / (nu0 + self.int_xi(t)?)),
            Family::Antisymmetric { .. } => Ok(exp(-self.int_inv_beta(t)?)),
            Family::General { .. } => Ok(exp(-self.int_inv_z(t)?)),
            Family::Symmetric { .. } => {
                if t <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(1.0 / self.int_inv_beta(t)?)
            }
        }
    }

    /// Grid check of the family's standing assumptions on `[0, horizon]`.
    pub fn validate(&self, a_norm: f64, horizon: f64) -> ValidationReport {
        validate(self, a_norm, horizon)
    }
}

fn degenerate(t: f64, what: &str) -> Error {
    Error::ScheduleDegenerate { t, what: what.to_string() }
}

/// One checked condition with its worst margin (negative means violated).
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub name: String,
    pub worst_margin: f64,
    pub passed: bool,
    pub first_failure: Option<f64>,
    /// Informational conditions do not affect `passed()` of the report.
    pub informational: bool,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub family: String,
    pub horizon: f64,
    pub grid_points: usize,
    pub conditions: Vec<Condition>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed || c.informational)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub const VALIDATION_GRID: usize = 1000;
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-6;

struct Tracker {
    name: &'static str,
    worst: f64,
    first: Option<f64>,
    note: String,
    informational: bool,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self { name, worst: f64::INFINITY, first: None, note: String::new(), informational: false }
    }

    fn push(&mut self, t: f64, margin: f64) {
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if m < self.worst {
            self.worst = m;
        }
        if m < 0.0 && self.first.is_none() {
            self.first = Some(t);
        }
    }

    fn finish(self) -> Condition {
        Condition {
            name: self.name.to_string(),
            worst_margin: self.worst,
            passed: self.first.is_none(),
            first_failure: self.first,
            informational: self.informational,
            note: self.note,
        }
    }
}

fn fd<F: Fn(f64) -> f64>(f: &F, t: f64) -> f64 {
    let h = FD_STEP;
    if t >= h {
        (f(t + h) - f(t - h)) / (2.0 * h)
    } else {
        (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h)
    }
}

fn validate(s: &ScheduleSpec, a_norm: f64, horizon: f64) -> ValidationReport {
    let n = VALIDATION_GRID;
    let grid: Vec<f64> = (0..n).map(|k| horizon * k as f64 / (n - 1) as f64).collect();
    let mut out = Vec::new();

    let mut alpha = Tracker::new("alpha_positive");
    let mut delta = Tracker::new("delta_positive");
    for &t in &grid {
        let c = s.raw_coeffs(t);
        alpha.push(t, c.alpha);
        delta.push(t, c.delta);
    }
    out.push(alpha.finish());
    out.push(delta.finish());

    match s.family() {
        Family::Plain => {}
        Family::Triangular { zeta, .. } => {
            let mut zn = Tracker::new("zeta_nonnegative");
            let mut ra = Tracker::new("alpha_ode");
            let mut rd = Tracker::new("delta_ode");
            let mut rn = Tracker::new("nu_ode");
            ra.note = "alpha' + zeta alpha = 0".to_string();
            rd.note = "delta' + zeta delta = 0".to_string();
            rn.note = "nu' + zeta nu = 1".to_string();
            for &t in &grid {
                let z = zeta.eval(t);
                zn.push(t, z);
                let c = s.raw_coeffs(t);
                let da = fd(&|u| s.raw_coeffs(u).alpha, t);
                let dd = fd(&|u| s.raw_coeffs(u).delta, t);
                let dn = fd(&|u| -s.raw_coeffs(u).gamma, t);
                ra.push(t, FD_TOL - abs(da + z * c.alpha));
                rd.push(t, FD_TOL - abs(dd + z * c.delta));
                rn.push(t, FD_TOL - abs(dn + z * (-c.gamma) - 1.0));
            }
            out.extend([zn.finish(), ra.finish(), rd.finish(), rn.finish()]);
        }
        Family::Antisymmetric { beta, .. } => {
            let mut bp = Tracker::new("beta_positive");
            for &t in &grid {
                bp.push(t, beta.eval(t));
            }
            out.push(bp.finish());
        }
        Family::General { alpha0, delta0, .. } => {
            let mut z = Tracker::new("beta_gt_gamma");
            let mut adm = Tracker::new("admissibility");
            adm.note = "4 Z Xi W + int Xi W <= sqrt(alpha0 delta0); checked on the run horizon only".to_string();
            let cap = sqrt(alpha0 * delta0);
            // margins are computed with the operator norm passed in
            let probe = ScheduleSpec { a_norm, ..s.clone() };
            for &t in &grid {
                let zt = s.z_at(t);
                z.push(t, zt);
                let lhs = 4.0 * zt * probe.xi_raw(t) * probe.w_at(t) + probe.int_xi_w(t);
                adm.push(t, cap - lhs);
            }
            let mut bounded = Tracker::new("bounded_trajectory");
            bounded.informational = true;
            bounded.note = "int_0^T Xi W < sqrt(alpha0 delta0) on the run horizon; the infinite-horizon condition is not provable on a grid".to_string();
            bounded.push(horizon, cap - probe.int_xi_w(horizon));
            out.extend([z.finish(), adm.finish(), bounded.finish()]);
        }
        Family::Symmetric { beta, alpha, delta } => {
            let mut bp = Tracker::new("beta_positive");
            let mut c = Tracker::new("c_gt_norm");
            let mut sn = Tracker::new("sigma_nonincreasing");
            let mut tn = Tracker::new("tau_nonincreasing");
            c.note = "min(inf alpha/beta, inf delta/beta) > |A|".to_string();
            let mut inf_c = f64::INFINITY;
            let mut prev: Option<(f64, f64)> = None;
            for &t in &grid {
                let b = beta.eval(t);
                bp.push(t, b);
                let sig = alpha.eval(t) / b;
                let tau = delta.eval(t) / b;
                inf_c = inf_c.min(sig).min(tau);
                c.push(t, inf_c - a_norm);
                if let Some((ps, pt)) = prev {
                    sn.push(t, ps - sig + 1e-12 * abs(ps));
                    tn.push(t, pt - tau + 1e-12 * abs(pt));
                }
                prev = Some((sig, tau));
            }
            out.extend([bp.finish(), c.finish(), sn.finish(), tn.finish()]);
        }
    }

    ValidationReport { family: s.family().name().to_string(), horizon, grid_points: n, conditions: out }
}
