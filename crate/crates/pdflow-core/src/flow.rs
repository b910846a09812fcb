//! Integration of `P(t) ż = −F(z)` with an adaptive Dormand–Prince backend and a proximal Euler backend.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::config;
use crate::math::{abs, ceil, pow, round, sqrt};
use crate::problem::{PrimalDualPoint, ProblemSpec};
use crate::schedules::{PreconditionerCoeffs, ScheduleSpec};
use crate::{Error, Result, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    ResolvedRk,
    ProxEuler,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub backend: Backend,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Step of the proximal Euler backend.
    pub h: f64,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    /// Moreau smoothing parameter; 0 selects minimal-norm subgradients.
    pub smoothing: f64,
    /// Time between recorded samples.
    pub sample_dt: f64,
    /// Upper bound on accepted steps.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            backend: Backend::ResolvedRk,
            abs_tol: 1e-12,
            rel_tol: 1e-9,
            h: 1e-3,
            inner_tol: 1e-10,
            inner_max_iter: 200,
            smoothing: 0.0,
            sample_dt: 0.01,
            max_steps: 200_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn prox_euler(h: f64) -> Self {
        Self { backend: Backend::ProxEuler, h, ..Self::default() }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(config("integrator tolerances must be positive"));
        }
        if self.backend == Backend::ProxEuler && !(self.h > 0.0) {
            return Err(config("proximal Euler step must be positive"));
        }
        if !(self.inner_tol > 0.0) || self.inner_max_iter == 0 {
            return Err(config("inner loop tolerance and iteration cap must be positive"));
        }
        if !(self.smoothing >= 0.0) {
            return Err(config("smoothing must be nonnegative"));
        }
        if !(self.sample_dt > 0.0) {
            return Err(config("sample spacing must be positive"));
        }
        Ok(())
    }
}

/// Point of a trajectory with the velocity used there, when known.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub z: PrimalDualPoint,
    pub zdot: Option<PrimalDualPoint>,
}

impl FlowState {
    pub fn new(t: f64, z: PrimalDualPoint) -> Self {
        Self { t, z, zdot: None }
    }
}

/// Running integrals `∫x/β`, `∫y/β`, `∫1/β` at a sample (trapezoid on the sample grid).
#[derive(Clone, Debug, PartialEq)]
pub struct ErgodicSums {
    pub wx: Vector,
    pub wy: Vector,
    pub w: f64,
}

impl ErgodicSums {
    fn zeros(n: usize, m: usize) -> Self {
        Self { wx: Vector::zeros(n), wy: Vector::zeros(m), w: 0.0 }
    }

    fn add_trapezoid(&mut self, dt: f64, a: &PrimalDualPoint, wa: f64, b: &PrimalDualPoint, wb: f64) {
        let k = 0.5 * dt;
        self.wx += (&a.x * wa + &b.x * wb) * k;
        self.wy += (&a.y * wa + &b.y * wb) * k;
        self.w += k * (wa + wb);
    }

    pub fn point(&self) -> PrimalDualPoint {
        PrimalDualPoint::new(&self.wx / self.w, &self.wy / self.w)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub family: String,
    pub problem_id: String,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<FlowState>,
    /// One entry per sample when the schedule has `β > 0`.
    pub ergodic: Option<Vec<ErgodicSums>>,
    pub meta: TrajectoryMeta,
    /// Set when an observer stopped the run early.
    pub truncated: bool,
    pub steps: usize,
}

impl Trajectory {
    /// Builds a trajectory from given samples, accumulating `1/β` weights by trapezoid on the sample grid.
    pub fn from_samples<B: Fn(f64) -> f64>(samples: Vec<FlowState>, beta: Option<B>) -> Result<Self> {
        if samples.is_empty() {
            return Err(config("trajectory needs at least one sample"));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(config("sample times must be strictly increasing"));
        }
        let ergodic = match beta {
            None => None,
            Some(b) => {
                let n = samples[0].z.x.len();
                let m = samples[0].z.y.len();
                let mut acc = ErgodicSums::zeros(n, m);
                let mut out = Vec::with_capacity(samples.len());
                out.push(acc.clone());
                for w in samples.windows(2) {
                    let (wa, wb) = (1.0 / b(w[0].t), 1.0 / b(w[1].t));
                    if !(wa > 0.0 && wb > 0.0) {
                        return Err(config("ergodic weights must be positive"));
                    }
                    acc.add_trapezoid(w[1].t - w[0].t, &w[0].z, wa, &w[1].z, wb);
                    out.push(acc.clone());
                }
                Some(out)
            }
        };
        Ok(Self { samples, ergodic, meta: TrajectoryMeta::default(), truncated: false, steps: 0 })
    }

    pub fn last(&self) -> &FlowState {
        self.samples.last().expect("trajectories are nonempty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Ergodic accumulators at sample `k`.
    pub fn ergodic_at(&self, k: usize) -> Option<&ErgodicSums> {
        self.ergodic.as_ref().and_then(|e| e.get(k))
    }
}

/// `x̂(t), ŷ(t)`: the `1/β`-weighted average of the trajectory up to `t`.
///
/// Between samples the accumulators are interpolated linearly.
pub fn ergodic_point(traj: &Trajectory, t: f64) -> Result<PrimalDualPoint> {
    let erg = traj
        .ergodic
        .as_ref()
        .ok_or_else(|| Error::UnsupportedDiagnostic(String::from("trajectory has no ergodic accumulators")))?;
    let t0 = traj.samples[0].t;
    if !(t > t0) || t > traj.last().t * (1.0 + 1e-12) + 1e-300 {
        return Err(Error::UndefinedErgodic { t });
    }
    let k = traj.samples.partition_point(|s| s.t < t).min(traj.samples.len() - 1);
    let (ta, tb) = (traj.samples[k - 1].t, traj.samples[k].t);
    let th = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
    let (a, b) = (&erg[k - 1], &erg[k]);
    let w = a.w + th * (b.w - a.w);
    if !(w > 0.0) {
        return Err(Error::UndefinedErgodic { t });
    }
    let wx = &a.wx + (&b.wx - &a.wx) * th;
    let wy = &a.wy + (&b.wy - &a.wy) * th;
    Ok(PrimalDualPoint::new(wx / w, wy / w))
}

/// `F(z) = (∇f(x) + Aᵀy, −Ax + ∇g*(y))` with selections or Moreau gradients.
pub fn operator_f(p: &ProblemSpec, z: &PrimalDualPoint, smoothing: f64) -> Result<PrimalDualPoint> {
    let gs = p.g_conj()?;
    let (gf, gg) = if smoothing > 0.0 {
        let gf = if p.f.has_gradient() { p.f.subgradient(&z.x)? } else { p.f.moreau_grad(smoothing, &z.x)? };
        let gg = if gs.has_gradient() { gs.subgradient(&z.y)? } else { gs.moreau_grad(smoothing, &z.y)? };
        (gf, gg)
    } else {
        (p.f.subgradient(&z.x)?, gs.subgradient(&z.y)?)
    };
    Ok(PrimalDualPoint::new(gf + p.a.tmul(&z.y), gg - p.a.mul(&z.x)))
}

/// Solves `P ż = r` for `P = [[αI, βAᵀ], [γA, δI]]` in the singular bases of `A`.
pub fn solve_preconditioner(p: &ProblemSpec, c: &PreconditionerCoeffs, r: &PrimalDualPoint, t: f64) -> Result<PrimalDualPoint> {
    let (u, s, v) = (p.a.left(), p.a.singular_values(), p.a.right());
    let (n, m, k) = (p.n(), p.m(), s.len());
    let cx = v.tr_mul(&r.x);
    let cy = u.tr_mul(&r.y);
    let mut a = Vector::zeros(k);
    let mut b = Vector::zeros(k);
    for i in 0..k {
        let si = s[i];
        let det = c.alpha * c.delta - c.beta * c.gamma * si * si;
        if !(det > 0.0) {
            return Err(Error::PreconditionerSingular { t, eigenvalue: si * si, factor: det });
        }
        a[i] = (c.delta * cx[i] - c.beta * si * cy[i]) / det;
        b[i] = (c.alpha * cy[i] - c.gamma * si * cx[i]) / det;
    }
    let mut xd = v * &a;
    if n > k {
        xd += (&r.x - v * &cx) / c.alpha;
    }
    let mut yd = u * &b;
    if m > k {
        yd += (&r.y - u * &cy) / c.delta;
    }
    Ok(PrimalDualPoint::new(xd, yd))
}

/// `P(t) z` for the coefficients at `t`.
pub fn apply_preconditioner(p: &ProblemSpec, c: &PreconditionerCoeffs, zd: &PrimalDualPoint) -> PrimalDualPoint {
    PrimalDualPoint::new(
        &zd.x * c.alpha + p.a.tmul(&zd.y) * c.beta,
        p.a.mul(&zd.x) * c.gamma + &zd.y * c.delta,
    )
}

/// `ż` solving `P(t) ż = −F(z)`.
pub fn rhs_resolved(p: &ProblemSpec, s: &ScheduleSpec, t: f64, z: &PrimalDualPoint, smoothing: f64) -> Result<PrimalDualPoint> {
    let c = s.coeffs_at(t)?;
    let f = operator_f(p, z, smoothing)?;
    let r = PrimalDualPoint::new(-f.x, -f.y);
    solve_preconditioner(p, &c, &r, t)
}

struct Field<'a> {
    p: &'a ProblemSpec,
    s: &'a ScheduleSpec,
    smoothing: f64,
    n: usize,
}

impl Field<'_> {
    fn eval(&self, t: f64, z: &Vector) -> Result<Vector> {
        let zp = PrimalDualPoint::from_stacked(z, self.n);
        let d = rhs_resolved(self.p, self.s, t, &zp, self.smoothing)?;
        Ok(d.stacked())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Dense output of one accepted step.
struct Dense {
    t0: f64,
    h: f64,
    r1: Vector,
    r2: Vector,
    r3: Vector,
    r4: Vector,
    r5: Vector,
}

impl Dense {
    fn at(&self, t: f64) -> Vector {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        &self.r1 + (&self.r2 + (&self.r3 + (&self.r4 + &self.r5 * th1) * th) * th1) * th
    }
}

struct Attempt {
    y1: Vector,
    k7: Vector,
    err: f64,
    ks: [Vector; 6],
}

struct Dopri<'a> {
    field: Field<'a>,
    atol: f64,
    rtol: f64,
    facold: f64,
}

impl Dopri<'_> {
    fn attempt(&self, t: f64, y: &Vector, k1: &Vector, h: f64) -> Result<Attempt> {
        let f = &self.field;
        let k2 = f.eval(t + C2 * h, &(y + k1 * (h * A21)))?;
        let k3 = f.eval(t + C3 * h, &(y + (k1 * A31 + &k2 * A32) * h))?;
        let k4 = f.eval(t + C4 * h, &(y + (k1 * A41 + &k2 * A42 + &k3 * A43) * h))?;
        let k5 = f.eval(t + C5 * h, &(y + (k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h))?;
        let k6 = f.eval(t + h, &(y + (k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h))?;
        let y1 = y + (k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
        let k7 = f.eval(t + h, &y1)?;
        let e = (k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
            let q = e[i] / sc;
            acc += q * q;
        }
        let err = sqrt(acc / y.len().max(1) as f64);
        Ok(Attempt { y1, k7, err, ks: [k1.clone(), k2, k3, k4, k5, k6] })
    }

    /// Repeats attempts until one is accepted; returns the step taken and the proposed next step.
    fn step(&mut self, t: f64, y: &Vector, k1: &Vector, mut h: f64, h_cap: f64) -> Result<(Attempt, f64, f64)> {
        const BETA: f64 = 0.04;
        const EXPO1: f64 = 0.2 - BETA * 0.75;
        const SAFE: f64 = 0.9;
        let mut rejected = false;
        loop {
            h = h.min(h_cap);
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Stiffness { t });
            }
            let att = match self.attempt(t, y, k1, h) {
                Ok(a) => a,
                Err(Error::NonFinite { .. }) => {
                    h *= 0.1;
                    rejected = true;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let err = if att.err.is_finite() { att.err } else { f64::INFINITY };
            let fac11 = if err.is_finite() { pow(err, EXPO1) } else { f64::INFINITY };
            if err <= 1.0 {
                let mut fac = fac11 / pow(self.facold, BETA);
                fac = (fac / SAFE).clamp(0.1, 5.0);
                let mut hnew = h / fac;
                if rejected {
                    hnew = hnew.min(h);
                }
                self.facold = err.max(1e-4);
                return Ok((att, h, hnew));
            }
            let fac = if fac11.is_finite() { (fac11 / SAFE).min(5.0) } else { 10.0 };
            h /= fac;
            rejected = true;
        }
    }
}

fn dense_of(y0: &Vector, att: &Attempt, t0: f64, h: f64) -> Dense {
    let [k1, _, k3, k4, k5, k6] = &att.ks;
    let k7 = &att.k7;
    let ydiff = &att.y1 - y0;
    let bspl = k1 * h - &ydiff;
    let r4 = &ydiff - k7 * h - &bspl;
    let r5 = (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h;
    Dense { t0, h, r1: y0.clone(), r2: ydiff, r3: bspl, r4, r5 }
}

/// One accepted adaptive Dormand–Prince step from `state` with trial step `h`.
///
/// Returns the new state (with `ż`) and the proposed next step.
pub fn step_rk(p: &ProblemSpec, s: &ScheduleSpec, state: &FlowState, h: f64, cfg: &IntegratorConfig) -> Result<(FlowState, f64)> {
    let n = p.n();
    let field = Field { p, s, smoothing: cfg.smoothing, n };
    let y = state.z.stacked();
    let k1 = match &state.zdot {
        Some(d) => d.stacked(),
        None => field.eval(state.t, &y)?,
    };
    let mut dp = Dopri { field, atol: cfg.abs_tol, rtol: cfg.rel_tol, facold: 1e-4 };
    let (att, taken, next) = dp.step(state.t, &y, &k1, h, f64::INFINITY)?;
    let t1 = state.t + taken;
    let z = PrimalDualPoint::from_stacked(&att.y1, n);
    let zdot = PrimalDualPoint::from_stacked(&att.k7, n);
    Ok((FlowState { t: t1, z, zdot: Some(zdot) }, next))
}

/// One implicit proximal Euler step of size `h` with coefficients frozen at `t + h`.
///
/// Returns the new state, whose `ż` is the step's difference quotient, and the inner iteration count.
pub fn step_prox_euler(
    p: &ProblemSpec,
    s: &ScheduleSpec,
    state: &FlowState,
    h: f64,
    cfg: &IntegratorConfig,
) -> Result<(FlowState, usize)> {
    if !(h > 0.0) {
        return Err(config("proximal Euler step must be positive"));
    }
    let t1 = state.t + h;
    let c = s.coeffs_at(t1)?;
    let (x, y) = (&state.z.x, &state.z.y);
    let one_sweep = abs(c.beta + h) <= 1e-14 * h;
    let scale = 1.0 + state.z.norm();
    let mut yj = y.clone();
    let mut xj = x.clone();
    let mut iters = 0;
    loop {
        iters += 1;
        let arg_x = x - p.a.tmul(&(&yj - y)) * (c.beta / c.alpha) - p.a.tmul(&yj) * (h / c.alpha);
        let xn = p.f.prox(h / c.alpha, &arg_x)?;
        let axn = p.a.mul(&xn);
        let arg_y = y - (&axn - p.a.mul(x)) * (c.gamma / c.delta) + &axn * (h / c.delta);
        let yn = p.g.prox_conjugate(h / c.delta, &arg_y)?;
        let diff = sqrt((&xn - &xj).norm_squared() + (&yn - &yj).norm_squared());
        xj = xn;
        yj = yn;
        if one_sweep {
            break;
        }
        if diff <= cfg.inner_tol * scale && iters > 1 {
            break;
        }
        if !diff.is_finite() || iters >= cfg.inner_max_iter {
            return Err(Error::ContractionFailure { t: t1, iterations: iters });
        }
    }
    let z = PrimalDualPoint::new(xj, yj);
    if !z.is_finite() {
        return Err(Error::NonFinite { t: t1 });
    }
    let zdot = PrimalDualPoint::new((&z.x - x) / h, (&z.y - y) / h);
    Ok((FlowState { t: t1, z, zdot: Some(zdot) }, iters))
}

/// Receives every recorded sample; returning `false` stops the run.
pub trait Observer {
    fn observe(&mut self, state: &FlowState) -> bool;

    /// Called after every accepted step at its end time; returning `false` stops the run
    /// after recording the current state.
    fn step(&mut self, _t: f64) -> bool {
        true
    }
}

impl<F: FnMut(&FlowState) -> bool> Observer for F {
    fn observe(&mut self, state: &FlowState) -> bool {
        self(state)
    }
}

fn sample_times(t_max: f64, dt: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * dt;
        if t >= t_max - 1e-9 * dt {
            break;
        }
        out.push(t);
        k += 1;
    }
    out.push(t_max);
    out
}

/// Integrates from `z0` at `t = 0` to `t_max`, recording samples every `cfg.sample_dt`.
pub fn integrate(
    p: &ProblemSpec,
    s: &ScheduleSpec,
    z0: &PrimalDualPoint,
    t_max: f64,
    cfg: &IntegratorConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    cfg.check()?;
    if !(t_max >= 0.0) || !t_max.is_finite() {
        return Err(config("t_max must be finite and nonnegative"));
    }
    if z0.x.len() != p.n() || z0.y.len() != p.m() {
        return Err(config("initial point has wrong dimensions"));
    }
    if !z0.is_finite() {
        return Err(Error::NonFinite { t: 0.0 });
    }
    let c0 = s.coeffs_at(0.0)?;
    let ergodic_on = c0.beta > 0.0 && c0.gamma > -f64::INFINITY && matches!(
        s.family(),
        crate::schedules::Family::Symmetric { .. } | crate::schedules::Family::Antisymmetric { .. } | crate::schedules::Family::General { .. }
    );
    let meta = TrajectoryMeta { family: String::from(s.family().name()), ..TrajectoryMeta::default() };
    let mut rec = Recorder {
        samples: Vec::new(),
        ergodic: if ergodic_on { Some(Vec::new()) } else { None },
        acc: ErgodicSums::zeros(p.n(), p.m()),
        w_prev: 0.0,
        stopped: false,
    };
    let zdot0 = rhs_resolved(p, s, 0.0, z0, cfg.smoothing).ok();
    let first = FlowState { t: 0.0, z: z0.clone(), zdot: zdot0 };
    let w0 = rec.weight(s, 0.0)?;
    rec.push(first, w0, observers);
    if t_max == 0.0 || rec.stopped {
        return Ok(rec.finish(meta, 0));
    }
    let times = sample_times(t_max, cfg.sample_dt);
    let steps = match cfg.backend {
        Backend::ResolvedRk => run_rk(p, s, z0, &times[1..], cfg, &mut rec, observers)?,
        Backend::ProxEuler => run_prox(p, s, z0, t_max, cfg, &mut rec, observers)?,
    };
    Ok(rec.finish(meta, steps))
}

struct Recorder {
    samples: Vec<FlowState>,
    ergodic: Option<Vec<ErgodicSums>>,
    acc: ErgodicSums,
    w_prev: f64,
    stopped: bool,
}

impl Recorder {
    /// Records a sample; `w` is its ergodic weight `1/β(t)` when accumulators are on.
    fn push(&mut self, st: FlowState, w: f64, observers: &mut [&mut dyn Observer]) {
        for o in observers.iter_mut() {
            if !o.observe(&st) {
                self.stopped = true;
            }
        }
        if let Some(e) = self.ergodic.as_mut() {
            if let Some(prev) = self.samples.last() {
                self.acc.add_trapezoid(st.t - prev.t, &prev.z, self.w_prev, &st.z, w);
            }
            self.w_prev = w;
            e.push(self.acc.clone());
        }
        self.samples.push(st);
    }

    fn tick(t: f64, observers: &mut [&mut dyn Observer]) -> bool {
        let mut go = true;
        for o in observers.iter_mut() {
            go &= o.step(t);
        }
        go
    }

    fn weight(&self, s: &ScheduleSpec, t: f64) -> Result<f64> {
        if self.ergodic.is_some() {
            weight(s, t)
        } else {
            Ok(0.0)
        }
    }

    fn finish(self, meta: TrajectoryMeta, steps: usize) -> Trajectory {
        Trajectory { samples: self.samples, ergodic: self.ergodic, meta, truncated: self.stopped, steps }
    }
}

fn weight(s: &ScheduleSpec, t: f64) -> Result<f64> {
    Ok(1.0 / s.coeffs_at(t)?.beta)
}

fn run_rk(
    p: &ProblemSpec,
    s: &ScheduleSpec,
    z0: &PrimalDualPoint,
    times: &[f64],
    cfg: &IntegratorConfig,
    rec: &mut Recorder,
    observers: &mut [&mut dyn Observer],
) -> Result<usize> {
    let n = p.n();
    let field = Field { p, s, smoothing: cfg.smoothing, n };
    let t_max = *times.last().expect("at least the final time");
    let mut y = z0.stacked();
    let mut t = 0.0;
    let mut k1 = field.eval(t, &y)?;
    // initial step from the scale of the field
    let sc = |v: &Vector, y: &Vector| {
        let mut a = 0.0;
        for i in 0..v.len() {
            let q = v[i] / (cfg.abs_tol + cfg.rel_tol * y[i].abs());
            a += q * q;
        }
        sqrt(a / v.len().max(1) as f64)
    };
    let d0 = sc(&y, &y);
    let d1 = sc(&k1, &y);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t_max).max(1e-12_f64.min(t_max));
    let mut dp = Dopri { field, atol: cfg.abs_tol, rtol: cfg.rel_tol, facold: 1e-4 };
    let mut next = 0usize;
    let mut steps = 0usize;
    while next < times.len() {
        if steps >= cfg.max_steps {
            return Err(Error::Stiffness { t });
        }
        let remaining = t_max - t;
        let (att, taken, hnew) = dp.step(t, &y, &k1, h, remaining)?;
        steps += 1;
        let last = taken >= remaining;
        let t1 = if last { t_max } else { t + taken };
        if !att.y1.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: t1 });
        }
        let dense = dense_of(&y, &att, t, taken);
        while next < times.len() && (times[next] <= t1 || last) {
            let ts = times[next].min(t1);
            let (zs, zd) = if ts == t1 {
                (PrimalDualPoint::from_stacked(&att.y1, n), PrimalDualPoint::from_stacked(&att.k7, n))
            } else {
                let zv = dense.at(ts);
                let zd = dp.field.eval(ts, &zv)?;
                (PrimalDualPoint::from_stacked(&zv, n), PrimalDualPoint::from_stacked(&zd, n))
            };
            let w = rec.weight(s, ts)?;
            rec.push(FlowState { t: ts, z: zs, zdot: Some(zd) }, w, observers);
            next += 1;
            if rec.stopped {
                return Ok(steps);
            }
        }
        if !Recorder::tick(t1, observers) {
            if rec.samples.last().map(|l| l.t) != Some(t1) {
                let zd = PrimalDualPoint::from_stacked(&att.k7, n);
                let w = rec.weight(s, t1)?;
                rec.push(FlowState { t: t1, z: PrimalDualPoint::from_stacked(&att.y1, n), zdot: Some(zd) }, w, observers);
            }
            rec.stopped = true;
            return Ok(steps);
        }
        t = t1;
        y = att.y1;
        k1 = att.k7;
        h = hnew;
    }
    Ok(steps)
}

fn run_prox(
    p: &ProblemSpec,
    s: &ScheduleSpec,
    z0: &PrimalDualPoint,
    t_max: f64,
    cfg: &IntegratorConfig,
    rec: &mut Recorder,
    observers: &mut [&mut dyn Observer],
) -> Result<usize> {
    let h = cfg.h;
    let total = {
        let k = t_max / h;
        let r = round(k);
        if abs(k - r) <= 1e-9 * k.max(1.0) { r as usize } else { ceil(k) as usize }
    };
    let stride = (round(cfg.sample_dt / h) as usize).max(1);
    let mut state = FlowState::new(0.0, z0.clone());
    for k in 1..=total {
        if k > cfg.max_steps {
            return Err(Error::Stiffness { t: state.t });
        }
        let hk = if k == total { t_max - (k - 1) as f64 * h } else { h };
        let (mut next, _) = step_prox_euler(p, s, &state, hk, cfg)?;
        next.t = if k == total { t_max } else { k as f64 * h };
        let go = Recorder::tick(next.t, observers);
        if k % stride == 0 || k == total || !go {
            let w = rec.weight(s, next.t)?;
            rec.push(next.clone(), w, observers);
            if rec.stopped || !go {
                rec.stopped = true;
                return Ok(k);
            }
        }
        state = next;
    }
    Ok(total)
}
