//! Gap, anchoring, Bregman remainder, family energies and their bound curves.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::config;
use crate::flow::{FlowState, Trajectory};
use crate::math::{abs, dist, norm, sqrt};
use crate::problem::{PrimalDualPoint, ProblemSpec};
use crate::schedules::{Family, PreconditionerCoeffs, ScheduleSpec};
use crate::{Error, Result, Vector};

/// Probe pair `(u, v)` of the gap.
#[derive(Clone, Debug, PartialEq)]
pub struct Anchor {
    pub u: Vector,
    pub v: Vector,
    pub is_saddle: bool,
}

impl Anchor {
    pub fn new(p: &ProblemSpec, u: Vector, v: Vector) -> Result<Self> {
        if u.len() != p.n() || v.len() != p.m() {
            return Err(config("anchor has wrong dimensions"));
        }
        Ok(Self { u, v, is_saddle: false })
    }

    /// Anchor at a verified saddle point.
    pub fn saddle(p: &ProblemSpec, u: Vector, v: Vector) -> Result<Self> {
        let mut a = Self::new(p, u, v)?;
        let r = p.saddle_residual(&a.u, &a.v)?;
        if !(r <= crate::problem::SADDLE_TOL) {
            return Err(Error::AnchorInfeasible(format!("saddle residual {r:e} exceeds tolerance")));
        }
        a.is_saddle = true;
        Ok(a)
    }

    /// Anchor at the saddle stored in the problem.
    pub fn from_problem(p: &ProblemSpec) -> Result<Self> {
        let s = p.saddle().ok_or_else(|| Error::AnchorInfeasible("problem carries no saddle point".to_string()))?;
        Ok(Self { u: s.x.clone(), v: s.y.clone(), is_saddle: true })
    }

    pub fn point(&self) -> PrimalDualPoint {
        PrimalDualPoint::new(self.u.clone(), self.v.clone())
    }
}

/// `Δ_{u,v}(z) = L(x, v) − L(u, y)`, expanded without forming `L`.
pub fn duality_gap(p: &ProblemSpec, z: &PrimalDualPoint, anchor: &Anchor) -> Result<f64> {
    let gs = p.g_conj()?;
    let fu = p.f.value(&anchor.u);
    let gv = gs.value(&anchor.v);
    if !fu.is_finite() || !gv.is_finite() {
        return Err(Error::AnchorInfeasible("f(u) or g*(v) is infinite".to_string()));
    }
    let dx = &z.x - &anchor.u;
    let dy = &z.y - &anchor.v;
    let primal = p.f.value(&z.x) - fu + anchor.v.dot(&p.a.mul(&dx));
    let dual = gs.value(&z.y) - gv - dy.dot(&p.a.mul(&anchor.u));
    Ok(primal + dual)
}

/// `σ/2 ‖x−u‖² + τ/2 ‖y−v‖²`.
pub fn anchoring(z: &PrimalDualPoint, anchor: &Anchor, sigma: f64, tau: f64) -> f64 {
    0.5 * sigma * (&z.x - &anchor.u).norm_squared() + 0.5 * tau * (&z.y - &anchor.v).norm_squared()
}

/// `⟨A(x−u), y−v⟩`.
pub fn coupling(p: &ProblemSpec, z: &PrimalDualPoint, anchor: &Anchor) -> f64 {
    p.a.mul(&(&z.x - &anchor.u)).dot(&(&z.y - &anchor.v))
}

/// The selections `X ∈ ∂f(x)` and `Y ∈ ∂g*(y)` realized by the velocity.
pub fn selections(p: &ProblemSpec, c: &PreconditionerCoeffs, z: &PrimalDualPoint, zdot: &PrimalDualPoint) -> (Vector, Vector) {
    let x = -&zdot.x * c.alpha - p.a.tmul(&zdot.y) * c.beta - p.a.tmul(&z.y);
    let y = -p.a.mul(&zdot.x) * c.gamma - &zdot.y * c.delta + p.a.mul(&z.x);
    (x, y)
}

/// Bregman remainder `d_{u,v}` of `f` and `g*` at the flow's selections.
pub fn bregman_d(p: &ProblemSpec, s: &ScheduleSpec, state: &FlowState, anchor: &Anchor) -> Result<f64> {
    let zdot = state.zdot.as_ref().ok_or(Error::DerivativeUnavailable)?;
    let c = s.coeffs_at(state.t)?;
    bregman_with(p, &c, &state.z, zdot, anchor)
}

fn bregman_with(p: &ProblemSpec, c: &PreconditionerCoeffs, z: &PrimalDualPoint, zdot: &PrimalDualPoint, anchor: &Anchor) -> Result<f64> {
    let gs = p.g_conj()?;
    let (sx, sy) = selections(p, c, z, zdot);
    let df = p.f.value(&anchor.u) - p.f.value(&z.x) - sx.dot(&(&anchor.u - &z.x));
    let dg = gs.value(&anchor.v) - gs.value(&z.y) - sy.dot(&(&anchor.v - &z.y));
    Ok(df + dg)
}

/// `G = (ν/δ)(Ax − b) − y`, constant along triangular flows.
pub fn g_invariant(p: &ProblemSpec, s: &ScheduleSpec, state: &FlowState) -> Result<Vector> {
    if !matches!(s.family(), Family::Triangular { .. }) {
        return Err(Error::UnsupportedDiagnostic("G is defined for the triangular family only".to_string()));
    }
    let b = p.b().ok_or_else(|| Error::UnsupportedDiagnostic("G needs a constraint vector b".to_string()))?;
    let c = s.coeffs_at(state.t)?;
    let nu = -c.gamma;
    Ok((p.a.mul(&state.z.x) - b) * (nu / c.delta) - &state.z.y)
}

/// `Δ̂_{u,v}(t)` at the ergodic point.
pub fn ergodic_gap(p: &ProblemSpec, traj: &Trajectory, t: f64, anchor: &Anchor) -> Result<f64> {
    let zh = crate::flow::ergodic_point(traj, t)?;
    duality_gap(p, &zh, anchor)
}

/// Everything measured at one sample.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub gap: f64,
    pub gap_bound: Option<f64>,
    /// Anchoring function with the family's weights.
    pub v: f64,
    pub coupling: f64,
    pub bregman: Option<f64>,
    pub energy: Option<f64>,
    pub energy_bound: Option<f64>,
    pub feas: Option<f64>,
    pub feas_bound: Option<f64>,
    pub obj_gap: Option<f64>,
    pub obj_bound: Option<f64>,
    pub g_drift: Option<f64>,
    pub ergodic_gap: Option<f64>,
    pub ergodic_bound: Option<f64>,
    /// `∫(Δ/β) / ∫(1/β)` on the sample grid.
    pub weighted_gap: Option<f64>,
    /// Weighted distance to the anchor controlled by the trajectory bound.
    pub traj_dist: Option<f64>,
    pub traj_bound: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "t",
    "gap",
    "gap_bound",
    "V",
    "energy",
    "energy_bound",
    "feas",
    "feas_bound",
    "obj_gap",
    "obj_bound",
    "G_drift",
    "ergodic_gap",
    "ergodic_bound",
];

impl DiagnosticsRecord {
    /// Values in `CSV_COLUMNS` order; `None` marks an inapplicable column.
    pub fn csv_fields(&self) -> [Option<f64>; 13] {
        [
            Some(self.t),
            Some(self.gap),
            self.gap_bound,
            Some(self.v),
            self.energy,
            self.energy_bound,
            self.feas,
            self.feas_bound,
            self.obj_gap,
            self.obj_bound,
            self.g_drift,
            self.ergodic_gap,
            self.ergodic_bound,
        ]
    }
}

/// Weights `(σ, τ)` of the family's anchoring term.
pub fn anchoring_weights(c: &PreconditionerCoeffs, family: &Family) -> (f64, f64) {
    match family {
        Family::Plain => (1.0, 1.0),
        Family::Triangular { .. } => (c.alpha, c.delta),
        Family::General { .. } => (c.alpha * c.eta, c.delta * c.eta),
        Family::Antisymmetric { .. } | Family::Symmetric { .. } => (c.alpha / c.beta, c.delta / c.beta),
    }
}

struct Initial {
    energy: f64,
    k0: f64,
    f_bar: f64,
    y_bar_norm: f64,
    g0: Option<Vector>,
}

/// Per-sample diagnostics and the matching bound curves.
///
/// Bounds that need a saddle anchor (triangular, trajectory, symmetric) are left empty otherwise.
pub fn energies(p: &ProblemSpec, s: &ScheduleSpec, traj: &Trajectory, anchor: &Anchor) -> Result<Vec<DiagnosticsRecord>> {
    let fam = s.family();
    let first = &traj.samples[0];
    let c0 = s.coeffs_at(first.t)?;
    let (s0, t0w) = anchoring_weights(&c0, fam);
    let gap0 = duality_gap(p, &first.z, anchor)?;
    let v0 = anchoring(&first.z, anchor, s0, t0w);
    let energy0 = match fam {
        Family::Plain => 0.0,
        Family::Triangular { .. } => v0 + (-c0.gamma) * gap0,
        Family::Antisymmetric { .. } => v0 + gap0,
        Family::General { .. } => v0 + c0.eta * s.z_at(first.t) * gap0,
        Family::Symmetric { .. } => v0 + coupling(p, &first.z, anchor),
    };
    let tri_bounds = matches!(fam, Family::Triangular { .. }) && anchor.is_saddle && p.b().is_some();
    let init = if tri_bounds {
        let Family::Triangular { alpha0, delta0, nu0, .. } = fam else { unreachable!() };
        let b = p.b().expect("checked above");
        let feas0 = dist(&p.a.mul(&first.z.x), b);
        let k0 = nu0 * feas0 + delta0 * dist(&anchor.v, &first.z.y) + sqrt(2.0 * delta0 * energy0.max(0.0));
        let _ = alpha0;
        Initial {
            energy: energy0,
            k0,
            f_bar: p.f.value(&anchor.u),
            y_bar_norm: norm(&anchor.v),
            g0: Some(g_invariant(p, s, first)?),
        }
    } else {
        let g0 = if matches!(fam, Family::Triangular { .. }) && p.b().is_some() { Some(g_invariant(p, s, first)?) } else { None };
        Initial { energy: energy0, k0: 0.0, f_bar: 0.0, y_bar_norm: 0.0, g0 }
    };

    let mut out = Vec::with_capacity(traj.samples.len());
    let mut wgap_int = 0.0;
    let mut prev: Option<(f64, f64, f64)> = None;
    for (k, st) in traj.samples.iter().enumerate() {
        let c = s.coeffs_at(st.t)?;
        let (sig, tau) = anchoring_weights(&c, fam);
        let gap = duality_gap(p, &st.z, anchor)?;
        let v = anchoring(&st.z, anchor, sig, tau);
        let m = coupling(p, &st.z, anchor);
        let bregman = match &st.zdot {
            Some(zd) => Some(bregman_with(p, &c, &st.z, zd, anchor)?),
            None => None,
        };
        let mut r = DiagnosticsRecord { t: st.t, gap, v, coupling: m, bregman, ..DiagnosticsRecord::default() };
        match fam {
            Family::Plain => {}
            Family::Triangular { .. } => {
                r.energy = Some(v + (-c.gamma) * gap);
                if let Some(g0) = &init.g0 {
                    r.g_drift = Some(dist(&g_invariant(p, s, st)?, g0));
                }
                if tri_bounds {
                    let rate = s.rate_factor(st.t)?;
                    let b = p.b().expect("checked above");
                    r.energy_bound = Some(init.energy / s.xi_at(st.t)?);
                    r.gap_bound = Some(init.energy * rate);
                    r.feas = Some(dist(&p.a.mul(&st.z.x), b));
                    r.feas_bound = Some(init.k0 * rate);
                    r.obj_gap = Some(abs(p.f.value(&st.z.x) - init.f_bar));
                    r.obj_bound = Some((init.energy + init.y_bar_norm * init.k0) * rate);
                }
            }
            Family::Antisymmetric { alpha0, delta0, beta } => {
                let factor = s.rate_factor(st.t)?;
                r.energy = Some(v + gap);
                r.energy_bound = Some(init.energy * factor);
                r.gap_bound = Some(init.energy * factor);
                if anchor.is_saddle {
                    r.traj_dist = Some(
                        0.5 * alpha0 * (&st.z.x - &anchor.u).norm_squared() + 0.5 * delta0 * (&st.z.y - &anchor.v).norm_squared(),
                    );
                    r.traj_bound = Some(beta.eval(0.0) * init.energy);
                }
            }
            Family::General { .. } => {
                let z = s.z_at(st.t);
                r.energy = Some(v + c.eta * z * gap);
                r.energy_bound = Some(init.energy);
                let z0 = s.z_at(0.0);
                r.gap_bound = Some(init.energy / z0 * s.rate_factor(st.t)?);
            }
            Family::Symmetric { .. } => {
                r.energy = Some(v + m);
                if anchor.is_saddle {
                    r.energy_bound = Some(init.energy);
                }
                let w = 1.0 / c.beta;
                if let Some((tp, gp, wp)) = prev {
                    wgap_int += 0.5 * (st.t - tp) * (gp * wp + gap * w);
                }
                prev = Some((st.t, gap, w));
                if k > 0 {
                    if let Some(acc) = traj.ergodic_at(k) {
                        r.ergodic_gap = Some(duality_gap(p, &acc.point(), anchor)?);
                        r.weighted_gap = Some(wgap_int / acc.w);
                    }
                    if anchor.is_saddle {
                        r.ergodic_bound = Some(init.energy * s.rate_factor(st.t)?);
                    }
                }
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Slack used when comparing observed values with bound curves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slack {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Slack {
    fn default() -> Self {
        Self { abs: 1e-7, rel: 1e-6 }
    }
}

impl Slack {
    pub fn allows(&self, observed: f64, bound: f64) -> bool {
        observed <= bound + self.abs + self.rel * abs(bound)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub checked: usize,
    /// Largest `observed / bound` over samples with a positive bound.
    pub worst_ratio: f64,
    /// Smallest `bound − observed`.
    pub worst_margin: f64,
    pub first_violation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DominationReport {
    pub checks: Vec<BoundCheck>,
}

impl DominationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.first_violation.is_none())
    }

    pub fn violations(&self) -> Vec<&BoundCheck> {
        self.checks.iter().filter(|c| c.first_violation.is_some()).collect()
    }

    pub fn check(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn pair_check<F: Fn(&DiagnosticsRecord) -> (Option<f64>, Option<f64>)>(
    name: &str,
    records: &[DiagnosticsRecord],
    slack: Slack,
    get: F,
) -> Option<BoundCheck> {
    let mut c = BoundCheck {
        name: name.to_string(),
        checked: 0,
        worst_ratio: 0.0,
        worst_margin: f64::INFINITY,
        first_violation: None,
    };
    for r in records {
        if let (Some(o), Some(b)) = get(r) {
            if b.is_infinite() && b > 0.0 {
                continue;
            }
            c.checked += 1;
            if b > 0.0 {
                c.worst_ratio = c.worst_ratio.max(o / b);
            }
            c.worst_margin = c.worst_margin.min(b - o);
            if !slack.allows(o, b) && c.first_violation.is_none() {
                c.first_violation = Some(r.t);
            }
        }
    }
    (c.checked > 0).then_some(c)
}

/// Per-bound worst ratios and first violation times, with the default slack.
pub fn bound_report(records: &[DiagnosticsRecord]) -> DominationReport {
    bound_report_with(records, Slack::default())
}

pub fn bound_report_with(records: &[DiagnosticsRecord], slack: Slack) -> DominationReport {
    let mut checks = Vec::new();
    let pairs: [(&str, fn(&DiagnosticsRecord) -> (Option<f64>, Option<f64>)); 6] = [
        ("gap", |r| (Some(r.gap), r.gap_bound)),
        ("energy", |r| (r.energy, r.energy_bound)),
        ("feasibility", |r| (r.feas, r.feas_bound)),
        ("objective", |r| (r.obj_gap, r.obj_bound)),
        ("ergodic_gap", |r| (r.ergodic_gap, r.ergodic_bound)),
        ("trajectory", |r| (r.traj_dist, r.traj_bound)),
    ];
    for (name, get) in pairs {
        if let Some(c) = pair_check(name, records, slack, get) {
            checks.push(c);
        }
    }
    // energy monotonicity between consecutive samples
    if records.iter().all(|r| r.energy.is_some() && r.energy_bound.is_some()) && records.len() > 1 {
        let mut c = BoundCheck {
            name: "energy_monotone".to_string(),
            checked: 0,
            worst_ratio: 0.0,
            worst_margin: f64::INFINITY,
            first_violation: None,
        };
        for w in records.windows(2) {
            let (a, b) = (w[0].energy.unwrap_or(0.0), w[1].energy.unwrap_or(0.0));
            c.checked += 1;
            if a > 0.0 {
                c.worst_ratio = c.worst_ratio.max(b / a);
            }
            c.worst_margin = c.worst_margin.min(a - b);
            if !slack.allows(b, a) && c.first_violation.is_none() {
                c.first_violation = Some(w[1].t);
            }
        }
        checks.push(c);
    }
    DominationReport { checks }
}

/// Terms of the energy identity at one state, for a weight `η(t)` and a probe `Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Sum of absolute values of all terms.
    pub scale: f64,
}

impl IdentityCheck {
    pub fn relative_residual(&self) -> f64 {
        abs(self.lhs - self.rhs) / self.scale.max(f64::MIN_POSITIVE)
    }
}

/// Evaluates both sides of
/// `V̇ + ηZΔ̇ + ηΔ + ηd = σ̇/2‖x−u‖² + τ̇/2‖y−v‖² − αηZ‖ẋ‖² − δηZ‖ẏ‖² − ηZ(β+γ)⟨Aẋ,ẏ⟩ − η[(β−Z)⟨x−u,Aᵀẏ⟩ + (γ+Z)⟨y−v,Aẋ⟩]`
/// with `σ = αη`, `τ = δη`.
///
/// `V̇` and `Δ̇` are central differences along the tangent `ż`; `σ̇`, `τ̇` are differences in time.
pub fn energy_identity<E: Fn(f64) -> f64>(
    p: &ProblemSpec,
    s: &ScheduleSpec,
    state: &FlowState,
    anchor: &Anchor,
    eta: &E,
    z: f64,
) -> Result<IdentityCheck> {
    let zd = state.zdot.as_ref().ok_or(Error::DerivativeUnavailable)?;
    let t = state.t;
    let c = s.coeffs_at(t)?;
    let e = eta(t);
    let zn = state.z.norm();
    let vn = zd.norm();
    let eps = if vn > 0.0 { 1e-5 * (1.0 + zn) / vn } else { 1e-5 };
    let eps = if t > eps { eps } else { eps.min(0.5 * t.max(0.0)) };
    let shift = |h: f64| PrimalDualPoint::new(&state.z.x + &zd.x * h, &state.z.y + &zd.y * h);
    let weights = |tt: f64| -> Result<(f64, f64)> {
        let cc = s.coeffs_at(tt)?;
        let et = eta(tt);
        Ok((cc.alpha * et, cc.delta * et))
    };
    let (zp, zm) = (shift(eps), shift(-eps));
    let gap = duality_gap(p, &state.z, anchor)?;
    let (dgap, dv, sdot, tdot) = if eps > 0.0 {
        let dgap = (duality_gap(p, &zp, anchor)? - duality_gap(p, &zm, anchor)?) / (2.0 * eps);
        let (sp, tp) = weights(t + eps)?;
        let (sm, tm) = weights(t - eps)?;
        let dv = (anchoring(&zp, anchor, sp, tp) - anchoring(&zm, anchor, sm, tm)) / (2.0 * eps);
        (dgap, dv, (sp - sm) / (2.0 * eps), (tp - tm) / (2.0 * eps))
    } else {
        // one-sided at t = 0
        let h = 1e-5 * (1.0 + zn) / vn.max(f64::MIN_POSITIVE);
        let z1 = shift(h);
        let z2 = shift(2.0 * h);
        let d = |a: f64, b: f64, c0: f64| (-3.0 * c0 + 4.0 * a - b) / (2.0 * h);
        let dgap = d(duality_gap(p, &z1, anchor)?, duality_gap(p, &z2, anchor)?, gap);
        let (s0, t0) = weights(t)?;
        let (s1, t1) = weights(t + h)?;
        let (s2, t2) = weights(t + 2.0 * h)?;
        let v0 = anchoring(&state.z, anchor, s0, t0);
        let dv = d(anchoring(&z1, anchor, s1, t1), anchoring(&z2, anchor, s2, t2), v0);
        (dgap, dv, d(s1, s2, s0), d(t1, t2, t0))
    };
    let d = bregman_with(p, &c, &state.z, zd, anchor)?;
    let dx = &state.z.x - &anchor.u;
    let dy = &state.z.y - &anchor.v;
    let axd = p.a.mul(&zd.x);
    let atyd = p.a.tmul(&zd.y);
    let lhs_terms = [dv, e * z * dgap, e * gap, e * d];
    let rhs_terms = [
        0.5 * sdot * dx.norm_squared(),
        0.5 * tdot * dy.norm_squared(),
        -c.alpha * e * z * zd.x.norm_squared(),
        -c.delta * e * z * zd.y.norm_squared(),
        -e * z * (c.beta + c.gamma) * axd.dot(&zd.y),
        -e * (c.beta - z) * dx.dot(&atyd),
        -e * (c.gamma + z) * dy.dot(&axd),
    ];
    let lhs: f64 = lhs_terms.iter().sum();
    let rhs: f64 = rhs_terms.iter().sum();
    let scale = lhs_terms.iter().chain(rhs_terms.iter()).map(|v| abs(*v)).sum();
    Ok(IdentityCheck { lhs, rhs, scale })
}

/// Running trapezoid integral of `values` over `times`.
pub fn running_integral(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::exp;
    use crate::problem::{ConvexFn, LinearMap};
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn zero_functions_have_zero_gap_at_origin_anchor() {
        let p = ProblemSpec::new(ConvexFn::zero(2), ConvexFn::indicator_point(Vector::zeros(2)), LinearMap::identity(2)).unwrap();
        let a = Anchor::new(&p, Vector::zeros(2), Vector::zeros(2)).unwrap();
        let z = PrimalDualPoint::new(dvector![1.0, -2.0], dvector![0.5, 3.0]);
        assert_eq!(duality_gap(&p, &z, &a).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_gap_by_hand() {
        // f = ½‖x‖², g = ½‖y‖² so g* = ½‖y‖², A = [[1, 2], [0, 1]]
        let id = crate::Matrix::identity(2, 2);
        let f = ConvexFn::quadratic(id.clone(), Vector::zeros(2)).unwrap();
        let g = ConvexFn::quadratic(id, Vector::zeros(2)).unwrap();
        let a = LinearMap::new(dmatrix![1.0, 2.0; 0.0, 1.0]).unwrap();
        let p = ProblemSpec::new(f, g, a).unwrap().with_saddle(Vector::zeros(2), Vector::zeros(2)).unwrap();
        let anc = Anchor::from_problem(&p).unwrap();
        let z = PrimalDualPoint::new(dvector![1.0, -1.0], dvector![2.0, 0.5]);
        let want = 0.5 * 2.0 + 0.5 * 4.25;
        assert!((duality_gap(&p, &z, &anc).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn bregman_vanishes_at_base_point() {
        let f = ConvexFn::quadratic(dmatrix![2.0], dvector![0.0]).unwrap();
        let g = ConvexFn::quadratic(dmatrix![1.0], dvector![0.0]).unwrap();
        let p = ProblemSpec::new(f, g, LinearMap::identity(1)).unwrap();
        let s = ScheduleSpec::new(Family::Plain, 1.0, 1.0).unwrap();
        let z = PrimalDualPoint::new(dvector![0.3], dvector![-0.2]);
        let zd = crate::flow::rhs_resolved(&p, &s, 0.0, &z, 0.0).unwrap();
        let st = FlowState { t: 0.0, z: z.clone(), zdot: Some(zd) };
        let a = Anchor::new(&p, z.x.clone(), z.y.clone()).unwrap();
        assert!(bregman_d(&p, &s, &st, &a).unwrap().abs() < 1e-15);
        // the quadratic remainder: ‖u−x‖² + ½‖v−y‖² for Q_f = 2, Q_g* = 1
        let a = Anchor::new(&p, dvector![1.0], dvector![1.0]).unwrap();
        let want = 0.7 * 0.7 + 0.5 * 1.2 * 1.2;
        assert!((bregman_d(&p, &s, &st, &a).unwrap() - want).abs() < 1e-14);
        let st = FlowState::new(0.0, z);
        assert_eq!(bregman_d(&p, &s, &st, &a), Err(Error::DerivativeUnavailable));
    }

    #[test]
    fn scaled_bound_reports_first_violation() {
        let recs: Vec<DiagnosticsRecord> = (0..10)
            .map(|k| {
                let t = k as f64;
                DiagnosticsRecord { t, gap: exp(-t), gap_bound: Some(2.0 * exp(-t)), ..DiagnosticsRecord::default() }
            })
            .collect();
        assert!(bound_report(&recs).passed());
        let scaled: Vec<DiagnosticsRecord> =
            recs.iter().map(|r| DiagnosticsRecord { gap_bound: r.gap_bound.map(|b| b * 1e-3), ..r.clone() }).collect();
        let rep = bound_report(&scaled);
        assert!(!rep.passed());
        // 2e-3 e^{-t} + 1e-7 first falls below e^{-t} at t = 0
        assert_eq!(rep.check("gap").unwrap().first_violation, Some(0.0));
    }
}
