//! Acceptance suite: one PASS/FAIL line per criterion, each with its runtime limit.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use pdflow::config::parse_config;
use pdflow::instance::{gen_instance, random_anchors, random_start, Experiment, InstanceConfig};
use pdflow::runner::run;
use pdflow_core::diagnostics::{bound_report, energies, energy_identity, g_invariant, Anchor};
use pdflow_core::flow::{integrate, IntegratorConfig};
use pdflow_core::problem::{ConvexFn, PrimalDualPoint, ProblemSpec};
use pdflow_core::schedules::{Family, ScalarFn, ScheduleSpec};
use pdflow_core::solvers::{chambolle_pock_from, default_cp_steps, forward_backward, kkt_solve};
use pdflow_core::Vector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: usize,
    name: &'static str,
    limit_secs: f64,
    check: fn() -> Outcome,
}

fn quadratic(dim: usize, seed: u64, zero_fraction: f64) -> ProblemSpec {
    let cfg = InstanceConfig { experiment: Experiment::QuadraticMin, dim, seed, zero_fraction, ..InstanceConfig::default() };
    gen_instance(&cfg).unwrap().problem
}

fn saddle(p: &ProblemSpec) -> Result<Anchor, String> {
    let r = kkt_solve(p).map_err(|e| e.to_string())?;
    Anchor::saddle(p, r.x, r.y).map_err(|e| e.to_string())
}

fn anti(beta: f64, a0: f64) -> Family {
    Family::Antisymmetric { beta: ScalarFn::Constant(beta), alpha0: a0, delta0: a0 }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn energy_identity_check() -> Outcome {
    let p = quadratic(10, 1, 0.1);
    let an = p.a.op_norm();
    let beta = 0.5;
    let s = ScheduleSpec::new(anti(beta, beta), an, 5.0).map_err(err)?;
    let z0 = random_start(1, p.n(), p.m());
    let cfg = IntegratorConfig { sample_dt: 0.1, ..IntegratorConfig::default() };
    let tr = integrate(&p, &s, &z0, 5.0, &cfg, &mut []).map_err(err)?;
    let samples = &tr.samples[1..];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    rng.set_stream(3);
    let probes: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..2.0)).collect();
    let eta = |_t: f64| 1.0 / beta;
    let mut worst: f64 = 0.0;
    for a in random_anchors(1, p.n(), p.m(), 3) {
        let anchor = Anchor::new(&p, a.x, a.y).map_err(err)?;
        for &z in &probes {
            for st in samples {
                let c = energy_identity(&p, &s, st, &anchor, &eta, z).map_err(err)?;
                worst = worst.max(c.relative_residual());
            }
        }
    }
    Ok((
        worst <= 1e-5 && samples.len() == 50,
        format!("{} times x 3 anchors x 3 probes, max relative residual {worst:.2e} (limit 1e-5)", samples.len()),
    ))
}

fn triangular_run(b_shift: f64, t_max: f64, nu0: f64) -> Result<(ProblemSpec, ScheduleSpec, pdflow_core::flow::Trajectory), String> {
    let cfg = InstanceConfig { experiment: Experiment::LinConstr, dim: 50, seed: 7, ..InstanceConfig::default() };
    let p = gen_instance(&cfg).map_err(err)?.problem;
    let an = p.a.op_norm();
    let s = ScheduleSpec::new(
        Family::Triangular { zeta: ScalarFn::Constant(1.0), alpha0: 100.0, delta0: 100.0, nu0 },
        an,
        t_max,
    )
    .map_err(err)?;
    let run_p = if b_shift == 0.0 {
        p.clone()
    } else {
        let b = p.b().unwrap().add_scalar(b_shift);
        ProblemSpec::new(p.f.clone(), ConvexFn::indicator_point(b), p.a.clone()).map_err(err)?
    };
    let z0 = random_start(7, p.n(), p.m());
    let ic = IntegratorConfig { sample_dt: 0.05, ..IntegratorConfig::default() };
    let tr = integrate(&run_p, &s, &z0, t_max, &ic, &mut []).map_err(err)?;
    Ok((p, s, tr))
}

fn triangular_rates() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    // nu0 = 1 gives nu == 1 and e^{-t} rates; nu0 = 0 gives 1/(e^t - 1)
    for nu0 in [1.0, 0.0] {
        let (p, s, tr) = triangular_run(0.0, 10.0, nu0)?;
        let anchor = saddle(&p)?;
        let recs = energies(&p, &s, &tr, &anchor).map_err(err)?;
        let rep = bound_report(&recs);
        for name in ["gap", "feasibility", "objective"] {
            match rep.check(name) {
                Some(c) => {
                    ok &= c.first_violation.is_none() && c.checked + 1 >= recs.len();
                    parts.push(format!("nu0={nu0} {name} worst ratio {:.3e}", c.worst_ratio));
                }
                None => {
                    ok = false;
                    parts.push(format!("nu0={nu0} {name} missing"));
                }
            }
        }
    }
    Ok((ok, format!("{} over t in [0, 10]", parts.join(", "))))
}

fn constant_g() -> Outcome {
    let drift = |shift: f64, t_max: f64| -> Result<(f64, f64), String> {
        let (p, s, tr) = triangular_run(shift, t_max, 0.0)?;
        let g0 = g_invariant(&p, &s, &tr.samples[0]).map_err(err)?;
        let mut worst: f64 = 0.0;
        for st in &tr.samples {
            worst = worst.max((g_invariant(&p, &s, st).map_err(err)? - &g0).norm());
        }
        Ok((worst, g0.norm()))
    };
    let (d, g0) = drift(0.0, 10.0)?;
    let (dp, _) = drift(1e-2, 2.0)?;
    let limit = 1e-8 * (1.0 + g0);
    Ok((
        d <= limit && dp > 1e-4,
        format!("max drift {d:.2e} (limit {limit:.2e}); perturbed field drift {dp:.2e} (must exceed 1e-4)"),
    ))
}

fn antisymmetric_bounds() -> Outcome {
    let beta = 0.1;
    let ic = IntegratorConfig { sample_dt: 0.01, ..IntegratorConfig::default() };
    let t_max = 2.0;
    let p = quadratic(20, 4, 0.1);
    let an = p.a.op_norm();
    let s = ScheduleSpec::new(anti(beta, beta), an, t_max).map_err(err)?;
    let z0 = random_start(4, p.n(), p.m());
    let tr = integrate(&p, &s, &z0, t_max, &ic, &mut []).map_err(err)?;
    let mut ok = true;
    let mut worst_probe: f64 = 0.0;
    for a in random_anchors(4, p.n(), p.m(), 5) {
        let anchor = Anchor::new(&p, a.x, a.y).map_err(err)?;
        let c = bound_report(&energies(&p, &s, &tr, &anchor).map_err(err)?).check("gap").cloned().ok_or("no gap check")?;
        ok &= c.first_violation.is_none();
        worst_probe = worst_probe.max(c.worst_ratio);
    }
    let sad = saddle(&p)?;
    let rep = bound_report(&energies(&p, &s, &tr, &sad).map_err(err)?);
    let traj = rep.check("trajectory").cloned().ok_or("no trajectory check")?;
    ok &= traj.first_violation.is_none() && rep.check("gap").is_some_and(|c| c.first_violation.is_none());

    // strongly convex instance: ‖x − x̄‖² ≤ (2/μ) E(0) e^{−t/β}
    let q = quadratic(20, 4, 0.0);
    let mu = q.f.strong_convexity();
    let s = ScheduleSpec::new(anti(beta, beta), q.a.op_norm(), t_max).map_err(err)?;
    let tr = integrate(&q, &s, &random_start(4, q.n(), q.m()), t_max, &ic, &mut []).map_err(err)?;
    let sq = saddle(&q)?;
    let recs = energies(&q, &s, &tr, &sq).map_err(err)?;
    let mut sc_ok = mu > 0.0;
    let mut sc_worst: f64 = 0.0;
    for (r, st) in recs.iter().zip(&tr.samples) {
        let d = (&st.z.x - &sq.u).norm_squared();
        let b = 2.0 / mu * r.gap_bound.unwrap_or(f64::NAN);
        sc_ok &= d <= b + 1e-7 + 1e-6 * b;
        if b > 0.0 {
            sc_worst = sc_worst.max(d / b);
        }
    }
    Ok((
        ok && sc_ok,
        format!(
            "5 probe anchors worst gap/bound {worst_probe:.3e}; trajectory worst ratio {:.3e}; strong convexity (mu={mu:.3e}) worst ratio {sc_worst:.3e}",
            traj.worst_ratio
        ),
    ))
}

fn general_family() -> Outcome {
    let mut worst: f64 = 0.0;
    let an = 1.7;
    for beta in [ScalarFn::Constant(0.3), ScalarFn::Affine { a: 0.5, b: 0.2 }, ScalarFn::Exponential { c: 1.0, kappa: 0.05 }] {
        let a = ScheduleSpec::new(Family::Antisymmetric { beta: beta.clone(), alpha0: 2.0, delta0: 3.0 }, an, 10.0).map_err(err)?;
        let g = ScheduleSpec::new(
            Family::General { beta: beta.clone(), gamma: ScalarFn::Scaled(-1.0, Box::new(beta)), alpha0: 2.0, delta0: 3.0 },
            an,
            10.0,
        )
        .map_err(err)?;
        for k in 0..=1000 {
            let t = 0.005 * k as f64;
            let (ca, cg) = (a.coeffs_at(t).map_err(err)?, g.coeffs_at(t).map_err(err)?);
            for (x, y) in [(ca.alpha, cg.alpha), (ca.beta, cg.beta), (ca.gamma, cg.gamma), (ca.delta, cg.delta)] {
                worst = worst.max((x - y).abs() / (1.0 + x.abs()));
            }
        }
    }
    // β − γ ≡ 2, β + γ = e^{−2t}: Z ≡ 1 and ∫ΞW stays below √(α₀δ₀)
    let p = quadratic(20, 5, 0.1);
    let an = p.a.op_norm();
    let half = ScalarFn::Exponential { c: 0.5, kappa: 2.0 };
    let fam = Family::General {
        beta: ScalarFn::Sum(vec![ScalarFn::Constant(1.0), half.clone()]),
        gamma: ScalarFn::Sum(vec![ScalarFn::Constant(-1.0), half]),
        alpha0: 1.5 * an,
        delta0: 1.5 * an,
    };
    let s = ScheduleSpec::new(fam, an, 10.0).map_err(err)?;
    let val = s.validate(an, 10.0);
    let tr = integrate(&p, &s, &random_start(5, p.n(), p.m()), 10.0, &IntegratorConfig { sample_dt: 0.05, ..IntegratorConfig::default() }, &mut [])
        .map_err(err)?;
    let rep = bound_report(&energies(&p, &s, &tr, &saddle(&p)?).map_err(err)?);
    let gap = rep.check("gap").cloned().ok_or("no gap check")?;
    Ok((
        worst <= 1e-10 && val.passed() && gap.first_violation.is_none(),
        format!(
            "coefficient mismatch {worst:.2e} (limit 1e-10); recipe validation {}; gap worst ratio {:.3e} over {} samples",
            if val.passed() { "passed" } else { "FAILED" },
            gap.worst_ratio,
            gap.checked
        ),
    ))
}

fn symmetric_family() -> Outcome {
    let p = quadratic(20, 6, 0.1);
    let an = p.a.op_norm();
    let beta = 0.1;
    let c = ScalarFn::Constant(beta * an + 0.001);
    let s = ScheduleSpec::new(Family::Symmetric { beta: ScalarFn::Constant(beta), alpha: c.clone(), delta: c }, an, 10.0).map_err(err)?;
    if !s.validate(an, 10.0).passed() {
        return Ok((false, "schedule fails validation".into()));
    }
    let tr = integrate(&p, &s, &random_start(6, p.n(), p.m()), 10.0, &IntegratorConfig::default(), &mut []).map_err(err)?;
    let recs = energies(&p, &s, &tr, &saddle(&p)?).map_err(err)?;
    let rep = bound_report(&recs);
    let mono = rep.check("energy_monotone").is_some_and(|c| c.first_violation.is_none());
    let mut ok = mono;
    let mut parts = vec![format!("energy nonincreasing: {mono}")];
    for target in [1.0, 2.0, 5.0, 10.0] {
        let r = recs.iter().find(|r| (r.t - target).abs() < 1e-9).ok_or(format!("no sample at t={target}"))?;
        let (e, b) = (r.ergodic_gap.unwrap_or(f64::NAN), r.ergodic_bound.unwrap_or(f64::NAN));
        ok &= e <= b;
        parts.push(format!("t={target}: {e:.3e} <= {b:.3e}"));
    }
    let mut jensen: f64 = f64::NEG_INFINITY;
    for r in &recs[1..] {
        let (e, w) = (r.ergodic_gap.unwrap_or(f64::NAN), r.weighted_gap.unwrap_or(f64::NAN));
        jensen = jensen.max(e - w - 1e-10 * (1.0 + w.abs()));
    }
    ok &= jensen <= 0.0;
    parts.push(format!("Jensen worst excess {jensen:.2e}"));
    Ok((ok, parts.join("; ")))
}

fn oracle_agreement() -> Outcome {
    let lasso = gen_instance(&InstanceConfig::lasso(3)).map_err(err)?.problem;
    let an = lasso.a.op_norm();
    let fb = forward_backward(&lasso, 1.0 / (lasso.g.smoothness() * an * an), 2_000_000).map_err(err)?;
    let (s, t) = default_cp_steps(&lasso);
    let zeros = (Vector::zeros(lasso.n()), Vector::zeros(lasso.m()));
    let cp = chambolle_pock_from(&lasso, s, t, 5_000_000, zeros, 1e-14, |_, _, _| {}).map_err(err)?;
    let d1 = (&cp.x - &fb.x).amax().max((&cp.y - &fb.y).amax());

    let cfg = InstanceConfig { experiment: Experiment::LinConstr, dim: 20, seed: 8, ..InstanceConfig::default() };
    let lc = gen_instance(&cfg).map_err(err)?.problem;
    let kkt = kkt_solve(&lc).map_err(err)?;
    let (s, t) = default_cp_steps(&lc);
    let zeros = (Vector::zeros(lc.n()), Vector::zeros(lc.m()));
    let cp2 = chambolle_pock_from(&lc, s, t, 5_000_000, zeros, 1e-14, |_, _, _| {}).map_err(err)?;
    let d2 = (&cp2.x - &kkt.x).amax().max((&cp2.y - &kkt.y).amax());
    Ok((
        d1 <= 1e-6 && d2 <= 1e-6,
        format!(
            "LASSO chambolle_pock vs forward_backward max diff {d1:.2e} ({} / {} iterations); constrained chambolle_pock vs kkt_solve {d2:.2e} ({} iterations)",
            cp.iterations, fb.iterations, cp2.iterations
        ),
    ))
}

const ORDERING_CFG: &str = "
[instance]
experiment = quadratic_min
dim = 100
seed = 1

[run]
t_max = 10
anchor = kkt

[schedule plain]
family = plain

[schedule anti]
family = antisymmetric
beta = constant 0.1

[schedule sym]
family = symmetric
beta = constant 0.1
alpha_offset = 0.001
";

fn orderings() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut cfg = parse_config(ORDERING_CFG, dir.path()).map_err(err)?;
    cfg.output_dir = dir.path().join("out");
    let sum = run(&cfg).map_err(err)?;
    let mut finals = std::collections::HashMap::new();
    for o in &sum.outcomes {
        let o = o.as_ref().map_err(|e| e.to_string())?;
        let last = o.records.last().ok_or("empty run")?;
        let v = if o.label == "sym" { last.ergodic_gap.ok_or("no ergodic gap")? } else { last.gap };
        finals.insert(o.label.clone(), (v, last.t));
    }
    let (a, ta) = finals["anti"];
    let (p, _) = finals["plain"];
    let (s, _) = finals["sym"];
    Ok((
        a < p && a < s && (ta - 10.0).abs() < 1e-12 && sum.exit_code() == 0,
        format!("final gaps: antisymmetric {a:.3e}, plain {p:.3e}, symmetric ergodic {s:.3e}"),
    ))
}

fn backend_agreement() -> Outcome {
    let cfg = InstanceConfig { experiment: Experiment::QuadraticMin, dim: 10, seed: 3, zero_fraction: 0.0, a_scale: 0.3, ..InstanceConfig::default() };
    let p = gen_instance(&cfg).map_err(err)?.problem;
    let s = ScheduleSpec::new(anti(5.0, 20.0), p.a.op_norm(), 5.0).map_err(err)?;
    let z0 = random_start(3, p.n(), p.m());
    let rk = integrate(&p, &s, &z0, 5.0, &IntegratorConfig::default(), &mut []).map_err(err)?;
    let pe = integrate(&p, &s, &z0, 5.0, &IntegratorConfig { sample_dt: 0.1, ..IntegratorConfig::prox_euler(1e-3) }, &mut [])
        .map_err(err)?;
    let (a, b): (&PrimalDualPoint, &PrimalDualPoint) = (&rk.last().z, &pe.last().z);
    let rel = a.dist(b) / a.norm();
    Ok((rel <= 1e-4, format!("relative difference of final states {rel:.3e} (limit 1e-4)")))
}

const DETERMINISM_CFG: &str = "
[instance]
experiment = quadratic_min
dim = 30
seed = 9

[run]
t_max = 2

[schedule anti]
family = antisymmetric
beta = constant 0.5

[schedule sym]
family = symmetric
beta = constant 0.5
alpha_offset = 0.01

[schedule euler]
family = antisymmetric
beta = constant 1
alpha0 = 20
delta0 = 20
backend = prox_euler
h = 0.001
sample_dt = 0.01
";

fn csv_bodies(dir: &Path) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for l in ["anti", "sym", "euler"] {
        let text = std::fs::read_to_string(dir.join(format!("{l}.csv"))).map_err(err)?;
        let (_, body) = text.split_once('\n').ok_or("empty csv")?;
        out.push((l.to_string(), body.to_string()));
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut bodies = Vec::new();
    for k in 0..2 {
        let mut cfg = parse_config(DETERMINISM_CFG, dir.path()).map_err(err)?;
        cfg.output_dir = dir.path().join(format!("run{k}"));
        let sum = run(&cfg).map_err(err)?;
        if sum.exit_code() != 0 {
            return Ok((false, format!("run exited {}", sum.exit_code())));
        }
        bodies.push(csv_bodies(&cfg.output_dir)?);
    }
    let same = bodies[0] == bodies[1];
    let bytes: usize = bodies[0].iter().map(|(_, b)| b.len()).sum();
    Ok((same, format!("3 CSV bodies ({bytes} bytes) {}", if same { "identical" } else { "DIFFER" })))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "energy identity", limit_secs: 5.0, check: energy_identity_check },
        Criterion { id: 2, name: "triangular rates", limit_secs: 10.0, check: triangular_rates },
        Criterion { id: 3, name: "constant G invariant", limit_secs: 5.0, check: constant_g },
        Criterion { id: 4, name: "antisymmetric bounds", limit_secs: 10.0, check: antisymmetric_bounds },
        Criterion { id: 5, name: "general family", limit_secs: 10.0, check: general_family },
        Criterion { id: 6, name: "symmetric ergodic bound", limit_secs: 10.0, check: symmetric_family },
        Criterion { id: 7, name: "oracle agreement", limit_secs: 30.0, check: oracle_agreement },
        Criterion { id: 8, name: "gap orderings", limit_secs: 60.0, check: orderings },
        Criterion { id: 9, name: "backend agreement", limit_secs: 30.0, check: backend_agreement },
        Criterion { id: 10, name: "determinism", limit_secs: 10.0, check: determinism },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let res = (c.check)();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match res {
            Ok((ok, d)) => (ok, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = secs < c.limit_secs;
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {}: {detail}; {secs:.2}s (limit {}s{})",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.limit_secs,
            if in_time { "" } else { ", exceeded" }
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
