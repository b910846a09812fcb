//! Runs every labeled schedule of a config on one instance and writes the artifacts.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use pdflow_core::diagnostics::{bound_report, energies, Anchor, DiagnosticsRecord, DominationReport};
use pdflow_core::flow::{integrate, FlowState, Observer, Trajectory};
use pdflow_core::problem::{PrimalDualPoint, ProblemSpec};
use pdflow_core::schedules::{Family, ScheduleSpec, ValidationReport};
use pdflow_core::solvers::{forward_backward, kkt_solve};
use pdflow_core::Vector;

use crate::config::{AnchorPolicy, RunConfig, ScheduleDecl, StartPolicy};
use crate::error::{CliError, CliResult};
use crate::instance::{gen_instance, random_anchors, random_start, Instance};
use crate::output;

pub const FB_ITERS: usize = 2_000_000;

/// Saddle anchor according to the policy; fails with the solver residual when it is not a saddle.
pub fn resolve_anchor(p: &ProblemSpec, policy: &AnchorPolicy) -> CliResult<Anchor> {
    let (u, v, what) = match policy {
        AnchorPolicy::Kkt => {
            let r = kkt_solve(p)?;
            (r.x, r.y, "kkt_solve")
        }
        AnchorPolicy::ForwardBackward => {
            let l = p.g.smoothness() * p.a.op_norm().powi(2);
            let step = if l > 0.0 { 1.0 / l } else { 1.0 };
            let r = forward_backward(p, step, FB_ITERS)?;
            (r.x, r.y, "forward_backward")
        }
        AnchorPolicy::File(path) => {
            let (u, v) = read_anchor(path)?;
            (u, v, "anchor file")
        }
    };
    let res = p.saddle_residual(&u, &v)?;
    Anchor::saddle(p, u, v).map_err(|_| CliError::Solver(format!("{what} did not reach a saddle point (residual {res:e})")))
}

/// Two lines of whitespace-separated numbers: `u` then `v`.
pub fn read_anchor(path: &Path) -> CliResult<(Vector, Vector)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let mut vec_line = |name: &str| -> CliResult<Vector> {
        let l = lines.next().ok_or_else(|| CliError::Config(format!("{}: missing {name} line", path.display())))?;
        let v = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| CliError::Config(format!("{}: bad number '{t}'", path.display()))))
            .collect::<CliResult<Vec<f64>>>()?;
        Ok(Vector::from_vec(v))
    };
    let u = vec_line("u")?;
    let v = vec_line("v")?;
    Ok((u, v))
}

pub fn start_point(cfg: &RunConfig, p: &ProblemSpec) -> PrimalDualPoint {
    match cfg.start {
        StartPolicy::Random => random_start(cfg.instance.seed, p.n(), p.m()),
        StartPolicy::Zero => PrimalDualPoint::zeros(p.n(), p.m()),
    }
}

/// One labeled trajectory with its diagnostics.
#[derive(Clone, Debug)]
pub struct LabelOutcome {
    pub label: String,
    pub family: String,
    pub records: Vec<DiagnosticsRecord>,
    pub report: DominationReport,
    /// Reports against the random probe anchors.
    pub probe_reports: Vec<DominationReport>,
    pub truncated_at: Option<f64>,
    pub steps: usize,
    pub wall_secs: f64,
}

/// Stops an integration once its wall-clock budget is spent.
pub struct WallClock {
    pub start: Instant,
    pub cap: Duration,
}

impl Observer for WallClock {
    fn observe(&mut self, _: &FlowState) -> bool {
        self.start.elapsed() < self.cap
    }

    fn step(&mut self, _: f64) -> bool {
        self.start.elapsed() < self.cap
    }
}

/// Integrates one schedule and computes its diagnostics.
pub fn run_label(
    inst: &Instance,
    decl: &ScheduleDecl,
    anchor: &Anchor,
    probes: &[Anchor],
    z0: &PrimalDualPoint,
    cfg: &RunConfig,
) -> CliResult<LabelOutcome> {
    let p = &inst.problem;
    let an = p.a.op_norm();
    let s = ScheduleSpec::new(decl.family.resolve(an), an, cfg.t_max)?;
    let start = Instant::now();
    let mut clock = WallClock { start, cap: cfg.wall_cap };
    let mut traj: Trajectory = integrate(p, &s, z0, cfg.t_max, &decl.integrator, &mut [&mut clock])?;
    traj.meta.problem_id = inst.config.experiment.name().to_string();
    traj.meta.seed = Some(inst.config.seed);
    let records = energies(p, &s, &traj, anchor)?;
    let report = bound_report(&records);
    // only the antisymmetric bounds hold for arbitrary probe pairs
    let probe_set: &[Anchor] = if matches!(s.family(), Family::Antisymmetric { .. }) { probes } else { &[] };
    let probe_reports = probe_set
        .iter()
        .map(|a| energies(p, &s, &traj, a).map(|r| bound_report(&r)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LabelOutcome {
        label: decl.label.clone(),
        family: s.family().name().to_string(),
        records,
        report,
        probe_reports,
        truncated_at: traj.truncated.then(|| traj.last().t),
        steps: traj.steps,
        wall_secs: start.elapsed().as_secs_f64(),
    })
}

/// Worker count: `PDFLOW_THREADS` if set, otherwise the available parallelism, never more than `jobs`.
pub fn worker_count(jobs: usize) -> usize {
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var("PDFLOW_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    cap.unwrap_or(avail).min(jobs).max(1)
}

/// Result of a whole run.
#[derive(Debug)]
pub struct RunSummary {
    pub outcomes: Vec<Result<LabelOutcome, CliError>>,
    pub labels: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    /// 0 when everything ran and all bounds held, 1 on a bound violation, otherwise the first failure's code.
    pub fn exit_code(&self) -> i32 {
        if let Some(Err(e)) = self.outcomes.iter().find(|o| o.is_err()) {
            return e.exit_code();
        }
        let violated = self
            .outcomes
            .iter()
            .flatten()
            .any(|o| !o.report.passed() || o.probe_reports.iter().any(|r| !r.passed()));
        i32::from(violated)
    }
}

fn label_metadata(inst: &Instance, decl: &ScheduleDecl, cfg: &RunConfig, a_norm: f64) -> Vec<(String, String)> {
    let mut m = inst.metadata.clone();
    m.push(("label".into(), decl.label.clone()));
    m.push(("family".into(), decl.family.name().into()));
    m.push(("schedule".into(), format!("{:?}", decl.family.resolve(a_norm))));
    m.push(("integrator".into(), format!("{:?}", decl.integrator)));
    m.push(("t_max".into(), cfg.t_max.to_string()));
    m.push(("anchor".into(), format!("{:?}", cfg.anchor)));
    m.push(("a_norm".into(), format!("{a_norm:.16e}")));
    m
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

/// Runs all labels on a worker pool; a single collector writes one CSV per label as results arrive,
/// then the overlay plot data and the summary.
pub fn run(cfg: &RunConfig) -> CliResult<RunSummary> {
    if cfg.schedules.is_empty() {
        return Err(CliError::Config("config declares no [schedule <label>] sections".into()));
    }
    let inst = gen_instance(&cfg.instance)?;
    let p = &inst.problem;
    let anchor = resolve_anchor(p, &cfg.anchor)?;
    let probes = random_anchors(cfg.instance.seed, p.n(), p.m(), cfg.probes)
        .into_iter()
        .map(|z| Anchor::new(p, z.x, z.y))
        .collect::<Result<Vec<_>, _>>()?;
    let z0 = start_point(cfg, p);
    let a_norm = p.a.op_norm();
    std::fs::create_dir_all(&cfg.output_dir)?;

    let jobs = cfg.schedules.len();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, CliResult<LabelOutcome>)>();
    let mut outcomes: Vec<Option<CliResult<LabelOutcome>>> = (0..jobs).map(|_| None).collect();
    let mut files = Vec::new();
    let mut write_err = None;
    std::thread::scope(|sc| {
        for _ in 0..worker_count(jobs) {
            let tx = tx.clone();
            let (next, inst, anchor, probes, z0) = (&next, &inst, &anchor, &probes, &z0);
            sc.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= jobs {
                    break;
                }
                let r = run_label(inst, &cfg.schedules[k], anchor, probes, z0, cfg);
                if tx.send((k, r)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (k, r) in rx {
            if let Ok(o) = &r {
                let path = cfg.output_dir.join(format!("{}.csv", file_stem(&o.label)));
                let meta = label_metadata(&inst, &cfg.schedules[k], cfg, a_norm);
                let res = std::fs::File::create(&path)
                    .map_err(CliError::from)
                    .and_then(|f| output::write_csv(f, &meta, &o.records, o.truncated_at));
                match res {
                    Ok(()) => files.push(path),
                    Err(e) => write_err = Some(e),
                }
            }
            outcomes[k] = Some(r);
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    let outcomes: Vec<CliResult<LabelOutcome>> = outcomes.into_iter().map(|o| o.expect("every job reports")).collect();

    let series: Vec<(String, Vec<(f64, f64)>)> = outcomes
        .iter()
        .flatten()
        .map(|o| (o.label.clone(), o.records.iter().map(|r| (r.t, r.gap)).collect()))
        .collect();
    let dat = cfg.output_dir.join("gap.dat");
    std::fs::write(&dat, output::plot_data(&series))?;
    files.push(dat);
    if cfg.svg {
        let svg = cfg.output_dir.join("gap.svg");
        std::fs::write(&svg, output::plot_svg(&series))?;
        files.push(svg);
    }
    let mut summary = String::new();
    for (decl, o) in cfg.schedules.iter().zip(&outcomes) {
        match o {
            Ok(o) => {
                summary.push_str(&format!(
                    "{}: family={} steps={} wall={:.3}s{}\n",
                    o.label,
                    o.family,
                    o.steps,
                    o.wall_secs,
                    o.truncated_at.map(|t| format!(" TRUNCATED at t={t:.6e}")).unwrap_or_default()
                ));
                summary.push_str(&output::report_lines(&o.label, &o.report));
                for (k, r) in o.probe_reports.iter().enumerate() {
                    summary.push_str(&output::report_lines(&format!("{} probe {k}", o.label), r));
                }
            }
            Err(e) => summary.push_str(&format!("{}: FAILED: {e}\n", decl.label)),
        }
    }
    let sum_path = cfg.output_dir.join("summary.txt");
    std::fs::write(&sum_path, &summary)?;
    files.push(sum_path);
    Ok(RunSummary { outcomes, labels: cfg.schedules.iter().map(|s| s.label.clone()).collect(), files })
}

/// Validation report of every schedule (or only `label`) against the instance's `‖A‖` and `t_max`.
pub fn validate(cfg: &RunConfig, label: Option<&str>) -> CliResult<Vec<(String, ValidationReport)>> {
    let inst = gen_instance(&cfg.instance)?;
    let an = inst.problem.a.op_norm();
    let decls: Vec<&ScheduleDecl> = match label {
        Some(l) => vec![cfg.schedule(l).ok_or_else(|| CliError::Config(format!("no schedule labeled '{l}'")))?],
        None => cfg.schedules.iter().collect(),
    };
    if decls.is_empty() {
        return Err(CliError::Config("config declares no [schedule <label>] sections".into()));
    }
    decls
        .into_iter()
        .map(|d| {
            let s = ScheduleSpec::new(d.family.resolve(an), an, cfg.t_max)?;
            Ok((d.label.clone(), s.validate(an, cfg.t_max)))
        })
        .collect()
}
