//! Flat `key = value` experiment configs with `[section]` headers.
//!
//! ```text
//! [instance]
//! experiment = quadratic_min
//! dim = 100
//! seed = 1
//!
//! [run]
//! t_max = 10
//! anchor = kkt
//!
//! [schedule anti]
//! family = antisymmetric
//! beta = constant 0.1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use pdflow_core::flow::{Backend, IntegratorConfig};
use pdflow_core::schedules::{Family, ScalarFn};

use crate::error::{CliError, CliResult};
use crate::instance::{Experiment, InstanceConfig};

pub const DEFAULT_WALL_CAP: Duration = Duration::from_secs(30 * 60);

#[derive(Clone, Debug, PartialEq)]
pub enum AnchorPolicy {
    Kkt,
    ForwardBackward,
    /// Whitespace-separated file: first line `u`, second line `v`.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum StartPolicy {
    /// `N(0, I)` from the instance seed.
    Random,
    Zero,
}

/// Family constants as written; `Symmetric` may ask for `α = β‖A‖ + offset`.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyDecl {
    Ready(Family),
    SymmetricOffset { beta: ScalarFn, alpha_offset: f64, delta_offset: f64 },
}

impl FamilyDecl {
    pub fn resolve(&self, a_norm: f64) -> Family {
        match self {
            FamilyDecl::Ready(f) => f.clone(),
            FamilyDecl::SymmetricOffset { beta, alpha_offset, delta_offset } => {
                let shifted = |off: f64| {
                    ScalarFn::Sum(vec![ScalarFn::Scaled(a_norm, Box::new(beta.clone())), ScalarFn::Constant(off)])
                };
                Family::Symmetric { beta: beta.clone(), alpha: shifted(*alpha_offset), delta: shifted(*delta_offset) }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FamilyDecl::Ready(f) => f.name(),
            FamilyDecl::SymmetricOffset { .. } => "symmetric",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleDecl {
    pub label: String,
    pub family: FamilyDecl,
    pub integrator: IntegratorConfig,
    /// Line of the section header.
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub instance: InstanceConfig,
    pub schedules: Vec<ScheduleDecl>,
    pub t_max: f64,
    pub wall_cap: Duration,
    pub anchor: AnchorPolicy,
    pub start: StartPolicy,
    pub output_dir: PathBuf,
    pub svg: bool,
    /// Number of probe anchors for the energy diagnostics in addition to the saddle.
    pub probes: usize,
}

impl RunConfig {
    pub fn schedule(&self, label: &str) -> Option<&ScheduleDecl> {
        self.schedules.iter().find(|s| s.label == label)
    }
}

/// Parses a scalar function such as `constant 0.1`, `exponential 1 2`, `table 0:1, 1:2`,
/// or a `+`-separated sum of those.
pub fn parse_scalar_fn(s: &str) -> Result<ScalarFn, String> {
    let parts: Vec<&str> = s.split('+').map(str::trim).collect();
    if parts.len() > 1 {
        return parts.iter().map(|p| parse_scalar_fn(p)).collect::<Result<Vec<_>, _>>().map(ScalarFn::Sum);
    }
    let s = s.trim();
    let (kind, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
    let nums = || -> Result<Vec<f64>, String> {
        rest.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| format!("bad number '{t}'"))).collect()
    };
    let want = |v: Vec<f64>, k: usize| -> Result<Vec<f64>, String> {
        if v.len() == k {
            Ok(v)
        } else {
            Err(format!("'{kind}' takes {k} number(s), got {}", v.len()))
        }
    };
    match kind {
        "constant" => Ok(ScalarFn::Constant(want(nums()?, 1)?[0])),
        "affine" => {
            let v = want(nums()?, 2)?;
            Ok(ScalarFn::Affine { a: v[0], b: v[1] })
        }
        "exponential" => {
            let v = want(nums()?, 2)?;
            Ok(ScalarFn::Exponential { c: v[0], kappa: v[1] })
        }
        "rational" => Ok(ScalarFn::RationalDecay { c: want(nums()?, 1)?[0] }),
        "table" => {
            let mut grid = Vec::new();
            let mut values = Vec::new();
            for pair in rest.split(',') {
                let (t, v) = pair.trim().split_once(':').ok_or_else(|| format!("table entry '{}' is not t:value", pair.trim()))?;
                grid.push(t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}'"))?);
                values.push(v.trim().parse::<f64>().map_err(|_| format!("bad number '{v}'"))?);
            }
            ScalarFn::table(grid, values).map_err(|e| e.to_string())
        }
        "" => Err("empty function".into()),
        other => match other.parse::<f64>() {
            Ok(c) if rest.is_empty() => Ok(ScalarFn::Constant(c)),
            _ => Err(format!("unknown function kind '{other}'")),
        },
    }
}

struct Section {
    name: String,
    arg: Option<String>,
    line: usize,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> CliResult<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Parse { line, msg: format!("{key}: cannot parse '{v}'") }),
        }
    }

    fn func(&mut self, key: &str) -> CliResult<Option<ScalarFn>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => parse_scalar_fn(&v).map(Some).map_err(|msg| CliError::Parse { line, msg: format!("{key}: {msg}") }),
        }
    }

    fn need_func(&mut self, key: &str) -> CliResult<ScalarFn> {
        self.func(key)?.ok_or_else(|| self.missing(key))
    }

    fn missing(&self, key: &str) -> CliError {
        CliError::Parse { line: self.line, msg: format!("[{}] is missing '{key}'", self.name) }
    }

    fn finish(self) -> CliResult<()> {
        match self.entries.into_iter().min_by_key(|(_, (_, l))| *l) {
            Some((k, (_, line))) => Err(CliError::Parse { line, msg: format!("unknown key '{k}' in [{}]", self.name) }),
            None => Ok(()),
        }
    }
}

fn sections(text: &str) -> CliResult<Vec<Section>> {
    let mut out: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(h) = content.strip_prefix('[') {
            let h = h.strip_suffix(']').ok_or(CliError::Parse { line, msg: "unterminated section header".into() })?;
            let mut it = h.split_whitespace();
            let name = it.next().ok_or(CliError::Parse { line, msg: "empty section header".into() })?.to_string();
            let arg: Vec<&str> = it.collect();
            let arg = if arg.is_empty() { None } else { Some(arg.join(" ")) };
            out.push(Section { name, arg, line, entries: BTreeMap::new() });
            continue;
        }
        let (k, v) = content.split_once('=').ok_or(CliError::Parse { line, msg: format!("expected key = value, got '{content}'") })?;
        let sec = out.last_mut().ok_or(CliError::Parse { line, msg: "key outside of any section".into() })?;
        let k = k.trim().to_string();
        if k.is_empty() {
            return Err(CliError::Parse { line, msg: "empty key".into() });
        }
        if sec.entries.insert(k.clone(), (v.trim().to_string(), line)).is_some() {
            return Err(CliError::Parse { line, msg: format!("duplicate key '{k}'") });
        }
    }
    Ok(out)
}

fn instance_section(mut s: Section) -> CliResult<InstanceConfig> {
    let (exp, line) = s.take("experiment").ok_or_else(|| s.missing("experiment"))?;
    let experiment = Experiment::parse(&exp).ok_or(CliError::Parse { line, msg: format!("unknown experiment '{exp}'") })?;
    let mut cfg = if experiment == Experiment::Lasso { InstanceConfig::lasso(0) } else { InstanceConfig { experiment, ..Default::default() } };
    if let Some(v) = s.num("dim")? {
        cfg.dim = v;
    }
    if let Some(v) = s.num("rows")? {
        cfg.rows = Some(v);
    }
    if let Some(v) = s.num("seed")? {
        cfg.seed = v;
    }
    if let Some(v) = s.num("zero_fraction")? {
        cfg.zero_fraction = v;
    }
    if let Some(v) = s.num("a_scale")? {
        cfg.a_scale = v;
    }
    if let Some(v) = s.num("lambda")? {
        cfg.lambda = v;
    }
    if let Some(v) = s.num("noise_variance")? {
        cfg.noise_variance = v;
    }
    if let Some(v) = s.num("sparsity")? {
        cfg.sparsity = v;
    }
    let line = s.line;
    s.finish()?;
    cfg.check().map_err(|e| CliError::Parse { line, msg: e.to_string() })?;
    Ok(cfg)
}

fn schedule_section(mut s: Section) -> CliResult<ScheduleDecl> {
    let label = s.arg.clone().ok_or(CliError::Parse { line: s.line, msg: "schedule section needs a label: [schedule <label>]".into() })?;
    let (fam, fline) = s.take("family").ok_or_else(|| s.missing("family"))?;
    let num_or = |s: &mut Section, k: &str, d: f64| -> CliResult<f64> { Ok(s.num(k)?.unwrap_or(d)) };
    let family = match fam.as_str() {
        "plain" => FamilyDecl::Ready(Family::Plain),
        "triangular" => {
            let zeta = s.func("zeta")?.unwrap_or(ScalarFn::Constant(1.0));
            let alpha0 = num_or(&mut s, "alpha0", 1.0)?;
            let delta0 = num_or(&mut s, "delta0", 1.0)?;
            let nu0 = num_or(&mut s, "nu0", 0.0)?;
            FamilyDecl::Ready(Family::Triangular { zeta, alpha0, delta0, nu0 })
        }
        "antisymmetric" => {
            let beta = s.need_func("beta")?;
            let b0 = beta.eval(0.0);
            let alpha0 = num_or(&mut s, "alpha0", b0)?;
            let delta0 = num_or(&mut s, "delta0", b0)?;
            FamilyDecl::Ready(Family::Antisymmetric { beta, alpha0, delta0 })
        }
        "general" => {
            let beta = s.need_func("beta")?;
            let gamma = s.need_func("gamma")?;
            let alpha0 = num_or(&mut s, "alpha0", 1.0)?;
            let delta0 = num_or(&mut s, "delta0", 1.0)?;
            FamilyDecl::Ready(Family::General { beta, gamma, alpha0, delta0 })
        }
        "symmetric" => {
            let beta = s.need_func("beta")?;
            let alpha = s.func("alpha")?;
            let delta = s.func("delta")?;
            let ao: Option<f64> = s.num("alpha_offset")?;
            let dofs: Option<f64> = s.num("delta_offset")?;
            match (alpha, delta, ao) {
                (Some(alpha), Some(delta), None) if dofs.is_none() => FamilyDecl::Ready(Family::Symmetric { beta, alpha, delta }),
                (None, None, Some(a)) => FamilyDecl::SymmetricOffset { beta, alpha_offset: a, delta_offset: dofs.unwrap_or(a) },
                _ => {
                    return Err(CliError::Parse {
                        line: s.line,
                        msg: "symmetric needs either alpha and delta, or alpha_offset (and optional delta_offset)".into(),
                    })
                }
            }
        }
        other => return Err(CliError::Parse { line: fline, msg: format!("unknown family '{other}'") }),
    };
    let mut ic = IntegratorConfig::default();
    if let Some((b, line)) = s.take("backend") {
        ic.backend = match b.as_str() {
            "rk" | "resolved_rk" => Backend::ResolvedRk,
            "prox_euler" => Backend::ProxEuler,
            other => return Err(CliError::Parse { line, msg: format!("unknown backend '{other}'") }),
        };
    }
    if let Some(v) = s.num("abs_tol")? {
        ic.abs_tol = v;
    }
    if let Some(v) = s.num("rel_tol")? {
        ic.rel_tol = v;
    }
    if let Some(v) = s.num("h")? {
        ic.h = v;
    }
    if let Some(v) = s.num("inner_tol")? {
        ic.inner_tol = v;
    }
    if let Some(v) = s.num("inner_max_iter")? {
        ic.inner_max_iter = v;
    }
    if let Some(v) = s.num("smoothing")? {
        ic.smoothing = v;
    }
    if let Some(v) = s.num("sample_dt")? {
        ic.sample_dt = v;
    }
    if let Some(v) = s.num("max_steps")? {
        ic.max_steps = v;
    }
    let line = s.line;
    s.finish()?;
    ic.check().map_err(|e| CliError::Parse { line, msg: e.to_string() })?;
    Ok(ScheduleDecl { label, family, integrator: ic, line })
}

pub fn parse_config(text: &str, base_dir: &Path) -> CliResult<RunConfig> {
    let mut instance = None;
    let mut schedules: Vec<ScheduleDecl> = Vec::new();
    let mut run = None;
    for sec in sections(text)? {
        let line = sec.line;
        match sec.name.as_str() {
            "instance" if instance.is_none() => instance = Some(instance_section(sec)?),
            "run" if run.is_none() => run = Some(sec),
            "schedule" => {
                let d = schedule_section(sec)?;
                if schedules.iter().any(|s| s.label == d.label) {
                    return Err(CliError::Parse { line, msg: format!("duplicate schedule label '{}'", d.label) });
                }
                schedules.push(d);
            }
            "instance" | "run" => return Err(CliError::Parse { line, msg: format!("duplicate [{}] section", sec.name) }),
            other => return Err(CliError::Parse { line, msg: format!("unknown section [{other}]") }),
        }
    }
    let instance = instance.ok_or(CliError::Config("missing [instance] section".into()))?;
    let mut cfg = RunConfig {
        instance,
        schedules,
        t_max: 10.0,
        wall_cap: DEFAULT_WALL_CAP,
        anchor: AnchorPolicy::Kkt,
        start: StartPolicy::Random,
        output_dir: base_dir.join("out"),
        svg: false,
        probes: 0,
    };
    if let Some(mut s) = run {
        if let Some(v) = s.num::<f64>("t_max")? {
            cfg.t_max = v;
        }
        if let Some(v) = s.num::<f64>("wall_cap")? {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Parse { line: s.line, msg: "wall_cap must be positive (seconds)".into() });
            }
            cfg.wall_cap = Duration::from_secs_f64(v);
        }
        if let Some((a, line)) = s.take("anchor") {
            cfg.anchor = match a.as_str() {
                "kkt" => AnchorPolicy::Kkt,
                "forward_backward" => AnchorPolicy::ForwardBackward,
                other => match other.strip_prefix("file:") {
                    Some(p) => AnchorPolicy::File(base_dir.join(p.trim())),
                    None => return Err(CliError::Parse { line, msg: format!("unknown anchor policy '{other}'") }),
                },
            };
        }
        if let Some((v, line)) = s.take("start") {
            cfg.start = match v.as_str() {
                "random" => StartPolicy::Random,
                "zero" => StartPolicy::Zero,
                other => return Err(CliError::Parse { line, msg: format!("unknown start '{other}'") }),
            };
        }
        if let Some((v, _)) = s.take("output_dir") {
            cfg.output_dir = base_dir.join(v);
        }
        if let Some(v) = s.num::<bool>("svg")? {
            cfg.svg = v;
        }
        if let Some(v) = s.num::<usize>("probes")? {
            cfg.probes = v;
        }
        s.finish()?;
    }
    if !(cfg.t_max > 0.0 && cfg.t_max.is_finite()) {
        return Err(CliError::Config("t_max must be positive".into()));
    }
    Ok(cfg)
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}
