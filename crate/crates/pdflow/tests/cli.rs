use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BASE: &str = "[instance]
experiment = quadratic_min
dim = 10
seed = 2

[run]
t_max = 1
output_dir = out
";

fn pdflow(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pdflow"));
    c.args(args);
    match threads {
        Some(t) => c.env("PDFLOW_THREADS", t),
        None => c.env_remove("PDFLOW_THREADS"),
    };
    c.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn body(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    text.split_once('\n').unwrap().1.to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "c.cfg",
        &format!("{BASE}svg = true\n\n[schedule plain]\nfamily = plain\n\n[schedule anti]\nfamily = antisymmetric\nbeta = constant 1\nsample_dt = 0.1\n"),
    );
    let o = pdflow(&["run", s(&cfg)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for f in ["plain.csv", "anti.csv", "gap.dat", "gap.svg", "summary.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("anti: gap"));
    let anti = pdflow::output::read_csv(&out.join("anti.csv")).unwrap();
    assert_eq!(anti.rows.len(), 11);
    assert_eq!(anti.meta("family"), Some("antisymmetric"));
    assert_eq!(anti.meta("generator"), Some("ChaCha8Rng"));

    let o = pdflow(&["compare", s(&out.join("anti.csv")), s(&out.join("plain.csv"))], None);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("final ratio anti/plain"));
}

#[test]
fn out_flag_overrides_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "c.cfg", &format!("{BASE}\n[schedule p]\nfamily = plain\n"));
    let other = dir.path().join("elsewhere");
    let o = pdflow(&["run", s(&cfg), "--out", s(&other)], None);
    assert_eq!(code(&o), 0);
    assert!(other.join("p.csv").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "c.cfg",
        &format!("{BASE}\n[schedule a]\nfamily = antisymmetric\nbeta = constant 0.5\n\n[schedule b]\nfamily = plain\n\n[schedule c]\nfamily = symmetric\nbeta = constant 0.5\nalpha_offset = 0.1\n"),
    );
    let one = dir.path().join("one");
    let many = dir.path().join("many");
    assert_eq!(code(&pdflow(&["run", s(&cfg), "--out", s(&one)], Some("1"))), 0);
    assert_eq!(code(&pdflow(&["run", s(&cfg), "--out", s(&many)], Some("3"))), 0);
    for f in ["a.csv", "b.csv", "c.csv"] {
        assert_eq!(body(&one.join(f)), body(&many.join(f)), "{f}");
    }
    assert_eq!(std::fs::read(one.join("gap.dat")).unwrap(), std::fs::read(many.join("gap.dat")).unwrap());
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_cfg(dir.path(), "g.cfg", &format!("{BASE}\n[schedule s]\nfamily = symmetric\nbeta = constant 0.1\nalpha_offset = 0.01\n"));
    let o = pdflow(&["validate", s(&good)], None);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    let bad = write_cfg(
        dir.path(),
        "b.cfg",
        &format!("{BASE}\n[schedule ok]\nfamily = plain\n\n[schedule s]\nfamily = symmetric\nbeta = constant 0.1\nalpha = 0.01\ndelta = 0.01\n"),
    );
    let o = pdflow(&["validate", s(&bad)], None);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("c_gt_norm") && text.contains("FAIL first at t=0"));
    assert_eq!(code(&pdflow(&["validate", s(&bad), "--label", "ok"], None)), 0);
    assert_eq!(code(&pdflow(&["validate", s(&bad), "--label", "missing"], None)), 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "c.cfg", &format!("{BASE}\n[schedule p]\nfamily = plain\nflavour = mint\n"));
    let o = pdflow(&["run", s(&cfg)], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 12"));
    assert_eq!(code(&pdflow(&["run", s(&dir.path().join("absent.cfg"))], None)), 2);
    assert_eq!(code(&pdflow(&[], None)), 2);
    assert_eq!(code(&pdflow(&["frobnicate"], None)), 2);
    let empty = write_cfg(dir.path(), "e.cfg", BASE);
    assert_eq!(code(&pdflow(&["run", s(&empty)], None)), 2);
}

#[test]
fn bound_violation_exits_1() {
    // loose tolerances leave an error floor far above a fast-decaying bound
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "c.cfg",
        &format!("{BASE}\n[schedule loose]\nfamily = antisymmetric\nbeta = constant 0.1\nabs_tol = 1e-2\nrel_tol = 1e-2\n"),
    );
    let o = pdflow(&["run", s(&cfg)], None);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("VIOLATED"));
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("anchor.txt"), format!("{}\n{}\n", "1 ".repeat(10), "0 ".repeat(10))).unwrap();
    let cfg = write_cfg(
        dir.path(),
        "c.cfg",
        &BASE.replace("[run]\n", "[run]\nanchor = file:anchor.txt\n").to_string().replace("output_dir = out\n", "output_dir = out\n\n[schedule p]\nfamily = plain\n"),
    );
    let o = pdflow(&["run", s(&cfg)], None);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("residual"));
}

#[test]
fn wall_cap_truncates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "c.cfg",
        "[instance]\nexperiment = quadratic_min\ndim = 40\nseed = 1\n\n[run]\nt_max = 1000\nwall_cap = 0.2\n\n[schedule slow]\nfamily = plain\nabs_tol = 1e-14\nrel_tol = 1e-13\n",
    );
    let o = pdflow(&["run", s(&cfg)], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("truncated by wall-clock cap"));
    let csv = std::fs::read_to_string(dir.path().join("out/slow.csv")).unwrap();
    assert!(csv.trim_end().lines().last().unwrap().starts_with("# truncated at t="));
    let t = pdflow::output::read_csv(&dir.path().join("out/slow.csv")).unwrap();
    assert!(t.truncated);
    let last = t.column("t").unwrap().last().unwrap().unwrap();
    assert!(last < 1000.0);
    assert!(std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap().contains("TRUNCATED"));
}

#[test]
fn gen_dumps_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "c.cfg", BASE);
    let dump = dir.path().join("inst.txt");
    let o = pdflow(&["gen", s(&cfg), "--dump-instance", s(&dump)], None);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&dump).unwrap();
    assert!(text.contains("# seed=2"));
    assert!(text.lines().any(|l| l == "A 10 10"));
}

#[test]
fn compare_disjoint_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "t,gap\n0,1\n1,0.5\n").unwrap();
    std::fs::write(&b, "t,gap\n5,1\n6,0.5\n").unwrap();
    let o = pdflow(&["compare", s(&a), s(&b)], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("disjoint"));
}
