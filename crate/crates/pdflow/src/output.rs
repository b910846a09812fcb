//! CSV trajectories, gnuplot data and a small SVG plot.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use pdflow_core::diagnostics::{DiagnosticsRecord, DominationReport, CSV_COLUMNS};
use pdflow_core::schedules::ValidationReport;

use crate::error::{CliError, CliResult};

pub fn format_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => String::new(),
    }
}

/// Marker written after the last row of a run stopped by the wall-clock cap.
pub const TRUNCATED_MARKER: &str = "# truncated";

/// Writes the timestamp line, `# key=value` metadata, the header and one row per record.
pub fn write_csv<W: Write>(
    out: W,
    metadata: &[(String, String)],
    records: &[DiagnosticsRecord],
    truncated_at: Option<f64>,
) -> CliResult<()> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "# created unix={stamp}")?;
    for (k, v) in metadata {
        writeln!(out, "# {k}={v}")?;
    }
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
        w.write_record(CSV_COLUMNS)?;
        for r in records {
            w.write_record(r.csv_fields().iter().map(|v| format_value(*v)))?;
        }
        w.flush()?;
    }
    if let Some(t) = truncated_at {
        writeln!(out, "{TRUNCATED_MARKER} at t={t:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

/// A parsed trajectory CSV: metadata comments and named numeric columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    /// Row-major; empty fields are `None`.
    pub rows: Vec<Vec<Option<f64>>>,
    pub truncated: bool,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn read_csv(path: &Path) -> CliResult<CsvTable> {
    let text = std::fs::read_to_string(path)?;
    let mut t = CsvTable::default();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            let c = c.trim();
            if c.starts_with("truncated") {
                t.truncated = true;
            } else if let Some((k, v)) = c.split_once('=') {
                t.metadata.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    t.columns = rd.headers()?.iter().map(str::to_string).collect();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>().map(Some).map_err(|_| {
                        CliError::Compare(format!("{}: row {}: bad number '{f}'", path.display(), i + 1))
                    })
                }
            })
            .collect::<CliResult<Vec<_>>>()?;
        t.rows.push(row);
    }
    Ok(t)
}

/// gnuplot data: one block per label (separated by two blank lines), columns `t gap`.
pub fn plot_data(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut s = String::from("# gap vs time, one index per label; plot with: set logscale y; plot for [i=0:*] 'gap.dat' index i with lines\n");
    for (k, (label, pts)) in series.iter().enumerate() {
        if k > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# label={label}");
        for (t, g) in pts {
            let _ = writeln!(s, "{t:.16e} {g:.16e}");
        }
    }
    s
}

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Self-contained SVG of gap against time with a logarithmic gap axis.
pub fn plot_svg(series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, ml, mr, mt, mb) = (720.0, 440.0, 70.0, 160.0, 20.0, 45.0);
    let pos: Vec<f64> = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).filter(|g| *g > 0.0 && g.is_finite()).collect();
    let tmax = series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).fold(0.0f64, f64::max).max(1e-12);
    let lo = pos.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = pos.iter().cloned().fold(0.0f64, f64::max);
    let (ylo, yhi) = if pos.is_empty() { (-1.0, 0.0) } else { (lo.log10().floor(), hi.log10().ceil().max(lo.log10().floor() + 1.0)) };
    let px = |t: f64| ml + (w - ml - mr) * t / tmax;
    let py = |g: f64| {
        let l = if g > 0.0 { g.log10().max(ylo) } else { ylo };
        mt + (h - mt - mb) * (yhi - l) / (yhi - ylo)
    };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - ml - mr, h - mt - mb);
    let mut e = ylo as i64;
    while e as f64 <= yhi {
        let y = py(10f64.powi(e as i32));
        let _ = writeln!(s, r##"<line x1="{ml}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, w - mr);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#, ml - 6.0, y + 4.0);
        e += 1;
    }
    for k in 0..=4 {
        let t = tmax * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{t:.3}</text>"#, px(t), h - mb + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">t</text>"#, ml + (w - ml - mr) / 2.0, h - 8.0);
    for (k, (label, pts)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let path: Vec<String> = pts.iter().filter(|p| p.1.is_finite()).map(|&(t, g)| format!("{:.2},{:.2}", px(t), py(g))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let ly = mt + 16.0 * (k as f64 + 1.0);
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/>"#, w - mr + 10.0, w - mr + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - mr + 35.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Human-readable domination summary, one line per bound check.
pub fn report_lines(label: &str, report: &DominationReport) -> String {
    let mut s = String::new();
    if report.checks.is_empty() {
        let _ = writeln!(s, "{label}: no bound curves for this family");
    }
    for c in &report.checks {
        let status = match c.first_violation {
            None => "ok".to_string(),
            Some(t) => format!("VIOLATED first at t={t:.6e}"),
        };
        let _ = writeln!(
            s,
            "{label}: {:<16} samples={:<6} worst_ratio={:.3e} worst_margin={:.3e} {status}",
            c.name, c.checked, c.worst_ratio, c.worst_margin
        );
    }
    s
}

pub fn validation_lines(label: &str, r: &ValidationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{label}: {} on [0, {}] with {} grid points: {}",
        r.family,
        r.horizon,
        r.grid_points,
        if r.passed() { "PASS" } else { "FAIL" }
    );
    for c in &r.conditions {
        let status = match (c.passed, c.informational) {
            (true, _) => "ok".to_string(),
            (false, true) => "not met (informational)".to_string(),
            (false, false) => match c.first_failure {
                Some(t) => format!("FAIL first at t={t:.6e}"),
                None => "FAIL".to_string(),
            },
        };
        let note = if c.note.is_empty() { String::new() } else { format!(" ({})", c.note) };
        let _ = writeln!(s, "  {:<20} worst_margin={:.6e} {status}{note}", c.name, c.worst_margin);
    }
    s
}
