//! Side-by-side comparison of two trajectory CSVs on a common time grid.

use std::fmt::Write as _;

use crate::error::{CliError, CliResult};
use crate::output::CsvTable;

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<CompareRow>,
    /// `a / b` at the last common time.
    pub final_ratio: f64,
}

impl Comparison {
    /// Rows where `a ≤ b`.
    pub fn a_below_count(&self) -> usize {
        self.rows.iter().filter(|r| r.a <= r.b).count()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>24} {:>24} {:>24} smaller", "t", self.label_a, self.label_b);
        for r in &self.rows {
            let who = if r.a < r.b {
                self.label_a.as_str()
            } else if r.b < r.a {
                self.label_b.as_str()
            } else {
                "tie"
            };
            let _ = writeln!(s, "{:>24.16e} {:>24.16e} {:>24.16e} {who}", r.t, r.a, r.b);
        }
        let _ = writeln!(
            s,
            "{} smaller at {}/{} times; final ratio {}/{} = {:.6e}",
            self.label_a,
            self.a_below_count(),
            self.rows.len(),
            self.label_a,
            self.label_b,
            self.final_ratio
        );
        s
    }
}

fn series(t: &CsvTable, col: &str, name: &str) -> CliResult<Vec<(f64, f64)>> {
    let ts = t.column("t").ok_or_else(|| CliError::Compare(format!("{name}: no 't' column")))?;
    let vs = t.column(col).ok_or_else(|| CliError::Compare(format!("{name}: no '{col}' column")))?;
    let pts: Vec<(f64, f64)> = ts.into_iter().zip(vs).filter_map(|(t, v)| Some((t?, v?))).collect();
    if pts.is_empty() {
        return Err(CliError::Compare(format!("{name}: column '{col}' has no values")));
    }
    if pts.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(CliError::Compare(format!("{name}: times are not increasing")));
    }
    Ok(pts)
}

/// Linear interpolation inside `[pts[0].t, pts[last].t]`.
pub fn interpolate(pts: &[(f64, f64)], t: f64) -> Option<f64> {
    let (first, last) = (pts.first()?, pts.last()?);
    if t < first.0 || t > last.0 {
        return None;
    }
    let k = pts.partition_point(|p| p.0 < t);
    if k == 0 {
        return Some(first.1);
    }
    let (a, b) = (pts[k - 1], pts[k]);
    if b.0 == t {
        return Some(b.1);
    }
    let w = (t - a.0) / (b.0 - a.0);
    Some(a.1 + w * (b.1 - a.1))
}

/// Resamples column `col_b` of `b` onto the times of `a` where they overlap.
pub fn compare(a: &CsvTable, col_a: &str, b: &CsvTable, col_b: &str) -> CliResult<Comparison> {
    let label = |t: &CsvTable, fallback: &str, col: &str| {
        let base = t.meta("label").unwrap_or(fallback).to_string();
        if col == "gap" {
            base
        } else {
            format!("{base}:{col}")
        }
    };
    let (la, lb) = (label(a, "a", col_a), label(b, "b", col_b));
    let (label_a, label_b) = if la == lb { (format!("{la}#1"), format!("{lb}#2")) } else { (la, lb) };
    let pa = series(a, col_a, &label_a)?;
    let pb = series(b, col_b, &label_b)?;
    let lo = pa[0].0.max(pb[0].0);
    let hi = pa[pa.len() - 1].0.min(pb[pb.len() - 1].0);
    if lo > hi {
        return Err(CliError::Compare(format!("time ranges are disjoint ([{}, {}] vs [{}, {}])", pa[0].0, pa[pa.len() - 1].0, pb[0].0, pb[pb.len() - 1].0)));
    }
    let rows: Vec<CompareRow> = pa
        .iter()
        .filter(|p| p.0 >= lo && p.0 <= hi)
        .filter_map(|&(t, va)| interpolate(&pb, t).map(|vb| CompareRow { t, a: va, b: vb }))
        .collect();
    let last = rows.last().ok_or_else(|| CliError::Compare("no common sample times".into()))?;
    let final_ratio = if last.a == last.b { 1.0 } else { last.a / last.b };
    Ok(Comparison { label_a, label_b, rows, final_ratio })
}
