//! CSV tables, text summaries and gnuplot data.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! an emitted file gives back the exact in-memory values.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{FsiError, Result};

use super::experiments::{FixedVsAdaptiveRow, MatrixRow, StageCurve};

pub const MATRIX_HEADER: [&str; 6] = ["method", "tol", "total_iterations", "steps", "rejections", "end_error"];
pub const DNF: &str = "DNF";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sci(x: f64) -> String {
    format!("{x:e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_matrix_csv<W: Write>(rows: &[MatrixRow], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(MATRIX_HEADER)?;
    for r in rows {
        let total = r.total_iterations.map(|t| t.to_string()).unwrap_or_else(|| DNF.to_string());
        out.write_record([
            r.method.clone(),
            sci(r.tol),
            total,
            opt(r.steps),
            opt(r.rejections),
            r.end_error.map(sci).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn matrix_csv_string(rows: &[MatrixRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_matrix_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| FsiError::Io(e.to_string()))
}

pub fn parse_matrix_csv(text: &str) -> Result<Vec<MatrixRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != MATRIX_HEADER {
        return Err(FsiError::Parse { line: 1, msg: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |m: &str| FsiError::Parse { line, msg: m.to_string() };
        let num = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad("bad integer"))
            }
        };
        let tol: f64 = rec[1].parse().map_err(|_| bad("bad tolerance"))?;
        let total = if &rec[2] == DNF { None } else { num(&rec[2])? };
        let end_error =
            if rec[5].is_empty() { None } else { Some(rec[5].parse::<f64>().map_err(|_| bad("bad error"))?) };
        rows.push(MatrixRow {
            method: rec[0].to_string(),
            tol,
            total_iterations: total,
            steps: num(&rec[3])?,
            rejections: num(&rec[4])?,
            end_error,
        });
    }
    Ok(rows)
}

/// Text table of total iterations, one line per tolerance and one column
/// per method.
pub fn matrix_summary(rows: &[MatrixRow]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    let mut tols: Vec<f64> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
        if !tols.contains(&r.tol) {
            tols.push(r.tol);
        }
    }
    let width = methods.iter().map(|m| m.len()).max().unwrap_or(0).max(8);
    let mut s = format!("{:<8}", "TOL");
    for m in &methods {
        let _ = write!(s, " {m:>width$}");
    }
    s.push('\n');
    for t in tols {
        let _ = write!(s, "{:<8}", sci(t));
        for m in &methods {
            let cell = rows
                .iter()
                .find(|r| r.tol == t && r.method == *m)
                .map(|r| r.total_iterations.map(|v| v.to_string()).unwrap_or_else(|| DNF.into()))
                .unwrap_or_default();
            let _ = write!(s, " {cell:>width$}");
        }
        s.push('\n');
    }
    s
}

pub fn write_stage_csv<W: Write>(curves: &[StageCurve], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(["method", "iteration", "residual_norm"])?;
    for c in curves {
        for (i, r) in c.residual_norms.iter().enumerate() {
            out.write_record([c.method.to_string(), (i + 1).to_string(), sci(*r)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Gnuplot data: one indexed block per method, separated by two blank lines.
pub fn stage_gnuplot(curves: &[StageCurve]) -> String {
    let mut s = String::new();
    for (k, c) in curves.iter().enumerate() {
        if k > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# {} dt={}{}", c.method, c.dt, if c.converged { "" } else { " (not converged)" });
        for (i, r) in c.residual_norms.iter().enumerate() {
            let _ = writeln!(s, "{} {}", i + 1, sci(*r));
        }
    }
    s
}

pub const FIXED_HEADER: [&str; 9] = [
    "tol",
    "adaptive_iterations",
    "adaptive_steps",
    "adaptive_error",
    "fixed_dt",
    "fixed_steps",
    "fixed_iterations",
    "fixed_error",
    "ratio",
];

pub fn write_fixed_csv<W: Write>(rows: &[FixedVsAdaptiveRow], w: W) -> Result<()> {
    let mut out = writer(w);
    out.write_record(FIXED_HEADER)?;
    for r in rows {
        out.write_record([
            sci(r.tol),
            r.adaptive_iterations.to_string(),
            r.adaptive_steps.to_string(),
            sci(r.adaptive_error),
            r.fixed_dt.to_string(),
            r.fixed_steps.to_string(),
            r.fixed_iterations.to_string(),
            sci(r.fixed_error),
            format!("{:.3}", r.ratio()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn fixed_summary(rows: &[FixedVsAdaptiveRow]) -> String {
    let mut s = String::from("TOL      fixed dt   fixed iters  adaptive iters  ratio   fixed err   adaptive err\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:<10.4} {:>11} {:>15} {:>6.2}   {:<10.3e}  {:.3e}",
            sci(r.tol),
            r.fixed_dt,
            r.fixed_iterations,
            r.adaptive_iterations,
            r.ratio(),
            r.fixed_error,
            r.adaptive_error
        );
    }
    s
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| FsiError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| FsiError::Io(format!("{}: {e}", path.display())))
}
