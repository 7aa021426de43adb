//! Artifact formatting and atomic file writes.
//!
//! Human-readable outputs (CSV, tables, plot data) print numbers with six
//! significant digits; JSON summaries keep full precision.

use std::path::Path;

use crate::Failure;

/// Formats `x` with six significant digits, trimming trailing zeros, and
/// switching to scientific notation when fixed notation would be longer
/// than it is informative.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exponent) = sci.split_once('e').expect("{:e} always carries an exponent");
    let e: i32 = exponent.parse().expect("{:e} exponent is an integer");
    if (-4..6).contains(&e) {
        let decimals = (5 - e).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes a file atomically: the content lands under a temporary name in
/// the destination directory and is renamed into place, so readers never
/// observe a half-written artifact.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .ok_or_else(|| Failure::Config(format!("{} has no parent directory", path.display())))?;
    std::fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Failure::Config(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Renders rows as CSV under a header line.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Renders an aligned plain-text table with a title line, mirroring the
/// layout the numbers are quoted in.
pub fn table(title: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    let mut line = String::new();
    for (i, h) in header.iter().enumerate() {
        if i > 0 {
            line.push_str("  ");
        }
        line.push_str(&format!("{h:>width$}", width = widths[i]));
    }
    out.push_str(&line);
    out.push('\n');
    out.push_str(&"-".repeat(line.len()));
    out.push('\n');
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{cell:>width$}", width = widths[i]));
        }
        out.push('\n');
    }
    out
}

/// Renders a two-column plot-ready data file.
pub fn two_column(xs: &[f64], ys: &[f64]) -> String {
    let mut out = String::new();
    for (x, y) in xs.iter().zip(ys) {
        out.push_str(&sig6(*x));
        out.push(' ');
        out.push_str(&sig6(*y));
        out.push('\n');
    }
    out
}
