//! CSV readers and writers for profiles, potentials, traces and spectra.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::elliptic::{PotentialField, TraceTerm};
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::operators::SpectralReport;

const NODE_TOL: f64 = 1e-12;

/// `x,u` rows, one per node.
pub fn format_profile(grid: &Grid1D, u: &[f64]) -> String {
    let mut s = String::from("x,u\n");
    for (x, v) in grid.nodes().iter().zip(u) {
        let _ = writeln!(s, "{x},{v}");
    }
    s
}

pub fn write_profile(path: &Path, grid: &Grid1D, u: &[f64]) -> Result<()> {
    fs::write(path, format_profile(grid, u))?;
    Ok(())
}

/// Parse an `x,u` profile and check that its nodes match `grid`.
pub fn parse_profile(text: &str, grid: &Grid1D) -> Result<Vec<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next().map(str::trim) {
        Some("x,u") => {}
        other => {
            return Err(Error::Parse(format!(
                "expected header `x,u`, found {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut u = Vec::with_capacity(grid.n());
    for (row, line) in lines.enumerate() {
        let mut it = line.split(',');
        let (Some(xs), Some(us), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::Parse(format!("row {}: expected two columns", row + 1)));
        };
        let x: f64 = xs
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad x value {xs:?}", row + 1)))?;
        let v: f64 = us
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad u value {us:?}", row + 1)))?;
        if row >= grid.n() {
            return Err(Error::GridMismatch(format!(
                "more than {} rows",
                grid.n()
            )));
        }
        if (x - grid.x(row)).abs() > NODE_TOL {
            return Err(Error::GridMismatch(format!(
                "row {}: x = {x}, expected {}",
                row + 1,
                grid.x(row)
            )));
        }
        if !v.is_finite() {
            return Err(Error::Parse(format!("row {}: non-finite u", row + 1)));
        }
        u.push(v);
    }
    if u.len() != grid.n() {
        return Err(Error::GridMismatch(format!(
            "{} rows for a grid of {} nodes",
            u.len(),
            grid.n()
        )));
    }
    Ok(u)
}

pub fn read_profile(path: &Path, grid: &Grid1D) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    parse_profile(&text, grid)
}

/// `x,eta,phi` rows in storage order.
pub fn format_potential(field: &PotentialField) -> String {
    let g = &field.grid;
    let mut s = String::from("x,eta,phi\n");
    for i in 0..g.base.n() {
        for j in 0..g.m() {
            let _ = writeln!(s, "{},{},{}", g.base.x(i), g.eta()[j], field.at(i, j));
        }
    }
    s
}

/// `x,g` rows.
pub fn format_trace(grid: &Grid1D, trace: &TraceTerm) -> String {
    let mut s = String::from("x,g\n");
    for (x, g) in grid.nodes().iter().zip(trace.g.iter()) {
        let _ = writeln!(s, "{x},{g}");
    }
    s
}

/// `# bound=...` metadata line followed by `re,im` rows.
pub fn format_spectrum(report: &SpectralReport) -> String {
    let mut s = format!(
        "# bound={} margin={} tolerance={} violation={}\nre,im\n",
        report.bound, report.margin, report.tolerance, report.violation
    );
    for z in &report.eigenvalues {
        let _ = writeln!(s, "{},{}", z.re, z.im);
    }
    s
}
