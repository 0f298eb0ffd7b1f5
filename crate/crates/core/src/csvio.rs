//! Flat-file formats: sweep tables, heatmaps, region census, boundary
//! segments and whitespace-separated matrices.
//!
//! Floats are written with Rust's shortest round-trip formatting, lines end
//! in `\n`, and rows come out in a fixed order, so equal inputs give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{BankState, Matrix};
use crate::montecarlo::{SweepRow, SweepTable};
use crate::partition::{BoundarySegment, RegionCensus, SegmentGeometry};

pub const SWEEP_HEADER: &str = "p,d,s,mean_cost,std_err,multi_rate,n_trials,n_samples";
pub const HEATMAP_HEADER: &str = "p,d,value";
pub const CENSUS_HEADER: &str = "lfp,gfp,multi,count";
pub const BOUNDARY_HEADER: &str =
    "bank,context,normal_1,normal_2,offset,status,from_1,from_2,to_1,to_2";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn format_sweep_csv(table: &SweepTable) -> String {
    let mut sorted = table.clone();
    sorted.sort();
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in &sorted.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.p, r.d, r.s, r.mean_cost, r.std_err, r.multi_rate, r.n_trials, r.n_samples
        )
        .unwrap();
    }
    out
}

pub fn write_sweep_csv(table: &SweepTable, path: &Path) -> Result<()> {
    write_file(path, &format_sweep_csv(table))
}

pub fn parse_sweep_csv(text: &str, origin: &Path) -> Result<SweepTable> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(SWEEP_HEADER) => {}
        other => return Err(err(1, format!("unexpected header {other:?}"))),
    }
    let mut table = SweepTable::default();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(err(
                line_no,
                format!("expected 8 fields, found {}", fields.len()),
            ));
        }
        let f = |k: usize| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|_| err(line_no, format!("bad number `{}`", fields[k])))
        };
        let u = |k: usize| -> Result<usize> {
            fields[k]
                .parse()
                .map_err(|_| err(line_no, format!("bad count `{}`", fields[k])))
        };
        table.rows.push(SweepRow {
            p: f(0)?,
            d: f(1)?,
            s: f(2)?,
            mean_cost: f(3)?,
            std_err: f(4)?,
            multi_rate: f(5)?,
            n_trials: u(6)?,
            n_samples: u(7)?,
        });
    }
    Ok(table)
}

pub fn read_sweep_csv(path: &Path) -> Result<SweepTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sweep_csv(&text, path)
}

pub fn heatmap_file_name(s: f64) -> String {
    format!("heatmap_s{s}.csv")
}

/// Long-format `(p, d, mean_cost)` file for the exponent `s`.
pub fn format_heatmap_csv(table: &SweepTable, s: f64) -> String {
    let mut sorted = table.clone();
    sorted.sort();
    let mut out = String::from(HEATMAP_HEADER);
    out.push('\n');
    for r in sorted.rows.iter().filter(|r| r.s == s) {
        writeln!(out, "{},{},{}", r.p, r.d, r.mean_cost).unwrap();
    }
    out
}

/// One heatmap per distinct exponent in `table`; returns the written paths.
pub fn write_heatmaps(table: &SweepTable, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut exponents: Vec<f64> = table.rows.iter().map(|r| r.s).collect();
    exponents.sort_by(f64::total_cmp);
    exponents.dedup();
    let mut written = Vec::new();
    for s in exponents {
        let path = dir.join(heatmap_file_name(s));
        write_file(&path, &format_heatmap_csv(table, s))?;
        written.push(path);
    }
    Ok(written)
}

/// Bank states as `0`/`1` strings, bank 0 first.
pub fn state_code(f: &BankState) -> String {
    f.as_slice()
        .iter()
        .map(|&b| if b { '1' } else { '0' })
        .collect()
}

pub fn format_census_csv(census: &RegionCensus) -> String {
    let mut out = String::from(CENSUS_HEADER);
    out.push('\n');
    for (sig, count) in &census.counts {
        writeln!(
            out,
            "{},{},{},{}",
            state_code(&sig.lfp),
            state_code(&sig.gfp),
            u8::from(sig.is_multi_behavior()),
            count
        )
        .unwrap();
    }
    out
}

pub fn format_boundary_csv(segments: &[BoundarySegment]) -> String {
    let mut out = String::from(BOUNDARY_HEADER);
    out.push('\n');
    for s in segments {
        let (status, coords) = match &s.geometry {
            SegmentGeometry::Clipped { from, to } => (
                "clipped",
                format!("{},{},{},{}", from[0], from[1], to[0], to[1]),
            ),
            SegmentGeometry::Outside => ("outside", ",,,".to_string()),
            SegmentGeometry::Degenerate => ("degenerate", ",,,".to_string()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.bank,
            state_code(&s.context),
            s.normal[0],
            s.normal[1],
            s.offset,
            status,
            coords
        )
        .unwrap();
    }
    out
}

/// Whitespace-separated rows; blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str, origin: &Path) -> Result<Matrix> {
    let err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| err(format!("line {}: bad number `{tok}`", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(err(format!(
                    "line {}: ragged row ({} values, expected {first})",
                    i + 1,
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(err("no rows".into()));
    }
    Matrix::from_rows(rows)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, path)
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_matrix(m: &Matrix, path: &Path) -> Result<()> {
    write_file(path, &format_matrix(m))
}
