//! CSV ingestion and emission.
//!
//! Input rows are comma-separated decimal numbers of uniform arity; parse
//! errors name the offending data row (1-based, header excluded). All emitted
//! numbers use Rust's shortest round-trip decimal formatting, so written
//! values parse back to the exact same bits.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use odit::Point;

use crate::error::{CliError, CliResult};

/// Parses one data row. `row` is the 1-based data-row number used in errors.
pub fn parse_row(line: &str, row: usize) -> CliResult<Point> {
    let mut coords = Vec::new();
    for (i, cell) in line.split(',').enumerate() {
        let cell = cell.trim();
        let value: f64 = cell.parse().map_err(|_| {
            CliError::Data(format!(
                "row {row}: column {}: cannot parse `{cell}` as a number",
                i + 1
            ))
        })?;
        if !value.is_finite() {
            return Err(CliError::Data(format!(
                "row {row}: column {}: non-finite value `{cell}`",
                i + 1
            )));
        }
        coords.push(value);
    }
    Point::new(coords).map_err(|e| CliError::Data(format!("row {row}: {e}")))
}

/// Streaming row reader: yields one point per data row, enforcing uniform
/// arity, so consumers can process unbounded streams in O(1) memory.
pub struct PointRows<R: BufRead> {
    reader: R,
    buf: String,
    row: usize,
    dim: Option<usize>,
    skip_header: bool,
}

impl<R: BufRead> PointRows<R> {
    pub fn new(reader: R, has_header: bool) -> Self {
        Self {
            reader,
            buf: String::new(),
            row: 0,
            dim: None,
            skip_header: has_header,
        }
    }
}

impl<R: BufRead> Iterator for PointRows<R> {
    type Item = CliResult<Point>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(CliError::Data(format!("read failed: {e}")))),
            }
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if self.skip_header {
                self.skip_header = false;
                continue;
            }
            // A trailing newline produces one final empty read; ignore it.
            if line.is_empty() && self.reader.fill_buf().map_or(true, |b| b.is_empty()) {
                return None;
            }
            self.row += 1;
            let parsed = parse_row(line, self.row);
            if let Ok(p) = &parsed {
                match self.dim {
                    None => self.dim = Some(p.dim()),
                    Some(d) if d != p.dim() => {
                        return Some(Err(CliError::Data(format!(
                            "row {}: expected {d} columns, found {}",
                            self.row,
                            p.dim()
                        ))))
                    }
                    _ => {}
                }
            }
            return Some(parsed);
        }
    }
}

/// Reads a whole CSV file into memory.
pub fn load_csv<R: BufRead>(reader: R, has_header: bool) -> CliResult<Vec<Point>> {
    let points: Vec<Point> = PointRows::new(reader, has_header).collect::<CliResult<_>>()?;
    if points.is_empty() {
        return Err(CliError::Data("input contains no data rows".into()));
    }
    Ok(points)
}

pub fn load_csv_path(path: &Path, has_header: bool) -> CliResult<Vec<Point>> {
    let file = open_path(path)?;
    load_csv(BufReader::new(file), has_header)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn open_path(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))
}

/// Opens a data source; `-` means standard input.
pub fn open_input(path: &Path) -> CliResult<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(std::io::stdin().lock()))
    } else {
        Ok(Box::new(BufReader::new(open_path(path)?)))
    }
}

/// Shortest round-trip decimal formatting used for every emitted number.
pub fn fmt_f64(value: f64) -> String {
    let mut s = value.to_string();
    // Keep a uniform look for integral values.
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

pub fn format_point_row(point: &Point) -> String {
    point
        .coords()
        .iter()
        .map(|c| fmt_f64(*c))
        .collect::<Vec<_>>()
        .join(",")
}
