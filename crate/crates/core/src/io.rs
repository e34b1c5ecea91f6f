//! Matrix and network file formats.
//!
//! Text matrices: first line `n`, then `n` lines of `n` whitespace-separated
//! numbers. Blank lines and lines starting with `#` are skipped. JSON
//! matrices: `{"n": .., "rows": [[..], ..]}`. Network specs are JSON
//! `{"n", "decay", "coupling", "sigma": "tanh" | "rational"}`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::nonlinear::MonotoneNetworkSpec;

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

/// Tokens of a line with their 1-based columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    line.split_whitespace().map(move |tok| {
        let offset = tok.as_ptr() as usize - line.as_ptr() as usize;
        (line[..offset].chars().count() + 1, tok)
    })
}

pub fn parse_matrix_text(input: &str) -> Result<SquareMatrix> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
    let (line_no, header) = lines.next().ok_or_else(|| parse_err(1, 1, "empty input"))?;
    let mut head = tokens(header);
    let (col, tok) = head.next().expect("nonblank line has a token");
    let n: usize = tok
        .parse()
        .map_err(|_| parse_err(line_no, col, format!("expected dimension, found `{tok}`")))?;
    if n == 0 {
        return Err(parse_err(line_no, col, "dimension must be positive"));
    }
    if let Some((col, tok)) = head.next() {
        return Err(parse_err(line_no, col, format!("unexpected `{tok}` after dimension")));
    }
    let mut rows = Vec::with_capacity(n);
    let mut last_line = line_no;
    for (line_no, line) in lines {
        last_line = line_no;
        if rows.len() == n {
            let col = tokens(line).next().map_or(1, |(c, _)| c);
            return Err(parse_err(line_no, col, format!("more than {n} rows")));
        }
        let mut row = Vec::with_capacity(n);
        for (col, tok) in tokens(line) {
            if row.len() == n {
                return Err(parse_err(line_no, col, format!("row has more than {n} entries")));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(line_no, col, format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line_no, col, format!("`{tok}` is not finite")));
            }
            row.push(v);
        }
        if row.len() < n {
            let col = line.chars().count() + 1;
            return Err(parse_err(line_no, col, format!("row has {} entries, expected {n}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() < n {
        return Err(parse_err(last_line + 1, 1, format!("found {} rows, expected {n}", rows.len())));
    }
    SquareMatrix::from_rows(rows)
}

fn json_err(e: serde_json::Error) -> Error {
    parse_err(e.line(), e.column(), e.to_string())
}

pub fn parse_matrix_json(input: &str) -> Result<SquareMatrix> {
    serde_json::from_str(input).map_err(json_err)
}

/// JSON when the first non-blank character is `{`, text otherwise.
pub fn parse_matrix(input: &str) -> Result<SquareMatrix> {
    if input.trim_start().starts_with('{') {
        parse_matrix_json(input)
    } else {
        parse_matrix_text(input)
    }
}

/// Text format using the shortest round-trip representation of each entry.
pub fn format_matrix_text(m: &SquareMatrix) -> String {
    let mut out = format!("{}\n", m.dim());
    for i in 0..m.dim() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(" ")).expect("writing to a string");
    }
    out
}

pub fn parse_network_spec(input: &str) -> Result<MonotoneNetworkSpec> {
    serde_json::from_str(input).map_err(json_err)
}
