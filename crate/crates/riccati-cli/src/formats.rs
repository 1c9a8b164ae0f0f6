//! CSV readers and writers for every artifact the commands exchange:
//! matrices, trajectories, kernel bundles, bench records, and the verify
//! table. All floating-point output uses 17 significant digits so files
//! round-trip bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use riccati_core::problem::KERNEL_SYM_TOL;
use riccati_core::semigroup::Kernel;
use riccati_core::{LinOp, SymOp};

#[derive(Debug)]
pub struct FormatError {
    pub message: String,
}

impl FormatError {
    fn new(message: impl Into<String>) -> FormatError {
        FormatError { message: message.into() }
    }
}

impl std::fmt::Display for FormatError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for FormatError {}

/// 17 significant digits; round-trips any f64 through from_str.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_field(raw: &str, where_: &str) -> Result<f64, FormatError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| FormatError::new(format!("{where_}: invalid number `{}`", raw.trim())))?;
    if !v.is_finite() {
        return Err(FormatError::new(format!("{where_}: non-finite value")));
    }
    Ok(v)
}

fn read_to_lines(path: &Path) -> Result<Vec<String>, FormatError> {
    let text = fs::read_to_string(path)
        .map_err(|e| FormatError::new(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn parse_header_num(line: &str, key: &str, where_: &str) -> Result<f64, FormatError> {
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| FormatError::new(format!("{where_}: expected `{key}=<value>` header")))?;
    parse_field(rest, where_)
}

fn matrix_body(out: &mut String, m: &LinOp) {
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_sig(m.get(i, j)));
        }
        out.push('\n');
    }
}

fn parse_matrix_rows(
    lines: &[String],
    n: usize,
    where_: &str,
) -> Result<LinOp, FormatError> {
    if lines.len() < n {
        return Err(FormatError::new(format!("{where_}: expected {n} rows, found {}", lines.len())));
    }
    let mut data = Vec::with_capacity(n * n);
    for (i, line) in lines[..n].iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(FormatError::new(format!(
                "{where_}: row {i} has {} entries, expected {n}",
                fields.len()
            )));
        }
        for raw in fields {
            data.push(parse_field(raw, where_)?);
        }
    }
    Ok(LinOp::from_vec(n, n, data))
}

/// Square matrix CSV: first line `dim=<n>`, then n rows of n entries.
pub fn write_matrix(path: &Path, m: &LinOp) -> Result<(), FormatError> {
    assert!(m.is_square(), "matrix CSV stores square matrices");
    let mut out = format!("dim={}\n", m.rows());
    matrix_body(&mut out, m);
    fs::write(path, out).map_err(|e| FormatError::new(format!("{}: {e}", path.display())))
}

pub fn read_matrix(path: &Path) -> Result<LinOp, FormatError> {
    let where_ = path.display().to_string();
    let lines = read_to_lines(path)?;
    if lines.is_empty() {
        return Err(FormatError::new(format!("{where_}: empty file")));
    }
    let n = parse_header_num(&lines[0], "dim", &where_)? as usize;
    if n == 0 {
        return Err(FormatError::new(format!("{where_}: dim must be positive")));
    }
    parse_matrix_rows(&lines[1..], n, &where_)
}

pub const TRAJECTORY_HEADER: &str = "t,frob_P,frob_Q,frob_R,margin_P_minus_M";

#[derive(Clone, Copy, Debug)]
pub struct TrajRow {
    pub t: f64,
    pub frob_p: f64,
    pub frob_q: f64,
    pub frob_r: f64,
    pub margin: f64,
}

pub fn write_trajectory(path: &Path, rows: &[TrajRow]) -> Result<(), FormatError> {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sig(r.t),
            fmt_sig(r.frob_p),
            fmt_sig(r.frob_q),
            fmt_sig(r.frob_r),
            fmt_sig(r.margin)
        );
    }
    fs::write(path, out).map_err(|e| FormatError::new(format!("{}: {e}", path.display())))
}

/// Reads a trajectory dump back, insisting on the exact header, finite
/// fields, and strictly increasing times from zero.
pub fn read_trajectory(path: &Path) -> Result<Vec<TrajRow>, FormatError> {
    let where_ = path.display().to_string();
    let lines = read_to_lines(path)?;
    if lines.first().map(String::as_str) != Some(TRAJECTORY_HEADER) {
        return Err(FormatError::new(format!("{where_}: bad or missing trajectory header")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines[1..].iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(FormatError::new(format!(
                "{where_}: row {i} has {} fields, expected 5",
                fields.len()
            )));
        }
        let row = TrajRow {
            t: parse_field(fields[0], &where_)?,
            frob_p: parse_field(fields[1], &where_)?,
            frob_q: parse_field(fields[2], &where_)?,
            frob_r: parse_field(fields[3], &where_)?,
            margin: parse_field(fields[4], &where_)?,
        };
        if let Some(prev) = rows.last() {
            let prev: &TrajRow = prev;
            if row.t <= prev.t {
                return Err(FormatError::new(format!(
                    "{where_}: times not strictly increasing at row {i}"
                )));
            }
        } else if row.t < 0.0 {
            return Err(FormatError::new(format!("{where_}: negative start time")));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(FormatError::new(format!("{where_}: no data rows")));
    }
    Ok(rows)
}

/// Kernel bundle: horizon and weight headers, then the three blocks stacked
/// (B11, B12, B22), n rows each.
pub fn write_kernel(path: &Path, k: &Kernel) -> Result<(), FormatError> {
    let mut out = String::new();
    let _ = writeln!(out, "horizon={}", fmt_sig(k.horizon()));
    let _ = writeln!(out, "weight={}", fmt_sig(k.weight()));
    let _ = writeln!(out, "dim={}", k.dim());
    matrix_body(&mut out, k.b11().op());
    matrix_body(&mut out, k.b12());
    matrix_body(&mut out, k.b22().op());
    fs::write(path, out).map_err(|e| FormatError::new(format!("{}: {e}", path.display())))
}

// The binary only writes bundles; the reader half keeps the format honest in
// the roundtrip tests and gives downstream tooling a reference parser.
#[allow(dead_code)]
pub fn read_kernel(path: &Path) -> Result<Kernel, FormatError> {
    let where_ = path.display().to_string();
    let lines = read_to_lines(path)?;
    if lines.len() < 3 {
        return Err(FormatError::new(format!("{where_}: truncated kernel bundle")));
    }
    let horizon = parse_header_num(&lines[0], "horizon", &where_)?;
    let weight = parse_header_num(&lines[1], "weight", &where_)?;
    let n = parse_header_num(&lines[2], "dim", &where_)? as usize;
    if n == 0 {
        return Err(FormatError::new(format!("{where_}: dim must be positive")));
    }
    let body = &lines[3..];
    if body.len() < 3 * n {
        return Err(FormatError::new(format!("{where_}: expected {} block rows", 3 * n)));
    }
    let b11 = parse_matrix_rows(&body[..n], n, &where_)?;
    let b12 = parse_matrix_rows(&body[n..2 * n], n, &where_)?;
    let b22 = parse_matrix_rows(&body[2 * n..3 * n], n, &where_)?;
    let b11 = SymOp::with_tol(b11, KERNEL_SYM_TOL)
        .map_err(|e| FormatError::new(format!("{where_}: B11: {e}")))?;
    let b22 = SymOp::with_tol(b22, KERNEL_SYM_TOL)
        .map_err(|e| FormatError::new(format!("{where_}: B22: {e}")))?;
    Kernel::from_blocks(b11, b12, b22, horizon, weight)
        .map_err(|e| FormatError::new(format!("{where_}: {e}")))
}

pub const BENCH_HEADER: &str = "method,t,kappa_or_k,compositions,wall_time_s,rel_error";

#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub method: &'static str,
    pub t: f64,
    pub kappa_or_k: usize,
    pub compositions: usize,
    pub wall_time_s: f64,
    pub rel_error: f64,
}

pub fn write_bench(path: &Path, rows: &[BenchRecord]) -> Result<(), FormatError> {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            fmt_sig(r.t),
            r.kappa_or_k,
            r.compositions,
            fmt_sig(r.wall_time_s),
            fmt_sig(r.rel_error)
        );
    }
    fs::write(path, out).map_err(|e| FormatError::new(format!("{}: {e}", path.display())))
}

pub const VERIFY_HEADER: &str = "check_name,metric,tolerance,status";

#[derive(Clone, Debug)]
pub struct CheckRow {
    pub name: &'static str,
    pub metric: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    pub fn status(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

pub fn write_verify(path: &Path, rows: &[CheckRow]) -> Result<(), FormatError> {
    let mut out = String::from(VERIFY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.name, fmt_sig(r.metric), fmt_sig(r.tolerance), r.status());
    }
    fs::write(path, out).map_err(|e| FormatError::new(format!("{}: {e}", path.display())))
}
