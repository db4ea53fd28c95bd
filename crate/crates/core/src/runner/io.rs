//! Plain-text result formats and their readers.
//!
//! Series files are CSV with a `# config_sha256 <hex>` comment line, a header
//! row, and values printed with 17 significant digits. Grid files carry a
//! single header line `# grid <rows> <cols> config_sha256 <hex>` followed by
//! `rows` lines of `cols` comma-separated values, row-major.

use std::fmt::Write as _;

use ndarray::Array2;

/// Malformed series or grid text.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Structure(String),
}

fn line_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Line { line, message: message.into() }
}

/// Formats with 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64, ParseError> {
    field.trim().parse::<f64>().map_err(|_| line_err(line, format!("not a number: {:?}", field.trim())))
}

fn check_hash(hash: &str, line: usize) -> Result<(), ParseError> {
    if hash.len() == 64 && hash.bytes().all(|b| b.is_ascii_hexdigit()) {
        Ok(())
    } else {
        Err(line_err(line, "config hash must be 64 hex digits"))
    }
}

/// A numeric table read from a series file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub config_sha256: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Renders a series file.
pub fn write_table(config_sha256: &str, columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    writeln!(out, "# config_sha256 {config_sha256}").unwrap();
    writeln!(out, "{}", columns.join(",")).unwrap();
    for row in rows {
        let fields: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "{}", fields.join(",")).unwrap();
    }
    out
}

/// Parses a series file written by [`write_table`].
pub fn read_table(text: &str) -> Result<Table, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, first) = lines.next().ok_or_else(|| ParseError::Structure("empty input".into()))?;
    let hash = first
        .strip_prefix("# config_sha256 ")
        .ok_or_else(|| line_err(n, "expected '# config_sha256 <hex>'"))?
        .trim()
        .to_string();
    check_hash(&hash, n)?;
    let (n, header) = lines.next().ok_or_else(|| ParseError::Structure("missing column header".into()))?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if columns.iter().any(|c| c.is_empty()) {
        return Err(line_err(n, "empty column name"));
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line.split(',').map(|f| parse_f64(f, n)).collect::<Result<Vec<_>, _>>()?;
        if row.len() != columns.len() {
            return Err(line_err(n, format!("expected {} fields, found {}", columns.len(), row.len())));
        }
        rows.push(row);
    }
    Ok(Table { config_sha256: hash, columns, rows })
}

/// A matrix read from a grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub config_sha256: String,
    pub values: Array2<f64>,
}

/// Renders a grid file.
pub fn write_grid(config_sha256: &str, values: &Array2<f64>) -> String {
    let (rows, cols) = values.dim();
    let mut out = String::with_capacity(rows * cols * 24 + 100);
    writeln!(out, "# grid {rows} {cols} config_sha256 {config_sha256}").unwrap();
    for row in values.rows() {
        let fields: Vec<String> = row.iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "{}", fields.join(",")).unwrap();
    }
    out
}

/// Largest grid the reader will allocate.
const MAX_GRID_ENTRIES: usize = 1 << 26;

/// Parses a grid file written by [`write_grid`].
pub fn read_grid(text: &str) -> Result<Grid, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (n, first) = lines.next().ok_or_else(|| ParseError::Structure("empty input".into()))?;
    let parts: Vec<&str> = first.split_whitespace().collect();
    let [hash_mark, "grid", rows, cols, "config_sha256", hash] = parts.as_slice() else {
        return Err(line_err(n, "expected '# grid <rows> <cols> config_sha256 <hex>'"));
    };
    if *hash_mark != "#" {
        return Err(line_err(n, "header must start with '#'"));
    }
    let rows: usize = rows.parse().map_err(|_| line_err(n, "bad row count"))?;
    let cols: usize = cols.parse().map_err(|_| line_err(n, "bad column count"))?;
    check_hash(hash, n)?;
    if rows.checked_mul(cols).is_none_or(|e| e > MAX_GRID_ENTRIES) {
        return Err(line_err(n, format!("grid {rows}x{cols} is too large")));
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if seen == rows {
            return Err(line_err(n, format!("more than {rows} rows")));
        }
        let before = data.len();
        for field in line.split(',') {
            data.push(parse_f64(field, n)?);
        }
        if data.len() - before != cols {
            return Err(line_err(n, format!("expected {cols} values, found {}", data.len() - before)));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(ParseError::Structure(format!("expected {rows} rows, found {seen}")));
    }
    let values = Array2::from_shape_vec((rows, cols), data).map_err(|e| ParseError::Structure(e.to_string()))?;
    Ok(Grid { config_sha256: hash.to_string(), values })
}
