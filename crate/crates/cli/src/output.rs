//! Result envelope and payload serialization (CSV with `#` header lines,
//! or JSON), plus the reader for emitted coefficient files.

use crate::error::CliError;
use crate::spec::{Format, RunSpec};
use num_complex::Complex64;
use oblique_grating::cylinder::{Mat2, Wavenumbers};
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Float(v) => format!("{v:e}"),
            Self::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Int(v) => Value::from(*v),
            Self::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Self::Text(s) => Value::from(s.as_str()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Self::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Self::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Payload {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub truncation: usize,
    pub method: String,
    pub residual: f64,
    pub neumann_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultEnvelope {
    pub command: String,
    pub spec: RunSpec,
    pub wavenumbers: Wavenumbers,
    pub wood_margin: f64,
    pub implied_e0h: f64,
    pub solve: Option<SolveSummary>,
    pub columns: Vec<&'static str>,
    pub rows: usize,
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, inner) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, inner, out);
            }
        }
        Value::Array(items) if items.iter().all(|i| !i.is_object()) => {
            let parts: Vec<String> = items.iter().map(scalar).collect();
            out.push((prefix.to_string(), parts.join(",")));
        }
        Value::Array(items) => {
            for (i, inner) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), inner, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Envelope as `key = value` lines in a fixed order.
pub fn envelope_lines(env: &ResultEnvelope) -> Vec<(String, String)> {
    let value = serde_json::to_value(env).expect("envelope serializes");
    let mut out = Vec::new();
    flatten("", &value, &mut out);
    out
}

pub fn render(env: &ResultEnvelope, payload: &Payload, format: Format) -> String {
    match format {
        Format::Csv => render_csv(env, payload),
        Format::Json => render_json(env, payload),
    }
}

fn render_csv(env: &ResultEnvelope, payload: &Payload) -> String {
    let mut text = String::new();
    for (k, v) in envelope_lines(env) {
        text.push_str(&format!("# {k} = {v}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&payload.columns).expect("in-memory write");
    for row in &payload.rows {
        w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
    }
    text.push_str(&String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"));
    text
}

fn render_json(env: &ResultEnvelope, payload: &Payload) -> String {
    let rows: Vec<Value> = payload
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = payload
                .columns
                .iter()
                .zip(row)
                .map(|(c, cell)| (c.to_string(), cell.json()))
                .collect();
            Value::Object(obj)
        })
        .collect();
    let doc = serde_json::json!({ "envelope": env, "rows": rows });
    let mut s = serde_json::to_string_pretty(&doc).expect("json");
    s.push('\n');
    s
}

pub const COEFF_COLUMNS: [&str; 6] = ["n", "entry", "re", "im", "dim_re", "dim_im"];
pub const ENTRIES: [(&str, usize, usize); 4] =
    [("E_TM", 0, 0), ("E_TE", 0, 1), ("H_TM", 1, 0), ("H_TE", 1, 1)];

/// Coefficient payload: one row per harmonic and matrix entry.
pub fn coefficient_rows(normalized: &[Mat2], dimensional: &[Mat2]) -> Payload {
    let top = (normalized.len() / 2) as i64;
    let mut rows = Vec::with_capacity(4 * normalized.len());
    for (k, (x, a)) in normalized.iter().zip(dimensional).enumerate() {
        let n = k as i64 - top;
        for (name, r, c) in ENTRIES {
            rows.push(vec![
                Cell::Int(n),
                Cell::from(name),
                x[(r, c)].re.into(),
                x[(r, c)].im.into(),
                a[(r, c)].re.into(),
                a[(r, c)].im.into(),
            ]);
        }
    }
    Payload {
        columns: COEFF_COLUMNS.to_vec(),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCoefficients {
    pub header: Vec<(String, String)>,
    pub normalized: Vec<Mat2>,
    pub dimensional: Vec<Mat2>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Coefficients(msg.into())
}

/// Reads a CSV coefficient file written by the `coeffs` command. The
/// declared row count must match.
pub fn parse_coefficients(text: &str) -> Result<ParsedCoefficients, CliError> {
    let header: Vec<(String, String)> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.trim_start_matches('#').trim().split_once(" = "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let declared: usize = header
        .iter()
        .find(|(k, _)| k == "rows")
        .ok_or_else(|| bad("missing `rows` header"))?
        .1
        .parse()
        .map_err(|_| bad("`rows` header is not an integer"))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if columns.iter().collect::<Vec<_>>() != COEFF_COLUMNS {
        return Err(bad(format!("unexpected columns {columns:?}")));
    }
    let mut entries: Vec<(i64, usize, usize, Complex64, Complex64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let float = |i: usize| -> Result<f64, CliError> {
            record[i].parse().map_err(|_| bad(format!("bad number `{}`", &record[i])))
        };
        let n: i64 = record[0].parse().map_err(|_| bad(format!("bad order `{}`", &record[0])))?;
        let (_, r, c) = ENTRIES
            .iter()
            .find(|(name, _, _)| *name == &record[1])
            .ok_or_else(|| bad(format!("unknown entry `{}`", &record[1])))?;
        entries.push((n, *r, *c, Complex64::new(float(2)?, float(3)?), Complex64::new(float(4)?, float(5)?)));
    }
    if entries.len() != declared {
        return Err(bad(format!("declared {declared} rows, found {}", entries.len())));
    }
    if entries.len() % 4 != 0 || (entries.len() / 4) % 2 != 1 {
        return Err(bad("row count is not 4 (2N + 1)"));
    }
    let len = entries.len() / 4;
    let top = (len / 2) as i64;
    let mut normalized = vec![Mat2::zeros(); len];
    let mut dimensional = vec![Mat2::zeros(); len];
    let mut seen = vec![[false; 4]; len];
    for (n, r, c, x, a) in entries {
        if n.abs() > top {
            return Err(bad(format!("order {n} outside |n| <= {top}")));
        }
        let i = (n + top) as usize;
        let slot = &mut seen[i][2 * r + c];
        if *slot {
            return Err(bad(format!("duplicate entry at order {n}")));
        }
        *slot = true;
        normalized[i][(r, c)] = x;
        dimensional[i][(r, c)] = a;
    }
    Ok(ParsedCoefficients {
        header,
        normalized,
        dimensional,
    })
}
