//! Iteration logs in CSV or JSON.
//!
//! Both formats carry the same keys, in order:
//! `iter,mu,norm_rb,norm_rc,sin_alpha,neigh_dist,status`. Floats are written
//! with 17 significant digits so a parse/emit cycle is byte-identical.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;

use crate::driver::{IterationRecord, RecordStatus};
use crate::mps::fmt_f64;

pub const CSV_HEADER: &str = "iter,mu,norm_rb,norm_rc,sin_alpha,neigh_dist,status";

const KEYS: [&str; 7] = [
    "iter",
    "mu",
    "norm_rb",
    "norm_rc",
    "sin_alpha",
    "neigh_dist",
    "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    Json,
}

impl FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(LogFormat::Csv),
            "json" => Ok(LogFormat::Json),
            other => Err(format!("unknown log format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("invalid JSON log: {0}")]
    Json(String),
}

fn json_number(v: f64) -> String {
    if v.is_finite() {
        fmt_f64(v)
    } else {
        "null".to_owned()
    }
}

pub fn write_iteration_log(records: &[IterationRecord], format: LogFormat) -> String {
    let mut out = String::new();
    match format {
        LogFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in records {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.k,
                    fmt_f64(r.mu),
                    fmt_f64(r.norm_rb),
                    fmt_f64(r.norm_rc),
                    fmt_f64(r.sin_alpha),
                    fmt_f64(r.neigh_dist),
                    r.status.as_str()
                );
            }
        }
        LogFormat::Json => {
            if records.is_empty() {
                out.push_str("[]\n");
                return out;
            }
            out.push_str("[\n");
            for (i, r) in records.iter().enumerate() {
                let _ = write!(
                    out,
                    "  {{\"iter\": {}, \"mu\": {}, \"norm_rb\": {}, \"norm_rc\": {}, \"sin_alpha\": {}, \"neigh_dist\": {}, \"status\": \"{}\"}}",
                    r.k,
                    json_number(r.mu),
                    json_number(r.norm_rb),
                    json_number(r.norm_rc),
                    json_number(r.sin_alpha),
                    json_number(r.neigh_dist),
                    r.status.as_str()
                );
                out.push_str(if i + 1 < records.len() { ",\n" } else { "\n" });
            }
            out.push_str("]\n");
        }
    }
    out
}

fn record(
    k: usize,
    values: [f64; 5],
    status: RecordStatus,
) -> IterationRecord {
    IterationRecord {
        k,
        mu: values[0],
        norm_rb: values[1],
        norm_rc: values[2],
        sin_alpha: values[3],
        neigh_dist: values[4],
        backtracks: 0,
        factor_ok: true,
        step_lower_bound: 0.0,
        status,
    }
}

/// Reads a log back. Fields the log does not carry (`backtracks`,
/// `factor_ok`, `step_lower_bound`) get their neutral values.
pub fn read_iteration_log(text: &str, format: LogFormat) -> Result<Vec<IterationRecord>, LogError> {
    match format {
        LogFormat::Csv => read_csv(text),
        LogFormat::Json => read_json(text),
    }
}

fn read_csv(text: &str) -> Result<Vec<IterationRecord>, LogError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == CSV_HEADER => {}
        _ => {
            return Err(LogError::Csv {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, l) in lines {
        let line = idx + 1;
        let l = l.trim_end();
        if l.is_empty() {
            continue;
        }
        let bad = |message: String| LogError::Csv { line, message };
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != KEYS.len() {
            return Err(bad(format!("expected {} fields, found {}", KEYS.len(), f.len())));
        }
        let k = f[0]
            .parse()
            .map_err(|_| bad(format!("invalid iteration `{}`", f[0])))?;
        let mut values = [0.0; 5];
        for (v, s) in values.iter_mut().zip(&f[1..6]) {
            *v = s.parse().map_err(|_| bad(format!("invalid number `{s}`")))?;
        }
        let status =
            RecordStatus::parse(f[6]).ok_or_else(|| bad(format!("invalid status `{}`", f[6])))?;
        out.push(record(k, values, status));
    }
    Ok(out)
}

fn read_json(text: &str) -> Result<Vec<IterationRecord>, LogError> {
    let value: Value = serde_json::from_str(text).map_err(|e| LogError::Json(e.to_string()))?;
    let items = value
        .as_array()
        .ok_or_else(|| LogError::Json("top level is not an array".into()))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let bad = |m: &str| LogError::Json(format!("record {i}: {m}"));
            let obj = item.as_object().ok_or_else(|| bad("not an object"))?;
            let k = obj
                .get("iter")
                .and_then(Value::as_u64)
                .ok_or_else(|| bad("missing or invalid `iter`"))? as usize;
            let mut values = [0.0; 5];
            for (v, key) in values.iter_mut().zip(&KEYS[1..6]) {
                *v = match obj.get(*key) {
                    Some(Value::Null) => f64::NAN,
                    Some(x) => x.as_f64().ok_or_else(|| bad(key))?,
                    None => return Err(bad(key)),
                };
            }
            let status = obj
                .get("status")
                .and_then(Value::as_str)
                .and_then(RecordStatus::parse)
                .ok_or_else(|| bad("missing or invalid `status`"))?;
            Ok(record(k, values, status))
        })
        .collect()
}
