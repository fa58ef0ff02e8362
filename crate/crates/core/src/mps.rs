//! Free-format MPS reader (and a small writer for generated instances).
//!
//! Supported: `NAME`, `ROWS` (N/L/G/E), `COLUMNS`, `RHS`, `BOUNDS`
//! (LO/UP/FX/FR/MI/PL), `ENDATA`. Section headers start in the first column,
//! data lines are indented, fields are separated by whitespace. Lines that
//! start with `*` are comments.
//!
//! An RHS entry on the objective row sets the objective constant to the
//! negated value, following the usual MPS convention.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{Column, GeneralLP, ObjectiveSense, Row, RowKind, StandardLP};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct MpsError {
    pub line: usize,
    pub kind: MpsErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MpsErrorKind {
    UnknownSection(String),
    DuplicateSection(String),
    SectionOrder(String),
    RangesUnsupported,
    DataOutsideSection,
    InvalidRowType(String),
    DuplicateRow(String),
    NoObjectiveRow,
    MultipleObjectiveRows(String),
    UnknownRow(String),
    UnknownColumn(String),
    DuplicateCoefficient { row: String, column: String },
    DuplicateRhs(String),
    IntegerMarker,
    UnsupportedBound(String),
    InvalidBounds { column: String, lower: f64, upper: f64 },
    InvalidNumber(String),
    WrongFieldCount { expected: &'static str, found: usize },
    NoColumns,
    MissingEndata,
}

impl fmt::Display for MpsErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use MpsErrorKind::*;
        match self {
            UnknownSection(s) => write!(f, "unknown section `{s}`"),
            DuplicateSection(s) => write!(f, "section `{s}` appears twice"),
            SectionOrder(s) => write!(f, "section `{s}` out of order"),
            RangesUnsupported => write!(f, "RANGES section is not supported"),
            DataOutsideSection => write!(f, "data line outside of a section"),
            InvalidRowType(t) => write!(f, "invalid row type `{t}` (expected N, L, G or E)"),
            DuplicateRow(r) => write!(f, "duplicate row `{r}`"),
            NoObjectiveRow => write!(f, "no objective (N) row"),
            MultipleObjectiveRows(r) => write!(f, "second objective row `{r}`"),
            UnknownRow(r) => write!(f, "unknown row `{r}`"),
            UnknownColumn(c) => write!(f, "unknown column `{c}`"),
            DuplicateCoefficient { row, column } => {
                write!(f, "duplicate coefficient for row `{row}`, column `{column}`")
            }
            DuplicateRhs(r) => write!(f, "duplicate RHS entry for row `{r}`"),
            IntegerMarker => write!(f, "integer markers are not supported"),
            UnsupportedBound(b) => write!(f, "unsupported bound type `{b}`"),
            InvalidBounds {
                column,
                lower,
                upper,
            } => write!(f, "column `{column}` has lower bound {lower} above upper bound {upper}"),
            InvalidNumber(s) => write!(f, "invalid number `{s}`"),
            WrongFieldCount { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            NoColumns => write!(f, "no columns"),
            MissingEndata => write!(f, "missing ENDATA"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Name,
    Rows,
    Columns,
    Rhs,
    Bounds,
}

impl Section {
    fn header(&self) -> &'static str {
        match self {
            Section::Name => "NAME",
            Section::Rows => "ROWS",
            Section::Columns => "COLUMNS",
            Section::Rhs => "RHS",
            Section::Bounds => "BOUNDS",
        }
    }
}

fn err(line: usize, kind: MpsErrorKind) -> MpsError {
    MpsError { line, kind }
}

fn number(line: usize, s: &str) -> Result<f64, MpsError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(err(line, MpsErrorKind::InvalidNumber(s.to_owned()))),
    }
}

/// Where each row lives: the objective or a constraint index.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RowRef {
    Objective,
    Constraint(usize),
}

/// Parses an MPS document into a minimization problem. Set
/// [`GeneralLP::sense`] afterwards to maximize.
pub fn parse_mps(text: &str) -> Result<GeneralLP, MpsError> {
    let mut lp = GeneralLP::new("", ObjectiveSense::Minimize);
    let mut current: Option<Section> = None;
    let mut seen: Vec<Section> = Vec::new();
    let mut rows: HashMap<String, RowRef> = HashMap::new();
    let mut objective: Option<String> = None;
    let mut cols: HashMap<String, usize> = HashMap::new();
    let mut coeffs: HashSet<(usize, usize)> = HashSet::new();
    let mut rhs_seen: HashSet<String> = HashSet::new();
    let mut bound_line: HashMap<usize, usize> = HashMap::new();
    let mut rows_line = 0;
    let mut columns_line = 0;
    let mut last_line = 0;
    let mut ended = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim_end();
        if trimmed.trim_start().is_empty() || trimmed.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let is_header = !trimmed.starts_with(char::is_whitespace);

        if is_header {
            let section = match fields[0] {
                "NAME" => Section::Name,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "RANGES" => return Err(err(line, MpsErrorKind::RangesUnsupported)),
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(err(line, MpsErrorKind::UnknownSection(other.to_owned()))),
            };
            if seen.contains(&section) {
                return Err(err(line, MpsErrorKind::DuplicateSection(section.header().into())));
            }
            if seen.last().is_some_and(|&s| s > section) {
                return Err(err(line, MpsErrorKind::SectionOrder(section.header().into())));
            }
            if section > Section::Rows && !seen.contains(&Section::Rows) {
                return Err(err(line, MpsErrorKind::SectionOrder(section.header().into())));
            }
            match section {
                Section::Name => lp.name = fields.get(1).copied().unwrap_or("").to_owned(),
                Section::Rows => rows_line = line,
                Section::Columns => {
                    columns_line = line;
                    if objective.is_none() {
                        return Err(err(rows_line, MpsErrorKind::NoObjectiveRow));
                    }
                }
                _ => {}
            }
            seen.push(section);
            current = Some(section);
            continue;
        }

        match current {
            None | Some(Section::Name) => return Err(err(line, MpsErrorKind::DataOutsideSection)),
            Some(Section::Rows) => {
                if fields.len() != 2 {
                    return Err(err(
                        line,
                        MpsErrorKind::WrongFieldCount {
                            expected: "2",
                            found: fields.len(),
                        },
                    ));
                }
                let name = fields[1].to_owned();
                if rows.contains_key(&name) {
                    return Err(err(line, MpsErrorKind::DuplicateRow(name)));
                }
                let kind = match fields[0] {
                    "N" | "n" => {
                        if objective.is_some() {
                            return Err(err(line, MpsErrorKind::MultipleObjectiveRows(name)));
                        }
                        objective = Some(name.clone());
                        rows.insert(name, RowRef::Objective);
                        continue;
                    }
                    "L" | "l" => RowKind::Le,
                    "G" | "g" => RowKind::Ge,
                    "E" | "e" => RowKind::Eq,
                    t => return Err(err(line, MpsErrorKind::InvalidRowType(t.to_owned()))),
                };
                let i = lp.add_row(Row::new(name.clone(), kind, 0.0));
                rows.insert(name, RowRef::Constraint(i));
            }
            Some(Section::Columns) => {
                if fields.iter().any(|f| f.contains("MARKER")) {
                    return Err(err(line, MpsErrorKind::IntegerMarker));
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err(
                        line,
                        MpsErrorKind::WrongFieldCount {
                            expected: "3 or 5",
                            found: fields.len(),
                        },
                    ));
                }
                let name = fields[0];
                let j = match cols.get(name) {
                    Some(&j) => j,
                    None => {
                        let j = lp.add_column(Column::new(name, 0.0));
                        cols.insert(name.to_owned(), j);
                        j
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let value = number(line, pair[1])?;
                    let row = *rows
                        .get(pair[0])
                        .ok_or_else(|| err(line, MpsErrorKind::UnknownRow(pair[0].to_owned())))?;
                    let key = match row {
                        RowRef::Objective => (usize::MAX, j),
                        RowRef::Constraint(i) => (i, j),
                    };
                    if !coeffs.insert(key) {
                        return Err(err(
                            line,
                            MpsErrorKind::DuplicateCoefficient {
                                row: pair[0].to_owned(),
                                column: name.to_owned(),
                            },
                        ));
                    }
                    match row {
                        RowRef::Objective => lp.columns[j].cost = value,
                        RowRef::Constraint(i) => lp.set_coefficient(i, j, value),
                    }
                }
            }
            Some(Section::Rhs) => {
                let pairs = match fields.len() {
                    2 | 4 => &fields[..],
                    3 | 5 => &fields[1..],
                    n => {
                        return Err(err(
                            line,
                            MpsErrorKind::WrongFieldCount {
                                expected: "2 to 5",
                                found: n,
                            },
                        ))
                    }
                };
                for pair in pairs.chunks(2) {
                    let value = number(line, pair[1])?;
                    let row = *rows
                        .get(pair[0])
                        .ok_or_else(|| err(line, MpsErrorKind::UnknownRow(pair[0].to_owned())))?;
                    if !rhs_seen.insert(pair[0].to_owned()) {
                        return Err(err(line, MpsErrorKind::DuplicateRhs(pair[0].to_owned())));
                    }
                    match row {
                        RowRef::Objective => lp.objective_constant = -value,
                        RowRef::Constraint(i) => lp.rows[i].rhs = value,
                    }
                }
            }
            Some(Section::Bounds) => {
                let kind = fields[0].to_ascii_uppercase();
                let needs_value = match kind.as_str() {
                    "LO" | "UP" | "FX" => true,
                    "FR" | "MI" | "PL" => false,
                    _ => return Err(err(line, MpsErrorKind::UnsupportedBound(fields[0].to_owned()))),
                };
                let (col_name, value) = match (needs_value, fields.len()) {
                    (true, 3) => (fields[1], Some(fields[2])),
                    (true, 4) => (fields[2], Some(fields[3])),
                    (false, 2) => (fields[1], None),
                    (false, 3) => (fields[2], None),
                    (_, n) => {
                        return Err(err(
                            line,
                            MpsErrorKind::WrongFieldCount {
                                expected: if needs_value { "3 or 4" } else { "2 or 3" },
                                found: n,
                            },
                        ))
                    }
                };
                let j = *cols
                    .get(col_name)
                    .ok_or_else(|| err(line, MpsErrorKind::UnknownColumn(col_name.to_owned())))?;
                let value = value.map(|v| number(line, v)).transpose()?;
                let col = &mut lp.columns[j];
                match (kind.as_str(), value) {
                    ("LO", Some(v)) => col.lower = v,
                    ("UP", Some(v)) => col.upper = v,
                    ("FX", Some(v)) => {
                        col.lower = v;
                        col.upper = v;
                    }
                    ("FR", _) => {
                        col.lower = f64::NEG_INFINITY;
                        col.upper = f64::INFINITY;
                    }
                    ("MI", _) => col.lower = f64::NEG_INFINITY,
                    ("PL", _) => col.upper = f64::INFINITY,
                    _ => unreachable!("bound kinds checked above"),
                }
                bound_line.insert(j, line);
            }
        }
    }

    if !ended {
        return Err(err(last_line.max(1), MpsErrorKind::MissingEndata));
    }
    if objective.is_none() {
        return Err(err(rows_line.max(last_line), MpsErrorKind::NoObjectiveRow));
    }
    if lp.columns.is_empty() {
        let line = if columns_line > 0 { columns_line } else { last_line };
        return Err(err(line, MpsErrorKind::NoColumns));
    }
    let mut bad: Vec<(usize, usize)> = bound_line
        .iter()
        .filter(|(&j, _)| lp.columns[j].lower > lp.columns[j].upper)
        .map(|(&j, &l)| (l, j))
        .collect();
    bad.sort_unstable();
    if let Some(&(line, j)) = bad.first() {
        let c = &lp.columns[j];
        return Err(err(
            line,
            MpsErrorKind::InvalidBounds {
                column: c.name.clone(),
                lower: c.lower,
                upper: c.upper,
            },
        ));
    }
    Ok(lp)
}

/// Renders a float with 17 significant digits, which round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a standard-form problem as an MPS document with equality rows.
/// `comments` are emitted as `*` lines after `NAME`.
pub fn write_standard_mps(p: &StandardLP, name: &str, comments: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    for c in comments {
        let _ = writeln!(out, "* {c}");
    }
    out.push_str("ROWS\n N  COST\n");
    for r in &p.row_names {
        let _ = writeln!(out, " E  {r}");
    }
    out.push_str("COLUMNS\n");
    for (j, cname) in p.column_names.iter().enumerate() {
        let _ = writeln!(out, "    {cname}  COST  {}", fmt_f64(p.c()[j]));
        for (i, rname) in p.row_names.iter().enumerate() {
            let v = p.a()[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "    {cname}  {rname}  {}", fmt_f64(v));
            }
        }
    }
    out.push_str("RHS\n");
    for (i, rname) in p.row_names.iter().enumerate() {
        let _ = writeln!(out, "    RHS  {rname}  {}", fmt_f64(p.b()[i]));
    }
    out.push_str("ENDATA\n");
    out
}
