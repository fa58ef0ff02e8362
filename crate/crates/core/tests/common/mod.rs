#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use arclp::mps::fmt_f64;
use arclp::{GeneralLP, ObjectiveSense, RowKind};

pub fn fixture_dir(kind: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(kind)
}

/// Sorted `.mps` files of a fixture directory.
pub fn fixtures(kind: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(fixture_dir(kind))
        .expect("fixture directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "mps"))
        .collect();
    out.sort();
    out
}

/// Line-oriented rendering of a parsed problem, used as the frozen form of
/// the golden corpus.
pub fn render_lp(lp: &GeneralLP) -> String {
    let mut out = String::new();
    let sense = match lp.sense {
        ObjectiveSense::Minimize => "minimize",
        ObjectiveSense::Maximize => "maximize",
    };
    let _ = writeln!(out, "name {}", lp.name);
    let _ = writeln!(out, "sense {sense}");
    let _ = writeln!(out, "objective_constant {}", fmt_f64(lp.objective_constant));
    for c in &lp.columns {
        let _ = writeln!(
            out,
            "column {} cost {} lower {} upper {}",
            c.name,
            fmt_f64(c.cost),
            fmt_f64(c.lower),
            fmt_f64(c.upper)
        );
    }
    for r in &lp.rows {
        let kind = match r.kind {
            RowKind::Le => "le",
            RowKind::Ge => "ge",
            RowKind::Eq => "eq",
            RowKind::Free => "free",
        };
        let range = r.range.map(fmt_f64).unwrap_or_else(|| "none".into());
        let _ = writeln!(out, "row {} {kind} rhs {} range {range}", r.name, fmt_f64(r.rhs));
    }
    for &(i, j, v) in &lp.coefficients {
        let _ = writeln!(
            out,
            "coef {} {} {}",
            lp.rows[i].name,
            lp.columns[j].name,
            fmt_f64(v)
        );
    }
    out
}

/// Expected `(file stem, line)` of every malformed fixture.
pub const MALFORMED: &[(&str, usize, &str)] = &[
    ("bad_number", 8, "invalid number `one`"),
    ("bad_row_type", 4, "invalid row type `Q`"),
    ("crossed_bounds", 11, "lower bound 5 above upper bound 2"),
    ("duplicate_entry", 7, "duplicate coefficient"),
    ("integer_marker", 6, "integer markers"),
    ("missing_endata", 8, "missing ENDATA"),
    ("ranges", 9, "RANGES"),
    ("unknown_row", 7, "unknown row `R2`"),
    ("unknown_section", 5, "unknown section `COLUMS`"),
];
