//! Conversion of a [`GeneralLP`] into `min cᵀx, Ax = b, x ≥ 0`.

use crate::dense::DenseMatrix;

use super::{GeneralLP, ModelError, ObjectiveSense, RowKind, StandardLP};

/// How one original column is represented in standard form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColumnMap {
    /// `x = x̂ + lower`
    Shifted { index: usize, lower: f64 },
    /// `x = upper − x̂` (column with no finite lower bound)
    Reflected { index: usize, upper: f64 },
    /// `x = x⁺ − x⁻` (free column)
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowMap {
    Dropped,
    Equality,
    /// Slack column with coefficient `sign` and the row's shifted rhs.
    Slack { col: usize, sign: f64 },
    /// `a x − w = lo`, `w + v = hi − lo`.
    Ranged {
        w: usize,
        v: usize,
        lo: f64,
        hi: f64,
    },
}

/// Everything needed to move points between the original space and
/// standard form, and to report the objective in original terms.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMapping {
    pub columns: Vec<ColumnMap>,
    rows: Vec<RowMap>,
    /// `(x̂ index, slack index, u − l)` for each finite upper bound row.
    upper_rows: Vec<(usize, usize, f64)>,
    /// `+1` for minimization, `−1` for maximization.
    pub objective_sign: f64,
    /// Constant added to the standard-form objective to get the
    /// minimization-space objective (bound shifts and the problem constant).
    pub objective_offset: f64,
    pub num_std_columns: usize,
}

impl VariableMapping {
    /// Original-space values from a standard-form primal vector.
    pub fn recover_x(&self, x_std: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|m| match *m {
                ColumnMap::Shifted { index, lower } => x_std[index] + lower,
                ColumnMap::Reflected { index, upper } => upper - x_std[index],
                ColumnMap::Split { pos, neg } => x_std[pos] - x_std[neg],
            })
            .collect()
    }

    /// Original objective given the standard-form value `cᵀx`.
    pub fn original_objective(&self, std_objective: f64) -> f64 {
        self.objective_sign * (std_objective + self.objective_offset)
    }

    /// Maps an original-space point to standard form, filling slacks from the
    /// row activities. Feasible points map to nonnegative vectors satisfying
    /// `Ax = b`.
    pub fn to_standard_point(&self, lp: &GeneralLP, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_std_columns];
        for (m, &v) in self.columns.iter().zip(x) {
            match *m {
                ColumnMap::Shifted { index, lower } => out[index] = v - lower,
                ColumnMap::Reflected { index, upper } => out[index] = upper - v,
                ColumnMap::Split { pos, neg } => {
                    out[pos] = v.max(0.0);
                    out[neg] = (-v).max(0.0);
                }
            }
        }
        let act = lp.row_activities(x);
        for ((row, map), a) in lp.rows.iter().zip(&self.rows).zip(act) {
            match *map {
                RowMap::Dropped | RowMap::Equality => {}
                RowMap::Slack { col, sign } => out[col] = sign * (row.rhs - a),
                RowMap::Ranged { w, v, lo, hi } => {
                    out[w] = a - lo;
                    out[v] = hi - a;
                }
            }
        }
        for &(xhat, w, width) in &self.upper_rows {
            out[w] = width - out[xhat];
        }
        out
    }
}

struct Builder {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    row_names: Vec<String>,
    cost: Vec<f64>,
    col_names: Vec<String>,
}

impl Builder {
    fn column(&mut self, name: String, cost: f64) -> usize {
        self.cost.push(cost);
        self.col_names.push(name);
        self.cost.len() - 1
    }

    fn row(&mut self, name: String, entries: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.rows.push(entries);
        self.rhs.push(rhs);
        self.row_names.push(name);
        self.rows.len() - 1
    }
}

/// Rewrites `p` as a standard-form problem.
///
/// Maximization is negated. Each `≤`/`≥` row gains a slack/surplus column,
/// ranged rows become an equality with a bounded surplus, finite lower bounds
/// are shifted out, finite upper bounds become extra rows with a slack, and
/// free columns are split into two nonnegative parts.
pub fn to_standard_form(p: &GeneralLP) -> Result<(StandardLP, VariableMapping), ModelError> {
    p.validate()?;
    if p.rows.iter().all(|r| r.kind == RowKind::Free) {
        return Err(ModelError::Empty("no constraint rows"));
    }
    let sign = match p.sense {
        ObjectiveSense::Minimize => 1.0,
        ObjectiveSense::Maximize => -1.0,
    };
    let mut b = Builder {
        rows: Vec::new(),
        rhs: Vec::new(),
        row_names: Vec::new(),
        cost: Vec::new(),
        col_names: Vec::new(),
    };

    let mut offset = p.objective_constant;
    let mut columns = Vec::with_capacity(p.columns.len());
    for col in &p.columns {
        let map = if col.lower.is_finite() {
            offset += col.cost * col.lower;
            ColumnMap::Shifted {
                index: b.column(col.name.clone(), sign * col.cost),
                lower: col.lower,
            }
        } else if col.upper.is_finite() {
            offset += col.cost * col.upper;
            ColumnMap::Reflected {
                index: b.column(col.name.clone(), -sign * col.cost),
                upper: col.upper,
            }
        } else {
            ColumnMap::Split {
                pos: b.column(format!("{}+", col.name), sign * col.cost),
                neg: b.column(format!("{}-", col.name), -sign * col.cost),
            }
        };
        columns.push(map);
    }

    // Row entries in terms of the standard columns, and rhs corrections from
    // shifted/reflected columns.
    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.rows.len()];
    let mut shift = vec![0.0; p.rows.len()];
    for &(i, j, v) in &p.coefficients {
        match columns[j] {
            ColumnMap::Shifted { index, lower } => {
                entries[i].push((index, v));
                shift[i] += v * lower;
            }
            ColumnMap::Reflected { index, upper } => {
                entries[i].push((index, -v));
                shift[i] += v * upper;
            }
            ColumnMap::Split { pos, neg } => {
                entries[i].push((pos, v));
                entries[i].push((neg, -v));
            }
        }
    }

    let mut rows = Vec::with_capacity(p.rows.len());
    for ((row, mut e), sh) in p.rows.iter().zip(entries).zip(shift) {
        let range = row.range.filter(|r| *r != 0.0 || row.kind != RowKind::Eq);
        let map = match (row.kind, range) {
            (RowKind::Free, _) => RowMap::Dropped,
            (kind, Some(r)) => {
                let (lo, hi) = match kind {
                    RowKind::Le => (row.rhs - r.abs(), row.rhs),
                    RowKind::Ge => (row.rhs, row.rhs + r.abs()),
                    _ if r > 0.0 => (row.rhs, row.rhs + r),
                    _ => (row.rhs + r, row.rhs),
                };
                let w = b.column(format!("surplus_{}", row.name), 0.0);
                let v = b.column(format!("slack_{}", row.name), 0.0);
                e.push((w, -1.0));
                b.row(row.name.clone(), e, lo - sh);
                b.row(
                    format!("range_{}", row.name),
                    vec![(w, 1.0), (v, 1.0)],
                    hi - lo,
                );
                RowMap::Ranged { w, v, lo, hi }
            }
            (RowKind::Eq, None) => {
                b.row(row.name.clone(), e, row.rhs - sh);
                RowMap::Equality
            }
            (kind, None) => {
                let s = if kind == RowKind::Le { 1.0 } else { -1.0 };
                let col = b.column(format!("slack_{}", row.name), 0.0);
                e.push((col, s));
                b.row(row.name.clone(), e, row.rhs - sh);
                RowMap::Slack { col, sign: s }
            }
        };
        rows.push(map);
    }

    let mut upper_rows = Vec::new();
    for (col, map) in p.columns.iter().zip(&columns) {
        if let ColumnMap::Shifted { index, lower } = *map {
            if col.upper.is_finite() {
                let width = col.upper - lower;
                let w = b.column(format!("ubslack_{}", col.name), 0.0);
                b.row(format!("ub_{}", col.name), vec![(index, 1.0), (w, 1.0)], width);
                upper_rows.push((index, w, width));
            }
        }
    }

    let (m, n) = (b.rows.len(), b.cost.len());
    let mut a = DenseMatrix::zeros(m, n);
    for (i, row) in b.rows.iter().enumerate() {
        for &(j, v) in row {
            a[(i, j)] += v;
        }
    }
    let std = StandardLP::with_names(a, b.rhs, b.cost, b.row_names, b.col_names)?;
    let mapping = VariableMapping {
        columns,
        rows,
        upper_rows,
        objective_sign: sign,
        objective_offset: sign * offset,
        num_std_columns: n,
    };
    Ok((std, mapping))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Column, Row};

    #[test]
    fn ge_row_gets_surplus() {
        let mut lp = GeneralLP::new("t", ObjectiveSense::Minimize);
        lp.add_column(Column::new("x1", 1.0));
        lp.add_row(Row::new("r", RowKind::Ge, 1.0));
        lp.set_coefficient(0, 0, 1.0);
        let (std, _) = to_standard_form(&lp).unwrap();
        assert_eq!(std.a(), &DenseMatrix::from_rows(&[[1.0, -1.0]]));
        assert_eq!(std.b(), &[1.0]);
        assert_eq!(std.c(), &[1.0, 0.0]);
    }

    #[test]
    fn maximize_flips_sign() {
        let mut lp = GeneralLP::new("t", ObjectiveSense::Maximize);
        lp.add_column(Column::new("x1", 2.0));
        lp.add_row(Row::new("r", RowKind::Le, 3.0));
        lp.set_coefficient(0, 0, 1.0);
        let (std, map) = to_standard_form(&lp).unwrap();
        assert_eq!(std.a(), &DenseMatrix::from_rows(&[[1.0, 1.0]]));
        assert_eq!(std.b(), &[3.0]);
        assert_eq!(std.c(), &[-2.0, 0.0]);
        // x1 = 3 is optimal: standard objective −6, original +6.
        assert_eq!(map.original_objective(std.objective(&[3.0, 0.0])), 6.0);
    }

    #[test]
    fn bounded_column_shift() {
        // 1 ≤ x1 ≤ 4, x1 = 2. With x1 = x̂ + 1: x̂ = 1 and x̂ + w = 3.
        let mut lp = GeneralLP::new("t", ObjectiveSense::Minimize);
        lp.add_column(Column::new("x1", 1.0).with_bounds(1.0, 4.0));
        lp.add_row(Row::new("r", RowKind::Eq, 2.0));
        lp.set_coefficient(0, 0, 1.0);
        let (std, map) = to_standard_form(&lp).unwrap();
        assert_eq!(std.a(), &DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]));
        assert_eq!(std.b(), &[1.0, 3.0]);
        assert_eq!(std.c(), &[1.0, 0.0]);
        assert_eq!(map.recover_x(&[1.0, 2.0]), vec![2.0]);
        assert_eq!(map.original_objective(std.objective(&[1.0, 2.0])), 2.0);
        assert_eq!(map.to_standard_point(&lp, &[2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn free_and_reflected_columns() {
        let mut lp = GeneralLP::new("t", ObjectiveSense::Minimize);
        lp.add_column(Column::new("f", 1.0).with_bounds(f64::NEG_INFINITY, f64::INFINITY));
        lp.add_column(Column::new("r", 2.0).with_bounds(f64::NEG_INFINITY, 5.0));
        lp.add_row(Row::new("c", RowKind::Eq, 1.0));
        lp.set_coefficient(0, 0, 1.0);
        lp.set_coefficient(0, 1, 1.0);
        let (std, map) = to_standard_form(&lp).unwrap();
        // f = f⁺ − f⁻, r = 5 − r̂: f⁺ − f⁻ − r̂ = 1 − 5
        assert_eq!(std.a(), &DenseMatrix::from_rows(&[[1.0, -1.0, -1.0]]));
        assert_eq!(std.b(), &[-4.0]);
        assert_eq!(std.c(), &[1.0, -1.0, -2.0]);
        let x = [-3.0, 4.0];
        let xs = map.to_standard_point(&lp, &x);
        assert_eq!(xs, vec![0.0, 3.0, 1.0]);
        assert_eq!(map.recover_x(&xs), x.to_vec());
        assert_eq!(
            map.original_objective(std.objective(&xs)),
            lp.objective(&x)
        );
    }

    #[test]
    fn ranged_row() {
        let mut lp = GeneralLP::new("t", ObjectiveSense::Minimize);
        lp.add_column(Column::new("x", 1.0));
        let mut row = Row::new("r", RowKind::Le, 5.0);
        row.range = Some(2.0);
        lp.add_row(row);
        lp.set_coefficient(0, 0, 1.0);
        let (std, map) = to_standard_form(&lp).unwrap();
        // 3 ≤ x ≤ 5
        assert_eq!(
            std.a(),
            &DenseMatrix::from_rows(&[[1.0, -1.0, 0.0], [0.0, 1.0, 1.0]])
        );
        assert_eq!(std.b(), &[3.0, 2.0]);
        assert_eq!(map.to_standard_point(&lp, &[4.0]), vec![4.0, 1.0, 1.0]);
    }

    #[test]
    fn rejections() {
        let lp = GeneralLP::new("t", ObjectiveSense::Minimize);
        assert!(matches!(to_standard_form(&lp), Err(ModelError::Empty(_))));

        let mut lp = GeneralLP::new("t", ObjectiveSense::Minimize);
        lp.add_column(Column::new("bad", 1.0).with_bounds(3.0, 1.0));
        lp.add_row(Row::new("r", RowKind::Le, 1.0));
        match to_standard_form(&lp) {
            Err(ModelError::InfeasibleBounds { name, .. }) => assert_eq!(name, "bad"),
            other => panic!("unexpected {other:?}"),
        }

        let mut lp = GeneralLP::new("t", ObjectiveSense::Minimize);
        lp.add_column(Column::new("x", 1.0));
        lp.add_row(Row::new("obj2", RowKind::Free, 0.0));
        assert!(matches!(to_standard_form(&lp), Err(ModelError::Empty(_))));
    }
}
