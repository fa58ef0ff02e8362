//! Problem data, iterates, and the scalar metrics the solver is driven by.

mod generator;
mod standard_form;

pub use generator::{generate_random_lp, GeneratedInstance, GeneratorError};
pub use standard_form::{to_standard_form, ColumnMap, VariableMapping};

use std::collections::HashSet;

use thiserror::Error;

use crate::compensated::{dot2, CompensatedSum, DoubleVec};
use crate::dense::{hadamard, norm2, DenseMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("problem is empty: {0}")]
    Empty(&'static str),
    #[error("column `{name}` has lower bound {lower} above upper bound {upper}")]
    InfeasibleBounds { name: String, lower: f64, upper: f64 },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("duplicate row name `{0}`")]
    DuplicateRow(String),
    #[error("coefficient references row {row} but only {rows} rows exist")]
    UnknownRow { row: usize, rows: usize },
    #[error("coefficient references column {col} but only {cols} columns exist")]
    UnknownColumn { col: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("row {0} of the constraint matrix is all zero")]
    ZeroRow(usize),
    #[error("{0} is not finite")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `a x ≤ rhs`
    Le,
    /// `a x ≥ rhs`
    Ge,
    /// `a x = rhs`
    Eq,
    /// Unconstrained row; dropped on conversion.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub cost: f64,
    /// May be `f64::NEG_INFINITY`.
    pub lower: f64,
    /// May be `f64::INFINITY`.
    pub upper: f64,
}

impl Column {
    /// A column with the default bounds `[0, +∞)`.
    pub fn new(name: impl Into<String>, cost: f64) -> Self {
        Column {
            name: name.into(),
            cost,
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }

    pub fn with_bounds(mut self, lower: f64, upper: f64) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub kind: RowKind,
    pub rhs: f64,
    /// Range width; turns the row into a two-sided constraint.
    pub range: Option<f64>,
}

impl Row {
    pub fn new(name: impl Into<String>, kind: RowKind, rhs: f64) -> Self {
        Row {
            name: name.into(),
            kind,
            rhs,
            range: None,
        }
    }
}

/// A linear program as a user writes it: objective sense, inequality rows,
/// and bounded columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralLP {
    pub name: String,
    pub sense: ObjectiveSense,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
    /// Sparse coefficients as `(row, column, value)`.
    pub coefficients: Vec<(usize, usize, f64)>,
    /// Constant added to the objective.
    pub objective_constant: f64,
}

impl GeneralLP {
    pub fn new(name: impl Into<String>, sense: ObjectiveSense) -> Self {
        GeneralLP {
            name: name.into(),
            sense,
            columns: Vec::new(),
            rows: Vec::new(),
            coefficients: Vec::new(),
            objective_constant: 0.0,
        }
    }

    pub fn add_column(&mut self, column: Column) -> usize {
        self.columns.push(column);
        self.columns.len() - 1
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn set_coefficient(&mut self, row: usize, col: usize, value: f64) {
        self.coefficients.push((row, col, value));
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// Checks the structural invariants: referenced rows/columns exist,
    /// bounds are ordered, names are unique.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.columns.is_empty() {
            return Err(ModelError::Empty("no columns"));
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(ModelError::DuplicateColumn(c.name.clone()));
            }
            if c.lower > c.upper || c.lower.is_nan() || c.upper.is_nan() {
                return Err(ModelError::InfeasibleBounds {
                    name: c.name.clone(),
                    lower: c.lower,
                    upper: c.upper,
                });
            }
        }
        let mut seen = HashSet::new();
        for r in &self.rows {
            if !seen.insert(r.name.as_str()) {
                return Err(ModelError::DuplicateRow(r.name.clone()));
            }
        }
        for &(i, j, _) in &self.coefficients {
            if i >= self.rows.len() {
                return Err(ModelError::UnknownRow {
                    row: i,
                    rows: self.rows.len(),
                });
            }
            if j >= self.columns.len() {
                return Err(ModelError::UnknownColumn {
                    col: j,
                    cols: self.columns.len(),
                });
            }
        }
        Ok(())
    }

    /// Objective value `cᵀx + constant` at an original-space point.
    pub fn objective(&self, x: &[f64]) -> f64 {
        self.columns
            .iter()
            .zip(x)
            .map(|(c, v)| c.cost * v)
            .sum::<f64>()
            + self.objective_constant
    }

    /// Row activities `a_i x` at an original-space point.
    pub fn row_activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.rows.len()];
        for &(i, j, v) in &self.coefficients {
            act[i] += v * x[j];
        }
        act
    }
}

/// `min cᵀx s.t. Ax = b, x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLP {
    a: DenseMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    pub row_names: Vec<String>,
    pub column_names: Vec<String>,
}

impl StandardLP {
    /// Builds a standard-form problem with generated names.
    pub fn new(a: DenseMatrix, b: Vec<f64>, c: Vec<f64>) -> Result<Self, ModelError> {
        let rows = (0..a.rows()).map(|i| format!("R{i}")).collect();
        let cols = (0..a.cols()).map(|j| format!("C{j}")).collect();
        Self::with_names(a, b, c, rows, cols)
    }

    pub fn with_names(
        a: DenseMatrix,
        b: Vec<f64>,
        c: Vec<f64>,
        row_names: Vec<String>,
        column_names: Vec<String>,
    ) -> Result<Self, ModelError> {
        let (m, n) = (a.rows(), a.cols());
        if m == 0 {
            return Err(ModelError::Empty("no constraint rows"));
        }
        if n < m {
            return Err(ModelError::Dimension(format!(
                "need at least as many columns as rows, got {m}x{n}"
            )));
        }
        if b.len() != m || row_names.len() != m {
            return Err(ModelError::Dimension(format!(
                "b has length {}, expected {m}",
                b.len()
            )));
        }
        if c.len() != n || column_names.len() != n {
            return Err(ModelError::Dimension(format!(
                "c has length {}, expected {n}",
                c.len()
            )));
        }
        if a.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("constraint matrix"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("right-hand side"));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("cost vector"));
        }
        if let Some(i) = (0..m).find(|&i| a.row(i).iter().all(|&v| v == 0.0)) {
            return Err(ModelError::ZeroRow(i));
        }
        Ok(StandardLP {
            a,
            b,
            c,
            row_names,
            column_names,
        })
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Number of rows `m`.
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// Number of columns `n`.
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot2(&self.c, x)
    }
}

/// A primal-dual point `(x, y, s)` with its duality measure and residuals.
///
/// The cached quantities are always produced by [`duality_measure`] and
/// [`residuals`], so recomputing them gives bit-identical values.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
    /// Low-order parts: the iterate is `x + x_lo` etc. They are zero unless
    /// the iterate came from a compensated update.
    x_lo: Vec<f64>,
    y_lo: Vec<f64>,
    s_lo: Vec<f64>,
    mu: f64,
    rb: Vec<f64>,
    rc: Vec<f64>,
}

impl Iterate {
    /// Builds an iterate and fills its caches. Does not enforce positivity;
    /// see [`Iterate::is_strictly_positive`].
    pub fn new(p: &StandardLP, x: Vec<f64>, y: Vec<f64>, s: Vec<f64>) -> Self {
        Self::compensated(p, DoubleVec::from_hi(x), DoubleVec::from_hi(y), DoubleVec::from_hi(s))
    }

    /// Builds an iterate whose vectors carry low-order parts. Residuals are
    /// evaluated on the unrounded sums, so updates far below the rounding
    /// unit of `x` still show up in `r_b`.
    pub fn compensated(p: &StandardLP, x: DoubleVec, y: DoubleVec, s: DoubleVec) -> Self {
        assert_eq!(x.len(), p.n(), "x has wrong length");
        assert_eq!(s.len(), p.n(), "s has wrong length");
        assert_eq!(y.len(), p.m(), "y has wrong length");
        let mu = duality_measure(&x.hi, &s.hi);
        let (rb, rc) = residuals_split(p, &x, &y, &s);
        Iterate {
            x: x.hi,
            y: y.hi,
            s: s.hi,
            x_lo: x.lo,
            y_lo: y.lo,
            s_lo: s.lo,
            mu,
            rb,
            rc,
        }
    }

    pub fn x_lo(&self) -> &[f64] {
        &self.x_lo
    }

    pub fn y_lo(&self) -> &[f64] {
        &self.y_lo
    }

    pub fn s_lo(&self) -> &[f64] {
        &self.s_lo
    }

    /// `(x, y, s)` with their low-order parts.
    pub fn split_parts(&self) -> (DoubleVec, DoubleVec, DoubleVec) {
        (
            DoubleVec {
                hi: self.x.clone(),
                lo: self.x_lo.clone(),
            },
            DoubleVec {
                hi: self.y.clone(),
                lo: self.y_lo.clone(),
            },
            DoubleVec {
                hi: self.s.clone(),
                lo: self.s_lo.clone(),
            },
        )
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn rb(&self) -> &[f64] {
        &self.rb
    }

    pub fn rc(&self) -> &[f64] {
        &self.rc
    }

    pub fn norm_rb(&self) -> f64 {
        norm2(&self.rb)
    }

    pub fn norm_rc(&self) -> f64 {
        norm2(&self.rc)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.x.iter().chain(&self.s).all(|&v| v > 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.x.iter().chain(&self.s).all(|&v| v >= 0.0)
    }

    /// Distance from the central path, see [`neighborhood_distance`].
    pub fn neighborhood_distance(&self) -> Option<f64> {
        neighborhood_distance(&self.x, &self.s)
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (self.x, self.y, self.s)
    }
}

/// `r_b = A x − b` and `r_c = Aᵀ y + s − c`, accumulated in compensated
/// arithmetic so that small residuals keep their relative accuracy.
pub fn residuals(p: &StandardLP, x: &[f64], y: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
    residuals_split(
        p,
        &DoubleVec::from_hi(x.to_vec()),
        &DoubleVec::from_hi(y.to_vec()),
        &DoubleVec::from_hi(s.to_vec()),
    )
}

fn residuals_split(
    p: &StandardLP,
    x: &DoubleVec,
    y: &DoubleVec,
    s: &DoubleVec,
) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (p.m(), p.n());
    let rb = (0..m)
        .map(|i| {
            let mut acc = CompensatedSum::new(-p.b[i]);
            for (j, aij) in p.a.row(i).iter().enumerate() {
                acc.add_product(*aij, x.hi[j]);
                acc.add_product(*aij, x.lo[j]);
            }
            acc.value()
        })
        .collect();
    let rc = (0..n)
        .map(|j| {
            let mut acc = CompensatedSum::new(-p.c[j]);
            acc.add(s.hi[j]);
            acc.add(s.lo[j]);
            for i in 0..m {
                acc.add_product(p.a[(i, j)], y.hi[i]);
                acc.add_product(p.a[(i, j)], y.lo[i]);
            }
            acc.value()
        })
        .collect();
    (rb, rc)
}

/// `μ = xᵀs / n`.
pub fn duality_measure(x: &[f64], s: &[f64]) -> f64 {
    assert!(!x.is_empty(), "duality measure needs n >= 1");
    dot2(x, s) / x.len() as f64
}

/// Relative distance `‖x∘s − μe‖ / μ` from the central path. Membership in
/// the neighborhood of radius θ is equivalent to the value being at most θ.
///
/// Returns `None` when `μ = 0`, where the distance is undefined.
pub fn neighborhood_distance(x: &[f64], s: &[f64]) -> Option<f64> {
    let mu = duality_measure(x, s);
    if mu == 0.0 {
        return None;
    }
    let dev: Vec<f64> = hadamard(x, s).into_iter().map(|v| v - mu).collect();
    Some(norm2(&dev) / mu)
}

/// `max(μ, ‖r_b‖, ‖r_c‖)`. Positivity of `(x, s)` is checked separately.
pub fn kkt_error(z: &Iterate) -> f64 {
    z.mu().max(z.norm_rb()).max(z.norm_rc())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> StandardLP {
        StandardLP::new(
            DenseMatrix::from_rows(&[[1.0, 1.0]]),
            vec![2.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn residuals_at_feasible_point() {
        let p = tiny();
        let z = Iterate::new(&p, vec![1.0, 1.0], vec![0.0], vec![1.0, 1.0]);
        assert_eq!(z.rb(), &[0.0]);
        assert_eq!(z.rc(), &[0.0, 0.0]);
    }

    #[test]
    fn residuals_at_infeasible_point() {
        let p = tiny();
        let (rb, _) = residuals(&p, &[2.0, 2.0], &[0.0], &[1.0, 1.0]);
        assert_eq!(rb, vec![2.0]);
    }

    #[test]
    fn duality_measure_examples() {
        assert_eq!(duality_measure(&[1.0; 5], &[1.0; 5]), 1.0);
        assert!((duality_measure(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) - 10.0 / 3.0).abs() < 1e-15);
        assert_eq!(duality_measure(&[1.0, 2.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn neighborhood_distance_examples() {
        assert_eq!(neighborhood_distance(&[1.0; 4], &[1.0; 4]), Some(0.0));
        let d = neighborhood_distance(&[2.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((d - 0.5f64.sqrt() / 1.5).abs() < 1e-15);
        assert!((d - 0.4714).abs() < 1e-4);
        assert_eq!(neighborhood_distance(&[1.0, 2.0], &[0.0, 0.0]), None);
    }

    #[test]
    fn kkt_error_is_max_of_three() {
        let p = tiny();
        let z = Iterate::new(&p, vec![1.0, 1.0], vec![0.0], vec![1.0, 1.0]);
        assert_eq!(kkt_error(&z), 1.0);
        // μ ≈ 1e-9, ‖r_b‖ = 1e-7, ‖r_c‖ = 0
        let p = StandardLP::new(
            DenseMatrix::from_rows(&[[1.0, 1.0]]),
            vec![2.0],
            vec![1e-9, 1e-9],
        )
        .unwrap();
        let z = Iterate::new(&p, vec![1.0, 1.0 + 1e-7], vec![0.0], vec![1e-9, 1e-9]);
        assert_eq!(z.norm_rc(), 0.0);
        assert!((kkt_error(&z) - 1e-7).abs() < 1e-15);
    }

    #[test]
    fn standard_lp_rejects_bad_shapes() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(
            StandardLP::new(a, vec![1.0, 0.0], vec![0.0, 0.0]),
            Err(ModelError::ZeroRow(1))
        );
        let a = DenseMatrix::from_rows(&[[1.0], [1.0]]);
        assert!(matches!(
            StandardLP::new(a, vec![1.0, 1.0], vec![0.0]),
            Err(ModelError::Dimension(_))
        ));
        let a = DenseMatrix::from_rows(&[[1.0, 1.0]]);
        assert!(StandardLP::new(a, vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn general_lp_validation() {
        let mut lp = GeneralLP::new("t", ObjectiveSense::Minimize);
        assert_eq!(lp.validate(), Err(ModelError::Empty("no columns")));
        lp.add_column(Column::new("x", 1.0).with_bounds(2.0, 1.0));
        assert!(matches!(
            lp.validate(),
            Err(ModelError::InfeasibleBounds { ref name, .. }) if name == "x"
        ));
        lp.columns[0].upper = 3.0;
        lp.add_column(Column::new("x", 1.0));
        assert_eq!(lp.validate(), Err(ModelError::DuplicateColumn("x".into())));
        lp.columns[1].name = "y".into();
        lp.set_coefficient(0, 0, 1.0);
        assert!(matches!(lp.validate(), Err(ModelError::UnknownRow { .. })));
    }
}
