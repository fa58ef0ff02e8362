//! Normal-equations solver for the structured systems
//!
//! ```txt
//!   [ A   0   0 ] [dx]   [p]
//!   [ 0   Aᵀ  I ] [dy] = [q]
//!   [ S   0   X ] [ds]   [r]
//! ```
//!
//! by block elimination onto `M = A D² Aᵀ` with `D² = X S⁻¹`, plus a dense
//! Gaussian-elimination oracle on the unreduced system for testing.

use thiserror::Error;

use crate::compensated::CompensatedSum;
use crate::dense::{add, norm2, DenseMatrix};

/// A pivot at or below this fraction of the largest diagonal entry is treated
/// as a rank-deficient normal matrix.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

/// Stand-in for a dropped pivot: large enough that the matching component
/// of the solution is zero to working precision.
const DROPPED_PIVOT: f64 = 1e64;

/// What the factorization does with a pivot at or below the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotPolicy {
    /// Fail with [`LinalgError::SingularNormalMatrix`].
    #[default]
    Strict,
    /// Drop the pivot: its row and column of `L` are replaced by a huge
    /// diagonal, which zeroes that component of every normal-equations
    /// solve. Meant for the ill-conditioning of degenerate problems near
    /// convergence, after `A` has been seen to have full row rank.
    Drop,
}

/// Block residuals above `GATE_STRICT · (1 + ‖rhs‖)` are flagged.
pub const GATE_STRICT: f64 = 1e-8;

/// Block residuals above `GATE_FATAL · (1 + ‖rhs‖)` abort the solve.
pub const GATE_FATAL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("rank-deficient or numerically singular normal matrix (pivot {index}: {pivot:e})")]
    SingularNormalMatrix { index: usize, pivot: f64 },
    #[error("scaling vectors must be strictly positive (index {0})")]
    NonPositiveScaling(usize),
    #[error("singular KKT matrix at column {0}")]
    SingularKkt(usize),
    #[error("KKT solve inaccurate: block residual {residual:e} exceeds {limit:e}")]
    Inaccurate { residual: f64, limit: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = M`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
    dropped: Vec<usize>,
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix. Only the lower triangle
    /// of `m` is read.
    pub fn factor(m: &DenseMatrix) -> Result<Self, LinalgError> {
        Self::factor_with_tolerance(m, PIVOT_TOLERANCE)
    }

    pub fn factor_with_tolerance(m: &DenseMatrix, tol: f64) -> Result<Self, LinalgError> {
        Self::factor_with_policy(m, tol, PivotPolicy::Strict)
    }

    pub fn factor_with_policy(
        m: &DenseMatrix,
        tol: f64,
        policy: PivotPolicy,
    ) -> Result<Self, LinalgError> {
        let n = m.rows();
        assert_eq!(n, m.cols(), "Cholesky needs a square matrix");
        let max_diag = (0..n).fold(0.0_f64, |acc, i| acc.max(m[(i, i)].abs()));
        let threshold = tol * max_diag;
        let mut l = DenseMatrix::zeros(n, n);
        let mut dropped = Vec::new();
        for j in 0..n {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > threshold) || max_diag == 0.0 {
                if policy == PivotPolicy::Strict || max_diag == 0.0 || d.is_nan() {
                    return Err(LinalgError::SingularNormalMatrix { index: j, pivot: d });
                }
                l[(j, j)] = DROPPED_PIVOT;
                dropped.push(j);
                continue;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut v = m[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        Ok(Cholesky { l, dropped })
    }

    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    /// Indices of pivots dropped under [`PivotPolicy::Drop`].
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    /// Solves `L Lᵀ x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.l[(i, k)] * x[k];
            }
            x[i] = v / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in i + 1..n {
                v -= self.l[(k, i)] * x[k];
            }
            x[i] = v / self.l[(i, i)];
        }
        x
    }
}

/// Right-hand side `(p, q, r)` of the three-block system.
#[derive(Debug, Clone, PartialEq)]
pub struct KktRhs {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
}

impl KktRhs {
    pub fn new(p: Vec<f64>, q: Vec<f64>, r: Vec<f64>) -> Self {
        KktRhs { p, q, r }
    }

    /// Only the third block is nonzero.
    pub fn complementarity(m: usize, r: Vec<f64>) -> Self {
        let n = r.len();
        KktRhs {
            p: vec![0.0; m],
            q: vec![0.0; n],
            r,
        }
    }

    pub fn norm(&self) -> f64 {
        let (a, b, c) = (norm2(&self.p), norm2(&self.q), norm2(&self.r));
        (a * a + b * b + c * c).sqrt()
    }
}

/// Solution `(dx, dy, ds)` of the three-block system.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub ds: Vec<f64>,
}

/// Block residual norms `‖A dx − p‖`, `‖Aᵀdy + ds − q‖`, `‖S dx + X ds − r‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockResiduals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl BlockResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

pub fn block_residuals(
    a: &DenseMatrix,
    x: &[f64],
    s: &[f64],
    rhs: &KktRhs,
    sol: &KktSolution,
) -> BlockResiduals {
    let r = residual_blocks(a, x, s, rhs, sol);
    BlockResiduals {
        primal: norm2(&r.p),
        dual: norm2(&r.q),
        complementarity: norm2(&r.r),
    }
}

/// Cholesky factor of `A D² Aᵀ` at a fixed `(x, s)`, reusable for any number
/// of right-hand sides.
#[derive(Debug, Clone)]
pub struct ScalingFactorization {
    d2: Vec<f64>,
    normal: DenseMatrix,
    chol: Cholesky,
}

impl ScalingFactorization {
    /// Diagonal of `D² = X S⁻¹`.
    pub fn d2(&self) -> &[f64] {
        &self.d2
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    /// `M = A D² Aᵀ`
    pub fn normal(&self) -> &DenseMatrix {
        &self.normal
    }

    /// Solves `M v = rhs` with one step of iterative refinement.
    pub fn solve_normal(&self, rhs: &[f64]) -> Vec<f64> {
        let mut v = self.chol.solve(rhs);
        let mv = self.normal.mul_vec(&v);
        let resid: Vec<f64> = rhs.iter().zip(&mv).map(|(r, u)| r - u).collect();
        for (vi, ci) in v.iter_mut().zip(self.chol.solve(&resid)) {
            *vi += ci;
        }
        v
    }
}

/// Normal matrix `A diag(d2) Aᵀ`.
pub fn normal_matrix(a: &DenseMatrix, d2: &[f64]) -> DenseMatrix {
    let m = a.rows();
    let mut out = DenseMatrix::zeros(m, m);
    for i in 0..m {
        let ri = a.row(i);
        for j in 0..=i {
            let rj = a.row(j);
            let v: f64 = ri
                .iter()
                .zip(rj)
                .zip(d2)
                .map(|((u, w), d)| u * d * w)
                .sum();
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Factors `A diag(x/s) Aᵀ`.
pub fn factor(a: &DenseMatrix, x: &[f64], s: &[f64]) -> Result<ScalingFactorization, LinalgError> {
    factor_with_policy(a, x, s, PivotPolicy::Strict)
}

/// [`factor`] with an explicit treatment of tiny pivots.
pub fn factor_with_policy(
    a: &DenseMatrix,
    x: &[f64],
    s: &[f64],
    policy: PivotPolicy,
) -> Result<ScalingFactorization, LinalgError> {
    if x.len() != a.cols() || s.len() != a.cols() {
        return Err(LinalgError::Dimension(format!(
            "A has {} columns but x, s have lengths {}, {}",
            a.cols(),
            x.len(),
            s.len()
        )));
    }
    if let Some(i) = (0..x.len()).find(|&i| !(x[i] > 0.0 && s[i] > 0.0)) {
        return Err(LinalgError::NonPositiveScaling(i));
    }
    let d2: Vec<f64> = x.iter().zip(s).map(|(xi, si)| xi / si).collect();
    let normal = normal_matrix(a, &d2);
    let chol = Cholesky::factor_with_policy(&normal, PIVOT_TOLERANCE, policy)?;
    Ok(ScalingFactorization { d2, normal, chol })
}

/// Block elimination:
/// `M dy = p + A D² q − A S⁻¹ r`, `ds = q − Aᵀdy`, `dx = S⁻¹(r − X ds)`.
///
/// The last line is algebraically `D²(Aᵀdy − q) + S⁻¹r`. The normal
/// equations get one refinement step inside each elimination.
fn eliminate(
    f: &ScalingFactorization,
    a: &DenseMatrix,
    x: &[f64],
    s: &[f64],
    rhs: &KktRhs,
) -> KktSolution {
    let n = a.cols();
    let t: Vec<f64> = (0..n)
        .map(|i| f.d2[i] * rhs.q[i] - rhs.r[i] / s[i])
        .collect();
    let mut w = a.mul_vec(&t);
    for (wi, pi) in w.iter_mut().zip(&rhs.p) {
        *wi += pi;
    }
    let dy = f.solve_normal(&w);
    let atdy = a.tr_mul_vec(&dy);
    let ds: Vec<f64> = rhs.q.iter().zip(&atdy).map(|(q, v)| q - v).collect();
    let dx: Vec<f64> = (0..n).map(|i| (rhs.r[i] - x[i] * ds[i]) / s[i]).collect();
    KktSolution { dx, dy, ds }
}

/// `rhs − K sol` for all three blocks, with compensated accumulation.
pub fn residual_blocks(
    a: &DenseMatrix,
    x: &[f64],
    s: &[f64],
    rhs: &KktRhs,
    sol: &KktSolution,
) -> KktRhs {
    let (m, n) = (a.rows(), a.cols());
    let p = (0..m)
        .map(|i| {
            let mut acc = CompensatedSum::new(rhs.p[i]);
            for (aij, dxj) in a.row(i).iter().zip(&sol.dx) {
                acc.add_product(-aij, *dxj);
            }
            acc.value()
        })
        .collect();
    let q = (0..n)
        .map(|j| {
            let mut acc = CompensatedSum::new(rhs.q[j]);
            acc.add(-sol.ds[j]);
            for i in 0..m {
                acc.add_product(-a[(i, j)], sol.dy[i]);
            }
            acc.value()
        })
        .collect();
    let r = (0..n)
        .map(|j| {
            let mut acc = CompensatedSum::new(rhs.r[j]);
            acc.add_product(-s[j], sol.dx[j]);
            acc.add_product(-x[j], sol.ds[j]);
            acc.value()
        })
        .collect();
    KktRhs { p, q, r }
}

/// Refinement passes on the full system after the first elimination.
pub const KKT_REFINEMENT_STEPS: usize = 2;

/// Solves the structured system by block elimination followed by iterative
/// refinement on all three blocks. Refinement stops once a pass fails to
/// reduce the residual.
pub fn solve_kkt(
    f: &ScalingFactorization,
    a: &DenseMatrix,
    x: &[f64],
    s: &[f64],
    rhs: &KktRhs,
) -> KktSolution {
    let n = a.cols();
    assert_eq!(rhs.p.len(), a.rows());
    assert_eq!(rhs.q.len(), n);
    assert_eq!(rhs.r.len(), n);
    let mut sol = eliminate(f, a, x, s, rhs);
    let mut resid = residual_blocks(a, x, s, rhs, &sol);
    let mut size = resid.norm();
    for _ in 0..KKT_REFINEMENT_STEPS {
        if !(size > 0.0) {
            break;
        }
        let c = eliminate(f, a, x, s, &resid);
        let cand = KktSolution {
            dx: add(&sol.dx, &c.dx),
            dy: add(&sol.dy, &c.dy),
            ds: add(&sol.ds, &c.ds),
        };
        let cand_resid = residual_blocks(a, x, s, rhs, &cand);
        let cand_size = cand_resid.norm();
        if !(cand_size < size) {
            break;
        }
        sol = cand;
        resid = cand_resid;
        size = cand_size;
    }
    sol
}

/// Outcome of the residual gate applied after a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateReport {
    pub residuals: BlockResiduals,
    /// Relative to `1 + ‖rhs‖`.
    pub relative: f64,
    /// Within the strict tolerance.
    pub clean: bool,
}

/// Solves and checks the block residuals. Residuals between the strict and
/// fatal gates are reported as not clean; above the fatal gate the solve
/// fails.
pub fn solve_kkt_checked(
    f: &ScalingFactorization,
    a: &DenseMatrix,
    x: &[f64],
    s: &[f64],
    rhs: &KktRhs,
) -> Result<(KktSolution, GateReport), LinalgError> {
    let sol = solve_kkt(f, a, x, s, rhs);
    let residuals = block_residuals(a, x, s, rhs, &sol);
    let scale = 1.0 + rhs.norm();
    let relative = residuals.max() / scale;
    if !(relative <= GATE_FATAL) {
        return Err(LinalgError::Inaccurate {
            residual: residuals.max(),
            limit: GATE_FATAL * scale,
        });
    }
    let report = GateReport {
        residuals,
        relative,
        clean: relative <= GATE_STRICT,
    };
    if !report.clean {
        log::warn!("KKT block residual {relative:e} above strict gate {GATE_STRICT:e}");
    }
    Ok((sol, report))
}

/// Assembles the full `(2n+m)×(2n+m)` matrix and solves it by Gaussian
/// elimination with partial pivoting. Test oracle for [`solve_kkt`].
pub fn oracle_solve_dense(
    a: &DenseMatrix,
    x: &[f64],
    s: &[f64],
    rhs: &KktRhs,
) -> Result<KktSolution, LinalgError> {
    let (m, n) = (a.rows(), a.cols());
    let size = 2 * n + m;
    let mut k = DenseMatrix::zeros(size, size);
    // Unknown order: dx (0..n), dy (n..n+m), ds (n+m..2n+m).
    for i in 0..m {
        for j in 0..n {
            k[(i, j)] = a[(i, j)];
        }
    }
    for j in 0..n {
        for i in 0..m {
            k[(m + j, n + i)] = a[(i, j)];
        }
        k[(m + j, n + m + j)] = 1.0;
        k[(m + n + j, j)] = s[j];
        k[(m + n + j, n + m + j)] = x[j];
    }
    let mut b: Vec<f64> = rhs
        .p
        .iter()
        .chain(&rhs.q)
        .chain(&rhs.r)
        .copied()
        .collect();
    let sol = gaussian_elimination(&mut k, &mut b)?;
    Ok(KktSolution {
        dx: sol[..n].to_vec(),
        dy: sol[n..n + m].to_vec(),
        ds: sol[n + m..].to_vec(),
    })
}

/// In-place Gaussian elimination with partial pivoting.
pub fn gaussian_elimination(k: &mut DenseMatrix, b: &mut [f64]) -> Result<Vec<f64>, LinalgError> {
    let size = k.rows();
    for col in 0..size {
        let (piv, pmax) = (col..size)
            .map(|r| (r, k[(r, col)].abs()))
            .fold((col, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if !(pmax > 0.0 && pmax.is_finite()) {
            return Err(LinalgError::SingularKkt(col));
        }
        if piv != col {
            for j in 0..size {
                let tmp = k[(col, j)];
                k[(col, j)] = k[(piv, j)];
                k[(piv, j)] = tmp;
            }
            b.swap(col, piv);
        }
        let d = k[(col, col)];
        for r in col + 1..size {
            let factor = k[(r, col)] / d;
            if factor == 0.0 {
                continue;
            }
            for j in col..size {
                k[(r, j)] -= factor * k[(col, j)];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut out = vec![0.0; size];
    for i in (0..size).rev() {
        let mut v = b[i];
        for j in i + 1..size {
            v -= k[(i, j)] * out[j];
        }
        out[i] = v / k[(i, i)];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(u, v)| (u - v).abs() <= tol)
    }

    #[test]
    fn identity_factor() {
        let a = DenseMatrix::identity(3);
        let f = factor(&a, &[1.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(f.cholesky().l(), &DenseMatrix::identity(3));
    }

    #[test]
    fn single_row_factor() {
        let a = DenseMatrix::from_rows(&[[1.0, 1.0]]);
        let f = factor(&a, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((f.cholesky().l()[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn duplicated_row_fails_at_pivot() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]);
        match factor(&a, &[1.0; 3], &[1.0; 3]) {
            Err(LinalgError::SingularNormalMatrix { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dropped_pivot_zeroes_its_component() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]);
        let f = factor_with_policy(&a, &[1.0; 3], &[1.0; 3], PivotPolicy::Drop).unwrap();
        assert_eq!(f.cholesky().dropped(), &[1]);
        let v = f.cholesky().solve(&[14.0, 14.0]);
        assert!((v[0] - 1.0).abs() <= 1e-14 && v[1].abs() <= 1e-60, "{v:?}");
        let zero = DenseMatrix::zeros(1, 1);
        assert!(Cholesky::factor_with_policy(&zero, PIVOT_TOLERANCE, PivotPolicy::Drop).is_err());
    }

    #[test]
    fn non_positive_scaling_rejected() {
        let a = DenseMatrix::from_rows(&[[1.0, 1.0]]);
        assert_eq!(
            factor(&a, &[1.0, 0.0], &[1.0, 1.0]).unwrap_err(),
            LinalgError::NonPositiveScaling(1)
        );
    }

    #[test]
    fn hand_solved_system() {
        // dx1 + dx2 = 0, dy + ds_i = 0, dx_i + ds_i = 1  =>  dy = −1
        let a = DenseMatrix::from_rows(&[[1.0, 1.0]]);
        let (x, s) = ([1.0, 1.0], [1.0, 1.0]);
        let f = factor(&a, &x, &s).unwrap();
        let rhs = KktRhs::new(vec![0.0], vec![0.0, 0.0], vec![1.0, 1.0]);
        let sol = solve_kkt(&f, &a, &x, &s, &rhs);
        assert!(close(&sol.dx, &[0.0, 0.0], 1e-15));
        assert!(close(&sol.dy, &[-1.0], 1e-15));
        assert!(close(&sol.ds, &[1.0, 1.0], 1e-15));
        let oracle = oracle_solve_dense(&a, &x, &s, &rhs).unwrap();
        assert!(close(&oracle.dx, &sol.dx, 1e-14));
        assert!(close(&oracle.dy, &sol.dy, 1e-14));
        assert!(close(&oracle.ds, &sol.ds, 1e-14));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 0.5], [0.0, 1.0, -1.0]]);
        let (x, s) = ([1.0, 2.0, 0.5], [0.3, 1.0, 4.0]);
        let f = factor(&a, &x, &s).unwrap();
        let rhs = KktRhs::new(vec![0.0; 2], vec![0.0; 3], vec![0.0; 3]);
        let sol = solve_kkt(&f, &a, &x, &s, &rhs);
        assert!(sol.dx.iter().chain(&sol.dy).chain(&sol.ds).all(|&v| v == 0.0));
        let o = oracle_solve_dense(&a, &x, &s, &rhs).unwrap();
        assert!(o.dx.iter().chain(&o.dy).chain(&o.ds).all(|&v| v == 0.0));
    }

    #[test]
    fn checked_solve_passes_gate() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0, 0.5], [0.0, 1.0, -1.0]]);
        let (x, s) = ([1.0, 2.0, 0.5], [0.3, 1.0, 4.0]);
        let f = factor(&a, &x, &s).unwrap();
        let rhs = KktRhs::new(vec![1.0, -2.0], vec![0.5, 0.0, 1.0], vec![1.0, 1.0, 3.0]);
        let (_, gate) = solve_kkt_checked(&f, &a, &x, &s, &rhs).unwrap();
        assert!(gate.clean);
        assert!(gate.relative < 1e-14);
    }

    #[test]
    fn singular_full_matrix_detected() {
        let mut k = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        let mut b = [1.0, 1.0];
        assert!(gaussian_elimination(&mut k, &mut b).is_err());
    }
}
