//! Arc search along the ellipse that matches the infeasible central path at
//! the current iterate up to second derivatives.
//!
//! The ellipse through `(x, y, s)` is
//!
//! ```txt
//!   x(α) = x − ẋ sin α + ẍ (1 − cos α)
//! ```
//!
//! (same for `y` and `s`), where `(ẋ, ẏ, ṡ)` and `(ẍ, ÿ, s̈)` solve the first-
//! and second-order systems. A step is admissible when the trial point is
//! strictly positive and `‖x(α)∘s(α) − (1 − sin α)μ e‖ ≤ 2θ(1 − sin α)μ`.
//! The quartic `q(sin α)` gives a monotone sufficient condition for the
//! latter, so the largest root of `q ≤ 0` on `[0, 1]` is the step we try
//! first.

use thiserror::Error;

use crate::compensated::DoubleVec;
use crate::dense::{hadamard, norm2};
use crate::linsolve::{solve_kkt_checked, GateReport, KktRhs, LinalgError, ScalingFactorization};
use crate::model::{Iterate, StandardLP};

/// Backtracking factor on `sin α` when the direct check fails.
pub const BACKTRACK_FACTOR: f64 = 0.9;
pub const MAX_BACKTRACKS: usize = 50;

const BISECTION_MAX_ITERS: usize = 60;
const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArcError {
    #[error("stalled arc search: no admissible step after {backtracks} backtracks (last sin α = {last_sin:e}, last violation {violation:e})")]
    Stalled {
        backtracks: usize,
        last_sin: f64,
        violation: f64,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// First and second derivatives of the central-path curve at the iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcDerivatives {
    pub xdot: Vec<f64>,
    pub ydot: Vec<f64>,
    pub sdot: Vec<f64>,
    pub xddot: Vec<f64>,
    pub yddot: Vec<f64>,
    pub sddot: Vec<f64>,
}

/// Residual-gate outcomes of the two derivative solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeGates {
    pub first: GateReport,
    pub second: GateReport,
}

/// Solves the first-order system with right-hand side `(r_b, r_c, x∘s)` and
/// then the second-order one with `(0, 0, −2ẋ∘ṡ)`, reusing one factorization.
pub fn compute_derivatives(
    p: &StandardLP,
    z: &Iterate,
    f: &ScalingFactorization,
) -> Result<(ArcDerivatives, DerivativeGates), LinalgError> {
    let a = p.a();
    let (x, s) = (z.x(), z.s());
    let rhs1 = KktRhs::new(z.rb().to_vec(), z.rc().to_vec(), hadamard(x, s));
    let (first, g1) = solve_kkt_checked(f, a, x, s, &rhs1)?;
    let r2: Vec<f64> = hadamard(&first.dx, &first.ds)
        .into_iter()
        .map(|v| -2.0 * v)
        .collect();
    let rhs2 = KktRhs::complementarity(p.m(), r2);
    let (second, g2) = solve_kkt_checked(f, a, x, s, &rhs2)?;
    Ok((
        ArcDerivatives {
            xdot: first.dx,
            ydot: first.dy,
            sdot: first.ds,
            xddot: second.dx,
            yddot: second.dy,
            sddot: second.ds,
        },
        DerivativeGates {
            first: g1,
            second: g2,
        },
    ))
}

/// `sin α` and `1 − cos α` for an angle in `(0, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcAngle {
    pub sin: f64,
    pub one_minus_cos: f64,
}

impl ArcAngle {
    pub fn from_angle(alpha: f64) -> Self {
        let h = (0.5 * alpha).sin();
        ArcAngle {
            sin: alpha.sin(),
            one_minus_cos: 2.0 * h * h,
        }
    }

    /// From `σ = sin α ∈ [0, 1]`, taking `α ∈ [0, π/2]`.
    pub fn from_sin(sin: f64) -> Self {
        let cos = ((1.0 - sin) * (1.0 + sin)).max(0.0).sqrt();
        ArcAngle {
            sin,
            one_minus_cos: sin * sin / (1.0 + cos),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.sin.asin()
    }
}

/// A point on the ellipse. No positivity guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// Low-order parts of `x`, `y`, `s` (see [`DoubleVec`]).
    pub lo: [Vec<f64>; 3],
}

impl TrialPoint {
    /// A point with no low-order parts.
    pub fn new(x: Vec<f64>, y: Vec<f64>, s: Vec<f64>) -> Self {
        let lo = [vec![0.0; x.len()], vec![0.0; y.len()], vec![0.0; s.len()]];
        TrialPoint { x, y, s, lo }
    }

    /// The point plus `(dx, dy, ds)`, as an iterate of `p`.
    pub fn advanced(&self, p: &StandardLP, dx: &[f64], dy: &[f64], ds: &[f64]) -> Iterate {
        let [xl, yl, sl] = self.lo.clone();
        let part = |hi: &Vec<f64>, lo: Vec<f64>, d: &[f64]| {
            DoubleVec {
                hi: hi.clone(),
                lo,
            }
            .add_scaled(1.0, d)
        };
        Iterate::compensated(
            p,
            part(&self.x, xl, dx),
            part(&self.y, yl, dy),
            part(&self.s, sl, ds),
        )
    }

    /// The point itself as an iterate of `p`.
    pub fn to_iterate(&self, p: &StandardLP) -> Iterate {
        let [xl, yl, sl] = self.lo.clone();
        Iterate::compensated(
            p,
            DoubleVec::normalized(self.x.clone(), xl),
            DoubleVec::normalized(self.y.clone(), yl),
            DoubleVec::normalized(self.s.clone(), sl),
        )
    }
}

fn along(v: &[f64], v_lo: &[f64], d1: &[f64], d2: &[f64], angle: ArcAngle) -> DoubleVec {
    DoubleVec {
        hi: v.to_vec(),
        lo: v_lo.to_vec(),
    }
    .add_scaled(-angle.sin, d1)
    .add_scaled(angle.one_minus_cos, d2)
}

/// Evaluates the ellipse at `angle`.
pub fn ellipse_point(z: &Iterate, d: &ArcDerivatives, angle: ArcAngle) -> TrialPoint {
    let x = along(z.x(), z.x_lo(), &d.xdot, &d.xddot, angle);
    let y = along(z.y(), z.y_lo(), &d.ydot, &d.yddot, angle);
    let s = along(z.s(), z.s_lo(), &d.sdot, &d.sddot, angle);
    TrialPoint {
        x: x.hi,
        y: y.hi,
        s: s.hi,
        lo: [x.lo, y.lo, s.lo],
    }
}

/// Norms of the four Hadamard products that enter the quartic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HadamardNorms {
    /// `‖ẋ∘ṡ‖`
    pub first_first: f64,
    /// `‖ẍ∘s̈‖`
    pub second_second: f64,
    /// `‖ẋ∘s̈‖`
    pub first_second: f64,
    /// `‖ẍ∘ṡ‖`
    pub second_first: f64,
}

impl HadamardNorms {
    pub fn of(d: &ArcDerivatives) -> Self {
        HadamardNorms {
            first_first: norm2(&hadamard(&d.xdot, &d.sdot)),
            second_second: norm2(&hadamard(&d.xddot, &d.sddot)),
            first_second: norm2(&hadamard(&d.xdot, &d.sddot)),
            second_first: norm2(&hadamard(&d.xddot, &d.sdot)),
        }
    }
}

/// `q(σ) = a4 σ⁴ + a3 σ³ + a1 σ + a0` with `σ = sin α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCondition {
    pub a4: f64,
    pub a3: f64,
    pub a1: f64,
    pub a0: f64,
}

impl QuarticCondition {
    pub fn from_norms(norms: &HadamardNorms, theta: f64, mu: f64) -> Self {
        QuarticCondition {
            a4: norms.second_second + norms.first_first,
            a3: norms.first_second + norms.second_first,
            a1: theta * mu,
            a0: -theta * mu,
        }
    }

    pub fn eval(&self, sigma: f64) -> f64 {
        ((self.a4 * sigma + self.a3) * sigma * sigma + self.a1) * sigma + self.a0
    }
}

/// Builds the step condition from fresh Hadamard products.
pub fn build_quartic(d: &ArcDerivatives, theta: f64, mu: f64) -> QuarticCondition {
    QuarticCondition::from_norms(&HadamardNorms::of(d), theta, mu)
}

/// Largest `σ ∈ (0, 1]` with `q(σ) ≤ 0`.
///
/// `q` is strictly increasing on `[0, 1]` with `q(0) < 0`, so bisection on
/// `[0, 1]` keeps `q(lo) ≤ 0 < q(hi)` and returns `lo`.
pub fn max_step(qc: &QuarticCondition) -> f64 {
    if qc.eval(1.0) <= 0.0 {
        return 1.0;
    }
    let target = 1e-10 * qc.a1;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q = qc.eval(mid);
        if q <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_TOL && qc.eval(lo).abs() <= target {
            break;
        }
    }
    lo
}

/// Lower bound `θ / (2Ĉn)` on `sin α` with `Ĉ` estimated from the observed
/// Hadamard norms. Diagnostic only.
pub fn step_lower_bound(norms: &HadamardNorms, theta: f64, mu: f64, n: usize) -> f64 {
    let n = n as f64;
    let c1 = norms.first_first / (n * n * mu);
    let c2 = norms.second_second / (n.powi(4) * mu);
    let c4 = norms.first_second.max(norms.second_first) / (n.powi(3) * mu);
    let c = 1f64.max(c4.cbrt()).max((c1 + c2).powf(0.25));
    theta / (2.0 * c * n)
}

/// Accepted point on the arc.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleStep {
    pub angle: ArcAngle,
    pub trial: TrialPoint,
    pub backtracks: usize,
    /// `sin α = 1` and the trial point is an exact complementary solution
    /// (nonnegative, all products zero). No corrector is needed.
    pub exact: bool,
    /// `‖x(α)∘s(α) − (1 − sin α)μ e‖` at the accepted point.
    pub arc_deviation: f64,
}

/// Left-hand side of the arc condition.
pub fn arc_deviation(trial: &TrialPoint, sin: f64, mu: f64) -> f64 {
    let target = (1.0 - sin) * mu;
    let dev: Vec<f64> = hadamard(&trial.x, &trial.s)
        .into_iter()
        .map(|v| v - target)
        .collect();
    norm2(&dev)
}

/// Verifies positivity and the arc condition directly at `sigma0`, shrinking
/// `sin α` by [`BACKTRACK_FACTOR`] on failure.
pub fn admissible_step(
    z: &Iterate,
    d: &ArcDerivatives,
    theta: f64,
    sigma0: f64,
) -> Result<AdmissibleStep, ArcError> {
    let mu = z.mu();
    let mut sigma = sigma0;
    let mut violation = f64::NAN;
    for backtracks in 0..=MAX_BACKTRACKS {
        let angle = ArcAngle::from_sin(sigma);
        let trial = ellipse_point(z, d, angle);
        let dev = arc_deviation(&trial, sigma, mu);
        let bound = 2.0 * theta * (1.0 - sigma) * mu;
        let positive = trial.x.iter().chain(&trial.s).all(|&v| v > 0.0);
        if positive && dev <= bound {
            return Ok(AdmissibleStep {
                angle,
                trial,
                backtracks,
                exact: false,
                arc_deviation: dev,
            });
        }
        if sigma == 1.0 && dev == 0.0 && trial.x.iter().chain(&trial.s).all(|&v| v >= 0.0) {
            return Ok(AdmissibleStep {
                angle,
                trial,
                backtracks,
                exact: true,
                arc_deviation: dev,
            });
        }
        violation = if positive { dev - bound } else { f64::INFINITY };
        sigma *= BACKTRACK_FACTOR;
    }
    Err(ArcError::Stalled {
        backtracks: MAX_BACKTRACKS,
        last_sin: sigma / BACKTRACK_FACTOR,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::linsolve::factor;

    fn hand_instance() -> (StandardLP, Iterate) {
        let p = StandardLP::new(
            DenseMatrix::from_rows(&[[1.0, 1.0]]),
            vec![2.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let z = Iterate::new(&p, vec![1.0, 1.0], vec![0.0], vec![1.0, 1.0]);
        (p, z)
    }

    /// Scalar bisection written independently of `max_step`.
    fn bisect_root(f: impl Fn(f64) -> f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if f(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        lo
    }

    #[test]
    fn hand_derivatives() {
        let (p, z) = hand_instance();
        let f = factor(p.a(), z.x(), z.s()).unwrap();
        let (d, gates) = compute_derivatives(&p, &z, &f).unwrap();
        assert!(gates.first.clean && gates.second.clean);
        for (got, want) in [
            (&d.xdot, vec![0.0, 0.0]),
            (&d.ydot, vec![-1.0]),
            (&d.sdot, vec![1.0, 1.0]),
            (&d.xddot, vec![0.0, 0.0]),
            (&d.yddot, vec![0.0]),
            (&d.sddot, vec![0.0, 0.0]),
        ] {
            assert!(got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-15), "{got:?}");
        }
    }

    #[test]
    fn ellipse_endpoints() {
        let (p, z) = hand_instance();
        let f = factor(p.a(), z.x(), z.s()).unwrap();
        let (d, _) = compute_derivatives(&p, &z, &f).unwrap();
        let start = ellipse_point(&z, &d, ArcAngle::from_angle(0.0));
        assert_eq!(start.x, z.x());
        assert_eq!(start.s, z.s());
        let end = ellipse_point(&z, &d, ArcAngle::from_angle(std::f64::consts::FRAC_PI_2));
        assert_eq!(end.x, vec![1.0, 1.0]);
        assert_eq!(end.s, vec![0.0, 0.0]);
        assert_eq!(end.y, vec![1.0]);
    }

    #[test]
    fn angle_conversions_agree() {
        for &a in &[1e-6, 0.1, 0.7, 1.3, std::f64::consts::FRAC_PI_2] {
            let u = ArcAngle::from_angle(a);
            let v = ArcAngle::from_sin(a.sin());
            assert!((u.sin - v.sin).abs() < 1e-15);
            assert!((u.one_minus_cos - v.one_minus_cos).abs() < 1e-12);
            assert!((v.alpha() - a).abs() < 1e-7);
        }
    }

    #[test]
    fn degenerate_quartic_is_linear() {
        let qc = QuarticCondition::from_norms(
            &HadamardNorms {
                first_first: 0.0,
                second_second: 0.0,
                first_second: 0.0,
                second_first: 0.0,
            },
            0.25,
            2.0,
        );
        assert_eq!(qc.eval(0.0), -0.5);
        assert_eq!(qc.eval(1.0), 0.0);
        assert_eq!(max_step(&qc), 1.0);
    }

    #[test]
    fn quartic_fixture_root() {
        let qc = QuarticCondition {
            a4: 1.0,
            a3: 0.0,
            a1: 1.0,
            a0: -1.0,
        };
        let oracle = bisect_root(|t| t.powi(4) + t - 1.0);
        assert!((oracle - 0.724492).abs() < 1e-6);
        let root = max_step(&qc);
        assert!((root - oracle).abs() < 1e-12);
        assert!(qc.eval(root).abs() <= 1e-10);
    }

    #[test]
    fn hand_step_is_exact() {
        let (p, z) = hand_instance();
        let f = factor(p.a(), z.x(), z.s()).unwrap();
        let (d, _) = compute_derivatives(&p, &z, &f).unwrap();
        let theta = 1.0 / (2.0 + 2f64.sqrt());
        let qc = build_quartic(&d, theta, z.mu());
        let sigma = max_step(&qc);
        assert_eq!(sigma, 1.0);
        let step = admissible_step(&z, &d, theta, sigma).unwrap();
        assert!(step.exact);
        assert_eq!(step.backtracks, 0);
    }

    #[test]
    fn backtracks_on_positivity_failure() {
        // Derivatives that drive x negative for large steps.
        let (_, z) = hand_instance();
        let d = ArcDerivatives {
            xdot: vec![1.5, 0.0],
            ydot: vec![0.0],
            sdot: vec![0.0, 0.0],
            xddot: vec![0.0, 0.0],
            yddot: vec![0.0],
            sddot: vec![0.0, 0.0],
        };
        match admissible_step(&z, &d, 0.29, 1.0) {
            Ok(step) => {
                assert!(step.backtracks > 0);
                assert!(step.trial.x.iter().all(|&v| v > 0.0));
            }
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn stall_reported() {
        let (_, z) = hand_instance();
        let d = ArcDerivatives {
            xdot: vec![1e30, 0.0],
            ydot: vec![0.0],
            sdot: vec![0.0, 0.0],
            xddot: vec![0.0, 0.0],
            yddot: vec![0.0],
            sddot: vec![0.0, 0.0],
        };
        assert!(matches!(
            admissible_step(&z, &d, 0.29, 1.0),
            Err(ArcError::Stalled { backtracks: 50, .. })
        ));
    }
}
