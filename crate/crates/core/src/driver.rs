//! The predictor-corrector loop.
//!
//! Each pass factors the normal matrix at the current iterate, computes the
//! arc derivatives, takes the largest admissible step along the ellipse, and
//! recenters with one Newton step toward `(1 − sin α)μ e` at the trial point.
//! Residuals and the duality measure all shrink by exactly `1 − sin α`.

use std::fmt;

use log::{debug, info, warn};
use thiserror::Error;

use crate::arc::{
    admissible_step, build_quartic, compute_derivatives, max_step, step_lower_bound, ArcError,
    HadamardNorms, TrialPoint,
};
use crate::dense::{dot, hadamard, norm2, norm_inf};
use crate::linsolve::{
    factor_with_policy, solve_kkt_checked, GateReport, KktRhs, KktSolution, LinalgError,
    PivotPolicy,
};
use crate::model::{Iterate, StandardLP};

/// Largest neighborhood radius for which the corrector provably recenters.
pub const THETA_MAX: f64 = 0.292_893_218_813_452_5; // 1 / (2 + √2)

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScale {
    /// `ζ = max(1, ‖b‖∞, ‖c‖∞)`
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub theta: f64,
    pub epsilon: f64,
    /// Number of steps allowed. Zero still performs one termination check.
    pub max_iterations: usize,
    pub init_scale: InitScale,
    /// Scale the residual tolerances by `1 + ‖b‖` and `1 + ‖c‖`.
    pub relative_tolerance: bool,
    /// Keep full iterates, trial points and corrector data per iteration.
    pub record_snapshots: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            theta: THETA_MAX,
            epsilon: 1e-8,
            max_iterations: 500,
            init_scale: InitScale::Auto,
            relative_tolerance: false,
            record_snapshots: false,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptionsError {
    #[error("theta must lie in (0, 1/(2+sqrt 2)], got {0}")]
    Theta(f64),
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("init scale must be positive, got {0}")]
    InitScale(f64),
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), OptionsError> {
        if !(self.theta > 0.0 && self.theta <= THETA_MAX) {
            return Err(OptionsError::Theta(self.theta));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(OptionsError::Epsilon(self.epsilon));
        }
        if let InitScale::Fixed(z) = self.init_scale {
            if !(z > 0.0 && z.is_finite()) {
                return Err(OptionsError::InitScale(z));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    IterationLimit,
    Stalled,
    SingularSystem,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::Stalled => "stalled",
            SolveStatus::SingularSystem => "singular_system",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a record describes a step taken from iterate `k` or the final
/// iterate of the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStatus {
    Step,
    Final(SolveStatus),
}

impl RecordStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordStatus::Step => "step",
            RecordStatus::Final(s) => s.as_str(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "step" => RecordStatus::Step,
            "optimal" => RecordStatus::Final(SolveStatus::Optimal),
            "iteration_limit" => RecordStatus::Final(SolveStatus::IterationLimit),
            "stalled" => RecordStatus::Final(SolveStatus::Stalled),
            "singular_system" => RecordStatus::Final(SolveStatus::SingularSystem),
            _ => return None,
        })
    }
}

/// Telemetry for iterate `k`. For a `Step` record, `sin_alpha` is the step
/// taken from this iterate; the final record has `sin_alpha = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub mu: f64,
    pub norm_rb: f64,
    pub norm_rc: f64,
    pub sin_alpha: f64,
    /// `‖x∘s − μe‖/μ`, or 0 at an exact solution with `μ = 0`.
    pub neigh_dist: f64,
    pub backtracks: usize,
    /// All KKT solves of this step passed the strict residual gate.
    pub factor_ok: bool,
    /// `θ/(2Ĉn)` with `Ĉ` from observed derivative norms; 0 on final records.
    pub step_lower_bound: f64,
    pub status: RecordStatus,
}

/// Full per-iteration state kept in verification mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iterate: Iterate,
    pub sin_alpha: f64,
    pub trial: TrialPoint,
    /// `‖x(α)∘s(α) − (1 − sin α)μ e‖`
    pub arc_deviation: f64,
    pub exact: bool,
    /// `Δxᵀ Δs`, with the norms of both parts; zeros when no corrector ran.
    pub corrector_dot: f64,
    pub corrector_dx_norm: f64,
    pub corrector_ds_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub iterate: Iterate,
    /// `cᵀx` at the final iterate.
    pub objective: f64,
    pub iterations: usize,
    pub records: Vec<IterationRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Diagnostic when the solve ends without an optimal point.
    pub note: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Stalled(ArcError),
    #[error("{context}: {source}")]
    Singular {
        context: &'static str,
        source: LinalgError,
    },
    #[error("non-finite iterate after step")]
    NonFinite,
}

impl StepError {
    pub fn status(&self) -> SolveStatus {
        match self {
            StepError::Stalled(_) => SolveStatus::Stalled,
            _ => SolveStatus::SingularSystem,
        }
    }
}

/// `x⁰ = s⁰ = ζe`, `y⁰ = 0`. The point is perfectly centered.
pub fn initial_point(p: &StandardLP, opts: &SolverOptions) -> Iterate {
    let zeta = match opts.init_scale {
        InitScale::Fixed(z) => z,
        InitScale::Auto => 1f64.max(norm_inf(p.b())).max(norm_inf(p.c())),
    };
    Iterate::new(p, vec![zeta; p.n()], vec![0.0; p.m()], vec![zeta; p.n()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Optimal,
    Continue,
}

/// Stopping test: `μ ≤ ε`, `‖r_b‖ ≤ ε`, `‖r_c‖ ≤ ε` and `(x, s) > 0`.
/// `boundary_ok` relaxes positivity to `≥ 0` after an exact step.
pub fn check_termination(
    p: &StandardLP,
    z: &Iterate,
    opts: &SolverOptions,
    boundary_ok: bool,
) -> Termination {
    let (tol_b, tol_c) = if opts.relative_tolerance {
        (
            opts.epsilon * (1.0 + norm2(p.b())),
            opts.epsilon * (1.0 + norm2(p.c())),
        )
    } else {
        (opts.epsilon, opts.epsilon)
    };
    let sign_ok = if boundary_ok {
        z.is_nonnegative()
    } else {
        z.is_strictly_positive()
    };
    if z.mu() <= opts.epsilon && z.norm_rb() <= tol_b && z.norm_rc() <= tol_c && sign_ok {
        Termination::Optimal
    } else {
        Termination::Continue
    }
}

/// Newton step at the trial point toward `(1 − sin α)μ_k e`. The first two
/// right-hand-side blocks are zero, so `AΔx = 0`, `Δs = −AᵀΔy` and
/// `ΔxᵀΔs = 0`.
pub fn corrector(
    p: &StandardLP,
    trial: &TrialPoint,
    sin_alpha: f64,
    mu_k: f64,
) -> Result<(KktSolution, GateReport), LinalgError> {
    corrector_with_policy(p, trial, sin_alpha, mu_k, PivotPolicy::Strict)
}

/// [`corrector`] with an explicit treatment of tiny pivots.
pub fn corrector_with_policy(
    p: &StandardLP,
    trial: &TrialPoint,
    sin_alpha: f64,
    mu_k: f64,
    policy: PivotPolicy,
) -> Result<(KktSolution, GateReport), LinalgError> {
    let f = factor_with_policy(p.a(), &trial.x, &trial.s, policy)?;
    if !f.cholesky().dropped().is_empty() {
        debug!("corrector dropped pivots {:?}", f.cholesky().dropped());
    }
    let target = (1.0 - sin_alpha) * mu_k;
    let r: Vec<f64> = hadamard(&trial.x, &trial.s)
        .into_iter()
        .map(|v| target - v)
        .collect();
    solve_kkt_checked(&f, p.a(), &trial.x, &trial.s, &KktRhs::complementarity(p.m(), r))
}

/// `|ΔxᵀΔs| ≤ 1e−10 ‖Δx‖‖Δs‖ + 1e−14`.
pub fn corrector_orthogonal(dot: f64, dx_norm: f64, ds_norm: f64) -> bool {
    dot.abs() <= 1e-10 * dx_norm * ds_norm + 1e-14
}

/// Everything produced by one predictor-corrector pass.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: Iterate,
    pub sin_alpha: f64,
    pub backtracks: usize,
    pub factor_ok: bool,
    pub exact: bool,
    pub step_lower_bound: f64,
    pub trial: TrialPoint,
    pub arc_deviation: f64,
    pub corrector_dot: f64,
    pub corrector_dx_norm: f64,
    pub corrector_ds_norm: f64,
}

/// One pass of the algorithm from `z`. Tiny pivots are fatal.
pub fn iterate_once(p: &StandardLP, z: &Iterate, opts: &SolverOptions) -> Result<StepOutcome, StepError> {
    iterate_once_with(p, z, opts, PivotPolicy::Strict)
}

/// [`iterate_once`] with an explicit treatment of tiny pivots.
pub fn iterate_once_with(
    p: &StandardLP,
    z: &Iterate,
    opts: &SolverOptions,
    policy: PivotPolicy,
) -> Result<StepOutcome, StepError> {
    let f = factor_with_policy(p.a(), z.x(), z.s(), policy).map_err(|source| {
        StepError::Singular {
            context: "factorization at the current iterate",
            source,
        }
    })?;
    if !f.cholesky().dropped().is_empty() {
        debug!("dropped pivots {:?}", f.cholesky().dropped());
    }
    let (d, gates) = compute_derivatives(p, z, &f).map_err(|source| StepError::Singular {
        context: "arc derivatives",
        source,
    })?;
    let norms = HadamardNorms::of(&d);
    let qc = build_quartic(&d, opts.theta, z.mu());
    let sigma0 = max_step(&qc);
    let lower = step_lower_bound(&norms, opts.theta, z.mu(), p.n());
    let step = admissible_step(z, &d, opts.theta, sigma0).map_err(|e| match e {
        ArcError::Linalg(source) => StepError::Singular {
            context: "arc search",
            source,
        },
        other => StepError::Stalled(other),
    })?;
    let sin = step.angle.sin;
    if sin < lower {
        debug!("sin α = {sin:e} below the estimated lower bound {lower:e}");
    }
    let mut factor_ok = gates.first.clean && gates.second.clean && f.cholesky().dropped().is_empty();

    if step.exact {
        return Ok(StepOutcome {
            next: step.trial.to_iterate(p),
            sin_alpha: sin,
            backtracks: step.backtracks,
            factor_ok,
            exact: true,
            step_lower_bound: lower,
            trial: step.trial,
            arc_deviation: step.arc_deviation,
            corrector_dot: 0.0,
            corrector_dx_norm: 0.0,
            corrector_ds_norm: 0.0,
        });
    }

    let (delta, gate) =
        corrector_with_policy(p, &step.trial, sin, z.mu(), policy).map_err(|source| {
            StepError::Singular {
                context: "corrector at the trial point",
                source,
            }
        })?;
    factor_ok &= gate.clean;
    let corrector_dot = dot(&delta.dx, &delta.ds);
    let (dxn, dsn) = (norm2(&delta.dx), norm2(&delta.ds));
    if !corrector_orthogonal(corrector_dot, dxn, dsn) {
        warn!("corrector directions not orthogonal: dot {corrector_dot:e}, norms {dxn:e} {dsn:e}");
    }
    let next = step.trial.advanced(p, &delta.dx, &delta.dy, &delta.ds);
    if next.x().iter().chain(next.y()).chain(next.s()).any(|v| !v.is_finite()) {
        return Err(StepError::NonFinite);
    }
    Ok(StepOutcome {
        next,
        sin_alpha: sin,
        backtracks: step.backtracks,
        factor_ok,
        exact: false,
        step_lower_bound: lower,
        trial: step.trial,
        arc_deviation: step.arc_deviation,
        corrector_dot,
        corrector_dx_norm: dxn,
        corrector_ds_norm: dsn,
    })
}

fn record_for(z: &Iterate, k: usize) -> IterationRecord {
    IterationRecord {
        k,
        mu: z.mu(),
        norm_rb: z.norm_rb(),
        norm_rc: z.norm_rc(),
        sin_alpha: 0.0,
        neigh_dist: z.neighborhood_distance().unwrap_or(0.0),
        backtracks: 0,
        factor_ok: true,
        step_lower_bound: 0.0,
        status: RecordStatus::Step,
    }
}

fn stall_note(records: &[IterationRecord], opts: &SolverOptions) -> Option<String> {
    let last = records.last()?;
    let residual = last.norm_rb.max(last.norm_rc);
    if last.mu <= opts.epsilon && residual > opts.epsilon {
        return Some(format!(
            "duality measure {:e} converged while residuals persist ({residual:e}); the problem may be infeasible",
            last.mu
        ));
    }
    let tail: Vec<f64> = records
        .iter()
        .rev()
        .skip(1)
        .take(10)
        .map(|r| r.sin_alpha)
        .collect();
    if tail.len() == 10 && tail.iter().all(|&s| s < 1e-3) {
        return Some(format!(
            "steps stalled (sin α < 1e-3 over the last 10 iterations) with μ = {:e}, residual {residual:e}; the problem may be infeasible or unbounded",
            last.mu
        ));
    }
    None
}

/// Runs the algorithm to termination. Numerical failures are reported through
/// the status, never as errors.
pub fn solve(p: &StandardLP, opts: &SolverOptions) -> Result<SolveResult, OptionsError> {
    opts.validate()?;
    let mut z = initial_point(p, opts);
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut boundary_ok = false;
    let mut k = 0;
    let (status, note) = loop {
        if check_termination(p, &z, opts, boundary_ok) == Termination::Optimal {
            break (SolveStatus::Optimal, None);
        }
        if k >= opts.max_iterations {
            break (SolveStatus::IterationLimit, None);
        }
        // The first factorization sees D² = I up to scale, so it doubles as
        // the rank test on A. Afterwards tiny pivots come from scaling.
        let policy = if k == 0 { PivotPolicy::Strict } else { PivotPolicy::Drop };
        match iterate_once_with(p, &z, opts, policy) {
            Ok(out) => {
                let mut rec = record_for(&z, k);
                rec.sin_alpha = out.sin_alpha;
                rec.backtracks = out.backtracks;
                rec.factor_ok = out.factor_ok;
                rec.step_lower_bound = out.step_lower_bound;
                debug!(
                    "k={k} mu={:e} rb={:e} rc={:e} sin={:.6} dist={:.4}",
                    rec.mu, rec.norm_rb, rec.norm_rc, rec.sin_alpha, rec.neigh_dist
                );
                records.push(rec);
                if opts.record_snapshots {
                    snapshots.push(Snapshot {
                        iterate: z.clone(),
                        sin_alpha: out.sin_alpha,
                        trial: out.trial,
                        arc_deviation: out.arc_deviation,
                        exact: out.exact,
                        corrector_dot: out.corrector_dot,
                        corrector_dx_norm: out.corrector_dx_norm,
                        corrector_ds_norm: out.corrector_ds_norm,
                    });
                }
                boundary_ok = out.exact;
                z = out.next;
                k += 1;
            }
            Err(e) => {
                warn!("iteration {k} failed: {e}");
                break (e.status(), Some(e.to_string()));
            }
        }
    };
    let mut last = record_for(&z, k);
    last.status = RecordStatus::Final(status);
    records.push(last);
    let note = match (status, note) {
        (SolveStatus::IterationLimit, None) => stall_note(&records, opts),
        (_, n) => n,
    };
    info!(
        "{status} after {k} iterations: mu={:e} rb={:e} rc={:e}",
        z.mu(),
        z.norm_rb(),
        z.norm_rc()
    );
    Ok(SolveResult {
        status,
        objective: p.objective(z.x()),
        iterate: z,
        iterations: k,
        records,
        snapshots,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::model::generate_random_lp;

    fn hand() -> StandardLP {
        StandardLP::new(
            DenseMatrix::from_rows(&[[1.0, 1.0]]),
            vec![2.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn theta_constant() {
        assert_eq!(THETA_MAX, 1.0 / (2.0 + 2f64.sqrt()));
    }

    #[test]
    fn initial_point_rules() {
        let p = hand();
        let opts = SolverOptions {
            init_scale: InitScale::Fixed(1.0),
            ..Default::default()
        };
        let z = initial_point(&p, &opts);
        assert_eq!(z.mu(), 1.0);
        assert_eq!(z.neighborhood_distance(), Some(0.0));

        let p = StandardLP::new(
            DenseMatrix::from_rows(&[[1.0, 1.0, 0.0]]),
            vec![50.0],
            vec![3.0, -1.0, 0.0],
        )
        .unwrap();
        let z = initial_point(&p, &SolverOptions::default());
        assert_eq!(z.x(), &[50.0; 3]);
    }

    #[test]
    fn termination_examples() {
        let p = hand();
        let eps = 1e-8;
        let opts = SolverOptions {
            epsilon: eps,
            ..Default::default()
        };
        // x = (1, 1 + ε/2), s = (ε/2, ε/2): μ ≈ ε/2, ‖r_b‖ = ε/2, r_c = s − c.
        let p2 = StandardLP::new(p.a().clone(), vec![2.0], vec![eps / 2.0, eps / 2.0]).unwrap();
        let z = Iterate::new(&p2, vec![1.0, 1.0 + eps / 2.0], vec![0.0], vec![eps / 2.0; 2]);
        assert_eq!(check_termination(&p2, &z, &opts, false), Termination::Optimal);
        let z = Iterate::new(&p2, vec![1.0, 1.0], vec![0.0], vec![2.0 * eps; 2]);
        assert_eq!(check_termination(&p2, &z, &opts, false), Termination::Continue);
        // Boundary point: only accepted after an exact step.
        let z = Iterate::new(&p, vec![1.0, 1.0], vec![1.0], vec![0.0, 0.0]);
        assert_eq!(check_termination(&p, &z, &opts, true), Termination::Optimal);
        assert_eq!(check_termination(&p, &z, &opts, false), Termination::Continue);
    }

    #[test]
    fn hand_instance_one_step() {
        let opts = SolverOptions {
            init_scale: InitScale::Fixed(1.0),
            ..Default::default()
        };
        let r = solve(&hand(), &opts).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.records[0].sin_alpha, 1.0);
        assert_eq!(r.iterate.mu(), 0.0);
        assert_eq!(r.objective, 2.0);
    }

    #[test]
    fn zero_iteration_limit() {
        let g = generate_random_lp(3, 6, 1).unwrap();
        let opts = SolverOptions {
            max_iterations: 0,
            ..Default::default()
        };
        let r = solve(&g.problem, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::IterationLimit);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.records.len(), 1);
    }

    #[test]
    fn corrector_homogeneous_when_centered() {
        let p = hand();
        let trial = TrialPoint::new(vec![2.0, 0.5], vec![0.0], vec![0.25, 1.0]);
        // Products are 0.5 each; target (1 − 0.5)·1 = 0.5.
        let (d, _) = corrector(&p, &trial, 0.5, 1.0).unwrap();
        assert!(d.dx.iter().chain(&d.dy).chain(&d.ds).all(|&v| v == 0.0));
    }

    #[test]
    fn generated_instance_converges() {
        let g = generate_random_lp(5, 10, 7).unwrap();
        let r = solve(&g.problem, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "{:?}", r.note);
        assert!(crate::model::kkt_error(&r.iterate) <= 1e-8);
        assert!((r.objective - g.optimal_objective()).abs() < 1e-6);
    }

    #[test]
    fn invalid_options() {
        let p = hand();
        for opts in [
            SolverOptions {
                theta: 0.3,
                ..Default::default()
            },
            SolverOptions {
                epsilon: 0.0,
                ..Default::default()
            },
            SolverOptions {
                init_scale: InitScale::Fixed(-1.0),
                ..Default::default()
            },
        ] {
            assert!(solve(&p, &opts).is_err());
        }
    }
}
