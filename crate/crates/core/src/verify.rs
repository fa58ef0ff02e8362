//! Checks of the per-iteration identities and invariants on solve traces,
//! and the iteration-growth experiment.

use std::fmt::Write as _;
use std::thread;

use crate::dense::hadamard;
use crate::driver::{
    corrector_orthogonal, initial_point, solve, IterationRecord, RecordStatus, Snapshot,
    SolveStatus, SolverOptions,
};
use crate::model::{generate_random_lp, kkt_error, neighborhood_distance, Iterate};
use crate::mps::fmt_f64;

/// Relative tolerance for the rate identities.
pub const RATE_TOLERANCE: f64 = 1e-8;
/// Residual norms at or below this are not used as denominators.
pub const RATE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateQuantity {
    Mu,
    PrimalResidual,
    DualResidual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFailure {
    /// Index of the record the step was taken from.
    pub k: usize,
    pub quantity: RateQuantity,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateReport {
    pub pairs_checked: usize,
    pub max_deviation: f64,
    pub failures: Vec<RateFailure>,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// For each step `k → k+1`, compares `v_{k+1}` with `(1 − sin α_k) v_k` for
/// `v ∈ {μ, ‖r_b‖, ‖r_c‖}`. The deviation is
/// `|v_{k+1} − (1 − sin α_k) v_k| / v_k`, checked when `v_k > 1e−13`.
pub fn check_rate_identities(records: &[IterationRecord]) -> RateReport {
    check_rate_identities_with(records, RATE_TOLERANCE)
}

pub fn check_rate_identities_with(records: &[IterationRecord], tol: f64) -> RateReport {
    let mut report = RateReport::default();
    for pair in records.windows(2) {
        let (cur, next) = (&pair[0], &pair[1]);
        if cur.status != RecordStatus::Step {
            continue;
        }
        report.pairs_checked += 1;
        let factor = 1.0 - cur.sin_alpha;
        for (quantity, a, b) in [
            (RateQuantity::Mu, cur.mu, next.mu),
            (RateQuantity::PrimalResidual, cur.norm_rb, next.norm_rb),
            (RateQuantity::DualResidual, cur.norm_rc, next.norm_rc),
        ] {
            if !(a > RATE_FLOOR) {
                continue;
            }
            let deviation = (b - factor * a).abs() / a;
            report.max_deviation = report.max_deviation.max(deviation);
            if !(deviation <= tol) {
                report.failures.push(RateFailure {
                    k: cur.k,
                    quantity,
                    deviation,
                });
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborhoodReport {
    pub iterates_checked: usize,
    /// Largest `‖x∘s − μe‖/μ` seen.
    pub max_distance: f64,
    /// Largest `‖x(α)∘s(α) − (1−sin α)μ e‖ / (2θ(1−sin α)μ)` over inexact
    /// arc points.
    pub max_arc_ratio: f64,
    /// Indices of iterates outside the neighborhood.
    pub distance_failures: Vec<usize>,
    /// Indices whose accepted arc point violates the arc condition or the
    /// componentwise lower bound `(1−2θ)(1−sin α)μ`.
    pub arc_failures: Vec<usize>,
}

impl NeighborhoodReport {
    pub fn passed(&self) -> bool {
        self.distance_failures.is_empty() && self.arc_failures.is_empty()
    }
}

/// Checks `‖x∘s − μe‖ ≤ θμ` for every iterate.
pub fn check_iterates_in_neighborhood(iterates: &[&Iterate], theta: f64) -> NeighborhoodReport {
    let mut report = NeighborhoodReport::default();
    for (k, z) in iterates.iter().enumerate() {
        report.iterates_checked += 1;
        match neighborhood_distance(z.x(), z.s()) {
            Some(d) => {
                report.max_distance = report.max_distance.max(d);
                if !(d <= theta) || !z.is_strictly_positive() {
                    report.distance_failures.push(k);
                }
            }
            // μ = 0 is only reachable through an exact final step.
            None => {
                if !z.is_nonnegative() {
                    report.distance_failures.push(k);
                }
            }
        }
    }
    report
}

/// Neighborhood membership of every stored iterate (and `final_iterate`, if
/// given) plus the arc condition at each accepted trial point, recomputed
/// from the stored vectors.
pub fn check_neighborhood(
    snapshots: &[Snapshot],
    final_iterate: Option<&Iterate>,
    theta: f64,
) -> NeighborhoodReport {
    let mut iterates: Vec<&Iterate> = snapshots.iter().map(|s| &s.iterate).collect();
    iterates.extend(final_iterate);
    let mut report = check_iterates_in_neighborhood(&iterates, theta);
    for (k, snap) in snapshots.iter().enumerate() {
        let mu = snap.iterate.mu();
        let sin = snap.sin_alpha;
        let target = (1.0 - sin) * mu;
        let products = hadamard(&snap.trial.x, &snap.trial.s);
        let dev = crate::dense::norm2(
            &products.iter().map(|p| p - target).collect::<Vec<_>>(),
        );
        let bound = 2.0 * theta * target;
        let ok = if snap.exact {
            dev == 0.0 && snap.trial.x.iter().chain(&snap.trial.s).all(|&v| v >= 0.0)
        } else {
            let floor = (1.0 - 2.0 * theta) * target;
            report.max_arc_ratio = report.max_arc_ratio.max(dev / bound);
            dev <= bound
                && snap.trial.x.iter().chain(&snap.trial.s).all(|&v| v > 0.0)
                && products.iter().all(|&p| p >= floor)
        };
        if !ok {
            report.arc_failures.push(k);
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrthogonalityReport {
    pub checked: usize,
    /// Largest `|ΔxᵀΔs| / (‖Δx‖‖Δs‖)` over correctors with nonzero norms.
    pub max_cosine: f64,
    pub failures: Vec<usize>,
}

impl OrthogonalityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// `|ΔxᵀΔs| ≤ 1e−10 ‖Δx‖‖Δs‖ + 1e−14` for every corrector.
pub fn check_corrector_orthogonality(snapshots: &[Snapshot]) -> OrthogonalityReport {
    let mut report = OrthogonalityReport::default();
    for (k, s) in snapshots.iter().enumerate().filter(|(_, s)| !s.exact) {
        report.checked += 1;
        let denom = s.corrector_dx_norm * s.corrector_ds_norm;
        if denom > 0.0 {
            report.max_cosine = report.max_cosine.max(s.corrector_dot.abs() / denom);
        }
        if !corrector_orthogonal(s.corrector_dot, s.corrector_dx_norm, s.corrector_ds_norm) {
            report.failures.push(k);
        }
    }
    report
}

/// `max(ln(x⁰ᵀs⁰/ε), ln(‖r_b⁰‖/ε), ln(‖r_c⁰‖/ε))`
pub fn input_length(z0: &Iterate, epsilon: f64) -> f64 {
    let gap = z0.mu() * z0.x().len() as f64;
    [gap, z0.norm_rb(), z0.norm_rc()]
        .iter()
        .map(|v| (v / epsilon).ln())
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub l_estimate: f64,
    pub iterations: usize,
    pub iters_over_nl: f64,
    pub mean_sin_alpha: f64,
    pub min_sin_alpha: f64,
    /// Iteration cap `⌈50 n L⌉` used for the run.
    pub cap: usize,
    pub status: SolveStatus,
    /// `max(μ, ‖r_b‖, ‖r_c‖)` recomputed from the final iterate.
    pub final_kkt: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalingReport {
    pub epsilon: f64,
    pub rows: Vec<ScalingRow>,
}

pub const SCALING_CSV_HEADER: &str =
    "n,m,L,iterations,iters_over_nL,mean_sin_alpha,min_sin_alpha,status";

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SCALING_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.n,
                r.m,
                fmt_f64(r.l_estimate),
                r.iterations,
                fmt_f64(r.iters_over_nl),
                fmt_f64(r.mean_sin_alpha),
                fmt_f64(r.min_sin_alpha),
                r.status
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>5} {:>5} {:>6} {:>8} {:>10} {:>10} {:>10}  {}\n",
            "n", "m", "L", "iters", "iters/nL", "mean sin", "min sin", "status"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>5} {:>5} {:>6.2} {:>8} {:>10.5} {:>10.5} {:>10.5}  {}",
                r.n,
                r.m,
                r.l_estimate,
                r.iterations,
                r.iters_over_nl,
                r.mean_sin_alpha,
                r.min_sin_alpha,
                r.status
            );
        }
        out
    }

    /// Mean of `iterations/(nL)` per distinct `n`, in increasing `n`.
    pub fn ratio_by_size(&self) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64, usize)> = Vec::new();
        for r in &self.rows {
            match out.last_mut() {
                Some(last) if last.0 == r.n => {
                    last.1 += r.iters_over_nl;
                    last.2 += 1;
                }
                _ => out.push((r.n, r.iters_over_nl, 1)),
            }
        }
        out.into_iter().map(|(n, s, c)| (n, s / c as f64)).collect()
    }

    /// Least-squares slope of the per-size mean ratio against `ln n`.
    pub fn ratio_trend_slope(&self) -> f64 {
        let pts = self.ratio_by_size();
        if pts.len() < 2 {
            return 0.0;
        }
        let k = pts.len() as f64;
        let xs: Vec<f64> = pts.iter().map(|(n, _)| (*n as f64).ln()).collect();
        let mx = xs.iter().sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = xs.iter().zip(&pts).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    }
}

fn run_row(m: usize, n: usize, seed: u64, epsilon: f64, base: &SolverOptions) -> ScalingRow {
    // Failed rows keep finite placeholders so the report stays printable.
    let failed = |status: SolveStatus, l_estimate: f64, cap: usize, note: String| ScalingRow {
        n,
        m,
        seed,
        l_estimate,
        iterations: 0,
        iters_over_nl: 0.0,
        mean_sin_alpha: 0.0,
        min_sin_alpha: 0.0,
        cap,
        status,
        final_kkt: f64::MAX,
        note: Some(note),
    };
    let g = match generate_random_lp(m, n, seed) {
        Ok(g) => g,
        Err(e) => return failed(SolveStatus::SingularSystem, 0.0, 0, e.to_string()),
    };
    let mut opts = base.clone();
    opts.epsilon = epsilon;
    let l = input_length(&initial_point(&g.problem, &opts), epsilon).max(1.0);
    let cap = (50.0 * n as f64 * l).ceil() as usize;
    opts.max_iterations = cap;
    let result = match solve(&g.problem, &opts) {
        Ok(r) => r,
        Err(e) => return failed(SolveStatus::IterationLimit, l, cap, e.to_string()),
    };
    let sins: Vec<f64> = result
        .records
        .iter()
        .filter(|r| r.status == RecordStatus::Step)
        .map(|r| r.sin_alpha)
        .collect();
    let mean = if sins.is_empty() {
        0.0
    } else {
        sins.iter().sum::<f64>() / sins.len() as f64
    };
    let min = sins.iter().copied().fold(f64::INFINITY, f64::min);
    ScalingRow {
        n,
        m,
        seed,
        l_estimate: l,
        iterations: result.iterations,
        iters_over_nl: result.iterations as f64 / (n as f64 * l),
        mean_sin_alpha: mean,
        min_sin_alpha: if min.is_finite() { min } else { 0.0 },
        cap,
        status: result.status,
        final_kkt: kkt_error(&Iterate::new(
            &g.problem,
            result.iterate.x().to_vec(),
            result.iterate.y().to_vec(),
            result.iterate.s().to_vec(),
        )),
        note: result.note,
    }
}

/// Solves one generated instance per `(size, seed)` with the iteration cap
/// `⌈50 n L⌉` and tabulates iteration counts against `n L`. Rows run on
/// separate threads; the report is sorted by `(n, m, seed)`.
pub fn scaling_experiment(
    sizes: &[(usize, usize)],
    seeds: &[u64],
    epsilon: f64,
    base: &SolverOptions,
) -> ScalingReport {
    let jobs: Vec<(usize, usize, u64)> = sizes
        .iter()
        .flat_map(|&(m, n)| seeds.iter().map(move |&s| (m, n, s)))
        .collect();
    let mut rows: Vec<ScalingRow> = thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(m, n, seed)| scope.spawn(move || run_row(m, n, seed, epsilon, base)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment row panicked"))
            .collect()
    });
    rows.sort_by_key(|r| (r.n, r.m, r.seed));
    ScalingReport { epsilon, rows }
}
