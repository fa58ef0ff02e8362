use arclp::verify::{
    check_corrector_orthogonality, check_neighborhood, check_rate_identities, scaling_experiment,
    SCALING_CSV_HEADER,
};
use arclp::{generate_random_lp, solve, SolveStatus, SolverOptions, THETA_MAX};

#[test]
fn real_trace_passes_all_checks() {
    let g = generate_random_lp(5, 10, 3).unwrap();
    let opts = SolverOptions {
        record_snapshots: true,
        ..Default::default()
    };
    let r = solve(&g.problem, &opts).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert_eq!(r.snapshots.len(), r.iterations);
    let rates = check_rate_identities(&r.records);
    assert!(rates.passed(), "{rates:?}");
    assert_eq!(rates.pairs_checked, r.iterations);
    let nb = check_neighborhood(&r.snapshots, Some(&r.iterate), THETA_MAX);
    assert!(nb.passed(), "{nb:?}");
    assert_eq!(nb.iterates_checked, r.iterations + 1);
    assert!(check_corrector_orthogonality(&r.snapshots).passed());
}

#[test]
fn snapshots_are_off_by_default() {
    let g = generate_random_lp(3, 6, 1).unwrap();
    let r = solve(&g.problem, &SolverOptions::default()).unwrap();
    assert!(r.snapshots.is_empty());
    assert_eq!(r.records.len(), r.iterations + 1);
}

#[test]
fn small_scaling_report() {
    let sizes = [(5, 10), (10, 20), (20, 40)];
    let opts = SolverOptions::default();
    let report = scaling_experiment(&sizes, &[4, 5, 6], 1e-8, &opts);
    assert_eq!(report.rows.len(), 9);
    assert!(report.rows.windows(2).all(|w| w[0].n <= w[1].n));
    for row in &report.rows {
        assert_eq!(row.status, SolveStatus::Optimal, "{row:?}");
        assert!(row.final_kkt <= 1e-8);
        assert!(row.iterations <= row.cap);
        assert!(row.min_sin_alpha > 0.0);
        // Far above the pessimistic θ/(2n) scale.
        assert!(row.min_sin_alpha > THETA_MAX / (2.0 * row.n as f64));
        for v in [row.l_estimate, row.iters_over_nl, row.mean_sin_alpha] {
            assert!(v.is_finite());
        }
    }
    let csv = report.to_csv();
    assert_eq!(csv.lines().next(), Some(SCALING_CSV_HEADER));
    assert_eq!(csv.lines().count(), 10);
    assert_eq!(scaling_experiment(&sizes, &[4, 5, 6], 1e-8, &opts).to_csv(), csv);
    assert!(report.to_table().lines().count() == 10);
}
