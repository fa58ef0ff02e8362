//! Shared fixtures for the criterion benchmarks.

use arclp::{generate_random_lp, GeneratedInstance};

/// Generated instances with `n = 2m`, one per requested row count.
pub fn instances(rows: &[usize], seed: u64) -> Vec<GeneratedInstance> {
    rows.iter()
        .map(|&m| generate_random_lp(m, 2 * m, seed).expect("fixture generation"))
        .collect()
}
