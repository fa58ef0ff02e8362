//! Random standard-form LPs with a planted optimal primal-dual triple.
//!
//! Distribution (fixed, so seeds are reproducible):
//! * `A_ij ~ U[-1, 1)`, resampled until `A Aᵀ` factors with every pivot above
//!   `1e-8` times its largest diagonal;
//! * a support `B` of `m` columns drawn uniformly without replacement;
//! * `x*_B ~ U[0.5, 1.5)`, `x*_N = 0`; `s*_N ~ U[0.5, 1.5)`, `s*_B = 0`;
//! * `y* ~ U[-1, 1)`;
//! * `b := A x*`, `c := Aᵀy* + s*`.
//!
//! The RNG is ChaCha8 seeded with `seed`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compensated::{dot2, CompensatedSum};
use crate::dense::DenseMatrix;
use crate::linsolve::{normal_matrix, Cholesky};

use super::StandardLP;

const RANK_TOLERANCE: f64 = 1e-8;
const MAX_ATTEMPTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("need 1 <= m < n, got m = {m}, n = {n}")]
    Shape { m: usize, n: usize },
    #[error("no full-row-rank matrix after {attempts} attempts (seed {seed})")]
    RankDeficient { seed: u64, attempts: usize },
}

/// A generated problem together with the optimal triple it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub problem: StandardLP,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
    pub s_star: Vec<f64>,
    pub seed: u64,
}

impl GeneratedInstance {
    /// Optimal objective value `cᵀx*`.
    pub fn optimal_objective(&self) -> f64 {
        self.problem.objective(&self.x_star)
    }
}

pub fn generate_random_lp(m: usize, n: usize, seed: u64) -> Result<GeneratedInstance, GeneratorError> {
    if m == 0 || m >= n {
        return Err(GeneratorError::Shape { m, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = (0..MAX_ATTEMPTS)
        .map(|_| {
            let data = (0..m * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            DenseMatrix::from_row_major(m, n, data)
        })
        .find(|a| {
            Cholesky::factor_with_tolerance(&normal_matrix(a, &vec![1.0; n]), RANK_TOLERANCE)
                .is_ok()
        })
        .ok_or(GeneratorError::RankDeficient {
            seed,
            attempts: MAX_ATTEMPTS,
        })?;

    let mut in_support = vec![false; n];
    for j in sample(&mut rng, n, m).into_iter() {
        in_support[j] = true;
    }
    let mut x_star = vec![0.0; n];
    let mut s_star = vec![0.0; n];
    for j in 0..n {
        let v = rng.gen_range(0.5..1.5);
        if in_support[j] {
            x_star[j] = v;
        } else {
            s_star[j] = v;
        }
    }
    let y_star: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();

    // Compensated sums make b and c the (nearly) correctly rounded values of
    // A x* and Aᵀy* + s*.
    let b: Vec<f64> = (0..m).map(|i| dot2(a.row(i), &x_star)).collect();
    let c: Vec<f64> = (0..n)
        .map(|j| {
            let mut acc = CompensatedSum::new(s_star[j]);
            for i in 0..m {
                acc.add_product(a[(i, j)], y_star[i]);
            }
            acc.value()
        })
        .collect();
    let problem = StandardLP::new(a, b, c).expect("generated problem has valid shape");
    Ok(GeneratedInstance {
        problem,
        x_star,
        y_star,
        s_star,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::residuals;

    #[test]
    fn planted_triple_is_optimal() {
        for seed in 0..20 {
            let g = generate_random_lp(4, 9, seed).unwrap();
            let (rb, rc) = residuals(&g.problem, &g.x_star, &g.y_star, &g.s_star);
            // Only the rounding of b and c themselves remains.
            let p = &g.problem;
            for (r, v) in rb.iter().zip(p.b()).chain(rc.iter().zip(p.c())) {
                assert!(r.abs() <= f64::EPSILON * v.abs(), "seed {seed}: {r:e} vs {v:e}");
            }
            for j in 0..9 {
                assert_eq!(g.x_star[j] * g.s_star[j], 0.0);
                assert!(g.x_star[j] >= 0.0 && g.s_star[j] >= 0.0);
                assert!(g.x_star[j] > 0.0 || g.s_star[j] > 0.0);
            }
            assert_eq!(g.x_star.iter().filter(|&&v| v > 0.0).count(), 4);
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = generate_random_lp(3, 6, 42).unwrap();
        let b = generate_random_lp(3, 6, 42).unwrap();
        assert_eq!(a, b);
        let bits = |g: &GeneratedInstance| -> Vec<u64> {
            g.problem.a().as_slice().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(a, generate_random_lp(3, 6, 43).unwrap());
    }

    #[test]
    fn shape_rejected() {
        assert_eq!(
            generate_random_lp(3, 3, 0).unwrap_err(),
            GeneratorError::Shape { m: 3, n: 3 }
        );
        assert!(generate_random_lp(0, 3, 0).is_err());
    }
}
