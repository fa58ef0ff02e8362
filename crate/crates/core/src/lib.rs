//! Arc-search infeasible interior-point solver for linear programs.
//!
//! The solver follows an ellipse fitted to the infeasible central path, takes
//! the largest step that keeps the arc inside a 2θ neighborhood, and recenters
//! with a single Newton corrector. Residuals and the duality measure shrink by
//! the same factor `1 − sin α` every iteration.

pub mod arc;
pub mod compensated;
pub mod dense;
pub mod driver;
pub mod linsolve;
pub mod model;
pub mod mps;
pub mod tracelog;
pub mod verify;

pub use dense::DenseMatrix;
pub use driver::{
    solve, InitScale, IterationRecord, RecordStatus, SolveResult, SolveStatus, SolverOptions,
    THETA_MAX,
};
pub use model::{
    generate_random_lp, to_standard_form, Column, GeneralLP, GeneratedInstance, Iterate,
    ObjectiveSense, Row, RowKind, StandardLP, VariableMapping,
};
pub use mps::{parse_mps, write_standard_mps, MpsError, MpsErrorKind};
pub use tracelog::{read_iteration_log, write_iteration_log, LogFormat};
pub use verify::{scaling_experiment, ScalingReport, ScalingRow};
