//! Shared fixtures for the criterion benchmarks.

use w4_core::{MethodKind, Problem};

/// Initial guesses used by the per-solve benchmarks, one per problem.
pub fn start_for(problem: &Problem) -> Vec<f64> {
    match problem.name() {
        "simple1d" => vec![-1.5],
        "simple2d" => vec![2.0, -4.0],
        "oproblem" => vec![3.0, -2.0],
        _ => vec![0.1, -1.0],
    }
}

/// Methods that can run on `problem`.
pub fn methods_for(problem: &Problem) -> Vec<MethodKind> {
    MethodKind::ALL
        .into_iter()
        .filter(|m| {
            !m.needs_symmetric_2d() || (problem.dim() == 2 && problem.has_symmetric_jacobian())
        })
        .collect()
}
