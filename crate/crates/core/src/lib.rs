//! Root finding for nonlinear systems `F(x) = 0` with the W4 damped-oscillator
//! iteration, Newton-Raphson and damped Newton baselines, basin-of-attraction
//! scans and spectral checks of the iteration matrices.
//!
//! ```
//! use w4_core::{builtin, run, MethodKind, SolverConfig, Status};
//!
//! let problem = builtin("simple2d").unwrap();
//! let config = SolverConfig::new(MethodKind::W4Udl, 0.5).unwrap();
//! let result = run(&problem, &config, &[2.0, -4.0]).unwrap();
//! assert_eq!(result.status, Status::Converged);
//! ```

pub mod analysis;
pub mod basin;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod solvers;
pub mod types;

pub use analysis::{
    degeneracy_series_check, eigen_trace, linear_error_closed_form, linear_error_iterates,
    w_spectrum_check, EigenRecord, EigenTrace, Preconditioner, SeriesCheck, WSpectrum,
};
pub use basin::{basin_stats, classify, compute_basin, BasinGrid, BasinStats, Domain};
pub use error::{Error, Result};
pub use linalg::{assemble_w_matrix, sym2_eigen, udl_decompose, Eigen2, UdlFactors};
pub use problems::{builtin, fd_jacobian, Problem, BUILTIN_NAMES};
pub use solvers::{
    dn_eigen_step, nr_dn_step, run, run_untraced, step, w4_eigen_step, w4_udl_step, RunSummary,
};
pub use types::{
    residual_inf_norm, Matrix, MethodKind, SolverConfig, SolverResult, SolverState, Status,
    TraceRecord, Vector, DAMPING_C,
};
