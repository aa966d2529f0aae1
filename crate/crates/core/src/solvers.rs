//! Iteration maps and the fixed-point driver.
//!
//! Every step is explicit: NR/DN update `x` only, the W4 variants carry a
//! momentum `p` (started at zero) under damping `c = 2`.

use crate::error::{Error, Result};
use crate::linalg::{sym2_eigen, udl_decompose, Eigen2};
use crate::problems::Problem;
use crate::types::{
    residual_inf_norm, MethodKind, SolverConfig, SolverResult, SolverState, Status, TraceRecord,
    Vector,
};

/// `x - dtau * J⁻¹ F(x)`, with `J⁻¹F` from a UDL factor-and-solve.
pub fn nr_dn_step(problem: &Problem, x: &[f64], dtau: f64) -> Result<Vector> {
    check_dim(problem, x)?;
    let f = problem.residual(x);
    newton_update(problem, x, &f, dtau)
}

/// One W4 step with `X = L⁻¹`, `Y = D⁻¹U⁻¹` from the UDL factors of `J(x_n)`.
pub fn w4_udl_step(problem: &Problem, state: &SolverState, dtau: f64) -> Result<SolverState> {
    check_state(problem, state)?;
    let f = problem.residual(&state.x);
    w4_udl_update(problem, state, &f, dtau)
}

/// One W4 step with `X = P`, `Y = Λ⁻¹P⁻¹` from the Jacobian eigen-pairs.
pub fn w4_eigen_step(problem: &Problem, state: &SolverState, dtau: f64) -> Result<SolverState> {
    check_eigen_capable(problem)?;
    check_state(problem, state)?;
    let f = problem.residual(&state.x);
    Ok(w4_eigen_update(problem, state, &f, dtau))
}

/// `x - dtau * P Λ⁻¹ P⁻¹ F(x)`.
pub fn dn_eigen_step(problem: &Problem, x: &[f64], dtau: f64) -> Result<Vector> {
    check_eigen_capable(problem)?;
    check_dim(problem, x)?;
    let f = problem.residual(x);
    Ok(dn_eigen_update(problem, x, &f, dtau))
}

/// Applies one step of `method` to `state`.
pub fn step(
    problem: &Problem,
    method: MethodKind,
    state: &SolverState,
    dtau: f64,
) -> Result<SolverState> {
    check_state_for(problem, method, state)?;
    let f = problem.residual(&state.x);
    advance(problem, method, state, &f, dtau)
}

fn advance(
    problem: &Problem,
    method: MethodKind,
    s: &SolverState,
    f: &[f64],
    dtau: f64,
) -> Result<SolverState> {
    Ok(match method {
        MethodKind::Nr | MethodKind::Dn => {
            SolverState::first_order(newton_update(problem, &s.x, f, dtau)?)
        }
        MethodKind::DnEigen => SolverState::first_order(dn_eigen_update(problem, &s.x, f, dtau)),
        MethodKind::W4Udl => w4_udl_update(problem, s, f, dtau)?,
        MethodKind::W4Eigen => w4_eigen_update(problem, s, f, dtau),
    })
}

fn newton_update(problem: &Problem, x: &[f64], f: &[f64], dtau: f64) -> Result<Vector> {
    let dx = udl_decompose(&problem.jacobian(x))?.solve(f)?;
    Ok(x.iter().zip(&dx).map(|(xi, di)| xi - dtau * di).collect())
}

fn w4_udl_update(problem: &Problem, s: &SolverState, f: &[f64], dtau: f64) -> Result<SolverState> {
    let udl = udl_decompose(&problem.jacobian(&s.x))?;
    let xp = udl.apply_x(&s.p)?;
    let yf = udl.apply_y(f)?;
    Ok(momentum_update(s, &xp, &yf, dtau))
}

fn eigen_at(problem: &Problem, x: &[f64]) -> Eigen2 {
    sym2_eigen(&problem.jacobian(x)).expect("2x2 checked by caller")
}

fn w4_eigen_update(problem: &Problem, s: &SolverState, f: &[f64], dtau: f64) -> SolverState {
    let e = eigen_at(problem, &s.x);
    let xp = e.p_matrix().mul_vec(&s.p).expect("2-vector");
    let yf = e.apply_y(f);
    momentum_update(s, &xp, &yf, dtau)
}

fn dn_eigen_update(problem: &Problem, x: &[f64], f: &[f64], dtau: f64) -> Vector {
    let e = eigen_at(problem, x);
    let dx = e.p_matrix().mul_vec(&e.apply_y(f)).expect("2-vector");
    x.iter().zip(&dx).map(|(xi, di)| xi - dtau * di).collect()
}

/// `x += dtau * Xp;  p = (1 - c dtau) p - dtau * YF`.
fn momentum_update(s: &SolverState, xp: &[f64], yf: &[f64], dtau: f64) -> SolverState {
    let damp = 1.0 - crate::types::DAMPING_C * dtau;
    SolverState {
        x: s.x.iter().zip(xp).map(|(x, v)| x + dtau * v).collect(),
        p: s.p
            .iter()
            .zip(yf)
            .map(|(p, g)| damp * p - dtau * g)
            .collect(),
    }
}

fn check_dim(problem: &Problem, x: &[f64]) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::ShapeMismatch {
            expected: problem.dim(),
            found: x.len(),
        });
    }
    Ok(())
}

fn check_state(problem: &Problem, s: &SolverState) -> Result<()> {
    check_dim(problem, &s.x)?;
    if s.p.len() != problem.dim() {
        return Err(Error::ShapeMismatch {
            expected: problem.dim(),
            found: s.p.len(),
        });
    }
    Ok(())
}

fn check_state_for(problem: &Problem, method: MethodKind, s: &SolverState) -> Result<()> {
    if method.needs_symmetric_2d() {
        check_eigen_capable(problem)?;
    }
    if method.has_momentum() {
        check_state(problem, s)
    } else {
        check_dim(problem, &s.x)
    }
}

fn check_eigen_capable(problem: &Problem) -> Result<()> {
    if problem.dim() != 2 || !problem.has_symmetric_jacobian() {
        return Err(Error::Unsupported(format!(
            "eigen-preconditioned methods need a 2-D symmetric Jacobian; `{}` has none",
            problem.name()
        )));
    }
    Ok(())
}

/// Outcome of an untraced run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub status: Status,
    pub final_state: SolverState,
    pub iterations: usize,
    pub final_residual: f64,
}

/// Runs the configured method from `x0` (momentum starts at zero), recording
/// every iterate.
pub fn run(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<SolverResult> {
    let mut trace = Vec::new();
    let s = drive(problem, config, x0, |iter, state, res| {
        trace.push(TraceRecord {
            iter,
            x: state.x.clone(),
            p: state.p.clone(),
            res_inf: res,
        });
    })?;
    Ok(SolverResult {
        status: s.status,
        final_state: s.final_state,
        iterations: s.iterations,
        trace,
    })
}

/// Same as [`run`] without keeping the trace; used by basin scans.
pub fn run_untraced(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<RunSummary> {
    drive(problem, config, x0, |_, _, _| {})
}

/// The fixed-point loop. `observe` sees every evaluated iterate, the initial
/// one included, before the stopping rules are applied.
pub fn drive(
    problem: &Problem,
    config: &SolverConfig,
    x0: &[f64],
    mut observe: impl FnMut(usize, &SolverState, f64),
) -> Result<RunSummary> {
    let method = config.method();
    let mut state = if method.has_momentum() {
        SolverState::at_rest(x0.to_vec())
    } else {
        SolverState::first_order(x0.to_vec())
    };
    check_state_for(problem, method, &state)?;

    let mut iter = 0;
    loop {
        let f = problem.residual(&state.x);
        let res = residual_inf_norm(&f);
        observe(iter, &state, res);
        let status = if !state.is_finite() || !res.is_finite() {
            Some(Status::Diverged)
        } else if res < config.tol() {
            Some(Status::Converged)
        } else if iter >= config.max_iter() {
            Some(Status::MaxIterExceeded)
        } else {
            None
        };
        if let Some(status) = status {
            return Ok(RunSummary {
                status,
                final_state: state,
                iterations: iter,
                final_residual: res,
            });
        }
        match advance(problem, method, &state, &f, config.dtau()) {
            Ok(next) => state = next,
            Err(Error::Singular { .. }) => {
                return Ok(RunSummary {
                    status: Status::SingularDecomposition,
                    final_state: state,
                    iterations: iter,
                    final_residual: res,
                })
            }
            Err(e) => return Err(e),
        }
        iter += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::builtin;
    use approx::assert_abs_diff_eq;

    fn cfg(method: MethodKind, dtau: f64) -> SolverConfig {
        SolverConfig::new(method, dtau).unwrap()
    }

    #[test]
    fn nr_single_update_simple1d() {
        let p = builtin("simple1d").unwrap();
        let x1 = nr_dn_step(&p, &[0.5], 1.0).unwrap()[0];
        let f = 0.5f64.atan() + 0.5f64.sin() - 1.0;
        let df = 1.0 / 1.25 + 0.5f64.cos();
        assert_abs_diff_eq!(x1, 0.5 - f / df, epsilon = 1e-15);
        assert_abs_diff_eq!(x1, 0.5339339, epsilon = 1e-7);
    }

    #[test]
    fn w4_udl_hand_value() {
        let p = builtin("simple2d").unwrap();
        let s = SolverState {
            x: vec![1.0, 4.0],
            p: vec![0.0, 0.0],
        };
        let n = w4_udl_step(&p, &s, 0.5).unwrap();
        assert_eq!(n.x, vec![1.0, 4.0]);
        assert_abs_diff_eq!(n.p[0], -0.5 * (13.0 / -62.0 + 12.0 / 31.0), epsilon = 1e-15);
        assert_abs_diff_eq!(n.p[0], -0.0887097, epsilon = 1e-7);
        assert_abs_diff_eq!(n.p[1], -1.5, epsilon = 1e-15);
    }

    #[test]
    fn w4_eigen_first_step_keeps_position() {
        let p = builtin("fproblem0").unwrap();
        let s = SolverState::at_rest(vec![0.1, -1.0]);
        let n = w4_eigen_step(&p, &s, 0.5).unwrap();
        assert_eq!(n.x, s.x);
        let e = sym2_eigen(&p.jacobian(&s.x)).unwrap();
        let g = e.apply_y(&p.residual(&s.x));
        assert_eq!(n.p, vec![-0.5 * g[0], -0.5 * g[1]]);
    }

    #[test]
    fn eigen_methods_reject_other_problems() {
        let p = builtin("simple2d").unwrap();
        assert!(matches!(
            run(&p, &cfg(MethodKind::W4Eigen, 0.5), &[1.0, 1.0]),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            dn_eigen_step(&p, &[1.0, 1.0], 0.5),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn wrong_length_start_is_rejected() {
        let p = builtin("simple2d").unwrap();
        assert!(matches!(
            run(&p, &cfg(MethodKind::Nr, 1.0), &[1.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn table_cells() {
        let p = builtin("simple1d").unwrap();
        let r = run(&p, &cfg(MethodKind::Nr, 1.0), &[0.5]).unwrap();
        assert_eq!((r.status, r.iterations), (Status::Converged, 2));
        assert_eq!(r.trace.len(), 3);

        let r = run(&p, &cfg(MethodKind::Nr, 1.0), &[-2.0]).unwrap();
        assert_eq!(r.status, Status::MaxIterExceeded);
        assert_eq!(r.iterations, SolverConfig::DEFAULT_MAX_ITER);

        let r = run(&p, &cfg(MethodKind::Dn, 0.5), &[-2.5]).unwrap();
        assert_eq!(r.status, Status::MaxIterExceeded);

        // reference count is 22; the explicit map needs 23
        let r = run(&p, &cfg(MethodKind::W4Udl, 0.5), &[1.0]).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.iterations.abs_diff(22) <= 2, "{}", r.iterations);
    }

    #[test]
    fn singular_start_is_reported() {
        // trailing pivot x² vanishes on the y axis
        let p = builtin("simple2d").unwrap();
        let r = run(&p, &cfg(MethodKind::Nr, 1.0), &[0.0, 1.0]).unwrap();
        assert_eq!(r.status, Status::SingularDecomposition);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn status_matches_last_residual() {
        let p = builtin("simple2d").unwrap();
        for m in [MethodKind::Nr, MethodKind::Dn, MethodKind::W4Udl] {
            let c = SolverConfig::with_defaults(m).with_max_iter(30).unwrap();
            for x0 in [[2.0, -4.0], [0.3, 0.2], [-4.5, 4.5]] {
                let r = run(&p, &c, &x0).unwrap();
                assert_eq!(r.iterations + 1, r.trace.len());
                assert_eq!(r.status == Status::Converged, r.final_residual() < c.tol());
                assert!(r.trace.windows(2).all(|w| w[1].iter == w[0].iter + 1));
                let u = run_untraced(&p, &c, &x0).unwrap();
                assert_eq!(
                    (u.status, u.iterations, &u.final_state),
                    (r.status, r.iterations, &r.final_state)
                );
            }
        }
    }

    #[test]
    fn non_finite_start_diverges() {
        let p = builtin("simple2d").unwrap();
        let r = run(&p, &cfg(MethodKind::W4Udl, 0.5), &[f64::NAN, 1.0]).unwrap();
        assert_eq!((r.status, r.iterations), (Status::Diverged, 0));
    }
}
