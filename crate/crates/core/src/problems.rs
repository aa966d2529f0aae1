//! Benchmark systems with analytic Jacobians and registered roots.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::udl_decompose;
use crate::types::{residual_inf_norm, Matrix, Vector};

pub type ResidualFn = Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

/// Names accepted by [`builtin`], in registry order.
pub const BUILTIN_NAMES: [&str; 4] = ["simple1d", "simple2d", "oproblem", "fproblem0"];

/// Relative central-difference step used when none is given.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// A nonlinear system `F(x) = 0`.
///
/// Cloning is cheap; the maps are shared behind `Arc` and must be re-entrant.
#[derive(Clone)]
pub struct Problem {
    name: String,
    dim: usize,
    residual: ResidualFn,
    jacobian: JacobianFn,
    printed_roots: Vec<Vector>,
    known_roots: Vec<Vector>,
    domain: Vec<(f64, f64)>,
    symmetric_jacobian: bool,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("known_roots", &self.known_roots)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl Problem {
    /// Builds a problem from analytic maps.
    ///
    /// `roots` are seeds (e.g. values truncated to a few digits); each is polished
    /// by Newton iteration before being stored in [`known_roots`](Self::known_roots).
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        residual: ResidualFn,
        jacobian: JacobianFn,
        roots: Vec<Vector>,
        domain: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("dimension must be positive".into()));
        }
        if domain.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: dim,
                found: domain.len(),
            });
        }
        if let Some(r) = roots.iter().find(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        let mut p = Self {
            name: name.into(),
            dim,
            residual,
            jacobian,
            printed_roots: roots,
            known_roots: Vec::new(),
            domain,
            symmetric_jacobian: false,
        };
        p.known_roots = p.printed_roots.iter().map(|r| p.polish_root(r)).collect();
        Ok(p)
    }

    /// User-defined problem: residual only, Jacobian by central differences.
    pub fn from_residual(
        name: impl Into<String>,
        dim: usize,
        residual: ResidualFn,
        roots: Vec<Vector>,
        domain: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let f = residual.clone();
        let jacobian: JacobianFn = Arc::new(move |x| fd_jacobian(&*f, x, DEFAULT_FD_STEP));
        Self::new(name, dim, residual, jacobian, roots, domain)
    }

    fn with_symmetric_jacobian(mut self) -> Self {
        self.symmetric_jacobian = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn residual(&self, x: &[f64]) -> Vector {
        (self.residual)(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        (self.jacobian)(x)
    }

    /// Root values as supplied (8 significant figures for the builtins).
    pub fn printed_roots(&self) -> &[Vector] {
        &self.printed_roots
    }

    /// Polished roots used for classification, in registry order.
    pub fn known_roots(&self) -> &[Vector] {
        &self.known_roots
    }

    /// Per-axis `(min, max)` bounds for basin scans.
    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    /// True when the Jacobian is symmetric everywhere (the eigen methods need this).
    pub fn has_symmetric_jacobian(&self) -> bool {
        self.symmetric_jacobian
    }

    fn polish_root(&self, seed: &[f64]) -> Vector {
        let mut best = seed.to_vec();
        let mut best_res = residual_inf_norm(&self.residual(&best));
        let mut x = best.clone();
        for _ in 0..50 {
            if best_res < 1e-14 {
                break;
            }
            let f = self.residual(&x);
            let Ok(dx) = udl_decompose(&self.jacobian(&x)).and_then(|u| u.solve(&f)) else {
                break;
            };
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi -= di;
            }
            let res = residual_inf_norm(&self.residual(&x));
            if res < best_res {
                best.clone_from(&x);
                best_res = res;
            }
        }
        best
    }
}

/// Central-difference Jacobian, column by column.
///
/// The step along axis `j` is `rel_step * max(1, |x_j|)`. Non-finite
/// residual values propagate into the result.
pub fn fd_jacobian(residual: &dyn Fn(&[f64]) -> Vector, x: &[f64], rel_step: f64) -> Matrix {
    let n = x.len();
    let mut jac = Matrix::zeros(n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = rel_step * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let fp = residual(&probe);
        probe[j] = x[j] - h;
        let fm = residual(&probe);
        probe[j] = x[j];
        // actual spacing, which differs from 2h by rounding
        let span = (x[j] + h) - (x[j] - h);
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / span;
        }
    }
    jac
}

/// Looks up a builtin benchmark by its CLI identifier.
pub fn builtin(name: &str) -> Result<Problem> {
    match name {
        "simple1d" => simple1d(),
        "simple2d" => simple2d(),
        "oproblem" => oproblem(),
        "fproblem0" => fproblem0(),
        _ => Err(Error::UnknownProblem {
            name: name.to_string(),
            valid: BUILTIN_NAMES.to_vec(),
        }),
    }
}

fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
    Matrix::from_row_major(vec![a, b, c, d]).expect("2x2")
}

/// `f(x) = atan(x) + sin(x) - 1` on [-3, 3].
fn simple1d() -> Result<Problem> {
    let f = |x: f64| x.atan() + x.sin() - 1.0;
    let df = |x: f64| 1.0 / (1.0 + x * x) + x.cos();
    // No closed-form roots for this one; bracket sign changes on the domain.
    let (lo, hi) = (-3.0, 3.0);
    let steps = 600;
    let mut seeds = Vec::new();
    for k in 0..steps {
        let a = lo + (hi - lo) * k as f64 / steps as f64;
        let b = lo + (hi - lo) * (k + 1) as f64 / steps as f64;
        if f(a) == 0.0 || f(a).signum() != f(b).signum() {
            let (mut a, mut b) = (a, b);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if f(a).signum() == f(mid).signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            seeds.push(vec![0.5 * (a + b)]);
        }
    }
    Problem::new(
        "simple1d",
        1,
        Arc::new(move |x| vec![f(x[0])]),
        Arc::new(move |x| Matrix::diagonal(&[df(x[0])])),
        seeds,
        vec![(lo, hi)],
    )
}

/// Circle `x² + y² = 4` against the parabola `x² y = 1`.
fn simple2d() -> Result<Problem> {
    Problem::new(
        "simple2d",
        2,
        Arc::new(|v| {
            let (x, y) = (v[0], v[1]);
            vec![x * x + y * y - 4.0, x * x * y - 1.0]
        }),
        Arc::new(|v| {
            let (x, y) = (v[0], v[1]);
            m2(2.0 * x, 2.0 * y, 2.0 * x * y, x * x)
        }),
        vec![
            vec![1.9837924, 0.25410169],
            vec![-1.9837924, 0.25410169],
            vec![0.73307679, 1.8608059],
            vec![-0.73307679, 1.8608059],
        ],
        vec![(-5.0, 5.0), (-5.0, 5.0)],
    )
}

fn oproblem() -> Result<Problem> {
    Problem::new(
        "oproblem",
        2,
        Arc::new(|v| {
            let (x, y) = (v[0], v[1]);
            vec![x * x - y * y - 4.0 * x + 6.0, 2.0 * x * y + 4.0 * y - 2.0]
        }),
        Arc::new(|v| {
            let (x, y) = (v[0], v[1]);
            m2(2.0 * (x - 2.0), -2.0 * y, 2.0 * y, 2.0 * (x + 2.0))
        }),
        vec![vec![-1.7505169, 4.0082886], vec![-2.2244718, -4.4549031]],
        vec![(-10.0, 10.0), (-10.0, 10.0)],
    )
}

/// Symmetric-Jacobian variant of simple2d.
fn fproblem0() -> Result<Problem> {
    Ok(Problem::new(
        "fproblem0",
        2,
        Arc::new(|v| {
            let (x, y) = (v[0], v[1]);
            vec![x * x + x * y * y - 4.0, x * x * y - 1.0]
        }),
        Arc::new(|v| {
            let (x, y) = (v[0], v[1]);
            m2(2.0 * x + y * y, 2.0 * x * y, 2.0 * x * y, x * x)
        }),
        vec![
            vec![-2.0296789, 0.24274223],
            vec![1.9668697, 0.25849302],
            vec![0.65417501, 2.3367492],
        ],
        vec![(-5.0, 5.0), (-5.0, 5.0)],
    )?
    .with_symmetric_jacobian())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unknown_name_lists_valid() {
        let err = builtin("rosenbrock").unwrap_err();
        let msg = err.to_string();
        for name in BUILTIN_NAMES {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn registered_roots_are_roots() {
        for name in BUILTIN_NAMES {
            let p = builtin(name).unwrap();
            assert!(!p.known_roots().is_empty(), "{name}");
            for r in p.known_roots() {
                assert!(residual_inf_norm(&p.residual(r)) < 1e-13, "{name} {r:?}");
            }
            for (printed, polished) in p.printed_roots().iter().zip(p.known_roots()) {
                for (a, b) in printed.iter().zip(polished) {
                    assert!((a - b).abs() < 1e-6, "{name}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn simple1d_single_root_in_domain() {
        let p = builtin("simple1d").unwrap();
        assert_eq!(p.known_roots().len(), 1);
        let r = p.known_roots()[0][0];
        assert!(r > 0.5 && r < 0.6, "{r}");
    }

    #[test]
    fn fd_examples() {
        let a = m2(1.5, -2.0, 0.25, 3.0);
        let lin = move |x: &[f64]| a.mul_vec(x).unwrap();
        let j = fd_jacobian(&lin, &[0.3, -7.0], DEFAULT_FD_STEP);
        for (u, v) in j.as_slice().iter().zip(m2(1.5, -2.0, 0.25, 3.0).as_slice()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-9);
        }

        let p = builtin("simple2d").unwrap();
        let j = fd_jacobian(&|x| p.residual(x), &[1.0, 1.0], DEFAULT_FD_STEP);
        for (u, v) in j.as_slice().iter().zip(&[2.0, 2.0, 2.0, 1.0]) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-5);
        }

        let p = builtin("fproblem0").unwrap();
        let j = fd_jacobian(&|x| p.residual(x), &[1.0, 1.0], DEFAULT_FD_STEP);
        for (u, v) in j.as_slice().iter().zip(&[3.0, 2.0, 2.0, 1.0]) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-5);
        }
    }

    #[test]
    fn fd_propagates_non_finite() {
        let f = |x: &[f64]| vec![x[0].ln()];
        let j = fd_jacobian(&f, &[0.0], DEFAULT_FD_STEP);
        assert!(!j[(0, 0)].is_finite());
    }

    #[test]
    fn from_residual_uses_differences() {
        let p = Problem::from_residual(
            "cubic",
            1,
            Arc::new(|x| vec![x[0] * x[0] * x[0] - 8.0]),
            vec![vec![2.0]],
            vec![(-4.0, 4.0)],
        )
        .unwrap();
        assert_abs_diff_eq!(p.jacobian(&[2.0])[(0, 0)], 12.0, epsilon = 1e-6);
        assert!(!p.has_symmetric_jacobian());
        assert!(Problem::from_residual(
            "bad",
            2,
            Arc::new(|x| x.to_vec()),
            vec![],
            vec![(0.0, 1.0)]
        )
        .is_err());
    }

    #[test]
    fn only_fproblem0_is_symmetric() {
        for name in BUILTIN_NAMES {
            assert_eq!(
                builtin(name).unwrap().has_symmetric_jacobian(),
                name == "fproblem0"
            );
        }
    }
}
