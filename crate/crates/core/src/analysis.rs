//! Spectral and asymptotic checks of the convergence theory.

use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Float;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::linalg::{
    assemble_w_matrix, invert, solve_unit_lower, solve_upper_diag, sym2_eigen, udl_decompose, Real,
};
use crate::problems::{builtin, Problem};
use crate::solvers::drive;
use crate::types::{fmt_float, Matrix, SolverConfig, SolverState, Status};

/// Which `(X, Y)` pair with `Y = X⁻¹J⁻¹` to place in the W matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    /// `X = L⁻¹`, `Y = D⁻¹U⁻¹`.
    Udl,
    /// `X = P`, `Y = Λ⁻¹P⁻¹` (2×2 symmetric only).
    Eigen,
    /// `X = I`, `Y = J⁻¹`.
    Inverse,
}

impl Preconditioner {
    pub fn as_str(self) -> &'static str {
        match self {
            Preconditioner::Udl => "udl",
            Preconditioner::Eigen => "eigen",
            Preconditioner::Inverse => "inverse",
        }
    }
}

impl std::str::FromStr for Preconditioner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "udl" => Ok(Self::Udl),
            "eigen" => Ok(Self::Eigen),
            "inverse" => Ok(Self::Inverse),
            _ => Err(Error::InvalidConfig(format!(
                "unknown preconditioner `{s}` (valid: udl, eigen, inverse)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WSpectrum {
    pub eigenvalues: Vec<Complex64>,
    /// `max |λ - (1 - Δτ)|` over the spectrum.
    pub max_deviation: f64,
}

/// Builds the preconditioner pair for `j` in whatever precision `T` is.
pub fn preconditioner_pair<T: Real>(
    j: &Matrix<T>,
    pre: Preconditioner,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let n = j.dim();
    let columns = |f: &dyn Fn(&[T]) -> Result<Vec<T>>| -> Result<Matrix<T>> {
        let mut m = Matrix::zeros(n);
        for c in 0..n {
            let mut e = vec![T::zero(); n];
            e[c] = T::one();
            for (r, v) in f(&e)?.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    };
    match pre {
        Preconditioner::Udl => {
            let f = udl_decompose(j)?;
            let x = columns(&|e| solve_unit_lower(&f.l, e))?;
            let y = columns(&|e| solve_upper_diag(&f.u, &f.d, e))?;
            Ok((x, y))
        }
        Preconditioner::Eigen => {
            if n != 2 || !j.is_symmetric(T::zero()) {
                return Err(Error::Unsupported(
                    "eigen preconditioner needs a symmetric 2x2 Jacobian".into(),
                ));
            }
            let e = sym2_eigen(j)?;
            let li = e.lambda_pinv();
            let pi = e.p_inverse();
            let mut y = Matrix::zeros(2);
            for r in 0..2 {
                for c in 0..2 {
                    y[(r, c)] = li[r] * pi[(r, c)];
                }
            }
            Ok((e.p_matrix(), y))
        }
        Preconditioner::Inverse => Ok((Matrix::identity(n), invert(j)?)),
    }
}

/// Spectrum of the W matrix for `j` and the deviation from `1 - Δτ`.
///
/// The matrix is defective when `Y = X⁻¹J⁻¹`, so a plain double-precision
/// eigen-solve only resolves the eigenvalues to about `√ε`. The pair and `W`
/// are therefore built in double-double arithmetic and the spectrum is taken
/// from the block structure of `W` (see [`w_matrix_eigenvalues`]).
pub fn w_spectrum_check(j: &Matrix, pre: Preconditioner, dtau: f64) -> Result<WSpectrum> {
    if !(dtau > 0.0 && dtau < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "dtau must lie in (0, 1), got {dtau}"
        )));
    }
    let jd = j.map(TwoFloat::from);
    let (x, y) = preconditioner_pair(&jd, pre)?;
    let w = assemble_w_matrix(&jd, &x, &y, TwoFloat::from(dtau))?;
    let eigenvalues = w_matrix_eigenvalues(&w)?;
    let target = Complex64::new(1.0 - dtau, 0.0);
    let max_deviation = eigenvalues
        .iter()
        .map(|l| (l - target).norm())
        .fold(0.0, f64::max);
    Ok(WSpectrum {
        eigenvalues,
        max_deviation,
    })
}

/// Eigenvalues of `W = [[I, B], [C, s·I]]`.
///
/// With scalar diagonal blocks, `det(W − λ) = det((1−λ)(s−λ)·I − C·B)`, so
/// every eigenvalue `h` of `H = ((1−s)/2)²·I + C·B` gives the pair
/// `λ = (1+s)/2 ± √h`. `H` is formed in the working precision `T` and its
/// (small) eigenproblem solved in `f64`.
pub fn w_matrix_eigenvalues<T: Float>(w: &Matrix<T>) -> Result<Vec<Complex64>> {
    let n2 = w.dim();
    if !n2.is_multiple_of(2) || n2 == 0 {
        return Err(Error::ShapeMismatch {
            expected: n2 + 1,
            found: n2,
        });
    }
    let n = n2 / 2;
    let s = w[(n, n)];
    for r in 0..n {
        for c in 0..n {
            let id = if r == c { T::one() } else { T::zero() };
            if w[(r, c)] != id || w[(n + r, n + c)] != if r == c { s } else { T::zero() } {
                return Err(Error::Unsupported(
                    "W must have scalar diagonal blocks".into(),
                ));
            }
        }
    }
    let two = T::one() + T::one();
    let half_gap = (T::one() - s) / two;
    let mut h = Matrix::<T>::zeros(n);
    for r in 0..n {
        for c in 0..n {
            let mut acc = if r == c {
                half_gap * half_gap
            } else {
                T::zero()
            };
            for k in 0..n {
                acc = acc + w[(n + r, k)] * w[(k, n + c)];
            }
            h[(r, c)] = acc;
        }
    }
    let hf: Vec<f64> = h
        .as_slice()
        .iter()
        .map(|v| v.to_f64().unwrap_or(f64::NAN))
        .collect();
    let scale = hf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eig_h: Vec<Complex64> = if scale == 0.0 {
        vec![Complex64::new(0.0, 0.0); n]
    } else if !scale.is_finite() {
        return Err(Error::InvalidConfig("non-finite W matrix".into()));
    } else {
        let hm = DMatrix::from_row_slice(n, n, &hf.iter().map(|v| v / scale).collect::<Vec<_>>());
        hm.complex_eigenvalues().iter().map(|z| z * scale).collect()
    };
    let center = Complex64::new(((T::one() + s) / two).to_f64().unwrap_or(f64::NAN), 0.0);
    Ok(eig_h
        .iter()
        .flat_map(|hk| {
            let r = hk.sqrt();
            [center + r, center - r]
        })
        .collect())
}

/// Eigen-data of the Jacobian at one iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenRecord {
    pub iter: usize,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// `|λ⁻/λ⁺|`, `+inf` when `λ⁺ = 0`.
    pub ratio: f64,
    pub c_plus: f64,
    pub c_minus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenTrace {
    pub status: Status,
    pub iterations: usize,
    pub final_state: SolverState,
    /// One record per finite iterate.
    pub records: Vec<EigenRecord>,
}

impl EigenTrace {
    /// CSV `iter,lambda_plus,lambda_minus,ratio,c_plus,c_minus`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(b"iter,lambda_plus,lambda_minus,ratio,c_plus,c_minus\n")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iter,
                fmt_float(r.lambda_plus),
                fmt_float(r.lambda_minus),
                fmt_float(r.ratio),
                fmt_float(r.c_plus),
                fmt_float(r.c_minus)
            )?;
        }
        Ok(())
    }
}

/// Eigen-data of `J(x)` and the expansion coefficients of `F(x)`.
pub fn eigen_record(problem: &Problem, iter: usize, x: &[f64]) -> Result<EigenRecord> {
    let e = sym2_eigen(&problem.jacobian(x))?;
    let (c_plus, c_minus) = e.coefficients(&problem.residual(x));
    let ratio = if e.lambda_plus == 0.0 {
        f64::INFINITY
    } else {
        (e.lambda_minus / e.lambda_plus).abs()
    };
    Ok(EigenRecord {
        iter,
        lambda_plus: e.lambda_plus,
        lambda_minus: e.lambda_minus,
        ratio,
        c_plus,
        c_minus,
    })
}

/// Runs the solver and records the Jacobian eigen-pairs along the way.
/// Non-finite iterates (at divergence) are not recorded.
pub fn eigen_trace(problem: &Problem, config: &SolverConfig, x0: &[f64]) -> Result<EigenTrace> {
    if problem.dim() != 2 || !problem.has_symmetric_jacobian() {
        return Err(Error::Unsupported(format!(
            "eigen trace needs a 2-D symmetric Jacobian; `{}` has none",
            problem.name()
        )));
    }
    let mut records = Vec::new();
    let mut failure = None;
    let summary = drive(problem, config, x0, |iter, state, _| {
        if state.is_finite() && failure.is_none() {
            match eigen_record(problem, iter, &state.x) {
                Ok(r) => records.push(r),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(EigenTrace {
        status: summary.status,
        iterations: summary.iterations,
        final_state: summary.final_state,
        records,
    })
}

/// Remainder constant of the series check: deviations must stay below `C |x|³`.
pub const SERIES_C: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub x: f64,
    /// Absolute deviations of `λ⁺, λ⁻, |c⁺|, |c⁻|` from the expansions.
    pub deviations: [f64; 4],
    pub bound: f64,
}

impl SeriesRow {
    pub fn passes(&self) -> [bool; 4] {
        self.deviations.map(|d| d <= self.bound)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCheck {
    pub y: f64,
    pub rows: Vec<SeriesRow>,
}

impl SeriesCheck {
    pub fn max_deviations(&self) -> [f64; 4] {
        let mut m = [0.0f64; 4];
        for r in &self.rows {
            for (mk, d) in m.iter_mut().zip(r.deviations) {
                *mk = mk.max(d);
            }
        }
        m
    }

    pub fn eigenvalues_pass(&self) -> bool {
        self.rows.iter().all(|r| r.passes()[..2].iter().all(|&p| p))
    }

    pub fn coefficients_pass(&self) -> bool {
        self.rows.iter().all(|r| r.passes()[2..].iter().all(|&p| p))
    }

    pub fn passed(&self) -> bool {
        self.eigenvalues_pass() && self.coefficients_pass()
    }
}

/// Compares the fproblem0 eigen-data at `(x, y)` with its expansion about
/// `x = 0`:
/// `λ⁺ ≈ y² + 2x + 4x²`, `λ⁻ ≈ −3x²`, `c⁺ ≈ 4 + (−y² + 2/y)x`, `c⁻ ≈ 1 − 8x/y`.
/// The coefficients are compared in magnitude, independent of eigenvector signs.
pub fn degeneracy_series_check(y: f64, xs: &[f64]) -> Result<SeriesCheck> {
    if y == 0.0 || !y.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "y must be finite and nonzero, got {y}"
        )));
    }
    if let Some(x) = xs.iter().find(|x| x.is_nan() || x.abs() > 0.01) {
        return Err(Error::InvalidConfig(format!(
            "series points need |x| <= 0.01, got {x}"
        )));
    }
    let p = builtin("fproblem0")?;
    let rows = xs
        .iter()
        .map(|&x| {
            let r = eigen_record(&p, 0, &[x, y])?;
            let series = [
                y * y + 2.0 * x + 4.0 * x * x,
                -3.0 * x * x,
                4.0 + (-y * y + 2.0 / y) * x,
                1.0 - 8.0 * x / y,
            ];
            let deviations = [
                (r.lambda_plus - series[0]).abs(),
                (r.lambda_minus - series[1]).abs(),
                (r.c_plus.abs() - series[2].abs()).abs(),
                (r.c_minus.abs() - series[3].abs()).abs(),
            ];
            Ok(SeriesRow {
                x,
                deviations,
                bound: SERIES_C * x.abs().powi(3),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SeriesCheck { y, rows })
}

/// Iterates the linearized 1-D W4 error map from `(e_x, e_p) = (1, 0)`:
/// `e_x ← e_x − Δτ e_p`, `e_p ← (1 − 2Δτ) e_p + Δτ e_x`. Returns `n + 1` pairs.
pub fn linear_error_iterates(dtau: f64, n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n + 1);
    let (mut ex, mut ep) = (1.0, 0.0);
    out.push((ex, ep));
    for _ in 0..n {
        (ex, ep) = (ex - dtau * ep, (1.0 - 2.0 * dtau) * ep + dtau * ex);
        out.push((ex, ep));
    }
    out
}

/// Closed form of [`linear_error_iterates`]:
/// `e_x(n) = (1−Δτ)^{n−1} (1 + (n−1)Δτ)`, `e_p(n) = nΔτ (1−Δτ)^{n−1}`.
pub fn linear_error_closed_form(dtau: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let g = (1.0 - dtau).powf(nf - 1.0);
    (g * (1.0 + (nf - 1.0) * dtau), nf * dtau * g)
}
