//! Shared value types: dense matrices, solver state, configuration and
//! the outcome model every solver reports through.

use std::fmt;
use std::io::{self, Write};
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use num_traits::Float;

use crate::error::{Error, Result};

/// Position or residual vector of a problem of dimension N.
pub type Vector = Vec<f64>;

/// Damping constant of the W4 map. Fixed at 2 (critical damping).
pub const DAMPING_C: f64 = 2.0;

/// Square dense matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix<T = f64> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Float> Matrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major entries; `data.len()` must be a perfect square.
    pub fn from_row_major(data: Vec<T>) -> Result<Self> {
        let dim = (data.len() as f64).sqrt().round() as usize;
        if dim * dim != data.len() {
            return Err(Error::ShapeMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn diagonal(entries: &[T]) -> Self {
        let mut m = Self::zeros(entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn map<U: Float>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Self {
            dim: self.dim,
            data,
        })
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        self.check_dim(v.len())?;
        Ok((0..self.dim)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.dim)
            .map(|i| self.row(i).iter().fold(T::zero(), |acc, &v| acc + v.abs()))
            .fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::ShapeMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<_> = self.data.chunks(self.dim.max(1)).collect();
        f.debug_list().entries(rows).finish()
    }
}

/// Max-abs norm of a residual vector. Any non-finite entry yields `+inf`.
pub fn residual_inf_norm(values: &[f64]) -> f64 {
    let mut max = 0.0_f64;
    for &v in values {
        if !v.is_finite() {
            return f64::INFINITY;
        }
        max = max.max(v.abs());
    }
    max
}

/// Position and momentum at one iteration. First-order methods carry an
/// empty momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vector,
    pub p: Vector,
}

impl SolverState {
    pub fn first_order(x: Vector) -> Self {
        Self { x, p: Vec::new() }
    }

    /// Second-order state with zero initial momentum.
    pub fn at_rest(x: Vector) -> Self {
        let p = vec![0.0; x.len()];
        Self { x, p }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.p).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    /// Newton-Raphson.
    Nr,
    /// Damped Newton.
    Dn,
    /// W4 with UDL preconditioning (X = L^-1, Y = D^-1 U^-1).
    W4Udl,
    /// W4 with eigen preconditioning (X = P, Y = Λ^-1 P^-1); 2-D symmetric Jacobians only.
    W4Eigen,
    /// Damped Newton written through the Jacobian eigen-decomposition; 2-D symmetric only.
    DnEigen,
}

impl MethodKind {
    pub const ALL: [MethodKind; 5] = [
        MethodKind::Nr,
        MethodKind::Dn,
        MethodKind::W4Udl,
        MethodKind::W4Eigen,
        MethodKind::DnEigen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Nr => "nr",
            MethodKind::Dn => "dn",
            MethodKind::W4Udl => "w4-udl",
            MethodKind::W4Eigen => "w4-eigen",
            MethodKind::DnEigen => "dn-eigen",
        }
    }

    /// True for the W4 variants, which evolve a momentum vector.
    pub fn has_momentum(self) -> bool {
        matches!(self, MethodKind::W4Udl | MethodKind::W4Eigen)
    }

    pub fn needs_symmetric_2d(self) -> bool {
        matches!(self, MethodKind::W4Eigen | MethodKind::DnEigen)
    }

    /// Step size used when none is given: 1 for NR, 0.5 otherwise.
    pub fn default_dtau(self) -> f64 {
        match self {
            MethodKind::Nr => 1.0,
            _ => 0.5,
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nr" => Ok(MethodKind::Nr),
            "dn" => Ok(MethodKind::Dn),
            "w4-udl" | "w4" => Ok(MethodKind::W4Udl),
            "w4-eigen" => Ok(MethodKind::W4Eigen),
            "dn-eigen" => Ok(MethodKind::DnEigen),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

/// Validated solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    method: MethodKind,
    dtau: f64,
    tol: f64,
    max_iter: usize,
}

impl SolverConfig {
    pub const DEFAULT_TOL: f64 = 1e-6;
    pub const DEFAULT_MAX_ITER: usize = 10_000;
    pub const BASIN_MAX_ITER: usize = 1_000;

    /// NR requires `dtau == 1`; every other method requires `0 < dtau < 1`.
    pub fn new(method: MethodKind, dtau: f64) -> Result<Self> {
        let ok = match method {
            MethodKind::Nr => dtau == 1.0,
            _ => dtau > 0.0 && dtau < 1.0,
        };
        if !ok {
            let want = if method == MethodKind::Nr {
                "dtau = 1"
            } else {
                "0 < dtau < 1"
            };
            return Err(Error::InvalidConfig(format!(
                "method {method} requires {want}, got {dtau}"
            )));
        }
        Ok(Self {
            method,
            dtau,
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
        })
    }

    /// Configuration with the method's default step.
    pub fn with_defaults(method: MethodKind) -> Self {
        Self::new(method, method.default_dtau()).expect("default dtau is valid")
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tol must be positive, got {tol}"
            )));
        }
        self.tol = tol;
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Result<Self> {
        if max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        self.max_iter = max_iter;
        Ok(self)
    }

    pub fn method(&self) -> MethodKind {
        self.method
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn damping_c(&self) -> f64 {
        DAMPING_C
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    MaxIterExceeded,
    Diverged,
    SingularDecomposition,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterExceeded => "max_iter_exceeded",
            Status::Diverged => "diverged",
            Status::SingularDecomposition => "singular_decomposition",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub x: Vector,
    pub p: Vector,
    pub res_inf: f64,
}

/// Everything a traced run produced. `trace[0]` is the initial state and
/// `iterations == trace.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub status: Status,
    pub final_state: SolverState,
    pub iterations: usize,
    pub trace: Vec<TraceRecord>,
}

impl SolverResult {
    pub fn final_residual(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |r| r.res_inf)
    }

    /// Writes the trace as CSV: `iter,x_1..x_N,p_1..p_N,res_inf`.
    ///
    /// Momentum columns are omitted for first-order methods. Floats use the
    /// shortest representation that round-trips.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.final_state.x.len();
        let m = self.final_state.p.len();
        let mut header = String::from("iter");
        for i in 1..=n {
            header.push_str(&format!(",x_{i}"));
        }
        for i in 1..=m {
            header.push_str(&format!(",p_{i}"));
        }
        header.push_str(",res_inf\n");
        out.write_all(header.as_bytes())?;
        for rec in &self.trace {
            let mut line = rec.iter.to_string();
            for v in rec.x.iter().chain(&rec.p) {
                line.push(',');
                line.push_str(&fmt_float(*v));
            }
            line.push(',');
            line.push_str(&fmt_float(rec.res_inf));
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// Shortest round-trip text for a float, as used in every CSV artifact.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_norm_examples() {
        assert_eq!(residual_inf_norm(&[0.0, 0.0]), 0.0);
        assert_eq!(residual_inf_norm(&[-3.0, 2.0]), 3.0);
        // simple2d at (1, 4): F = (1 + 16 - 4, 4 - 1)
        assert_eq!(residual_inf_norm(&[13.0, 3.0]), 13.0);
        assert_eq!(residual_inf_norm(&[1.0, f64::NAN]), f64::INFINITY);
        assert_eq!(residual_inf_norm(&[f64::NEG_INFINITY]), f64::INFINITY);
    }

    #[test]
    fn config_dtau_rules() {
        assert!(SolverConfig::new(MethodKind::Nr, 1.0).is_ok());
        assert!(SolverConfig::new(MethodKind::Nr, 0.5).is_err());
        assert!(SolverConfig::new(MethodKind::Dn, 1.0).is_err());
        assert!(SolverConfig::new(MethodKind::W4Udl, 0.0).is_err());
        assert!(SolverConfig::new(MethodKind::W4Eigen, 0.3).is_ok());
        let cfg = SolverConfig::with_defaults(MethodKind::Dn);
        assert_eq!(cfg.dtau(), 0.5);
        assert_eq!(cfg.damping_c(), 2.0);
        assert!(cfg.with_tol(0.0).is_err());
        assert!(cfg.with_max_iter(0).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in MethodKind::ALL {
            assert_eq!(m.as_str().parse::<MethodKind>().unwrap(), m);
        }
        assert_eq!("w4".parse::<MethodKind>().unwrap(), MethodKind::W4Udl);
        assert!("halley".parse::<MethodKind>().is_err());
    }

    #[test]
    fn matrix_basics() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(a.mul_vec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(a.norm_inf(), 7.0);
        let i = Matrix::identity(2);
        assert_eq!(a.matmul(&i).unwrap(), a);
        assert_eq!(a.transpose()[(0, 1)], 3.0);
        assert!(a.mul_vec(&[1.0]).is_err());
        assert!(Matrix::<f64>::from_row_major(vec![1.0; 3]).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let result = SolverResult {
            status: Status::Converged,
            final_state: SolverState::at_rest(vec![1.0]),
            iterations: 1,
            trace: vec![
                TraceRecord {
                    iter: 0,
                    x: vec![0.5],
                    p: vec![0.0],
                    res_inf: 0.25,
                },
                TraceRecord {
                    iter: 1,
                    x: vec![1.0],
                    p: vec![0.1],
                    res_inf: 1e-9,
                },
            ],
        };
        let mut buf = Vec::new();
        result.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iter,x_1,p_1,res_inf\n0,0.5,0.0,0.25\n1,1.0,0.1,1e-9\n"
        );
    }
}
