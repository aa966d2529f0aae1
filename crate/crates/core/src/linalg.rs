//! Dense kernels behind the preconditioners.
//!
//! Everything here is generic over [`Real`] so the spectral checks can run
//! the same code in double-double arithmetic; the solvers only ever
//! instantiate `f64`.

use num_traits::Float;
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::types::Matrix;

/// Scalar usable by the kernels: a [`Float`] with a correctly rounded quotient.
pub trait Real: Float {
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
}

impl Real for f64 {}

impl Real for TwoFloat {
    /// `twofloat`'s double-double division is only accurate to about one
    /// `f64` ulp; one residual correction restores full precision.
    fn quot(self, rhs: Self) -> Self {
        let q = self / rhs;
        q + (self - q * rhs) / rhs.hi()
    }
}

/// Pivots with magnitude below this are treated as exact zeros.
pub const PIVOT_THRESHOLD: f64 = 1e-300;

#[inline]
fn c<T: Float>(v: f64) -> T {
    T::from(v).expect("representable constant")
}

#[inline]
fn is_tiny<T: Float>(v: T) -> bool {
    // NaN compares false and flows through to the divergence check.
    v.abs() < c(PIVOT_THRESHOLD)
}

/// `A = U · diag(D) · L` with unit-triangular `U` (upper) and `L` (lower).
#[derive(Debug, Clone, PartialEq)]
pub struct UdlFactors<T = f64> {
    pub u: Matrix<T>,
    pub d: Vec<T>,
    pub l: Matrix<T>,
}

impl<T: Real> UdlFactors<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        let ud = Matrix::from_row_major(
            (0..self.u.dim())
                .flat_map(|i| (0..self.u.dim()).map(move |j| (i, j)))
                .map(|(i, j)| self.u[(i, j)] * self.d[j])
                .collect(),
        )
        .expect("square");
        ud.matmul(&self.l).expect("same dim")
    }

    /// `L⁻¹ b`.
    pub fn apply_x(&self, b: &[T]) -> Result<Vec<T>> {
        solve_unit_lower(&self.l, b)
    }

    /// `D⁻¹ U⁻¹ b`.
    pub fn apply_y(&self, b: &[T]) -> Result<Vec<T>> {
        solve_upper_diag(&self.u, &self.d, b)
    }

    /// `A⁻¹ b = L⁻¹ D⁻¹ U⁻¹ b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        self.apply_x(&self.apply_y(b)?)
    }
}

/// UDL factorization by elimination from the bottom-right corner, no pivoting.
///
/// Exists whenever every trailing principal minor is nonsingular; a pivot
/// below [`PIVOT_THRESHOLD`] yields [`Error::Singular`].
pub fn udl_decompose<T: Real>(a: &Matrix<T>) -> Result<UdlFactors<T>> {
    let n = a.dim();
    let mut s = a.clone();
    let mut u = Matrix::identity(n);
    let mut l = Matrix::identity(n);
    let mut d = vec![T::zero(); n];
    for k in (0..n).rev() {
        let dk = s[(k, k)];
        if is_tiny(dk) {
            return Err(Error::Singular {
                index: k,
                pivot: dk.to_f64().unwrap_or(f64::NAN),
            });
        }
        d[k] = dk;
        for i in 0..k {
            u[(i, k)] = s[(i, k)].quot(dk);
            l[(k, i)] = s[(k, i)].quot(dk);
        }
        for i in 0..k {
            let sik = s[(i, k)].quot(dk);
            for j in 0..k {
                s[(i, j)] = s[(i, j)] - sik * s[(k, j)];
            }
        }
    }
    Ok(UdlFactors { u, d, l })
}

/// Forward substitution for unit lower-triangular `L`.
pub fn solve_unit_lower<T: Real>(l: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = l.dim();
    if b.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let mut x = b.to_vec();
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc = acc - l[(i, j)] * x[j];
        }
        x[i] = acc;
    }
    Ok(x)
}

/// `diag(D)⁻¹ · U⁻¹ · b` for unit upper-triangular `U`.
pub fn solve_upper_diag<T: Real>(u: &Matrix<T>, d: &[T], b: &[T]) -> Result<Vec<T>> {
    let n = u.dim();
    for len in [d.len(), b.len()] {
        if len != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: len,
            });
        }
    }
    if let Some(k) = d.iter().position(|&v| is_tiny(v)) {
        return Err(Error::Singular {
            index: k,
            pivot: d[k].to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc = acc - u[(i, j)] * x[j];
        }
        x[i] = acc;
    }
    Ok(x.iter().zip(d).map(|(&v, &dk)| v.quot(dk)).collect())
}

/// Inverse by Gauss-Jordan with partial pivoting.
///
/// Used only for the plain-inverse preconditioner and for building
/// reference matrices in checks; the solvers never invert.
pub fn invert<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.dim();
    let mut m = a.clone();
    let mut inv = Matrix::<T>::identity(n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| {
                m[(i, col)]
                    .abs()
                    .partial_cmp(&m[(j, col)].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if is_tiny(m[(piv, col)]) || m[(piv, col)].is_nan() {
            return Err(Error::Singular {
                index: col,
                pivot: m[(piv, col)].to_f64().unwrap_or(f64::NAN),
            });
        }
        if piv != col {
            for j in 0..n {
                let (a1, a2) = (m[(col, j)], m[(piv, j)]);
                m[(col, j)] = a2;
                m[(piv, j)] = a1;
                let (b1, b2) = (inv[(col, j)], inv[(piv, j)]);
                inv[(col, j)] = b2;
                inv[(piv, j)] = b1;
            }
        }
        let p = m[(col, col)];
        for j in 0..n {
            m[(col, j)] = m[(col, j)].quot(p);
            inv[(col, j)] = inv[(col, j)].quot(p);
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[(i, col)];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                m[(i, j)] = m[(i, j)] - f * m[(col, j)];
                inv[(i, j)] = inv[(i, j)] - f * inv[(col, j)];
            }
        }
    }
    Ok(inv)
}

/// Eigen-pair of a symmetric 2×2 matrix, `lambda_plus >= lambda_minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen2<T = f64> {
    pub lambda_plus: T,
    pub lambda_minus: T,
    pub v_plus: [T; 2],
    pub v_minus: [T; 2],
}

/// Closed-form eigen-decomposition of a symmetric 2×2 matrix.
///
/// Sign convention: the first component of each eigenvector carries the
/// sign of the off-diagonal entry (positive when it is zero). With an exactly
/// zero off-diagonal the axis vectors are returned and λ⁺ goes to the larger
/// diagonal entry.
pub fn sym2_eigen<T: Real>(a: &Matrix<T>) -> Result<Eigen2<T>> {
    if a.dim() != 2 {
        return Err(Error::ShapeMismatch {
            expected: 2,
            found: a.dim(),
        });
    }
    let two = c::<T>(2.0);
    let (p, q, d) = (a[(0, 0)], (a[(0, 1)] + a[(1, 0)]) / two, a[(1, 1)]);
    let mean = (p + d) / two;
    let h = ((p - d) / two).hypot(q);
    let lambda_plus = mean + h;
    let lambda_minus = mean - h;

    if q == T::zero() {
        let (one, zero) = (T::one(), T::zero());
        let (v_plus, v_minus) = if p >= d {
            ([one, zero], [zero, one])
        } else {
            ([zero, one], [one, zero])
        };
        return Ok(Eigen2 {
            lambda_plus,
            lambda_minus,
            v_plus,
            v_minus,
        });
    }

    // Two algebraically equivalent kernel vectors; keep the better-conditioned one.
    let r1 = [q, lambda_plus - p];
    let r2 = [lambda_plus - d, q];
    let v = if r2[0].hypot(r2[1]) > r1[0].hypot(r1[1]) {
        r2
    } else {
        r1
    };
    let norm = v[0].hypot(v[1]);
    let mut v_plus = [v[0].quot(norm), v[1].quot(norm)];
    let mut v_minus = [-v_plus[1], v_plus[0]];
    let sign = if q >= T::zero() { T::one() } else { -T::one() };
    for w in [&mut v_plus, &mut v_minus] {
        if w[0] * sign < T::zero() {
            w[0] = -w[0];
            w[1] = -w[1];
        }
    }
    Ok(Eigen2 {
        lambda_plus,
        lambda_minus,
        v_plus,
        v_minus,
    })
}

impl<T: Real> Eigen2<T> {
    /// `(c⁺, c⁻) = (v⁺·f, v⁻·f)`.
    pub fn coefficients(&self, f: &[T]) -> (T, T) {
        (
            self.v_plus[0] * f[0] + self.v_plus[1] * f[1],
            self.v_minus[0] * f[0] + self.v_minus[1] * f[1],
        )
    }

    /// `Q = [v⁺ v⁻]` (eigenvectors as columns).
    pub fn q_matrix(&self) -> Matrix<T> {
        Matrix::from_row_major(vec![
            self.v_plus[0],
            self.v_minus[0],
            self.v_plus[1],
            self.v_minus[1],
        ])
        .expect("2x2")
    }

    /// `P = Q / det Q`.
    pub fn p_matrix(&self) -> Matrix<T> {
        let q = self.q_matrix();
        let det = q[(0, 0)] * q[(1, 1)] - q[(0, 1)] * q[(1, 0)];
        q.scale(T::one().quot(det))
    }

    /// Explicit inverse of `P` (2×2 adjugate formula).
    pub fn p_inverse(&self) -> Matrix<T> {
        let p = self.p_matrix();
        let det = p[(0, 0)] * p[(1, 1)] - p[(0, 1)] * p[(1, 0)];
        Matrix::from_row_major(vec![
            p[(1, 1)].quot(det),
            -p[(0, 1)].quot(det),
            -p[(1, 0)].quot(det),
            p[(0, 0)].quot(det),
        ])
        .expect("2x2")
    }

    /// Diagonal of `Λ⁻¹` with the weak entry zeroed when λ⁻ is negligible
    /// (`|λ⁻| < 1e-14 · max(1, |λ⁺|)`).
    pub fn lambda_pinv(&self) -> [T; 2] {
        let thr = c::<T>(1e-14) * T::one().max(self.lambda_plus.abs());
        let minus = if self.lambda_minus.abs() < thr {
            T::zero()
        } else {
            T::one().quot(self.lambda_minus)
        };
        [T::one().quot(self.lambda_plus), minus]
    }

    /// `Λ⁻¹ P⁻¹ b`.
    pub fn apply_y(&self, b: &[T]) -> Vec<T> {
        let pi = self.p_inverse();
        let li = self.lambda_pinv();
        let w = pi.mul_vec(b).expect("2-vector");
        vec![li[0] * w[0], li[1] * w[1]]
    }
}

/// `W = [[I, −Δτ·X], [Δτ·Y·J, (1−2Δτ)·I]]`, the 2N×2N error-propagation matrix.
pub fn assemble_w_matrix<T: Real>(
    j: &Matrix<T>,
    x: &Matrix<T>,
    y: &Matrix<T>,
    dtau: T,
) -> Result<Matrix<T>> {
    let n = j.dim();
    for m in [x, y] {
        if m.dim() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: m.dim(),
            });
        }
    }
    let yj = y.matmul(j)?;
    let damp = T::one() - c::<T>(2.0) * dtau;
    let mut w = Matrix::zeros(2 * n);
    for r in 0..n {
        w[(r, r)] = T::one();
        w[(n + r, n + r)] = damp;
        for k in 0..n {
            w[(r, n + k)] = -dtau * x[(r, k)];
            w[(n + r, k)] = dtau * yj[(r, k)];
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn m(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn udl_identity() {
        let f = udl_decompose(&Matrix::<f64>::identity(2)).unwrap();
        assert_eq!(f.u, Matrix::identity(2));
        assert_eq!(f.l, Matrix::identity(2));
        assert_eq!(f.d, vec![1.0, 1.0]);
    }

    #[test]
    fn udl_hand_example() {
        let a = m(&[[2.0, 2.0], [2.0, 1.0]]);
        let f = udl_decompose(&a).unwrap();
        assert_eq!(f.u, m(&[[1.0, 2.0], [0.0, 1.0]]));
        assert_eq!(f.d, vec![-2.0, 1.0]);
        assert_eq!(f.l, m(&[[1.0, 0.0], [2.0, 1.0]]));
        assert_eq!(f.reconstruct(), a);
    }

    #[test]
    fn udl_zero_trailing_pivot() {
        // simple2d Jacobian at x = 0
        let a = m(&[[0.0, 2.0], [2.0, 0.0]]);
        assert!(matches!(
            udl_decompose(&a),
            Err(Error::Singular { index: 1, .. })
        ));
    }

    #[test]
    fn triangular_solves() {
        assert_eq!(
            solve_unit_lower(&Matrix::identity(2), &[3.0, 4.0]).unwrap(),
            vec![3.0, 4.0]
        );
        let l = m(&[[1.0, 0.0], [2.0, 1.0]]);
        assert_eq!(solve_unit_lower(&l, &[1.0, 0.0]).unwrap(), vec![1.0, -2.0]);
        assert_eq!(
            solve_upper_diag(&Matrix::identity(2), &[1.0, 1.0], &[5.0, 6.0]).unwrap(),
            vec![5.0, 6.0]
        );

        let u = m(&[[1.0, 2.0], [0.0, 1.0]]);
        let x = solve_upper_diag(&u, &[-2.0, 1.0], &[0.0, 3.0]).unwrap();
        assert_eq!(x, vec![3.0, 3.0]);
        let back = u.mul_vec(&[x[0] * -2.0, x[1]]).unwrap();
        assert_eq!(back, vec![0.0, 3.0]);

        assert!(matches!(
            solve_upper_diag(&u, &[0.0, 1.0], &[1.0, 1.0]),
            Err(Error::Singular { index: 0, .. })
        ));
        assert!(solve_unit_lower(&l, &[1.0]).is_err());
    }

    #[test]
    fn inverse_matches_identity() {
        let a = m(&[[0.0, 2.0], [3.0, 1.0]]);
        let inv = invert(&a).unwrap();
        let prod = a.matmul(&inv).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(
                    prod[(i, j)],
                    if i == j { 1.0 } else { 0.0 },
                    epsilon = 1e-15
                );
            }
        }
        assert!(invert(&m(&[[1.0, 2.0], [2.0, 4.0]])).is_err());
    }

    #[test]
    fn eigen_examples() {
        let e = sym2_eigen(&m(&[[2.0, 1.0], [1.0, 2.0]])).unwrap();
        assert_abs_diff_eq!(e.lambda_plus, 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.lambda_minus, 1.0, epsilon = 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.v_plus[0], s, epsilon = 1e-15);
        assert_abs_diff_eq!(e.v_plus[1], s, epsilon = 1e-15);

        // fproblem0 Jacobian at (1, 1)
        let e = sym2_eigen(&m(&[[3.0, 2.0], [2.0, 1.0]])).unwrap();
        assert_abs_diff_eq!(e.lambda_plus, 2.0 + 5f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(e.lambda_minus, 2.0 - 5f64.sqrt(), epsilon = 1e-14);

        let e = sym2_eigen(&Matrix::<f64>::identity(2)).unwrap();
        assert_eq!((e.lambda_plus, e.lambda_minus), (1.0, 1.0));
        assert_eq!(e.v_plus, [1.0, 0.0]);
        assert_eq!(e.v_minus, [0.0, 1.0]);

        let e = sym2_eigen(&m(&[[1.0, 0.0], [0.0, 4.0]])).unwrap();
        assert_eq!(e.lambda_plus, 4.0);
        assert_eq!(e.v_plus, [0.0, 1.0]);
    }

    #[test]
    fn eigen_signs_follow_off_diagonal() {
        let e = sym2_eigen(&m(&[[1.0, -0.5], [-0.5, 3.0]])).unwrap();
        assert!(e.v_plus[0] <= 0.0 && e.v_minus[0] <= 0.0);
        let e = sym2_eigen(&m(&[[1.0, 0.5], [0.5, 3.0]])).unwrap();
        assert!(e.v_plus[0] >= 0.0 && e.v_minus[0] >= 0.0);
    }

    #[test]
    fn pseudo_inverse_drops_null_direction() {
        let e = sym2_eigen(&m(&[[1.0, 0.0], [0.0, 0.0]])).unwrap();
        assert_eq!(e.lambda_pinv(), [1.0, 0.0]);
        let e = sym2_eigen(&m(&[[2.0, 0.0], [0.0, 0.25]])).unwrap();
        assert_eq!(e.lambda_pinv(), [0.5, 4.0]);
    }

    #[test]
    fn w_matrix_scalar_blocks() {
        let one = Matrix::identity(1);
        let w = assemble_w_matrix(&one, &one, &one, 0.5).unwrap();
        assert_eq!(w, m(&[[1.0, -0.5], [0.5, 0.0]]));
        assert!(assemble_w_matrix(&one, &Matrix::identity(2), &one, 0.5).is_err());
    }

    /// Random matrix whose trailing principal minors are safely nonsingular:
    /// a strong diagonal guarantees it.
    fn trailing_safe(n: usize) -> impl Strategy<Value = Matrix> {
        (
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(prop::bool::ANY, n),
        )
            .prop_map(move |(mut data, signs)| {
                for (i, s) in signs.iter().enumerate() {
                    data[i * n + i] =
                        if *s { 1.0 } else { -1.0 } * (n as f64 + 1.0 + data[i * n + i].abs());
                }
                Matrix::from_row_major(data).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn udl_reconstructs((n, a) in (1usize..=8).prop_flat_map(|n| (Just(n), trailing_safe(n)))) {
            let _ = n;
            let f = udl_decompose(&a).unwrap();
            for i in 0..a.dim() {
                prop_assert_eq!(f.u[(i, i)], 1.0);
                prop_assert_eq!(f.l[(i, i)], 1.0);
                for j in 0..i {
                    prop_assert_eq!(f.u[(i, j)], 0.0);
                    prop_assert_eq!(f.l[(j, i)], 0.0);
                }
            }
            let err = f.reconstruct().sub(&a).unwrap().norm_inf() / a.norm_inf();
            prop_assert!(err < 1e-12, "relative error {}", err);
        }

        #[test]
        fn unit_lower_residual(n in 1usize..=8, seed in prop::collection::vec(-2.0f64..2.0, 72)) {
            let mut l = Matrix::identity(n);
            for i in 0..n {
                for j in 0..i {
                    l[(i, j)] = seed[i * 8 + j];
                }
            }
            let b: Vec<f64> = seed[64..64 + n].to_vec();
            let x = solve_unit_lower(&l, &b).unwrap();
            let r = l.mul_vec(&x).unwrap();
            let scale = 1.0f64.max(b.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
            for (ri, bi) in r.iter().zip(&b) {
                prop_assert!((ri - bi).abs() / scale < 1e-13);
            }
        }

        #[test]
        fn sym2_eigen_pairs(a in -10.0f64..10.0, b in -10.0f64..10.0, d in -10.0f64..10.0) {
            let j = m(&[[a, b], [b, d]]);
            let e = sym2_eigen(&j).unwrap();
            prop_assert!(e.lambda_plus >= e.lambda_minus);
            let scale = 1.0f64.max(j.norm_inf());
            for (lam, v) in [(e.lambda_plus, e.v_plus), (e.lambda_minus, e.v_minus)] {
                let jv = j.mul_vec(&v).unwrap();
                prop_assert!((jv[0] - lam * v[0]).abs().max((jv[1] - lam * v[1]).abs()) < 1e-10 * scale);
                prop_assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-14);
            }
            prop_assert!((e.v_plus[0] * e.v_minus[0] + e.v_plus[1] * e.v_minus[1]).abs() < 1e-12);
        }
    }
}
