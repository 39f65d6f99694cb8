//! Tridiagonal kernels: pivoted LU solves (real and complex) and Sturm
//! sequence counts for symmetric matrices.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{PdpError, Result};

/// Field element accepted by [`solve_tridiagonal`].
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialEq
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Solve a general tridiagonal system with partial pivoting (the LAPACK
/// `gtsv` elimination).
///
/// `lower[i]` couples row `i + 1` to column `i`, `upper[i]` couples row `i`
/// to column `i + 1`. All inputs are consumed; the solution overwrites `rhs`.
pub fn solve_tridiagonal<T: Scalar>(
    mut lower: Vec<T>,
    mut diag: Vec<T>,
    mut upper: Vec<T>,
    mut rhs: Vec<T>,
) -> Result<Vec<T>> {
    let n = diag.len();
    if rhs.len() != n {
        return Err(PdpError::LengthMismatch { expected: n, got: rhs.len() });
    }
    if n == 0 {
        return Ok(rhs);
    }
    if lower.len() + 1 != n || upper.len() + 1 != n {
        return Err(PdpError::LengthMismatch { expected: n - 1, got: lower.len().min(upper.len()) });
    }
    if n == 1 {
        if diag[0].modulus() == 0.0 {
            return Err(PdpError::SingularSystem("tridiagonal pivot"));
        }
        rhs[0] = rhs[0] / diag[0];
        return Ok(rhs);
    }

    let scale = diag
        .iter()
        .chain(lower.iter())
        .chain(upper.iter())
        .fold(0.0_f64, |m, v| m.max(v.modulus()));
    let tiny = scale * 1e-300_f64.max(f64::MIN_POSITIVE);

    // second super-diagonal fill-in produced by row interchanges
    let mut fill = vec![T::zero(); n.saturating_sub(2)];
    for i in 0..n - 1 {
        if diag[i].modulus() >= lower[i].modulus() {
            if diag[i].modulus() <= tiny {
                return Err(PdpError::SingularSystem("tridiagonal pivot"));
            }
            let fact = lower[i] / diag[i];
            diag[i + 1] = diag[i + 1] - fact * upper[i];
            rhs[i + 1] = rhs[i + 1] - fact * rhs[i];
        } else {
            let fact = diag[i] / lower[i];
            diag[i] = lower[i];
            let temp = diag[i + 1];
            diag[i + 1] = upper[i] - fact * temp;
            if i + 2 < n {
                fill[i] = upper[i + 1];
                upper[i + 1] = -fact * fill[i];
            }
            upper[i] = temp;
            let b = rhs[i];
            rhs[i] = rhs[i + 1];
            rhs[i + 1] = b - fact * rhs[i + 1];
        }
    }
    if diag[n - 1].modulus() <= tiny {
        return Err(PdpError::SingularSystem("tridiagonal pivot"));
    }

    rhs[n - 1] = rhs[n - 1] / diag[n - 1];
    rhs[n - 2] = (rhs[n - 2] - upper[n - 2] * rhs[n - 1]) / diag[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1] - fill[i] * rhs[i + 2]) / diag[i];
    }
    lower.clear();
    Ok(rhs)
}

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly below `x`.
///
/// The count is the number of negative pivots of the LDLᵀ factorisation of
/// `T - x` (Sylvester inertia).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    if n == 0 {
        return 0;
    }
    let guard = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let q_safe = if q.abs() < guard { guard.copysign(q) } else { q };
        q = (diag[i] - x) - off[i - 1] * off[i - 1] / q_safe;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Gershgorin enclosure of the spectrum.
pub fn gershgorin_bounds(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
    }
    (lo, hi)
}

/// Smallest eigenvalue by bisection on the Sturm count, to machine precision.
pub fn lowest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    let (mut lo, mut hi) = gershgorin_bounds(diag, off);
    let pad = 1e-12 * (lo.abs() + hi.abs() + 1.0);
    lo -= pad;
    hi += pad;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply<T: Scalar>(lower: &[T], diag: &[T], upper: &[T], x: &[T]) -> Vec<T> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut acc = diag[i] * x[i];
                if i > 0 {
                    acc = acc + lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    acc = acc + upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }

    #[test]
    fn real_solve_needs_pivoting() {
        // zero leading pivot forces an interchange
        let lower = vec![1.0, 2.0, -1.0];
        let diag = vec![0.0, 1.0, 3.0, 1.0];
        let upper = vec![2.0, -1.0, 4.0];
        let x_true = vec![1.0, -2.0, 0.5, 3.0];
        let b = dense_apply(&lower, &diag, &upper, &x_true);
        let x = solve_tridiagonal(lower, diag, upper, b).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn complex_solve_matches_product() {
        let n = 50;
        let lower: Vec<Complex64> = (0..n - 1).map(|i| Complex64::new(-1.0, 0.1 * i as f64)).collect();
        let upper = lower.clone();
        let diag: Vec<Complex64> = (0..n).map(|i| Complex64::new(0.3 + (i % 7) as f64 * 0.2, -0.05)).collect();
        let x_true: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let b = dense_apply(&lower, &diag, &upper, &x_true);
        let x = solve_tridiagonal(lower, diag, upper, b).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let r = solve_tridiagonal(vec![1.0], vec![1.0, 1.0], vec![1.0], vec![1.0, 2.0]);
        assert!(matches!(r, Err(PdpError::SingularSystem(_))));
    }

    #[test]
    fn sturm_count_of_discrete_laplacian() {
        // eigenvalues of tridiag(-1, 2, -1) are 2 - 2 cos(j pi / (n + 1))
        let n = 20;
        let diag = vec![2.0; n];
        let off = vec![-1.0; n - 1];
        let eig: Vec<f64> = (1..=n)
            .map(|j| 2.0 - 2.0 * (j as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        assert_eq!(sturm_count(&diag, &off, 0.0), 0);
        assert_eq!(sturm_count(&diag, &off, 4.0), n);
        let mid = 0.5 * (eig[4] + eig[5]);
        assert_eq!(sturm_count(&diag, &off, mid), 5);
        let low = lowest_eigenvalue(&diag, &off);
        assert!((low - eig[0]).abs() < 1e-14);
    }
}
