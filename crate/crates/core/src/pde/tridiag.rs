//! Thomas algorithm with a reusable factorization.
//!
//! The Crank-Nicolson matrix is constant over a solve, so the forward
//! elimination is done once and each Picard sweep only pays for the two
//! O(n) substitution passes.

use crate::error::{Result, XvaError};
use crate::scalar::Scalar;

/// Tridiagonal matrix. `lower[i]` multiplies `x[i - 1]` in row `i`
/// (`lower[0]` is ignored), `upper[i]` multiplies `x[i + 1]` (the last
/// entry is ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct FactoredTridiagonal<T> {
    lower: Vec<T>,
    upper_scaled: Vec<T>,
    pivot_inv: Vec<T>,
}

impl<T: Scalar> Tridiagonal<T> {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn factor(&self) -> Result<FactoredTridiagonal<T>> {
        let n = self.len();
        if n == 0 || self.lower.len() != n || self.upper.len() != n {
            return Err(XvaError::InvalidGrid(
                "tridiagonal bands must be non-empty and of equal length".into(),
            ));
        }
        let mut upper_scaled = vec![T::zero(); n];
        let mut pivot_inv = vec![T::zero(); n];
        let mut prev = T::zero();
        for i in 0..n {
            let pivot = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.lower[i] * prev
            };
            if pivot == T::zero() || !pivot.is_finite() {
                return Err(XvaError::InvalidGrid(format!("singular pivot in row {i}")));
            }
            pivot_inv[i] = pivot.recip();
            prev = self.upper[i] * pivot_inv[i];
            upper_scaled[i] = prev;
        }
        Ok(FactoredTridiagonal {
            lower: self.lower.clone(),
            upper_scaled,
            pivot_inv,
        })
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc = acc + self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    acc = acc + self.upper[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }
}

impl<T: Scalar> FactoredTridiagonal<T> {
    pub fn len(&self) -> usize {
        self.pivot_inv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pivot_inv.is_empty()
    }

    /// Overwrites `rhs` with the solution.
    pub fn solve_in_place(&self, rhs: &mut [T]) {
        let n = self.len();
        assert_eq!(rhs.len(), n, "right-hand side length");
        rhs[0] = rhs[0] * self.pivot_inv[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.pivot_inv[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] - self.upper_scaled[i] * rhs[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Dense Gaussian elimination with partial pivoting.
    fn dense_solve(m: &Tridiagonal<f64>, b: &[f64]) -> Vec<f64> {
        let n = m.len();
        let mut a = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            a[i][i] = m.diag[i];
            if i > 0 {
                a[i][i - 1] = m.lower[i];
            }
            if i + 1 < n {
                a[i][i + 1] = m.upper[i];
            }
            a[i][n] = b[i];
        }
        for col in 0..n {
            let p = (col..n)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            a.swap(col, p);
            let pivot = a[col].clone();
            for row in a.iter_mut().skip(col + 1) {
                let f = row[col] / pivot[col];
                for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                    *x -= f * p;
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (a[i][n] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn singular_pivot_is_reported() {
        let m = Tridiagonal {
            lower: vec![0.0, 1.0],
            diag: vec![0.0, 1.0],
            upper: vec![1.0, 0.0],
        };
        assert!(m.factor().is_err());
    }

    #[test]
    fn single_row() {
        let m = Tridiagonal {
            lower: vec![0.0],
            diag: vec![4.0],
            upper: vec![0.0],
        };
        let mut b = vec![2.0];
        m.factor().unwrap().solve_in_place(&mut b);
        assert_eq!(b, vec![0.5]);
    }

    proptest! {
        #[test]
        fn matches_dense_elimination(
            rows in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 2..40)
        ) {
            let n = rows.len();
            let lower: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let upper: Vec<f64> = rows.iter().map(|r| r.1).collect();
            // diagonally dominant
            let diag: Vec<f64> = (0..n).map(|i| 2.5 + lower[i].abs() + upper[i].abs()).collect();
            let b: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let m = Tridiagonal { lower, diag, upper };
            let expected = dense_solve(&m, &b);
            let mut x = b.clone();
            m.factor().unwrap().solve_in_place(&mut x);
            for (a, e) in x.iter().zip(&expected) {
                prop_assert!((a - e).abs() < 1e-12);
            }
            let back = m.mul_vec(&x);
            for (a, e) in back.iter().zip(&b) {
                prop_assert!((a - e).abs() < 1e-12);
            }
        }
    }
}
