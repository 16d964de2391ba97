//! Banded solvers used by the eigenvalue and evolution codes.
//!
//! Both factorizations run without pivoting. Every matrix handed to them in
//! this crate is a nonsingular M-matrix (or a shifted one), for which the
//! pivots are positive and elimination is stable.

use crate::error::{Error, Result};

/// LU factorization of a periodic tridiagonal matrix.
///
/// Row `i` holds `lower[i]` at column `i-1`, `diag[i]` at `i` and `upper[i]`
/// at `i+1`, all indices taken modulo `n`. The corner entries are therefore
/// `lower[0]` (row 0, column n-1) and `upper[n-1]` (row n-1, column 0).
///
/// The leading `(n-1)x(n-1)` block is tridiagonal; the last row and column
/// are eliminated as a bordered system.
#[derive(Debug, Clone)]
pub struct CyclicTridiagonal {
    n: usize,
    upper: Vec<f64>,
    mult: Vec<f64>,
    pivots: Vec<f64>,
    col: Vec<f64>,
    row: Vec<f64>,
    last_pivot: f64,
}

impl CyclicTridiagonal {
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n < 3 || lower.len() != n || upper.len() != n {
            return Err(Error::InvalidInput(format!(
                "cyclic tridiagonal system needs n >= 3 and matching bands (n = {n})"
            )));
        }
        let m = n - 1;

        let mut col = vec![0.0; m];
        let mut row = vec![0.0; m];
        col[0] = lower[0];
        col[m - 1] += upper[m - 1];
        row[0] = upper[n - 1];
        row[m - 1] += lower[n - 1];

        let mut mult = vec![0.0; m];
        let mut pivots = vec![0.0; m];
        pivots[0] = diag[0];
        for i in 1..m {
            mult[i] = lower[i] / pivots[i - 1];
            pivots[i] = diag[i] - mult[i] * upper[i - 1];
        }

        // L z = col
        let mut z = col;
        for i in 1..m {
            z[i] -= mult[i] * z[i - 1];
        }
        // y^T U = row^T
        let mut y = row;
        y[0] /= pivots[0];
        for i in 1..m {
            y[i] = (y[i] - y[i - 1] * upper[i - 1]) / pivots[i];
        }
        let last_pivot = diag[n - 1] - y.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();

        let fact = Self {
            n,
            upper: upper[..m].to_vec(),
            mult,
            pivots,
            col: z,
            row: y,
            last_pivot,
        };
        if !fact.pivots().all(|p| p.is_finite() && p != 0.0) {
            return Err(Error::InvalidInput("singular cyclic tridiagonal matrix".into()));
        }
        Ok(fact)
    }

    /// All elimination pivots, in order. For an M-matrix these are positive.
    pub fn pivots(&self) -> impl Iterator<Item = f64> + '_ {
        self.pivots.iter().copied().chain(std::iter::once(self.last_pivot))
    }

    pub fn min_pivot(&self) -> f64 {
        self.pivots().fold(f64::INFINITY, f64::min)
    }

    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let m = n - 1;
        debug_assert_eq!(x.len(), n);
        for i in 1..m {
            x[i] -= self.mult[i] * x[i - 1];
        }
        let tail: f64 = self.row.iter().zip(&x[..m]).map(|(a, b)| a * b).sum();
        let xn = (x[m] - tail) / self.last_pivot;
        x[m] = xn;
        x[m - 1] = (x[m - 1] - self.col[m - 1] * xn) / self.pivots[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = (x[i] - self.col[i] * xn - self.upper[i] * x[i + 1]) / self.pivots[i];
        }
    }
}

/// Thomas algorithm for a plain tridiagonal system; `lower[0]` and
/// `upper[n-1]` are ignored. `scratch` must have length `n`.
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &mut [f64],
    scratch: &mut [f64],
) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::InvalidInput("zero pivot in tridiagonal solve".into()));
    }
    rhs[0] /= pivot;
    for i in 1..n {
        scratch[i - 1] = upper[i - 1] / pivot;
        pivot = diag[i] - lower[i] * scratch[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::InvalidInput("zero pivot in tridiagonal solve".into()));
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(lower: &[f64], diag: &[f64], upper: &[f64]) -> Vec<Vec<f64>> {
        let n = diag.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] += diag[i];
            a[i][(i + n - 1) % n] += lower[i];
            a[i][(i + 1) % n] += upper[i];
        }
        a
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
            .collect()
    }

    #[test]
    fn cyclic_solve_matches_dense_product() {
        for n in [3usize, 4, 7, 32] {
            let lower: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
            let upper: Vec<f64> = (0..n).map(|i| -0.5 + 0.01 * i as f64).collect();
            let diag: Vec<f64> = (0..n).map(|i| 3.0 + (i % 3) as f64).collect();
            let a = dense(&lower, &diag, &upper);
            let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 2.0).collect();
            let mut x = matvec(&a, &x_true);
            let f = CyclicTridiagonal::factor(&lower, &diag, &upper).unwrap();
            f.solve_in_place(&mut x);
            for (p, q) in x.iter().zip(&x_true) {
                assert!((p - q).abs() < 1e-12, "n={n}: {p} vs {q}");
            }
            assert!(f.min_pivot() > 0.0);
        }
    }

    #[test]
    fn thomas_solves_laplacian() {
        let n = 50;
        let lower = vec![-1.0; n];
        let upper = vec![-1.0; n];
        let diag = vec![2.5; n];
        let x_true: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 2.5 * x_true[i];
                if i > 0 {
                    s -= x_true[i - 1];
                }
                if i + 1 < n {
                    s -= x_true[i + 1];
                }
                s
            })
            .collect();
        let mut scratch = vec![0.0; n];
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut scratch).unwrap();
        for (p, q) in rhs.iter().zip(&x_true) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_cyclic_rejected() {
        // Periodic Laplacian has the constant vector in its kernel.
        let n = 8;
        let r = CyclicTridiagonal::factor(&vec![-1.0; n], &vec![2.0; n], &vec![-1.0; n]);
        match r {
            Err(_) => {}
            Ok(f) => assert!(f.min_pivot().abs() < 1e-12),
        }
    }
}
