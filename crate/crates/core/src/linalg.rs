//! Small dense symmetric-matrix helpers shared by the covariance and sampler
//! modules. Matrices here are tiny (p is single digits), so clarity and
//! precise failure diagnostics win over BLAS-style tuning.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Fails with the offending pivot value and index, which callers surface in
/// "not positive definite" diagnostics.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (l, min_pivot, min_index) = cholesky_lower_with_pivot(m)?;
    if min_pivot <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            pivot: min_pivot,
            index: min_index,
        });
    }
    Ok(l)
}

/// Cholesky factorization reporting the smallest pivot encountered.
///
/// A non-positive pivot aborts the factorization and is reported through the
/// `Err` variant; callers that jitter near-singular matrices also need the
/// smallest successful pivot, hence the tuple.
pub fn cholesky_lower_with_pivot(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64, usize)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Cholesky needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut l = DMatrix::zeros(n, n);
    let mut min_pivot = f64::INFINITY;
    let mut min_index = 0;
    for j in 0..n {
        let mut pivot = m[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot < min_pivot {
            min_pivot = pivot;
            min_index = j;
        }
        if pivot <= 0.0 || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot, index: j });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok((l, min_pivot, min_index))
}

/// Solves L z = b for lower-triangular L.
pub fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut z = b.clone();
    for i in 0..n {
        for k in 0..i {
            let v = z[k];
            z[i] -= l[(i, k)] * v;
        }
        z[i] /= l[(i, i)];
    }
    z
}

/// Solves Lᵀ x = b for lower-triangular L.
pub fn solve_lower_transpose(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = x[k];
            x[i] -= l[(k, i)] * v;
        }
        x[i] /= l[(i, i)];
    }
    x
}

/// Solves (L Lᵀ) x = b given the Cholesky factor L.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let z = solve_lower(l, b);
    solve_lower_transpose(l, &z)
}

/// Inverse of a symmetric positive definite matrix from its Cholesky factor.
pub fn inverse_from_cholesky(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut inv = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        inv.set_column(j, &col);
    }
    // Symmetrize: column solves agree only to rounding.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = s;
            inv[(j, i)] = s;
        }
    }
    inv
}

/// Largest absolute entry of m - mᵀ.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Largest absolute entry of a - b.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    worst
}

pub fn ensure_all_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "{what} has a non-finite entry at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_recovers_known_factor() {
        // m = L Lᵀ with L = [[2,0],[1,3]].
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 10.0]);
        let l = cholesky_lower(&m).unwrap();
        assert_relative_eq!(l[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(l[(1, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(l[(1, 1)], 3.0, epsilon = 1e-12);
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite_with_pivot() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match cholesky_lower(&m) {
            Err(Error::NotPositiveDefinite { pivot, index }) => {
                assert_eq!(index, 1);
                assert_relative_eq!(pivot, -3.0, epsilon = 1e-12);
            }
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn solves_invert_the_factor() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 10.0, 1.0, 0.4, 1.0, 6.0]);
        let l = cholesky_lower(&m).unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = cholesky_solve(&l, &b);
        let back = &m * &x;
        for i in 0..3 {
            assert_relative_eq!(back[i], b[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn inverse_matches_identity_product() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let l = cholesky_lower(&m).unwrap();
        let inv = inverse_from_cholesky(&l);
        // Closed form: (1/0.75) * [[1, -0.5], [-0.5, 1]].
        assert_relative_eq!(inv[(0, 0)], 1.0 / 0.75, epsilon = 1e-12);
        assert_relative_eq!(inv[(0, 1)], -0.5 / 0.75, epsilon = 1e-12);
        let prod = &m * &inv;
        assert!(max_abs_diff(&prod, &DMatrix::identity(2, 2)) < 1e-12);
    }
}
