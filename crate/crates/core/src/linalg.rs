//! Small dense linear algebra: just enough for IRLS and per-group least
//! squares. Matrices are row-major `Vec<f64>` slices; sizes are tiny
//! (columns = covariates + intercept), so no external solver is warranted.

use alloc::vec;
use alloc::vec::Vec;

use crate::float;

/// Solve `A x = b` for symmetric positive-definite `A` (row-major, n x n)
/// via Cholesky. `Err(col)` reports the first non-positive pivot column.
pub(crate) fn chol_solve(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>, usize> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut l = vec![0.0; n * n];
    let max_diag = (0..n).fold(0.0f64, |m, i| m.max(float::abs(a[i * n + i])));
    let tol = 1e-12 * max_diag.max(1.0);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= tol {
            return Err(j);
        }
        let dj = float::sqrt(d);
        l[j * n + j] = dj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / dj;
        }
    }
    // Forward then back substitution.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

/// Column indices of `x` (row-major, nrow x ncol) that are linearly
/// dependent on earlier columns. Empty means full column rank.
pub(crate) fn dependent_columns(x: &[f64], nrow: usize, ncol: usize) -> Vec<usize> {
    let mut g = vec![0.0; ncol * ncol];
    for r in 0..nrow {
        let row = &x[r * ncol..(r + 1) * ncol];
        for i in 0..ncol {
            for j in i..ncol {
                g[i * ncol + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..ncol {
        for j in 0..i {
            g[i * ncol + j] = g[j * ncol + i];
        }
    }
    let mut dependent = Vec::new();
    let scale: Vec<f64> = (0..ncol).map(|i| g[i * ncol + i].max(1.0)).collect();
    // Gaussian elimination on the Gram matrix; a vanishing pivot marks the
    // column as a combination of the previous ones.
    for j in 0..ncol {
        let pivot = g[j * ncol + j];
        if pivot <= 1e-10 * scale[j] {
            dependent.push(j);
            continue;
        }
        for i in (j + 1)..ncol {
            let f = g[i * ncol + j] / pivot;
            for k in j..ncol {
                g[i * ncol + k] -= f * g[j * ncol + k];
            }
        }
    }
    dependent
}

/// Weighted least squares `argmin_b sum_i w_i (y_i - x_i b)^2` with an
/// optional ridge term on the normal equations. `Err(col)` reports a
/// rank-deficient pivot.
pub(crate) fn wls(
    x: &[f64],
    y: &[f64],
    w: Option<&[f64]>,
    nrow: usize,
    ncol: usize,
    ridge: f64,
) -> Result<Vec<f64>, usize> {
    let mut xtwx = vec![0.0; ncol * ncol];
    let mut xtwy = vec![0.0; ncol];
    for r in 0..nrow {
        let wi = w.map_or(1.0, |w| w[r]);
        let row = &x[r * ncol..(r + 1) * ncol];
        for i in 0..ncol {
            let wxi = wi * row[i];
            xtwy[i] += wxi * y[r];
            for j in i..ncol {
                xtwx[i * ncol + j] += wxi * row[j];
            }
        }
    }
    for i in 0..ncol {
        xtwx[i * ncol + i] += ridge;
        for j in 0..i {
            xtwx[i * ncol + j] = xtwx[j * ncol + i];
        }
    }
    chol_solve(&xtwx, &xtwy, ncol)
}
