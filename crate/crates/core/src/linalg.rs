//! Small dense helpers shared by several modules.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Pfaffian of an antisymmetric matrix: exact cofactor expansion up to
/// order 8, pivoted skew-symmetric tridiagonalization above.
pub fn pfaffian(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument("Pfaffian needs a square matrix".into()));
    }
    if n % 2 == 1 {
        return Err(Error::InvalidArgument(format!("Pfaffian needs even dimension, got {n}")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    if n <= 8 {
        let idx: Vec<usize> = (0..n).collect();
        Ok(pfaffian_expand(a, &idx))
    } else {
        Ok(pfaffian_tridiagonal(a.clone()))
    }
}

fn pfaffian_expand(a: &DMatrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let first = idx[0];
    let mut total = 0.0;
    let mut rest = Vec::with_capacity(idx.len() - 2);
    for (pos, &j) in idx.iter().enumerate().skip(1) {
        let entry = a[(first, j)];
        if entry == 0.0 {
            continue;
        }
        rest.clear();
        rest.extend(idx.iter().enumerate().filter(|&(p, _)| p != 0 && p != pos).map(|(_, &k)| k));
        let sign = if pos % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * entry * pfaffian_expand(a, &rest);
    }
    total
}

/// Parlett–Reid elimination with pivoting.
fn pfaffian_tridiagonal(mut a: DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        let (mut piv, mut best) = (k + 1, a[(k + 1, k)].abs());
        for r in (k + 2)..n {
            if a[(r, k)].abs() > best {
                best = a[(r, k)].abs();
                piv = r;
            }
        }
        if piv != k + 1 {
            a.swap_rows(k + 1, piv);
            a.swap_columns(k + 1, piv);
            pf = -pf;
        }
        if a[(k + 1, k)] == 0.0 {
            return 0.0;
        }
        pf *= a[(k, k + 1)];
        if k + 2 < n {
            let pivot = a[(k, k + 1)];
            let tau: Vec<f64> = ((k + 2)..n).map(|c| a[(k, c)] / pivot).collect();
            let col: Vec<f64> = ((k + 2)..n).map(|r| a[(r, k + 1)]).collect();
            for (ri, r) in ((k + 2)..n).enumerate() {
                for (ci, c) in ((k + 2)..n).enumerate() {
                    a[(r, c)] += tau[ri] * col[ci] - col[ri] * tau[ci];
                }
            }
        }
        k += 2;
    }
    pf
}

/// Inverse of a unit lower-triangular matrix by forward substitution.
pub fn unit_lower_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut inv = DMatrix::identity(n, n);
    for j in 0..n {
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s += m[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s;
        }
    }
    inv
}

/// Least-squares solution of `a x = b` through the SVD.
pub fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(DMatrix::zeros(a.ncols(), b.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s)).max(1e-300);
    svd.solve(b, eps).map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))
}

/// Gauss–Legendre nodes and weights on `[0, 1]`, by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - prev) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Solves a small dense system in place by Gaussian elimination with
/// partial pivoting; `a` is row-major `n x n`, the solution replaces `b`.
/// Returns false when a pivot vanishes.
pub fn solve_small(a: &mut [f64], b: &mut [f64]) -> bool {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        if a[piv * n + col] == 0.0 {
            return false;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for r in (col + 1)..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|k| a[r * n + k] * b[k]).sum();
        b[r] = (b[r] - s) / a[r * n + r];
    }
    true
}
