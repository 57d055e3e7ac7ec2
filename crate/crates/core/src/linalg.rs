//! Dense least-squares helpers on top of nalgebra.

use crate::prelude::*;
use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution of `a x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstsq {
    pub x: DVector<f64>,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// SVD-based minimum-norm least squares. Singular values below
/// `eps * max(m, n) * sigma_max` are treated as zero.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Lstsq {
    let (m, n) = a.shape();
    if n == 0 {
        return Lstsq {
            x: DVector::zeros(0),
            rank: 0,
            rank_deficient: false,
        };
    }
    if m == 0 {
        return Lstsq {
            x: DVector::zeros(n),
            rank: 0,
            rank_deficient: true,
        };
    }
    // Tall-thin systems are much cheaper through the n x n Gram SVD, but that
    // squares the condition number. Use the direct SVD, on a column-scaled
    // copy so wildly scaled features do not trip the rank threshold.
    let scales: Vec<f64> = (0..n)
        .map(|j| {
            let s = a.column(j).norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = f64::EPSILON * (m.max(n) as f64) * smax * 16.0;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let mut x = svd.solve(b, tol).unwrap_or_else(|_| DVector::zeros(n));
    for (j, s) in scales.iter().enumerate() {
        x[j] /= s;
    }
    Lstsq {
        x,
        rank,
        rank_deficient: rank < n,
    }
}

/// Householder-QR least squares for a full-column-rank system. Returns
/// `None` when a diagonal entry of `R` falls below `rel_tol * |R_00|`.
pub fn qr_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    if m < n || n == 0 {
        return None;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    if r00 == 0.0 || (0..n).any(|k| r[(k, k)].abs() < rel_tol * r00) {
        return None;
    }
    let qtb = qr.q().transpose() * b;
    r.solve_upper_triangular(&qtb)
}

/// Row `row` of the pseudo-inverse of a full-column-rank `a`, through QR:
/// `e_row^T R^{-1} Q^T`. Used to turn local polynomial fits into filters.
pub fn pinv_row(a: &DMatrix<f64>, row: usize, rel_tol: f64) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    if m < n || row >= n {
        return None;
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    if r00 == 0.0 || (0..n).any(|k| r[(k, k)].abs() < rel_tol * r00) {
        return None;
    }
    // Solve R^T z = e_row, then the row is Q z.
    let mut e = DVector::zeros(n);
    e[row] = 1.0;
    let z = r.transpose().solve_lower_triangular(&e)?;
    Some(qr.q() * z)
}

/// Largest eigenvalue of `a^T a` by power iteration.
pub fn gram_spectral_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * i as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = a.tr_mul(&(a * &v));
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw;
        v = w / nw;
        if (next - lambda).abs() <= 1e-10 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

pub fn column_norms(a: &DMatrix<f64>) -> Vec<f64> {
    a.column_iter().map(|c| c.norm()).collect()
}

/// Columns `idx` of `a`, in the given order.
pub fn select_columns(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), idx.len(), |i, j| a[(i, idx[j])])
}

/// Rows `idx` of `a`, in the given order.
pub fn select_rows(a: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), a.ncols(), |i, j| a[(idx[i], j)])
}

pub fn select_entries(b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| b[i]))
}

/// Least squares with `a` restricted to `support`; the result is scattered
/// back into a full-length vector.
pub fn lstsq_on_support(a: &DMatrix<f64>, b: &DVector<f64>, support: &[usize]) -> Lstsq {
    let sub = select_columns(a, support);
    let sol = lstsq(&sub, b);
    let mut x = DVector::zeros(a.ncols());
    for (j, &k) in support.iter().enumerate() {
        x[k] = sol.x[j];
    }
    Lstsq {
        x,
        rank: sol.rank,
        rank_deficient: sol.rank_deficient,
    }
}

/// Indices of the `k` largest values; ties go to the lower index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}
