//! Support search on assembled systems.

use crate::linalg::{gram_spectral_norm, lstsq, select_columns, top_k};
use crate::prelude::*;
use crate::system::LinearSystem;
use crate::varying::GroupSystem;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// A fitted support.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateModel {
    /// Ascending system column indices.
    pub support: Vec<usize>,
    /// Coefficients on the system's own scale, full length.
    pub system_coeffs: Vec<f64>,
    /// Physical coefficients (normalizations undone), full length.
    pub coeffs: Vec<f64>,
    /// `||F c - b||_2` on the system the model was fitted on.
    pub residual: f64,
    pub sparsity: usize,
    pub scores: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl CandidateModel {
    pub fn labels(&self, sys: &LinearSystem) -> Vec<String> {
        self.support.iter().map(|&j| sys.cols[j].label.clone()).collect()
    }

    /// Physical coefficients in dictionary order.
    pub fn dictionary_coeffs(&self, sys: &LinearSystem) -> Vec<f64> {
        sys.to_dictionary(&self.system_coeffs)
    }
}

pub const RANK_DEFICIENT: &str = "rank_deficient";

/// Minimum-norm least squares restricted to `support`.
pub fn least_squares_on_support(sys: &LinearSystem, support: &[usize]) -> Result<CandidateModel> {
    if support.is_empty() {
        return Err(Error::EmptySelection);
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= sys.ncols()) {
        return Err(Error::InvalidArgument(format!("support index {bad} out of range")));
    }
    let mut s = support.to_vec();
    s.sort_unstable();
    s.dedup();
    let (x, residual, deficient) = fit(&sys.matrix, &sys.rhs, &s);
    let mut flags = Vec::new();
    if deficient {
        flags.push(RANK_DEFICIENT.to_owned());
    }
    Ok(CandidateModel {
        sparsity: s.len(),
        support: s,
        coeffs: sys.to_physical(x.as_slice()),
        system_coeffs: x.as_slice().to_vec(),
        residual,
        scores: BTreeMap::new(),
        flags,
    })
}

/// `(coefficients, residual norm, rank deficient)` of least squares on a
/// column subset.
fn fit(a: &DMatrix<f64>, b: &DVector<f64>, support: &[usize]) -> (DVector<f64>, f64, bool) {
    let sub = select_columns(a, support);
    let sol = lstsq(&sub, b);
    let r = &sub * &sol.x - b;
    let mut x = DVector::zeros(a.ncols());
    for (j, &k) in support.iter().enumerate() {
        x[k] = sol.x[j];
    }
    (x, r.norm(), sol.rank_deficient)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoResult {
    /// Minimizer estimate on the system scale.
    pub coeffs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every iteration.
    pub objective: Vec<f64>,
    /// Set when the columns were not unit-norm.
    pub unnormalized: bool,
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Monotone accelerated proximal gradient for
/// `0.5 ||b - F c||^2 + lambda ||c||_1`, step `1/L` with `L` the largest
/// eigenvalue of `F^T F`. Stops when both the relative objective change and
/// the relative iterate change fall below `tol`.
pub fn lasso(sys: &LinearSystem, lambda: f64, tol: f64, max_iter: usize) -> Result<LassoResult> {
    lasso_matrix(&sys.matrix, &sys.rhs, lambda, tol, max_iter)
}

pub fn lasso_matrix(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, tol: f64, max_iter: usize) -> Result<LassoResult> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let n = a.ncols();
    let unnormalized = a.column_iter().any(|c| (c.norm() - 1.0).abs() > 1e-6);
    let gram = a.tr_mul(a);
    let atb = a.tr_mul(b);
    let btb = b.norm_squared();
    let objective = |c: &DVector<f64>| {
        let quad = c.dot(&(&gram * c)) - 2.0 * c.dot(&atb) + btb;
        0.5 * quad.max(0.0) + lambda * c.iter().map(|v| v.abs()).sum::<f64>()
    };
    let l = gram_spectral_norm(a);
    let zero = DVector::zeros(n);
    if l == 0.0 {
        return Ok(LassoResult {
            coeffs: vec![0.0; n],
            iterations: 0,
            converged: true,
            objective: vec![objective(&zero)],
            unnormalized,
        });
    }
    let step = 1.0 / l;
    let mut x = zero.clone();
    let mut x_prev = zero.clone();
    let mut y = zero;
    let mut t = 1.0f64;
    let mut fx = objective(&x);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    for it in 0..max_iter {
        iters = it + 1;
        let grad = &gram * &y - &atb;
        let z = DVector::from_iterator(
            n,
            y.iter()
                .zip(grad.iter())
                .map(|(yi, gi)| soft_threshold(yi - step * gi, lambda * step)),
        );
        let fz = objective(&z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        x_prev.copy_from(&x);
        let f_prev = fx;
        if fz <= fx {
            x.copy_from(&z);
            fx = fz;
        }
        y = &x + (&z - &x) * (t / t_next) + (&x - &x_prev) * ((t - 1.0) / t_next);
        t = t_next;
        history.push(fx);
        let dx = (&x - &x_prev).norm();
        let rel_obj = (f_prev - fx).abs() / fx.abs().max(f64::MIN_POSITIVE);
        let rel_x = dx / x.norm().max(1.0);
        if it > 0 && rel_obj < tol && rel_x < tol && (&z - &x).norm() / x.norm().max(1.0) < tol.sqrt() {
            converged = true;
            break;
        }
    }
    Ok(LassoResult {
        coeffs: x.as_slice().to_vec(),
        iterations: iters,
        converged,
        objective: history,
        unnormalized,
    })
}

/// `count` geometric values from `1e-4 * ||F^T b||_inf` to `||F^T b||_inf`.
pub fn lambda_grid(sys: &LinearSystem, count: usize) -> Vec<f64> {
    let top = sys.matrix.tr_mul(&sys.rhs).amax();
    if count <= 1 {
        return vec![top];
    }
    (0..count)
        .map(|j| top * 10f64.powf(-4.0 + 4.0 * j as f64 / (count - 1) as f64))
        .collect()
}

/// Maximum subspace-pursuit iterations.
pub const SP_MAX_ITER: usize = 50;

/// Greedy k-sparse support search with expand/shrink iterations.
pub fn subspace_pursuit(sys: &LinearSystem, k: usize) -> Result<CandidateModel> {
    let nf = sys.ncols();
    if k == 0 || k > nf.min(sys.nrows()) {
        return Err(Error::InvalidArgument(format!(
            "sparsity must be in 1..={}, got {k}",
            nf.min(sys.nrows())
        )));
    }
    let a = &sys.matrix;
    let b = &sys.rhs;
    let corr = |r: &DVector<f64>| -> Vec<f64> { a.tr_mul(r).iter().map(|v| v.abs()).collect() };
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    let mut support = sorted(top_k(&corr(b), k));
    let (mut x, mut res, _) = fit(a, b, &support);
    let mut iterations = 0;
    for _ in 0..SP_MAX_ITER {
        iterations += 1;
        let r = b - a * &x;
        let mut union: BTreeSet<usize> = support.iter().cloned().collect();
        union.extend(top_k(&corr(&r), k));
        let union: Vec<usize> = union.into_iter().collect();
        let (xu, _, _) = fit(a, b, &union);
        let mags: Vec<f64> = union.iter().map(|&j| xu[j].abs()).collect();
        let next = sorted(top_k(&mags, k).into_iter().map(|p| union[p]).collect());
        let (xn, rn, _) = fit(a, b, &next);
        if rn < res * (1.0 - 1e-12) && next != support {
            support = next;
            x = xn;
            res = rn;
        } else {
            break;
        }
    }
    let mut m = least_squares_on_support(sys, &support)?;
    m.scores.insert("sp_iterations".into(), iterations as f64);
    Ok(m)
}

pub const DEFAULT_TRIM_RHO: f64 = 0.05;
pub const TRIMMED_TO_EMPTY: &str = "trimmed_to_empty";

/// Contribution scores `n_i / max n_i` with `n_i = ||F_i|| |c_i|`.
pub fn contribution_scores(sys: &LinearSystem, model: &CandidateModel) -> Vec<(usize, f64)> {
    let n: Vec<(usize, f64)> = model
        .support
        .iter()
        .map(|&j| (j, sys.matrix.column(j).norm() * model.system_coeffs[j].abs()))
        .collect();
    let max = n.iter().map(|p| p.1).fold(0.0, f64::max);
    n.into_iter()
        .map(|(j, v)| (j, if max > 0.0 { v / max } else { 0.0 }))
        .collect()
}

/// Drops the lowest-scoring feature while its score is below `rho`,
/// refitting after each removal.
pub fn trim(sys: &LinearSystem, model: &CandidateModel, rho: f64) -> Result<CandidateModel> {
    let mut cur = model.clone();
    loop {
        let scores = contribution_scores(sys, &cur);
        let worst = scores
            .iter()
            .filter(|p| p.1 < rho)
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(core::cmp::Ordering::Equal));
        let Some(&(j, _)) = worst else {
            return Ok(cur);
        };
        let rest: Vec<usize> = cur.support.iter().cloned().filter(|&s| s != j).collect();
        if rest.is_empty() {
            cur.flags.push(TRIMMED_TO_EMPTY.to_owned());
            return Ok(cur);
        }
        let scores = cur.scores.clone();
        cur = least_squares_on_support(sys, &rest)?;
        cur.scores = scores;
    }
}

/// A fitted group support.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupModel {
    /// Ascending group indices.
    pub groups: Vec<usize>,
    /// System-scale coefficients, full length.
    pub coeffs: Vec<f64>,
    pub residual: f64,
    /// Residuals of every accepted iterate, starting with the initial one.
    pub history: Vec<f64>,
    pub flags: Vec<String>,
}

impl GroupModel {
    pub fn sparsity(&self) -> usize {
        self.groups.len()
    }
}

fn group_columns(gsys: &GroupSystem, groups: &[usize]) -> Vec<usize> {
    groups.iter().flat_map(|&g| gsys.groups[g].clone()).collect()
}

/// Least squares on the union of `groups`.
pub fn group_least_squares(gsys: &GroupSystem, groups: &[usize]) -> GroupModel {
    let mut gs = groups.to_vec();
    gs.sort_unstable();
    gs.dedup();
    let cols = group_columns(gsys, &gs);
    let (x, res, deficient) = fit(&gsys.matrix, &gsys.rhs, &cols);
    GroupModel {
        groups: gs,
        coeffs: x.as_slice().to_vec(),
        residual: res,
        history: vec![res],
        flags: if deficient {
            vec![RANK_DEFICIENT.to_owned()]
        } else {
            Vec::new()
        },
    }
}

/// Orthonormal basis of each group's column space.
fn group_bases(gsys: &GroupSystem) -> Vec<DMatrix<f64>> {
    gsys.groups
        .iter()
        .map(|r| {
            let sub = gsys.matrix.columns(r.start, r.len()).into_owned();
            let rows = sub.nrows().max(1) as f64;
            let svd = sub.svd(true, false);
            let u = svd.u.expect("left singular vectors");
            let smax = svd.singular_values.max();
            let tol = smax * 1e-10 * rows;
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&i| svd.singular_values[i] > tol)
                .collect();
            select_columns(&u, &keep)
        })
        .collect()
}

/// `||proj(y, F_g)|| / ||y||` for every group.
fn projection_scores(bases: &[DMatrix<f64>], y: &DVector<f64>) -> Vec<f64> {
    let ny = y.norm();
    bases
        .iter()
        .map(|q| {
            if ny > 0.0 && q.ncols() > 0 {
                q.tr_mul(y).norm() / ny
            } else {
                0.0
            }
        })
        .collect()
}

/// Group projected subspace pursuit with `k` active groups.
pub fn group_subspace_pursuit(gsys: &GroupSystem, k: usize) -> Result<GroupModel> {
    let ng = gsys.groups.len();
    if k == 0 || k > ng {
        return Err(Error::InvalidArgument(format!(
            "group sparsity must be in 1..={ng}, got {k}"
        )));
    }
    let bases = group_bases(gsys);
    let a = &gsys.matrix;
    let b = &gsys.rhs;
    let mut best = group_least_squares(gsys, &top_k(&projection_scores(&bases, b), k));
    let mut history = vec![best.residual];
    for _ in 0..SP_MAX_ITER {
        let x = DVector::from_column_slice(&best.coeffs);
        let r = b - a * &x;
        let mut union: BTreeSet<usize> = best.groups.iter().cloned().collect();
        union.extend(top_k(&projection_scores(&bases, &r), k));
        let union: Vec<usize> = union.into_iter().collect();
        let wide = group_least_squares(gsys, &union);
        let xw = DVector::from_column_slice(&wide.coeffs);
        let mags: Vec<f64> = union
            .iter()
            .map(|&g| {
                let rg = gsys.groups[g].clone();
                (a.columns(rg.start, rg.len()) * xw.rows(rg.start, rg.len())).norm()
            })
            .collect();
        let next: Vec<usize> = top_k(&mags, k).into_iter().map(|p| union[p]).collect();
        let cand = group_least_squares(gsys, &next);
        if cand.residual < best.residual * (1.0 - 1e-12) && cand.groups != best.groups {
            history.push(cand.residual);
            best = cand;
        } else {
            break;
        }
    }
    best.history = history;
    Ok(best)
}

/// Group contribution `||F_g c_g|| / max_g ||F_g c_g||`.
pub fn group_contribution_scores(gsys: &GroupSystem, model: &GroupModel) -> Vec<(usize, f64)> {
    let x = DVector::from_column_slice(&model.coeffs);
    let n: Vec<(usize, f64)> = model
        .groups
        .iter()
        .map(|&g| {
            let r = gsys.groups[g].clone();
            (
                g,
                (gsys.matrix.columns(r.start, r.len()) * x.rows(r.start, r.len())).norm(),
            )
        })
        .collect();
    let max = n.iter().map(|p| p.1).fold(0.0, f64::max);
    n.into_iter()
        .map(|(g, v)| (g, if max > 0.0 { v / max } else { 0.0 }))
        .collect()
}

/// Removes every group scoring below `rho` in one pass and refits.
pub fn group_trim(gsys: &GroupSystem, model: &GroupModel, rho: f64) -> GroupModel {
    let keep: Vec<usize> = group_contribution_scores(gsys, model)
        .into_iter()
        .filter(|p| p.1 >= rho)
        .map(|p| p.0)
        .collect();
    if keep.is_empty() {
        let mut m = model.clone();
        m.flags.push(TRIMMED_TO_EMPTY.to_owned());
        return m;
    }
    if keep.len() == model.groups.len() {
        return model.clone();
    }
    group_least_squares(gsys, &keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn system(a: DMatrix<f64>, b: DVector<f64>) -> LinearSystem {
        LinearSystem::from_matrix(a, b).unwrap()
    }

    fn orthonormal(m: usize, n: usize) -> DMatrix<f64> {
        let raw = DMatrix::from_fn(m, n, |i, j| ((i * 31 + j * 17) as f64 * 0.37).sin());
        raw.qr().q()
    }

    #[test]
    fn ls_support_exact_and_orthonormal() {
        let q = orthonormal(12, 4);
        let b = &q * DVector::from_vec(vec![1.0, 0.0, -2.0, 0.0]);
        let sys = system(q.clone(), b.clone());
        let m = least_squares_on_support(&sys, &[0, 2]).unwrap();
        assert!(m.residual < 1e-9);
        assert_abs_diff_eq!(m.coeffs[2], -2.0, epsilon = 1e-12);
        let b2 = DVector::from_fn(12, |i, _| (i as f64).cos());
        let sys = system(q.clone(), b2.clone());
        let m = least_squares_on_support(&sys, &[1, 3]).unwrap();
        assert_abs_diff_eq!(m.coeffs[1], q.column(1).dot(&b2), epsilon = 1e-12);
        assert_abs_diff_eq!(m.coeffs[3], q.column(3).dot(&b2), epsilon = 1e-12);
        assert_eq!(m.coeffs[0], 0.0);
    }

    #[test]
    fn lasso_closed_forms() {
        let q = orthonormal(20, 5);
        let b = DVector::from_fn(20, |i, _| ((i * 7) as f64).sin() * 2.0);
        let sys = system(q.clone(), b.clone());
        let lam = 0.3;
        let r = lasso(&sys, lam, 1e-8, 100_000).unwrap();
        assert!(r.converged);
        let ftb = q.tr_mul(&b);
        for j in 0..5 {
            assert_abs_diff_eq!(r.coeffs[j], soft_threshold(ftb[j], lam), epsilon = 1e-6);
        }
        let big = lasso(&sys, ftb.amax() * 1.0001, 1e-8, 100_000).unwrap();
        assert!(big.coeffs.iter().all(|&c| c == 0.0));
        // Unregularized limit on a well-conditioned tall system.
        let a = DMatrix::from_fn(30, 4, |i, j| 1.0 / (1.0 + (i as f64 - 3.0 * j as f64).abs()));
        let b = DVector::from_fn(30, |i, _| (i as f64 * 0.2).exp().ln_1p());
        let want = lstsq(&a, &b).x;
        let got = lasso_matrix(&a, &b, 0.0, 1e-14, 100_000).unwrap();
        for j in 0..4 {
            assert_abs_diff_eq!(got.coeffs[j], want[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn lasso_objective_is_monotone() {
        let a = DMatrix::from_fn(25, 6, |i, j| ((i + 2 * j) as f64 * 0.9).cos());
        let b = DVector::from_fn(25, |i, _| i as f64 * 0.1);
        let r = lasso_matrix(&a, &b, 0.05, 1e-10, 5000).unwrap();
        for w in r.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn sp_exact_on_orthogonal_columns() {
        let q = orthonormal(30, 10);
        let b = q.column(3) * 2.0 + q.column(7);
        let sys = system(q, b);
        let m = subspace_pursuit(&sys, 2).unwrap();
        assert_eq!(m.support, vec![3, 7]);
        assert_abs_diff_eq!(m.coeffs[3], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.coeffs[7], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trim_behaviour() {
        let q = orthonormal(30, 4);
        let b = q.column(0) * 1.0 + q.column(1) * 0.5 + q.column(2) * 0.01;
        let sys = system(q, b);
        let m = least_squares_on_support(&sys, &[0, 1, 2]).unwrap();
        let t = trim(&sys, &m, 0.05).unwrap();
        assert_eq!(t.support, vec![0, 1]);
        let same = trim(&sys, &least_squares_on_support(&sys, &[0, 1]).unwrap(), 0.05).unwrap();
        assert_eq!(same.support, vec![0, 1]);
        let z = least_squares_on_support(&sys, &[0, 3]).unwrap();
        assert_eq!(trim(&sys, &z, 0.05).unwrap().support, vec![0]);
    }

    fn block_orthogonal() -> GroupSystem {
        let q = orthonormal(40, 12);
        let b = q.column(3) * 2.0 + q.column(4) - q.column(9) * 0.5;
        GroupSystem::from_blocks(q, b, &[3, 3, 3, 3]).unwrap()
    }

    #[test]
    fn gpsp_exact_on_orthogonal_blocks() {
        let m = group_subspace_pursuit(&block_orthogonal(), 2).unwrap();
        assert_eq!(m.groups, vec![1, 3]);
        assert!(m.residual < 1e-10);
        assert_abs_diff_eq!(m.coeffs[3], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.coeffs[9], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn gpsp_history_is_non_increasing() {
        let a = DMatrix::from_fn(60, 15, |i, j| {
            ((i * 13 + j * 7) as f64 * 0.61).sin() + 0.3 * ((i + j) as f64).cos()
        });
        let b = DVector::from_fn(60, |i, _| (i as f64 * 0.17).sin() + 0.1 * (i as f64).cos());
        let g = GroupSystem::from_blocks(a, b, &[3, 3, 3, 3, 3]).unwrap();
        for k in 1..=5 {
            let m = group_subspace_pursuit(&g, k).unwrap();
            assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
            assert!(m.residual <= m.history[0]);
        }
    }

    #[test]
    fn group_trim_cases() {
        let g = block_orthogonal();
        let all = group_least_squares(&g, &[1, 3]);
        assert_eq!(group_trim(&g, &all, 0.05).groups, vec![1, 3]);
        let with_zero = group_least_squares(&g, &[0, 1, 3]);
        assert_eq!(group_trim(&g, &with_zero, 0.05).groups, vec![1, 3]);
    }

    #[test]
    fn group_trim_matches_iterated_trim_on_diagonal_design() {
        let q = orthonormal(30, 5);
        let b = q.column(0) * 1.0 + q.column(1) * 0.02 + q.column(2) * 0.5 + q.column(3) * 0.01;
        let sys = system(q.clone(), b.clone());
        let g = GroupSystem::from_blocks(q, b, &[1; 5]).unwrap();
        let single = trim(&sys, &least_squares_on_support(&sys, &[0, 1, 2, 3]).unwrap(), 0.05).unwrap();
        let grouped = group_trim(&g, &group_least_squares(&g, &[0, 1, 2, 3]), 0.05);
        assert_eq!(single.support, grouped.groups);
    }

    #[test]
    fn from_blocks_rejects_bad_partition() {
        let a = DMatrix::zeros(4, 5);
        assert!(GroupSystem::from_blocks(a.clone(), DVector::zeros(4), &[2, 2]).is_err());
        assert!(GroupSystem::from_blocks(a, DVector::zeros(3), &[5]).is_err());
    }
}
