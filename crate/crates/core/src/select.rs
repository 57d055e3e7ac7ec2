//! Model selection: time evolution errors, cross validation, residual
//! reduction rules and the basis-size plateau test.

use crate::grid::Field;
use crate::linalg::{lstsq, select_columns, select_entries};
use crate::prelude::*;
use crate::simulate::{evolve_candidate, PdeSpec};
use crate::sparse::{lambda_grid, lasso, RANK_DEFICIENT};
use crate::system::LinearSystem;
use crate::{Error, Result};
use nalgebra::DVector;

/// `fine_dt` clamped to at most a tenth of the observation step.
pub fn clamp_fine_dt(fine_dt: f64, dt: f64) -> f64 {
    if fine_dt > 0.0 {
        fine_dt.min(dt / 10.0)
    } else {
        dt / 10.0
    }
}

fn check_data(model: &PdeSpec, data: &Field, start: &[f64]) -> Result<()> {
    let g = data.grid();
    if *g != model.grid {
        return Err(Error::DimensionMismatch(
            "candidate grid differs from the data grid".into(),
        ));
    }
    if start.len() != g.nx {
        return Err(Error::DimensionMismatch(format!(
            "start state has {} values, nx is {}",
            start.len(),
            g.nx
        )));
    }
    Ok(())
}

/// Time evolution error `sum_{i,n} |U_hat - U| dx dt` of `model` evolved
/// from `start` over the whole record; `+inf` if the evolution diverges.
pub fn tee(model: &PdeSpec, data: &Field, start: &[f64], fine_dt: f64) -> Result<f64> {
    check_data(model, data, start)?;
    let g = data.grid();
    let ev = evolve_candidate(model, clamp_fine_dt(fine_dt, g.dt), g.nt, start)?;
    if ev.is_diverged() {
        return Ok(f64::INFINITY);
    }
    let total: f64 = ev
        .states
        .iter()
        .enumerate()
        .map(|(n, s)| s.iter().zip(data.slice(n)).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .sum();
    Ok(total * g.dx * g.dt)
}

/// Default multi-shooting window `max(1, floor(nt / 10))`.
pub fn default_mtee_window(nt: usize) -> usize {
    (nt / 10).max(1)
}

/// Penalty factor applied to `||U||_2` for a diverged shoot.
pub const MTEE_DIVERGENCE_PENALTY: f64 = 1e3;

/// Multi-shooting evolution error
/// `(1 / (N - w)) sum_n ||U_hat^{(n+w)|n} - U^{n+w}||_2`, every shoot
/// starting from slice `n` of `starts`. A diverged shoot contributes
/// `1e3 ||U||_2`.
pub fn mtee(model: &PdeSpec, data: &Field, starts: &Field, fine_dt: f64, w: usize) -> Result<f64> {
    let g = data.grid();
    if starts.grid() != g {
        return Err(Error::DimensionMismatch(
            "shooting starts must share the data grid".into(),
        ));
    }
    check_data(model, data, starts.slice(0))?;
    if w == 0 || w >= g.nt {
        return Err(Error::InvalidArgument(format!(
            "window must be in 1..{}, got {w}",
            g.nt
        )));
    }
    let fine = clamp_fine_dt(fine_dt, g.dt);
    let penalty = MTEE_DIVERGENCE_PENALTY * data.values().iter().map(|v| v * v).sum::<f64>().sqrt();
    let shots: Vec<usize> = (0..g.nt - w).collect();
    let errs = crate::map_ordered(&shots, |&n| -> Result<f64> {
        let ev = evolve_candidate(model, fine, w + 1, starts.slice(n))?;
        if ev.is_diverged() {
            return Ok(penalty);
        }
        let end = &ev.states[w];
        Ok(end
            .iter()
            .zip(data.slice(n + w))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    });
    let mut sum = 0.0;
    for e in errs {
        sum += e?;
    }
    Ok(sum / shots.len() as f64)
}

/// Default training fraction for [`cee`].
pub const DEFAULT_CEE_ALPHA: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct CeeResult {
    pub value: f64,
    pub flags: Vec<String>,
}

/// Cross-validation error: least squares on the first `ceil(alpha H)` rows
/// restricted to `support`, residual norm on the remaining rows.
pub fn cee(sys: &LinearSystem, support: &[usize], alpha: f64) -> Result<CeeResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if support.is_empty() {
        return Err(Error::EmptySelection);
    }
    let h = sys.nrows();
    let split = (alpha * h as f64).ceil() as usize;
    if split == 0 || split >= h {
        return Err(Error::TooShort { needed: 2, got: h });
    }
    let train: Vec<usize> = (0..split).collect();
    let test: Vec<usize> = (split..h).collect();
    let a = select_columns(&sys.matrix, support);
    let a1 = crate::linalg::select_rows(&a, &train);
    let b1 = select_entries(&sys.rhs, &train);
    let sol = lstsq(&a1, &b1);
    let a2 = crate::linalg::select_rows(&a, &test);
    let b2 = select_entries(&sys.rhs, &test);
    let r: DVector<f64> = &a2 * &sol.x - b2;
    Ok(CeeResult {
        value: r.norm(),
        flags: if sol.rank_deficient {
            vec![RANK_DEFICIENT.to_owned()]
        } else {
            Vec::new()
        },
    })
}

/// Default reduction-in-residual window.
pub const DEFAULT_N_RR: usize = 5;
/// Default reduction-in-residual threshold.
pub const DEFAULT_RR_RHO: f64 = 0.015;

#[derive(Debug, Clone, PartialEq)]
pub struct RrChoice {
    /// Chosen sparsity (1-based).
    pub k: usize,
    /// `s_k` for `k = 1..=N_f - n_rr`.
    pub s: Vec<f64>,
    /// Set when no `s_k` fell below `rho` and the argmin was returned.
    pub fallback: bool,
}

/// Reduction in residual: `s_k = (R_k - R_{k+n_rr}) / (n_rr R_1)`, choose
/// the smallest `k` with `s_k < rho` (else argmin with a flag).
/// `residuals[0]` is `R_1`.
pub fn rr_select(residuals: &[f64], n_rr: usize, rho: f64) -> Result<RrChoice> {
    let nf = residuals.len();
    if n_rr == 0 {
        return Err(Error::InvalidArgument("n_rr must be at least 1".into()));
    }
    if nf <= n_rr {
        return Err(Error::TooShort {
            needed: n_rr + 1,
            got: nf,
        });
    }
    let r1 = residuals[0];
    let s: Vec<f64> = (0..nf - n_rr)
        .map(|k| {
            if r1 > 0.0 {
                (residuals[k] - residuals[k + n_rr]) / (n_rr as f64 * r1)
            } else {
                0.0
            }
        })
        .collect();
    if let Some(k) = s.iter().position(|&v| v < rho) {
        return Ok(RrChoice {
            k: k + 1,
            s,
            fallback: false,
        });
    }
    let k = s
        .iter()
        .enumerate()
        .fold(0, |best, (j, v)| if *v < s[best] { j } else { best });
    Ok(RrChoice {
        k: k + 1,
        s,
        fallback: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrcChoice {
    /// Chosen sparsity `l*`.
    pub l: usize,
    /// `S^l` for `l = 1..=N_f - 1` (index 0 is `l = 1`).
    pub scores: Vec<f64>,
    pub rho: f64,
}

/// Residual reduction curve: `S^l = E^l + rho l / N_f` for `l = 1..N_f-1`,
/// with `errors[l] = E(c^l)` (`errors[0]` is the zero model). The default
/// `rho` is the mean of `E^1..`.
pub fn rrc_select(errors: &[f64], n_features: usize, rho: Option<f64>) -> Result<RrcChoice> {
    if n_features < 2 || errors.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: n_features.min(errors.len()),
        });
    }
    let rho = match rho {
        Some(r) if r > 0.0 => r,
        Some(r) => return Err(Error::InvalidArgument(format!("rho must be positive, got {r}"))),
        None => errors[1..].iter().sum::<f64>() / (errors.len() - 1) as f64,
    };
    let last = (n_features - 1).min(errors.len() - 1);
    let scores: Vec<f64> = (1..=last)
        .map(|l| errors[l] + rho * l as f64 / n_features as f64)
        .collect();
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (j, v)| if *v < scores[b] { j } else { b });
    Ok(RrcChoice {
        l: best + 1,
        scores,
        rho,
    })
}

/// Default basis-size grid for the plateau search.
pub const DEFAULT_BEE_GRID: [usize; 5] = [5, 10, 15, 20, 25];
/// Default plateau tolerance.
pub const DEFAULT_BEE_TOL: f64 = 0.05;
/// Relative-change denominators are floored at this fraction of the
/// largest magnitude.
pub const BEE_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct BeeChoice {
    pub nb: usize,
    /// Max relative change between consecutive grid points.
    pub changes: Vec<f64>,
    /// Set when no plateau was found and the largest size was returned.
    pub no_plateau: bool,
}

/// Base element expansion: the first `N_b` whose block magnitudes change by
/// less than `tol` (max over features, relative) at the next grid point.
pub fn bee(magnitudes: &[(usize, Vec<f64>)], tol: f64) -> Result<BeeChoice> {
    if magnitudes.is_empty() {
        return Err(Error::EmptySelection);
    }
    let nf = magnitudes[0].1.len();
    if magnitudes.iter().any(|m| m.1.len() != nf) {
        return Err(Error::DimensionMismatch("block magnitudes differ in length".into()));
    }
    if magnitudes.len() == 1 {
        return Ok(BeeChoice {
            nb: magnitudes[0].0,
            changes: Vec::new(),
            no_plateau: true,
        });
    }
    let changes: Vec<f64> = magnitudes
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].1, &w[1].1);
            let top = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let floor = (BEE_FLOOR * top).max(f64::MIN_POSITIVE);
            a.iter()
                .zip(b)
                .map(|(x, y)| (y - x).abs() / x.abs().max(floor))
                .fold(0.0, f64::max)
        })
        .collect();
    match changes.iter().position(|&c| c < tol) {
        Some(p) => Ok(BeeChoice {
            nb: magnitudes[p].0,
            changes,
            no_plateau: false,
        }),
        None => Ok(BeeChoice {
            nb: magnitudes.last().map(|m| m.0).unwrap_or(0),
            changes,
            no_plateau: true,
        }),
    }
}

/// Largest LASSO support whose subsets are all enumerated.
pub const MAX_SUBSET_BASE: usize = 12;
/// Number of penalties on the LASSO path.
pub const LASSO_PATH_LEN: usize = 20;

/// All nonempty subsets of `a`, each ascending.
pub fn subsets(a: &[usize]) -> Vec<Vec<usize>> {
    let n = a.len();
    (1u32..(1 << n))
        .map(|mask| (0..n).filter(|j| mask & (1 << j) != 0).map(|j| a[j]).collect())
        .collect()
}

/// Candidate supports: every subset of every LASSO support on the penalty
/// path, deduplicated and in first-seen order. A support larger than
/// `cap` is truncated to its `cap` largest coefficients.
pub fn lasso_path_supports(sys: &LinearSystem, n_lambda: usize, cap: usize) -> Result<Vec<Vec<usize>>> {
    let mut seen = BTreeSet::new();
    let mut bases = Vec::new();
    for lam in lambda_grid(sys, n_lambda) {
        let fit = lasso(sys, lam, 1e-8, 5000)?;
        let mut nz: Vec<usize> = (0..fit.coeffs.len()).filter(|&j| fit.coeffs[j] != 0.0).collect();
        if nz.is_empty() {
            continue;
        }
        if nz.len() > cap {
            let mags: Vec<f64> = nz.iter().map(|&j| fit.coeffs[j].abs()).collect();
            let mut keep: Vec<usize> = crate::linalg::top_k(&mags, cap).into_iter().map(|p| nz[p]).collect();
            keep.sort_unstable();
            nz = keep;
        }
        if seen.insert(nz.clone()) {
            bases.push(nz);
        }
    }
    let mut out_seen = BTreeSet::new();
    let mut out = Vec::new();
    for b in &bases {
        for s in subsets(b) {
            if out_seen.insert(s.clone()) {
                out.push(s);
            }
        }
    }
    Ok(out)
}
