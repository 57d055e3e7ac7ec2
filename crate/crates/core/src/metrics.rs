//! Evaluation quantities: coefficient, residual and dynamic errors, support
//! recovery scores and the noise-to-signal ratio of a system.

use crate::grid::Grid;
use crate::prelude::*;
use crate::select::clamp_fine_dt;
use crate::simulate::{evolve_candidate, PdeSpec};
use crate::system::LinearSystem;
use crate::{Error, Result};
use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CoefficientErrors {
    /// `||c_hat - c||_1 / ||c||_1`.
    pub e_c: f64,
    /// `||c_hat - c||_2 / ||c||_2`.
    pub e2: f64,
    /// `||c_hat - c||_inf / ||c||_inf`.
    pub e_inf: f64,
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("vectors of length {a} and {b}")));
    }
    Ok(())
}

/// Relative coefficient errors in the three norms.
pub fn coefficient_errors(c_hat: &[f64], c_true: &[f64]) -> Result<CoefficientErrors> {
    check_len(c_hat.len(), c_true.len())?;
    if c_true.iter().all(|v| *v == 0.0) {
        return Err(Error::InvalidArgument("true coefficient vector is zero".into()));
    }
    let d: Vec<f64> = c_hat.iter().zip(c_true).map(|(a, b)| a - b).collect();
    let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
    let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let linf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(CoefficientErrors {
        e_c: l1(&d) / l1(c_true),
        e2: l2(&d) / l2(c_true),
        e_inf: linf(&d) / linf(c_true),
    })
}

/// `sqrt(dx dt) ||F (c_hat - c)||_2`, coefficients in system column order.
pub fn residual_error(sys: &LinearSystem, c_hat: &[f64], c_true: &[f64], grid: &Grid) -> Result<f64> {
    check_len(c_hat.len(), sys.ncols())?;
    check_len(c_true.len(), sys.ncols())?;
    let d = DVector::from_iterator(c_hat.len(), c_hat.iter().zip(c_true).map(|(a, b)| a - b));
    Ok((grid.dx * grid.dt).sqrt() * (&sys.matrix * d).norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicError {
    /// `dx dt sum |u - u_hat|`, `+inf` when an evolution diverged.
    pub value: f64,
    pub diverged: bool,
}

/// Evolves both models from `init` over the whole grid and compares them.
pub fn dynamic_error(
    pde_true: &PdeSpec,
    pde_hat: &PdeSpec,
    grid: &Grid,
    init: &[f64],
    fine_dt: f64,
) -> Result<DynamicError> {
    if pde_true.grid != *grid || pde_hat.grid != *grid {
        return Err(Error::DimensionMismatch("models must share the evaluation grid".into()));
    }
    let fine = clamp_fine_dt(fine_dt, grid.dt);
    let a = evolve_candidate(pde_true, fine, grid.nt, init)?;
    let b = evolve_candidate(pde_hat, fine, grid.nt, init)?;
    if a.is_diverged() || b.is_diverged() {
        return Ok(DynamicError {
            value: f64::INFINITY,
            diverged: true,
        });
    }
    let sum: f64 = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>())
        .sum();
    Ok(DynamicError {
        value: sum * grid.dx * grid.dt,
        diverged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SupportScores {
    pub tpr: f64,
    /// Zero (and `ppv_undefined` set) for an empty estimate.
    pub ppv: f64,
    pub jaccard: f64,
    pub ppv_undefined: bool,
}

/// True positive rate, positive predictive value and Jaccard index.
pub fn support_scores<T: Ord>(support_hat: &[T], support_true: &[T]) -> Result<SupportScores> {
    let hat: BTreeSet<&T> = support_hat.iter().collect();
    let truth: BTreeSet<&T> = support_true.iter().collect();
    if truth.is_empty() {
        return Err(Error::InvalidArgument("true support is empty".into()));
    }
    let inter = hat.intersection(&truth).count() as f64;
    let union = hat.union(&truth).count() as f64;
    Ok(SupportScores {
        tpr: inter / truth.len() as f64,
        ppv: if hat.is_empty() { 0.0 } else { inter / hat.len() as f64 },
        jaccard: inter / union,
        ppv_undefined: hat.is_empty(),
    })
}

/// `||F c - b|| / min_{j: c_j != 0} ||F[j]|| |c_j|` with `c` in system
/// column order.
pub fn nsr(sys: &LinearSystem, c_true: &[f64]) -> Result<f64> {
    check_len(c_true.len(), sys.ncols())?;
    let c = DVector::from_column_slice(c_true);
    let r = (&sys.matrix * &c - &sys.rhs).norm();
    let den = (0..sys.ncols())
        .filter(|&j| c_true[j] != 0.0)
        .map(|j| sys.matrix.column(j).norm() * c_true[j].abs())
        .fold(f64::INFINITY, f64::min);
    if !den.is_finite() {
        return Err(Error::InvalidArgument("true coefficients are all zero".into()));
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("an active feature column is zero".into()));
    }
    Ok(r / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_coefficients_have_zero_error() {
        let e = coefficient_errors(&[1.0, -2.0], &[1.0, -2.0]).unwrap();
        assert_eq!((e.e_c, e.e2, e.e_inf), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_coefficient_relative_error() {
        let e = coefficient_errors(&[-1.02], &[-1.0]).unwrap();
        assert_abs_diff_eq!(e.e_c, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn zero_truth_rejected() {
        assert!(coefficient_errors(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn support_counting() {
        let s = support_scores(&["a", "b"], &["a"]).unwrap();
        assert_eq!((s.tpr, s.ppv, s.jaccard), (1.0, 0.5, 0.5));
        let s = support_scores(&["c"], &["a"]).unwrap();
        assert_eq!((s.tpr, s.ppv, s.jaccard), (0.0, 0.0, 0.0));
        let s = support_scores::<&str>(&[], &["a"]).unwrap();
        assert!(s.ppv_undefined);
        assert!(support_scores(&["a"], &[] as &[&str]).is_err());
        let s = support_scores(&[3, 1], &[1, 3]).unwrap();
        assert_eq!((s.tpr, s.ppv, s.jaccard), (1.0, 1.0, 1.0));
    }
}
