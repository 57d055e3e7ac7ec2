//! Smoothing and differentiation of sampled profiles.
//!
//! Every operator here is linear, so each is compiled once into a
//! [`Filter`] (a set of per-position taps) and then applied to any number
//! of slices of the same length.

use crate::grid::{Boundary, Field};
use crate::linalg::pinv_row;
use crate::prelude::*;
use crate::{Error, Result};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SmootherKind {
    Lsma,
    Mls,
    /// No smoothing; SDD then reduces to repeated finite differences.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SmootherConfig {
    pub kind: SmootherKind,
    /// MLS kernel width. `None` means `5 * spacing`.
    pub h: Option<f64>,
    /// MLS local polynomial degree.
    pub degree: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            kind: SmootherKind::Mls,
            h: None,
            degree: 2,
        }
    }
}

impl SmootherConfig {
    pub fn lsma() -> Self {
        SmootherConfig {
            kind: SmootherKind::Lsma,
            ..Default::default()
        }
    }

    pub fn mls(h: Option<f64>, degree: usize) -> Self {
        SmootherConfig {
            kind: SmootherKind::Mls,
            h,
            degree,
        }
    }

    pub fn identity() -> Self {
        SmootherConfig {
            kind: SmootherKind::Identity,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.h {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "mls bandwidth must be positive, got {h}"
                )));
            }
        }
        if self.kind == SmootherKind::Mls && !(2..=4).contains(&self.degree) {
            return Err(Error::InvalidArgument(format!(
                "mls degree must be 2, 3 or 4, got {}",
                self.degree
            )));
        }
        Ok(())
    }
}

/// A linear operator on sequences of a fixed length.
#[derive(Debug, Clone, PartialEq)]
pub enum Filter {
    /// Same taps at every position, indices wrapped modulo `n`.
    Periodic { n: usize, offset: isize, taps: Vec<f64> },
    /// Position `i` uses `taps` starting at absolute index `start`.
    Banded { rows: Vec<(usize, Vec<f64>)> },
}

impl Filter {
    pub fn len(&self) -> usize {
        match self {
            Filter::Periodic { n, .. } => *n,
            Filter::Banded { rows } => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn identity(n: usize) -> Filter {
        Filter::Banded {
            rows: (0..n).map(|i| (i, vec![1.0])).collect(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len(), "filter length mismatch");
        match self {
            Filter::Periodic { n, offset, taps } => {
                let n = *n as isize;
                (0..n)
                    .map(|i| {
                        taps.iter()
                            .enumerate()
                            .map(|(k, w)| w * x[(i + offset + k as isize).rem_euclid(n) as usize])
                            .sum()
                    })
                    .collect()
            }
            Filter::Banded { rows } => rows
                .iter()
                .map(|(s, taps)| taps.iter().zip(&x[*s..]).map(|(w, v)| w * v).sum())
                .collect(),
        }
    }

    /// Applies the filter along the strided axis of a flat buffer: sequence
    /// `j` occupies `data[j * outer + k * inner]` for `k` in `0..len`.
    pub(crate) fn apply_axis(&self, data: &[f64], count: usize, lane: impl Fn(usize, usize) -> usize) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; data.len()];
        let mut buf = vec![0.0; n];
        for j in 0..count {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = data[lane(j, k)];
            }
            for (k, v) in self.apply(&buf).into_iter().enumerate() {
                out[lane(j, k)] = v;
            }
        }
        out
    }
}

/// Finite-difference weights for the `m`-th derivative at `x0` from nodes
/// `xs` (Fornberg's recursion).
pub fn fornberg_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Central second-order stencil half-width for derivative `order`.
fn central_half_width(order: usize) -> usize {
    order.div_ceil(2).max(1)
}

/// Finite-difference operator of the given order (1 to 4).
///
/// Interior stencils are the second-order central ones. Under Dirichlet
/// boundaries, positions where the central stencil does not fit use the
/// `order + 2` nearest nodes of a one-sided stencil.
pub fn fd_filter(n: usize, spacing: f64, order: usize, boundary: Boundary) -> Result<Filter> {
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidArgument(format!(
            "derivative order must be 1..=4, got {order}"
        )));
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    let hw = central_half_width(order);
    let needed = (order + 2).max(2 * hw + 1);
    if n < needed {
        return Err(Error::TooShort { needed, got: n });
    }
    let central: Vec<f64> = {
        let xs: Vec<f64> = (-(hw as isize)..=hw as isize).map(|o| o as f64).collect();
        fornberg_weights(0.0, &xs, order)
            .into_iter()
            .map(|w| w / spacing.powi(order as i32))
            .collect()
    };
    match boundary {
        Boundary::Periodic => Ok(Filter::Periodic {
            n,
            offset: -(hw as isize),
            taps: central,
        }),
        Boundary::Dirichlet => {
            let width = order + 2;
            let rows = (0..n)
                .map(|i| {
                    if i >= hw && i + hw < n {
                        (i - hw, central.clone())
                    } else {
                        let start = if i < hw { 0 } else { n - width };
                        let xs: Vec<f64> = (start..start + width).map(|j| j as f64).collect();
                        let w = fornberg_weights(i as f64, &xs, order)
                            .into_iter()
                            .map(|w| w / spacing.powi(order as i32))
                            .collect();
                        (start, w)
                    }
                })
                .collect();
            Ok(Filter::Banded { rows })
        }
    }
}

pub fn fd_derivative(samples: &[f64], spacing: f64, order: usize, boundary: Boundary) -> Result<Vec<f64>> {
    Ok(fd_filter(samples.len(), spacing, order, boundary)?.apply(samples))
}

/// One constraint of a local quadratic fit: a linear functional of the data
/// (absolute index, weight) and the matching design row.
struct Constraint {
    data: Vec<(isize, f64)>,
    design: [f64; 3],
}

/// Turns a set of constraints into taps for the fitted value `a_0`.
fn fit_taps(constraints: &[Constraint]) -> Option<Vec<(isize, f64)>> {
    let m = constraints.len();
    let a = DMatrix::from_fn(m, 3, |r, c| constraints[r].design[c]);
    let row = pinv_row(&a, 0, 1e-12)?;
    let mut acc: BTreeMap<isize, f64> = BTreeMap::new();
    for (r, con) in constraints.iter().enumerate() {
        for &(j, w) in &con.data {
            *acc.entry(j).or_insert(0.0) += row[r] * w;
        }
    }
    Some(acc.into_iter().collect())
}

/// LSMA constraints around `i`: moving averages of half-width `a` at the
/// offsets `-r..=r`. Indices are relative to `i`.
fn lsma_constraints(a: isize, r: isize) -> Vec<Constraint> {
    let avg_sq = (a * (a + 1)) as f64 / 3.0;
    let w = 1.0 / (2 * a + 1) as f64;
    (-r..=r)
        .map(|m| Constraint {
            data: (-a..=a).map(|l| (m + l, w)).collect(),
            design: [1.0, m as f64, (m * m) as f64 + avg_sq],
        })
        .collect()
}

fn to_row(start_rel: isize, taps: &[(isize, f64)], i: usize) -> (usize, Vec<f64>) {
    let lo = taps.first().map(|t| t.0).unwrap_or(0) + start_rel;
    let hi = taps.last().map(|t| t.0).unwrap_or(0) + start_rel;
    let mut w = vec![0.0; (hi - lo + 1) as usize];
    for &(j, v) in taps {
        w[(j + start_rel - lo) as usize] = v;
    }
    ((i as isize + lo) as usize, w)
}

const LSMA_MIN_LEN: usize = 9;

/// Least-squares moving-average filter.
///
/// At each node a quadratic is fitted so that its 5-point averages match the
/// 5-point averages of the data at the node and its four nearest neighbours.
/// Near a Dirichlet edge the averaging window shrinks (3-point, then plain
/// values) and on the last two nodes a one-sided 5-point quadratic fit is
/// used. Spacing does not affect the fitted value, so it is not an input.
pub fn lsma_filter(n: usize, boundary: Boundary) -> Result<Filter> {
    if n < LSMA_MIN_LEN {
        return Err(Error::TooShort {
            needed: LSMA_MIN_LEN,
            got: n,
        });
    }
    let interior = fit_taps(&lsma_constraints(2, 2)).expect("lsma design has full rank");
    match boundary {
        Boundary::Periodic => {
            let offset = interior[0].0;
            let mut taps = vec![0.0; interior.len()];
            for &(j, w) in &interior {
                taps[(j - offset) as usize] = w;
            }
            Ok(Filter::Periodic { n, offset, taps })
        }
        Boundary::Dirichlet => {
            let edge3 = fit_taps(&lsma_constraints(1, 2)).expect("full rank");
            let edge2 = fit_taps(&lsma_constraints(0, 2)).expect("full rank");
            let rows = (0..n)
                .map(|i| {
                    let d = i.min(n - 1 - i);
                    match d {
                        4.. => to_row(0, &interior, i),
                        3 => to_row(0, &edge3, i),
                        2 => to_row(0, &edge2, i),
                        _ => {
                            let start = if i < n / 2 { 0 } else { n - 5 };
                            let cons: Vec<Constraint> = (start..start + 5)
                                .map(|j| {
                                    let m = j as isize - i as isize;
                                    Constraint {
                                        data: vec![(m, 1.0)],
                                        design: [1.0, m as f64, (m * m) as f64],
                                    }
                                })
                                .collect();
                            to_row(0, &fit_taps(&cons).expect("full rank"), i)
                        }
                    }
                })
                .collect();
            Ok(Filter::Banded { rows })
        }
    }
}

/// LSMA smoothing with one-sided edge treatment.
pub fn lsma_smooth(samples: &[f64], _spacing: f64) -> Result<Vec<f64>> {
    Ok(lsma_filter(samples.len(), Boundary::Dirichlet)?.apply(samples))
}

/// Gaussian weights are cut off beyond this many bandwidths.
const MLS_CUTOFF: f64 = 6.0;

fn mls_taps(offsets: &[isize], spacing: f64, h: f64, degree: usize) -> Option<Vec<f64>> {
    let m = offsets.len();
    let scale = h / spacing;
    let a = DMatrix::from_fn(m, degree + 1, |r, c| {
        let d = offsets[r] as f64;
        let sw = (-0.5 * (d / scale) * (d / scale)).exp();
        sw * (d / scale).powi(c as i32)
    });
    let row = pinv_row(&a, 0, 1e-10)?;
    Some(
        offsets
            .iter()
            .enumerate()
            .map(|(r, &d)| {
                let sw = (-0.5 * (d as f64 / scale) * (d as f64 / scale)).exp();
                row[r] * sw
            })
            .collect(),
    )
}

/// Moving least squares with Gaussian weights `exp(-d^2 / h^2)`.
pub fn mls_filter(n: usize, spacing: f64, cfg: &SmootherConfig, boundary: Boundary) -> Result<Filter> {
    cfg.validate()?;
    let h = cfg.h.unwrap_or(5.0 * spacing);
    let degree = cfg.degree;
    if n < degree + 1 {
        return Err(Error::TooShort {
            needed: degree + 1,
            got: n,
        });
    }
    let radius = ((MLS_CUTOFF * h / spacing).ceil() as usize).max(degree);
    match boundary {
        Boundary::Periodic => {
            let r = radius.min((n - 1) / 2) as isize;
            let offsets: Vec<isize> = (-r..=r).collect();
            let taps = mls_taps(&offsets, spacing, h, degree).ok_or(Error::BandwidthTooSmall(0))?;
            Ok(Filter::Periodic { n, offset: -r, taps })
        }
        Boundary::Dirichlet => {
            let mut interior: Option<Vec<f64>> = None;
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(n - 1);
                let full = i >= radius && i + radius < n;
                let taps = if full {
                    if interior.is_none() {
                        let offsets: Vec<isize> = (-(radius as isize)..=radius as isize).collect();
                        interior = Some(mls_taps(&offsets, spacing, h, degree).ok_or(Error::BandwidthTooSmall(i))?);
                    }
                    interior.clone().unwrap()
                } else {
                    let offsets: Vec<isize> = (lo..=hi).map(|j| j as isize - i as isize).collect();
                    mls_taps(&offsets, spacing, h, degree).ok_or(Error::BandwidthTooSmall(i))?
                };
                rows.push((lo, taps));
            }
            Ok(Filter::Banded { rows })
        }
    }
}

/// MLS smoothing of a non-periodic profile.
pub fn mls_smooth(samples: &[f64], spacing: f64, cfg: &SmootherConfig) -> Result<Vec<f64>> {
    Ok(mls_filter(samples.len(), spacing, cfg, Boundary::Dirichlet)?.apply(samples))
}

/// The smoother selected by `cfg` for sequences of length `n`.
pub fn smoother_filter(n: usize, spacing: f64, cfg: &SmootherConfig, boundary: Boundary) -> Result<Filter> {
    match cfg.kind {
        SmootherKind::Lsma => lsma_filter(n, boundary),
        SmootherKind::Mls => mls_filter(n, spacing, cfg, boundary),
        SmootherKind::Identity => Ok(Filter::identity(n)),
    }
}

/// Which axis of a field an operator acts along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    T,
}

fn apply_along(field_values: &[f64], nx: usize, nt: usize, axis: Axis, f: &Filter) -> Vec<f64> {
    match axis {
        Axis::X => f.apply_axis(field_values, nt, |n, i| n * nx + i),
        Axis::T => f.apply_axis(field_values, nx, |i, n| n * nx + i),
    }
}

/// Successively denoised differentiation: `(S D)^order S` along `axis`.
///
/// Time is always treated as non-periodic.
pub fn sdd_axis(values: &[f64], field: &Field, axis: Axis, order: usize, cfg: &SmootherConfig) -> Result<Vec<f64>> {
    let g = field.grid();
    let (n, spacing, boundary) = match axis {
        Axis::X => (g.nx, g.dx, g.boundary),
        Axis::T => (g.nt, g.dt, Boundary::Dirichlet),
    };
    let s = smoother_filter(n, spacing, cfg, boundary)?;
    let d = if order > 0 {
        Some(fd_filter(n, spacing, 1, boundary)?)
    } else {
        None
    };
    let mut v = apply_along(values, g.nx, g.nt, axis, &s);
    for _ in 0..order {
        v = apply_along(&v, g.nx, g.nt, axis, d.as_ref().unwrap());
        v = apply_along(&v, g.nx, g.nt, axis, &s);
    }
    Ok(v)
}

/// `(S_x D_x)^order S_x U`, returned in field layout (`n * nx + i`).
pub fn sdd_derivative(field: &Field, order: usize, cfg: &SmootherConfig) -> Result<Vec<f64>> {
    sdd_axis(field.values(), field, Axis::X, order, cfg)
}

/// `S_t D_t S_t U`, returned in field layout.
pub fn sdd_time_derivative(field: &Field, cfg: &SmootherConfig) -> Result<Vec<f64>> {
    sdd_axis(field.values(), field, Axis::T, 1, cfg)
}

/// Spatial derivative table of `values` through direct finite differences of
/// the requested order (no intermediate smoothing).
pub fn fd_axis(values: &[f64], field: &Field, axis: Axis, order: usize) -> Result<Vec<f64>> {
    let g = field.grid();
    let (n, spacing, boundary) = match axis {
        Axis::X => (g.nx, g.dx, g.boundary),
        Axis::T => (g.nt, g.dt, Boundary::Dirichlet),
    };
    if order == 0 {
        return Ok(values.to_vec());
    }
    let d = fd_filter(n, spacing, order, boundary)?;
    Ok(apply_along(values, g.nx, g.nt, axis, &d))
}

/// Smooths every time slice of a field in space.
pub fn smooth_field(field: &Field, cfg: &SmootherConfig) -> Result<Field> {
    let v = sdd_derivative(field, 0, cfg)?;
    Field::new(*field.grid(), v)
}
