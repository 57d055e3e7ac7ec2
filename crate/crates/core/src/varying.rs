//! Varying coefficients: basis expansion `c_k(x) = sum_m c_km phi_m(x)`,
//! block-structured group systems, group LASSO and patchwise regression.

use crate::denoise::SmootherConfig;
use crate::dictionary::Dictionary;
use crate::grid::{Boundary, Field, Grid};
use crate::linalg::{gram_spectral_norm, lstsq};
use crate::prelude::*;
use crate::sparse::{group_subspace_pursuit, GroupModel, RANK_DEFICIENT};
use crate::system::{assemble_differential, LinearSystem, RowMeta, SystemForm, TestFunction, WeakLayout};
use crate::{Error, Result};
use core::ops::Range;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum BasisKind {
    /// The single function `phi = 1`.
    Constant,
    /// Piecewise-linear finite-element hats on uniform nodes.
    Hat,
    /// Clamped uniform B-splines of the given order (degree `order - 1`).
    BSpline { order: usize },
}

impl BasisKind {
    fn order(self) -> usize {
        match self {
            BasisKind::Constant => 1,
            BasisKind::Hat => 2,
            BasisKind::BSpline { order } => order,
        }
    }
}

/// One-dimensional basis on an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis1d {
    pub kind: BasisKind,
    pub nb: usize,
    pub domain: (f64, f64),
    knots: Vec<f64>,
}

impl Basis1d {
    pub fn new(kind: BasisKind, nb: usize, domain: (f64, f64)) -> Result<Self> {
        let (a, b) = domain;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("basis domain [{a}, {b}] is empty")));
        }
        let knots = match kind {
            BasisKind::Constant => {
                if nb != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "constant basis has one function, got nb={nb}"
                    )));
                }
                Vec::new()
            }
            _ => {
                let k = kind.order();
                if k < 2 {
                    return Err(Error::InvalidArgument(format!(
                        "B-spline order must be at least 2, got {k}"
                    )));
                }
                if nb < 2 {
                    return Err(Error::InvalidArgument(format!("basis needs nb >= 2, got {nb}")));
                }
                if nb < k {
                    return Err(Error::InvalidArgument(format!(
                        "order-{k} B-splines need nb >= {k}, got {nb}"
                    )));
                }
                // Clamped knot vector: k copies of each end, nb - k interior knots.
                let inner = nb - k + 1;
                let mut t = vec![a; k];
                t.extend((1..inner).map(|j| a + (b - a) * j as f64 / inner as f64));
                t.extend(core::iter::repeat_n(b, k));
                t
            }
        };
        Ok(Basis1d {
            kind,
            nb,
            domain,
            knots,
        })
    }

    /// `d^deriv phi_m / dx^deriv` at `x`; `x` is clamped into the domain.
    pub fn eval(&self, m: usize, x: f64, deriv: usize) -> f64 {
        assert!(m < self.nb, "basis index {m} out of range");
        if self.kind == BasisKind::Constant {
            return if deriv == 0 { 1.0 } else { 0.0 };
        }
        let x = x.clamp(self.domain.0, self.domain.1);
        self.cox_de_boor(m, self.kind.order(), x, deriv)
    }

    /// Samples of `phi_m^(deriv)` at `xs`.
    pub fn sample(&self, m: usize, xs: &[f64], deriv: usize) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(m, x, deriv)).collect()
    }

    fn cox_de_boor(&self, i: usize, k: usize, x: f64, deriv: usize) -> f64 {
        let t = &self.knots;
        if k == 1 {
            if deriv > 0 {
                return 0.0;
            }
            let inside = t[i] <= x && x < t[i + 1];
            // The right end belongs to the last nondegenerate interval.
            let last = x == self.domain.1 && t[i] < t[i + 1] && t[i + 1] == self.domain.1;
            return if inside || last { 1.0 } else { 0.0 };
        }
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let left = self.cox_de_boor(i, k - 1, x, deriv.saturating_sub(1));
        let right = self.cox_de_boor(i + 1, k - 1, x, deriv.saturating_sub(1));
        if deriv == 0 {
            ratio(x - t[i], t[i + k - 1] - t[i]) * left + ratio(t[i + k] - x, t[i + k] - t[i + 1]) * right
        } else {
            (k - 1) as f64 * (ratio(left, t[i + k - 1] - t[i]) - ratio(right, t[i + k] - t[i + 1]))
        }
    }

    /// Highest derivative order that may be moved onto the basis by
    /// integration by parts (the functions are in `H^{order-1}`).
    pub fn weak_order(&self) -> usize {
        match self.kind {
            BasisKind::Constant => usize::MAX,
            k => k.order() - 1,
        }
    }
}

/// Space basis, optionally tensored with a time basis. Function index
/// `m = mx * nb_t + mt`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub space: Basis1d,
    pub time: Option<Basis1d>,
}

/// Default number of time functions in a tensor basis.
pub const DEFAULT_TIME_FUNCTIONS: usize = 4;

impl BasisSet {
    pub fn len(&self) -> usize {
        self.space.nb * self.nb_t()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nb_t(&self) -> usize {
        self.time.as_ref().map_or(1, |b| b.nb)
    }

    pub fn in_time(&self) -> bool {
        self.time.is_some()
    }

    /// `d^deriv/dx^deriv phi_m(x, t)`.
    pub fn eval(&self, m: usize, x: f64, t: f64, deriv: usize) -> f64 {
        let (mx, mt) = (m / self.nb_t(), m % self.nb_t());
        let s = self.space.eval(mx, x, deriv);
        match &self.time {
            Some(tb) => s * tb.eval(mt, t, 0),
            None => s,
        }
    }

    /// Replaces the time factor with `nb_t` functions of the space kind.
    pub fn with_time(mut self, grid: &Grid, nb_t: usize) -> Result<Self> {
        self.time = Some(Basis1d::new(self.space.kind, nb_t, (grid.t0, grid.t_final()))?);
        Ok(self)
    }
}

/// Uniform basis over `[x(0), x(nx-1)]` (and `[t(0), t(nt-1)]` when
/// `in_time`, with [`DEFAULT_TIME_FUNCTIONS`] time functions).
pub fn build_basis(kind: BasisKind, nb: usize, grid: &Grid, in_time: bool) -> Result<BasisSet> {
    let space = Basis1d::new(kind, nb, (grid.x(0), grid.x(grid.nx - 1)))?;
    let set = BasisSet { space, time: None };
    if in_time {
        let nt = if kind == BasisKind::Constant {
            1
        } else {
            DEFAULT_TIME_FUNCTIONS.max(kind.order())
        };
        set.with_time(grid, nt)
    } else {
        Ok(set)
    }
}

/// Prior knowledge about one feature's coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FeatureMask {
    Constant,
    #[default]
    Varying,
    Excluded,
}

/// Block-structured system: one group of columns per retained feature.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSystem {
    pub form: SystemForm,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Column range of every group, contiguous and ascending.
    pub groups: Vec<Range<usize>>,
    /// Group of every column.
    pub group_index: Vec<usize>,
    /// Feature label of every group.
    pub labels: Vec<String>,
    /// Dictionary position of every group's feature.
    pub terms: Vec<usize>,
    /// Whether every group expands in the basis (else one constant column).
    pub varying: Vec<bool>,
    /// Physical coefficient = system coefficient / divisor, per column.
    pub col_divisor: Vec<f64>,
    pub basis: BasisSet,
    pub rows: Vec<RowMeta>,
    pub grid: Grid,
}

fn full_mask(n: usize, mask: Option<&[FeatureMask]>) -> Result<Vec<FeatureMask>> {
    match mask {
        None => Ok(vec![FeatureMask::Varying; n]),
        Some(m) if m.len() == n => Ok(m.to_vec()),
        Some(m) => Err(Error::DimensionMismatch(format!(
            "mask has {} entries for {n} features",
            m.len()
        ))),
    }
}

struct GroupBuilder {
    cols: Vec<Vec<f64>>,
    groups: Vec<Range<usize>>,
    group_index: Vec<usize>,
    labels: Vec<String>,
    terms: Vec<usize>,
    varying: Vec<bool>,
}

impl GroupBuilder {
    fn new() -> Self {
        GroupBuilder {
            cols: Vec::new(),
            groups: Vec::new(),
            group_index: Vec::new(),
            labels: Vec::new(),
            terms: Vec::new(),
            varying: Vec::new(),
        }
    }

    fn push(&mut self, label: &str, term: usize, varying: bool, cols: Vec<Vec<f64>>) {
        let g = self.groups.len();
        let start = self.cols.len();
        self.group_index.extend(core::iter::repeat_n(g, cols.len()));
        self.cols.extend(cols);
        self.groups.push(start..self.cols.len());
        self.labels.push(label.to_owned());
        self.terms.push(term);
        self.varying.push(varying);
    }

    fn finish(
        self,
        form: SystemForm,
        rhs: DVector<f64>,
        basis: BasisSet,
        rows: Vec<RowMeta>,
        grid: Grid,
    ) -> Result<GroupSystem> {
        if self.groups.is_empty() {
            return Err(Error::EmptySelection);
        }
        let h = rows.len();
        let ncols = self.cols.len();
        let mut matrix = DMatrix::zeros(h, ncols);
        for (j, c) in self.cols.into_iter().enumerate() {
            matrix.set_column(j, &DVector::from_vec(c));
        }
        if let Some(p) = matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(p));
        }
        Ok(GroupSystem {
            form,
            matrix,
            rhs,
            groups: self.groups,
            group_index: self.group_index,
            labels: self.labels,
            terms: self.terms,
            varying: self.varying,
            col_divisor: vec![1.0; ncols],
            basis,
            rows,
            grid,
        })
    }
}

/// Expands every column of a differential (pointwise) system in the basis:
/// entry `(r, (k, m)) = F[r, k] phi_m(x_r, t_r)`.
pub fn expand_system(
    sys: &LinearSystem,
    grid: &Grid,
    basis: &BasisSet,
    mask: Option<&[FeatureMask]>,
) -> Result<GroupSystem> {
    if sys.form != SystemForm::Differential {
        return Err(Error::Unsupported(
            "basis expansion of an assembled weak system; use assemble_group_system".into(),
        ));
    }
    let mask = full_mask(sys.ncols(), mask)?;
    let phi: Vec<Vec<f64>> = (0..basis.len())
        .map(|m| sys.rows.iter().map(|r| basis.eval(m, r.x, r.t, 0)).collect())
        .collect();
    let mut b = GroupBuilder::new();
    for (k, col) in sys.matrix.column_iter().enumerate() {
        let meta = &sys.cols[k];
        match mask[k] {
            FeatureMask::Excluded => {}
            FeatureMask::Constant => b.push(&meta.label, meta.term, false, vec![col.iter().cloned().collect()]),
            FeatureMask::Varying => {
                let cols = phi
                    .iter()
                    .map(|p| col.iter().zip(p).map(|(f, v)| f * v).collect())
                    .collect();
                b.push(&meta.label, meta.term, true, cols);
            }
        }
    }
    let mut out = b.finish(sys.form, sys.rhs.clone(), basis.clone(), sys.rows.clone(), *grid)?;
    // Carry any column scaling of the source system.
    for (g, r) in out.groups.iter().enumerate() {
        let term = out.terms[g];
        let d = sys.cols.iter().find(|c| c.term == term).map_or(1.0, |c| c.divisor);
        out.col_divisor[r.clone()].iter_mut().for_each(|v| *v = d);
    }
    Ok(out)
}

/// Form of a group system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupForm<'a> {
    Differential(&'a SmootherConfig),
    Weak {
        phi: &'a TestFunction,
        stride: (usize, usize),
    },
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |r, j| r * (n - j) as f64 / (j + 1) as f64)
}

/// Assembles the block system. Weak columns move every derivative onto the
/// product `phi_m psi` with the Leibniz rule:
/// `factor (-1)^alpha sum_j C(alpha, j) sum U^beta phi_m^(j) d^(alpha-j) psi dx dt`.
/// Weak rows use only test functions whose support fits inside the grid,
/// because the basis does not wrap around a periodic domain.
pub fn assemble_group_system(
    u: &Field,
    dict: &Dictionary,
    basis: &BasisSet,
    form: GroupForm<'_>,
    mask: Option<&[FeatureMask]>,
) -> Result<GroupSystem> {
    let grid = *u.grid();
    match form {
        GroupForm::Differential(sm) => {
            let sys = assemble_differential(u, dict, sm)?;
            expand_system(&sys, &grid, basis, mask)
        }
        GroupForm::Weak { phi, stride } => assemble_weak_group(u, dict, basis, phi, stride, mask),
    }
}

fn assemble_weak_group(
    u: &Field,
    dict: &Dictionary,
    basis: &BasisSet,
    phi: &TestFunction,
    stride: (usize, usize),
    mask: Option<&[FeatureMask]>,
) -> Result<GroupSystem> {
    let grid = *u.grid();
    let mask = full_mask(dict.len(), mask)?;
    let pairs: Vec<(usize, usize, f64)> = dict
        .terms()
        .iter()
        .map(|t| {
            t.weak_equivalent()
                .ok_or_else(|| Error::Unsupported(format!("feature {} has no weak form", t.label)))
        })
        .collect::<Result<_>>()?;
    let max_alpha = pairs.iter().map(|p| p.0).max().unwrap_or(0);
    for (k, &(a, _, _)) in pairs.iter().enumerate() {
        if mask[k] == FeatureMask::Varying && a > basis.space.weak_order() {
            return Err(Error::Unsupported(format!(
                "feature {} needs {a} derivatives on the basis, which has only {}",
                dict.terms()[k].label,
                basis.space.weak_order()
            )));
        }
    }
    let inner = Grid {
        boundary: Boundary::Dirichlet,
        ..grid
    };
    let layout = WeakLayout::new(&inner, phi, max_alpha, stride)?;
    let rows = layout.rows();
    let (nx, nt) = (grid.nx, grid.nt);
    let xs = grid.xs();
    let kt0 = &layout.kt.derivs[0];
    let weight = |m: usize, j: usize| -> Vec<f64> {
        let (mx, mt) = (m / basis.nb_t(), m % basis.nb_t());
        let sx = basis.space.sample(mx, &xs, j);
        let st: Vec<f64> = match &basis.time {
            Some(tb) => (0..nt).map(|n| tb.eval(mt, grid.t(n), 0)).collect(),
            None => vec![1.0; nt],
        };
        (0..nt)
            .flat_map(|n| sx.iter().map(|v| v * st[n]).collect::<Vec<_>>())
            .collect()
    };
    let powers = |b: usize| -> Vec<f64> { u.values().iter().map(|v| v.powi(b as i32)).collect() };
    let mut builder = GroupBuilder::new();
    for (k, &(a, b, f)) in pairs.iter().enumerate() {
        let label = &dict.terms()[k].label;
        let ub = powers(b);
        let sign = if a % 2 == 0 { f } else { -f };
        let column = |m: Option<usize>| -> Vec<f64> {
            let mut acc = vec![0.0; rows.len()];
            let jmax = if m.is_some() { a } else { 0 };
            for j in 0..=jmax {
                let v: Vec<f64> = match m {
                    Some(m) => ub.iter().zip(weight(m, j)).map(|(p, w)| p * w).collect(),
                    None => ub.clone(),
                };
                let c = binomial(a, j) * sign;
                for (dst, val) in acc.iter_mut().zip(layout.integrate(&v, &layout.kx.derivs[a - j], kt0)) {
                    *dst += c * val;
                }
            }
            acc
        };
        match mask[k] {
            FeatureMask::Excluded => {}
            FeatureMask::Constant => builder.push(label, k, false, vec![column(None)]),
            FeatureMask::Varying => {
                let ms: Vec<usize> = (0..basis.len()).collect();
                let cols = crate::map_ordered(&ms, |&m| column(Some(m)));
                builder.push(label, k, true, cols);
            }
        }
    }
    debug_assert_eq!(nx * nt, u.values().len());
    let rhs: Vec<f64> = layout
        .integrate(u.values(), &layout.kx.derivs[0], &layout.kt.derivs[1])
        .into_iter()
        .map(|v| -v)
        .collect();
    builder.finish(SystemForm::Weak, DVector::from_vec(rhs), basis.clone(), rows, grid)
}

impl GroupSystem {
    /// Consecutive column blocks of the given sizes as groups, with every
    /// group held constant; for synthetic problems.
    pub fn from_blocks(matrix: DMatrix<f64>, rhs: DVector<f64>, sizes: &[usize]) -> Result<Self> {
        if sizes.iter().sum::<usize>() != matrix.ncols() || sizes.contains(&0) {
            return Err(Error::DimensionMismatch(format!(
                "group sizes {sizes:?} do not partition {} columns",
                matrix.ncols()
            )));
        }
        if matrix.nrows() != rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but a right-hand side of length {}",
                matrix.nrows(),
                rhs.len()
            )));
        }
        let groups: Vec<Range<usize>> = sizes
            .iter()
            .scan(0, |start, &n| {
                let r = *start..*start + n;
                *start += n;
                Some(r)
            })
            .collect();
        let ng = groups.len();
        Ok(GroupSystem {
            form: SystemForm::Differential,
            group_index: groups
                .iter()
                .enumerate()
                .flat_map(|(g, r)| core::iter::repeat_n(g, r.len()))
                .collect(),
            groups,
            labels: (0..ng).map(|g| format!("g{g}")).collect(),
            terms: (0..ng).collect(),
            varying: vec![false; ng],
            col_divisor: vec![1.0; matrix.ncols()],
            basis: BasisSet {
                space: Basis1d::new(BasisKind::Constant, 1, (0.0, 1.0))?,
                time: None,
            },
            rows: (0..matrix.nrows())
                .map(|i| RowMeta {
                    i,
                    n: 0,
                    x: 0.0,
                    t: 0.0,
                })
                .collect(),
            grid: Grid::new(0.0, 1.0, Grid::MIN_NX, 0.0, 1.0, Grid::MIN_NT, Boundary::Dirichlet)?,
            matrix,
            rhs,
        })
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Scales every column to unit Euclidean norm (zero columns untouched).
    pub fn column_normalized(&self) -> GroupSystem {
        let mut out = self.clone();
        for j in 0..self.ncols() {
            let s = self.matrix.column(j).norm();
            if s > 0.0 {
                out.matrix.column_mut(j).scale_mut(1.0 / s);
                out.col_divisor[j] *= s;
            }
        }
        out
    }

    /// Physical basis coefficients from system coefficients.
    pub fn to_physical(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.col_divisor).map(|(v, d)| v / d).collect()
    }

    /// `c_g(x, t)` reconstructed from system coefficients.
    pub fn coefficient_function(&self, c: &[f64], group: usize, x: f64, t: f64) -> f64 {
        let r = self.groups[group].clone();
        if !self.varying[group] {
            return c[r.start] / self.col_divisor[r.start];
        }
        r.enumerate()
            .map(|(m, j)| c[j] / self.col_divisor[j] * self.basis.eval(m, x, t, 0))
            .sum()
    }

    /// `c_g` on the spatial nodes at time `t`.
    pub fn coefficient_curve(&self, c: &[f64], group: usize, t: f64) -> Vec<f64> {
        self.grid
            .xs()
            .into_iter()
            .map(|x| self.coefficient_function(c, group, x, t))
            .collect()
    }

    /// Labels of the groups in `model`.
    pub fn model_labels(&self, model: &GroupModel) -> Vec<String> {
        model.groups.iter().map(|&g| self.labels[g].clone()).collect()
    }

    /// `(sum of |F[k]| entries) * || sum_m c_km phi_m / ||F[k,m]||_inf ||_L1`
    /// for every group, with `c` fitted on this system. The `L1` norm is a
    /// trapezoid rule over the spatial domain (and time when tensored).
    pub fn block_magnitudes(&self, c: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let xs = g.xs();
        let ts: Vec<f64> = if self.basis.in_time() {
            (0..g.nt).map(|n| g.t(n)).collect()
        } else {
            vec![g.t0]
        };
        let trap = |n: usize, i: usize| if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        self.groups
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let block = self.matrix.columns(r.start, r.len());
                let l1 = block.iter().map(|v| v.abs()).sum::<f64>();
                let w: Vec<f64> = r
                    .clone()
                    .map(|j| {
                        let inf = self.matrix.column(j).amax();
                        if inf > 0.0 {
                            c[j] / inf
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let mut integral = 0.0;
                for (b, &t) in ts.iter().enumerate() {
                    for (a, &x) in xs.iter().enumerate() {
                        let v: f64 = if self.varying[k] {
                            w.iter()
                                .enumerate()
                                .map(|(m, wm)| wm * self.basis.eval(m, x, t, 0))
                                .sum()
                        } else {
                            w[0]
                        };
                        integral += v.abs() * trap(xs.len(), a) * trap(ts.len(), b);
                    }
                }
                let cell = g.dx * if ts.len() > 1 { g.dt } else { 1.0 };
                l1 * integral * cell
            })
            .collect()
    }
}

/// Number of groups with nonzero `l1` norm.
pub fn l10_norm(c: &[f64], groups: &[Range<usize>]) -> usize {
    groups
        .iter()
        .filter(|r| c[r.start..r.end].iter().map(|v| v.abs()).sum::<f64>() > 0.0)
        .count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupLassoResult {
    /// Minimizer estimate on the system scale.
    pub coeffs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every iteration.
    pub objective: Vec<f64>,
}

fn group_shrink(v: &mut [f64], t: f64) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s = if n > t { 1.0 - t / n } else { 0.0 };
    v.iter_mut().for_each(|x| *x *= s);
}

/// Monotone accelerated block proximal gradient for
/// `0.5 ||b - F c||^2 + lambda sum_k ||c_k||_2`.
pub fn group_lasso(gsys: &GroupSystem, lambda: f64, tol: f64, max_iter: usize) -> Result<GroupLassoResult> {
    group_lasso_matrix(&gsys.matrix, &gsys.rhs, &gsys.groups, lambda, tol, max_iter)
}

pub fn group_lasso_matrix(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    groups: &[Range<usize>],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<GroupLassoResult> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    let n = a.ncols();
    let gram = a.tr_mul(a);
    let atb = a.tr_mul(b);
    let btb = b.norm_squared();
    let penalty = |c: &DVector<f64>| groups.iter().map(|r| c.rows(r.start, r.len()).norm()).sum::<f64>();
    let objective =
        |c: &DVector<f64>| 0.5 * (c.dot(&(&gram * c)) - 2.0 * c.dot(&atb) + btb).max(0.0) + lambda * penalty(c);
    let l = gram_spectral_norm(a);
    let zero = DVector::zeros(n);
    if l == 0.0 {
        return Ok(GroupLassoResult {
            coeffs: vec![0.0; n],
            iterations: 0,
            converged: true,
            objective: vec![objective(&zero)],
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
        let mut z = &y - (&gram * &y - &atb) * step;
        for r in groups {
            group_shrink(&mut z.as_mut_slice()[r.start..r.end], lambda * step);
        }
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
        let rel_obj = (f_prev - fx).abs() / fx.abs().max(f64::MIN_POSITIVE);
        let rel_x = (&x - &x_prev).norm() / x.norm().max(1.0);
        if it > 0 && rel_obj < tol && rel_x < tol && (&z - &x).norm() / x.norm().max(1.0) < tol.sqrt() {
            converged = true;
            break;
        }
    }
    Ok(GroupLassoResult {
        coeffs: x.as_slice().to_vec(),
        iterations: iters,
        converged,
        objective: history,
    })
}

/// `max_k ||F[k]^T b||_2`, the smallest penalty with an all-zero solution.
pub fn group_lambda_max(gsys: &GroupSystem) -> f64 {
    gsys.groups
        .iter()
        .map(|r| gsys.matrix.columns(r.start, r.len()).tr_mul(&gsys.rhs).norm())
        .fold(0.0, f64::max)
}

/// Spatial index ranges of `j` patches of equal width tiling `0..nx` with
/// `overlap` (a fraction of the width) shared between neighbours.
pub fn patch_ranges(nx: usize, j: usize, overlap: f64) -> Result<Vec<Range<usize>>> {
    if j == 0 || !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidArgument(format!(
            "need j >= 1 patches and overlap in [0, 1), got {j}, {overlap}"
        )));
    }
    let width = nx as f64 / (j as f64 * (1.0 - overlap) + overlap);
    let step = width * (1.0 - overlap);
    if width < 1.0 {
        return Err(Error::TooShort { needed: j, got: nx });
    }
    Ok((0..j)
        .map(|p| {
            let lo = (p as f64 * step).round() as usize;
            let hi = if p + 1 == j {
                nx
            } else {
                ((p as f64 * step + width).round() as usize).min(nx)
            };
            lo..hi
        })
        .collect())
}

/// Splits a system by the spatial index of its rows; rows in an overlap go
/// to every patch containing them.
pub fn split_by_patches(sys: &LinearSystem, ranges: &[Range<usize>]) -> Vec<LinearSystem> {
    ranges
        .iter()
        .map(|r| {
            let keep: Vec<usize> = (0..sys.nrows()).filter(|&h| r.contains(&sys.rows[h].i)).collect();
            LinearSystem {
                form: sys.form,
                matrix: crate::linalg::select_rows(&sys.matrix, &keep),
                rhs: crate::linalg::select_entries(&sys.rhs, &keep),
                rows: keep.iter().map(|&h| sys.rows[h]).collect(),
                cols: sys.cols.clone(),
                scores: sys.scores.as_ref().map(|s| crate::linalg::select_rows(s, &keep)),
                n_terms: sys.n_terms,
                warnings: sys.warnings.clone(),
            }
        })
        .collect()
}

/// One CaSLR candidate with a common support of `l` features.
#[derive(Debug, Clone, PartialEq)]
pub struct CaslrCandidate {
    /// Ascending column indices shared by all patches.
    pub support: Vec<usize>,
    /// Physical coefficients per patch, in column order, full length.
    pub patch_coeffs: Vec<Vec<f64>>,
    /// Global error `sum_j ||b_j - F_j c_j||^2`.
    pub error: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaslrResult {
    /// Candidates for `l = 0..=N_f`; entry 0 is the zero model.
    pub candidates: Vec<CaslrCandidate>,
    /// Chosen sparsity `l*`.
    pub chosen: usize,
    /// RRC scores for `l = 1..N_f-1` (index 0 holds `l = 1`).
    pub scores: Vec<f64>,
    pub rho: f64,
}

impl CaslrResult {
    pub fn best(&self) -> &CaslrCandidate {
        &self.candidates[self.chosen]
    }
}

/// Block-diagonal stack of the patch systems in which group `k` holds
/// feature `k`'s column from every patch.
pub fn stack_patches(patches: &[LinearSystem]) -> Result<GroupSystem> {
    let first = patches.first().ok_or(Error::EmptySelection)?;
    let nf = first.ncols();
    for p in patches {
        if p.labels() != first.labels() {
            return Err(Error::DimensionMismatch("patches must share the dictionary".into()));
        }
    }
    let jn = patches.len();
    let offsets: Vec<usize> = patches
        .iter()
        .scan(0, |acc, p| {
            let o = *acc;
            *acc += p.nrows();
            Some(o)
        })
        .collect();
    let h: usize = patches.iter().map(|p| p.nrows()).sum();
    let mut matrix = DMatrix::zeros(h, nf * jn);
    let mut rhs = DVector::zeros(h);
    let mut col_divisor = vec![1.0; nf * jn];
    for (j, p) in patches.iter().enumerate() {
        let o = offsets[j];
        rhs.rows_mut(o, p.nrows()).copy_from(&p.rhs);
        for k in 0..nf {
            matrix
                .view_mut((o, k * jn + j), (p.nrows(), 1))
                .copy_from(&p.matrix.column(k));
            col_divisor[k * jn + j] = p.cols[k].divisor;
        }
    }
    let grid = Grid::new(0.0, 1.0, 8.max(jn), 0.0, 1.0, 4, Boundary::Dirichlet)?;
    let basis = BasisSet {
        space: Basis1d::new(BasisKind::Constant, 1, (0.0, 1.0))?,
        time: None,
    };
    Ok(GroupSystem {
        form: first.form,
        matrix,
        rhs,
        groups: (0..nf).map(|k| k * jn..(k + 1) * jn).collect(),
        group_index: (0..nf * jn).map(|c| c / jn).collect(),
        labels: first.labels(),
        terms: first.cols.iter().map(|c| c.term).collect(),
        varying: vec![false; nf],
        col_divisor,
        basis,
        rows: patches.iter().flat_map(|p| p.rows.iter().cloned()).collect(),
        grid,
    })
}

fn caslr_candidate(patches: &[LinearSystem], support: &[usize]) -> CaslrCandidate {
    let mut flags = Vec::new();
    let mut error = 0.0;
    let patch_coeffs = patches
        .iter()
        .map(|p| {
            let mut c = vec![0.0; p.ncols()];
            if support.is_empty() {
                error += p.rhs.norm_squared();
                return c;
            }
            let sub = crate::linalg::select_columns(&p.matrix, support);
            let sol = lstsq(&sub, &p.rhs);
            if sol.rank_deficient && !flags.iter().any(|f| f == RANK_DEFICIENT) {
                flags.push(RANK_DEFICIENT.to_owned());
            }
            error += (&sub * &sol.x - &p.rhs).norm_squared();
            for (a, &k) in support.iter().enumerate() {
                c[k] = sol.x[a] / p.cols[k].divisor;
            }
            c
        })
        .collect();
    CaslrCandidate {
        support: support.to_vec(),
        patch_coeffs,
        error,
        flags,
    }
}

/// Patchwise regression with one global support. GPSP on the stacked
/// system proposes a support for every `l = 1..N_f`; each patch is then
/// refitted on it and the sparsity is chosen by the RRC score with
/// `rho` (default: mean of the candidate errors).
pub fn caslr(patches: &[LinearSystem], rho: Option<f64>) -> Result<CaslrResult> {
    let stacked = stack_patches(patches)?;
    let nf = stacked.n_groups();
    if nf < 2 {
        return Err(Error::TooShort { needed: 2, got: nf });
    }
    let ls: Vec<usize> = (1..=nf).collect();
    let supports = crate::map_ordered(&ls, |&l| group_subspace_pursuit(&stacked, l).map(|m| m.groups));
    let mut candidates = vec![caslr_candidate(patches, &[])];
    for s in supports {
        candidates.push(caslr_candidate(patches, &s?));
    }
    let errors: Vec<f64> = candidates.iter().map(|c| c.error).collect();
    let choice = crate::select::rrc_select(&errors, nf, rho)?;
    Ok(CaslrResult {
        candidates,
        chosen: choice.l,
        scores: choice.scores,
        rho: choice.rho,
    })
}
