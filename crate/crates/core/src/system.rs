//! Assembly of the identification system `F c = b` (differential form) or
//! `W c = b` (weak form), with normalizations and row selection.

use crate::denoise::{fd_axis, sdd_axis, Axis, SmootherConfig, SmootherKind};
use crate::dictionary::{eval_feature_pointwise, DerivativeTable, Dictionary};
use crate::fft::{circular_correlate, Fft};
use crate::grid::{Boundary, Field, Grid};
use crate::prelude::*;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SystemForm {
    Differential,
    Weak,
}

/// Location of one row: the grid node (differential) or the test-function
/// center (weak).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMeta {
    pub i: usize,
    pub n: usize,
    pub x: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColMeta {
    pub label: String,
    /// Position of the feature in the dictionary.
    pub term: usize,
    /// Product of all scalings applied to the column so far; the physical
    /// coefficient is the system coefficient divided by this.
    pub divisor: f64,
    /// Euclidean norm of the column as assembled.
    pub raw_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub form: SystemForm,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub rows: Vec<RowMeta>,
    pub cols: Vec<ColMeta>,
    /// Leading-coefficient scores `s(h, k)`, same shape as `matrix`.
    pub scores: Option<DMatrix<f64>>,
    /// Length of the dictionary the columns index into.
    pub n_terms: usize,
    pub warnings: Vec<String>,
}

impl LinearSystem {
    /// A differential-form system over bare columns labelled `f0, f1, ...`,
    /// for synthetic problems.
    pub fn from_matrix(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        if matrix.nrows() != rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but a right-hand side of length {}",
                matrix.nrows(),
                rhs.len()
            )));
        }
        let n = matrix.ncols();
        let sys = LinearSystem {
            form: SystemForm::Differential,
            rows: (0..matrix.nrows())
                .map(|i| RowMeta {
                    i,
                    n: 0,
                    x: 0.0,
                    t: 0.0,
                })
                .collect(),
            cols: (0..n)
                .map(|k| ColMeta {
                    label: format!("f{k}"),
                    term: k,
                    divisor: 1.0,
                    raw_norm: matrix.column(k).norm(),
                })
                .collect(),
            matrix,
            rhs,
            scores: None,
            n_terms: n,
            warnings: Vec::new(),
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn labels(&self) -> Vec<String> {
        self.cols.iter().map(|c| c.label.clone()).collect()
    }

    pub fn column_of(&self, label: &str) -> Option<usize> {
        self.cols.iter().position(|c| c.label == label)
    }

    /// Physical coefficients in column order.
    pub fn to_physical(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.cols).map(|(v, m)| v / m.divisor).collect()
    }

    /// Physical coefficients scattered into dictionary order; dropped
    /// columns read as zero.
    pub fn to_dictionary(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_terms];
        for (v, m) in c.iter().zip(&self.cols) {
            out[m.term] = v / m.divisor;
        }
        out
    }

    /// System coefficients from physical coefficients in dictionary order.
    pub fn from_dictionary(&self, phys: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|m| phys[m.term] * m.divisor).collect()
    }

    /// Keeps only the listed columns (in that order).
    pub fn select_columns(&self, keep: &[usize]) -> LinearSystem {
        LinearSystem {
            form: self.form,
            matrix: crate::linalg::select_columns(&self.matrix, keep),
            rhs: self.rhs.clone(),
            rows: self.rows.clone(),
            cols: keep.iter().map(|&j| self.cols[j].clone()).collect(),
            scores: self.scores.as_ref().map(|s| crate::linalg::select_columns(s, keep)),
            n_terms: self.n_terms,
            warnings: self.warnings.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(p) = self.matrix.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(p));
        }
        if let Some(p) = self.rhs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(p));
        }
        Ok(())
    }
}

/// Spatial rows kept by the differential system on a Dirichlet grid.
fn dirichlet_margin(max_order: usize) -> usize {
    max_order.max(1) + 1
}

/// Builds `F` from pointwise feature values at interior nodes. Derivatives
/// are successively denoised with `smoother`; an identity smoother uses the
/// direct second-order stencil of each order instead. The right-hand side
/// is the (denoised) central time difference.
pub fn assemble_differential(u: &Field, dict: &Dictionary, smoother: &SmootherConfig) -> Result<LinearSystem> {
    smoother.validate()?;
    let g = *u.grid();
    if dict.is_empty() {
        return Err(Error::InvalidArgument("empty dictionary".into()));
    }
    let max = dict.max_order();
    let deriv = |vals: &[f64], order: usize| -> Result<Vec<f64>> {
        match smoother.kind {
            SmootherKind::Identity => fd_axis(vals, u, Axis::X, order),
            _ => sdd_axis(vals, u, Axis::X, order, smoother),
        }
    };
    let derivs = (0..=max).map(|o| deriv(u.values(), o)).collect::<Result<Vec<_>>>()?;
    let mut power_derivs = BTreeMap::new();
    for (a, b) in dict.power_derivatives() {
        let p: Vec<f64> = u.values().iter().map(|v| v.powi(b as i32)).collect();
        power_derivs.insert((a, b), deriv(&p, a)?);
    }
    let table = DerivativeTable { derivs, power_derivs };
    let ut = match smoother.kind {
        SmootherKind::Identity => fd_axis(u.values(), u, Axis::T, 1)?,
        _ => sdd_axis(u.values(), u, Axis::T, 1, smoother)?,
    };

    let (ilo, ihi) = match g.boundary {
        Boundary::Periodic => (0, g.nx),
        Boundary::Dirichlet => {
            let m = dirichlet_margin(max);
            if 2 * m >= g.nx {
                return Err(Error::TooShort {
                    needed: 2 * m + 1,
                    got: g.nx,
                });
            }
            (m, g.nx - m)
        }
    };
    let rows: Vec<RowMeta> = (1..g.nt - 1)
        .flat_map(|n| (ilo..ihi).map(move |i| (i, n)))
        .map(|(i, n)| RowMeta {
            i,
            n,
            x: g.x(i),
            t: g.t(n),
        })
        .collect();
    let columns = crate::map_ordered(dict.terms(), |t| eval_feature_pointwise(t, &table));
    let mut matrix = DMatrix::zeros(rows.len(), dict.len());
    for (k, col) in columns.into_iter().enumerate() {
        let col = col?;
        for (r, m) in rows.iter().enumerate() {
            matrix[(r, k)] = col[m.n * g.nx + m.i];
        }
    }
    let rhs = DVector::from_iterator(rows.len(), rows.iter().map(|m| ut[m.n * g.nx + m.i]));
    let cols = dict
        .terms()
        .iter()
        .enumerate()
        .map(|(k, t)| ColMeta {
            label: t.label.clone(),
            term: k,
            divisor: 1.0,
            raw_norm: matrix.column(k).norm(),
        })
        .collect();
    let sys = LinearSystem {
        form: SystemForm::Differential,
        matrix,
        rhs,
        rows,
        cols,
        scores: None,
        n_terms: dict.len(),
        warnings: Vec::new(),
    };
    sys.validate()?;
    Ok(sys)
}

/// Piecewise-polynomial test function
/// `phi(x, t) = (1 - (x / (mx dx))^2)^px (1 - (t / (mt dt))^2)^pt`,
/// scaled so its discrete integral is one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestFunction {
    pub mx: usize,
    pub mt: usize,
    pub px: u32,
    pub pt: u32,
}

impl TestFunction {
    /// Half-widths of a quarter of the nodes in x and a fifth in t,
    /// `px = max_alpha + 3`, `pt = 4`.
    pub fn default_for(grid: &Grid, max_alpha: usize) -> Self {
        TestFunction {
            mx: (grid.nx / 4).max(2),
            mt: (grid.nt / 5).max(2),
            px: max_alpha as u32 + 3,
            pt: 4,
        }
    }

    pub fn validate(&self, max_alpha: usize) -> Result<()> {
        if self.mx == 0 || self.mt == 0 {
            return Err(Error::InvalidArgument(
                "test function half-widths must be positive".into(),
            ));
        }
        if (self.px as usize) < max_alpha + 1 || self.px < 2 || self.pt < 1 {
            return Err(Error::InvalidArgument(format!(
                "test function orders px={} pt={} too low for derivative order {max_alpha}",
                self.px, self.pt
            )));
        }
        Ok(())
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut r = 1.0;
    for j in 0..k {
        r = r * (n - j) as f64 / (j + 1) as f64;
    }
    r
}

/// Samples of `d^order/dy^order (1 - (y/m)^2)^p` at `y = -m..=m` (grid
/// units), each multiplied by `1 / spacing^order` and later by the
/// normalization of the underived profile.
pub fn bump_derivative(m: usize, p: u32, order: usize, spacing: f64) -> Vec<f64> {
    // (1 - s^2)^p = sum_j C(p, j) (-1)^j s^{2j}, s = y / m.
    let mut coef = vec![0.0; 2 * p as usize + 1];
    for j in 0..=p {
        coef[2 * j as usize] = binomial(p, j) * if j % 2 == 0 { 1.0 } else { -1.0 };
    }
    for _ in 0..order {
        coef = (1..coef.len()).map(|e| coef[e] * e as f64).collect();
        if coef.is_empty() {
            coef.push(0.0);
        }
    }
    let scale = 1.0 / (m as f64 * spacing).powi(order as i32);
    (0..=2 * m)
        .map(|o| {
            let s = (o as f64 - m as f64) / m as f64;
            let v = coef.iter().rev().fold(0.0, |acc, c| acc * s + c);
            v * scale
        })
        .collect()
}

/// One-dimensional kernel family for the test function along one axis.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    /// `derivs[a]` samples the `a`-th derivative of the normalized profile.
    pub derivs: Vec<Vec<f64>>,
    pub m: usize,
}

impl Kernel {
    pub(crate) fn new(m: usize, p: u32, max_order: usize, spacing: f64) -> Kernel {
        let base = bump_derivative(m, p, 0, spacing);
        let norm = base.iter().sum::<f64>() * spacing;
        let derivs = (0..=max_order)
            .map(|a| {
                bump_derivative(m, p, a, spacing)
                    .into_iter()
                    .map(|v| v / norm)
                    .collect()
            })
            .collect();
        Kernel { derivs, m }
    }
}

/// Row-center lattice and the separable correlation machinery shared by the
/// constant- and varying-coefficient weak systems.
#[derive(Debug, Clone)]
pub(crate) struct WeakLayout {
    pub grid: Grid,
    pub kx: Kernel,
    pub kt: Kernel,
    pub centers_x: Vec<usize>,
    pub centers_t: Vec<usize>,
    fft_x: Fft,
    fft_t: Fft,
}

/// Default cap on the number of weak rows before the stride is raised.
pub const MAX_WEAK_ROWS: usize = 10_000;

impl WeakLayout {
    pub(crate) fn new(grid: &Grid, phi: &TestFunction, max_alpha: usize, stride: (usize, usize)) -> Result<Self> {
        phi.validate(max_alpha)?;
        let (sx, st) = stride;
        if sx == 0 || st == 0 {
            return Err(Error::InvalidArgument("stride must be positive".into()));
        }
        if 2 * phi.mx + 1 > grid.nx {
            return Err(Error::TestFunctionTooLarge {
                axis: "x",
                support: 2 * phi.mx + 1,
                extent: grid.nx,
            });
        }
        if 2 * phi.mt + 1 > grid.nt {
            return Err(Error::TestFunctionTooLarge {
                axis: "t",
                support: 2 * phi.mt + 1,
                extent: grid.nt,
            });
        }
        let centers_x: Vec<usize> = match grid.boundary {
            Boundary::Periodic => (0..grid.nx).step_by(sx).collect(),
            Boundary::Dirichlet => (phi.mx..grid.nx - phi.mx).step_by(sx).collect(),
        };
        let centers_t: Vec<usize> = (phi.mt..grid.nt - phi.mt).step_by(st).collect();
        Ok(WeakLayout {
            grid: *grid,
            kx: Kernel::new(phi.mx, phi.px, max_alpha, grid.dx),
            kt: Kernel::new(phi.mt, phi.pt, 1, grid.dt),
            centers_x,
            centers_t,
            fft_x: Fft::new(grid.nx),
            fft_t: Fft::new(grid.nt),
        })
    }

    pub(crate) fn nrows(&self) -> usize {
        self.centers_x.len() * self.centers_t.len()
    }

    pub(crate) fn rows(&self) -> Vec<RowMeta> {
        let g = &self.grid;
        self.centers_t
            .iter()
            .flat_map(|&n| self.centers_x.iter().map(move |&i| (i, n)))
            .map(|(i, n)| RowMeta {
                i,
                n,
                x: g.x(i),
                t: g.t(n),
            })
            .collect()
    }

    /// `sum_{o,q} v[i+o, n+q] kx[o] kt[q] dx dt` at every row center, with
    /// `kx`, `kt` sampled on `-m..=m`.
    pub(crate) fn integrate(&self, v: &[f64], kx: &[f64], kt: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let (nx, nt) = (g.nx, g.nt);
        let (mx, mt) = (self.kx.m, self.kt.m);
        // Stage 1: correlate every time slice in x; keep only center columns.
        let ncx = self.centers_x.len();
        let mut stage = vec![0.0; ncx * nt];
        for n in 0..nt {
            let c = circular_correlate(&self.fft_x, &v[n * nx..(n + 1) * nx], kx);
            for (a, &i) in self.centers_x.iter().enumerate() {
                // Output index c holds the window starting at c, centered at c + mx.
                stage[a * nt + n] = c[(i + nx - mx) % nx];
            }
        }
        // Stage 2: correlate in t.
        let mut out = vec![0.0; self.nrows()];
        for a in 0..ncx {
            let c = circular_correlate(&self.fft_t, &stage[a * nt..(a + 1) * nt], kt);
            for (b, &n) in self.centers_t.iter().enumerate() {
                out[b * ncx + a] = c[n - mt] * g.dx * g.dt;
            }
        }
        out
    }
}

/// Picks the smallest uniform stride keeping the weak system within
/// [`MAX_WEAK_ROWS`] rows.
pub fn default_stride(grid: &Grid, phi: &TestFunction) -> (usize, usize) {
    let nx = match grid.boundary {
        Boundary::Periodic => grid.nx,
        Boundary::Dirichlet => grid.nx.saturating_sub(2 * phi.mx),
    };
    let nt = grid.nt.saturating_sub(2 * phi.mt);
    let mut s = 1;
    while nx.div_ceil(s) * nt.div_ceil(s) > MAX_WEAK_ROWS {
        s += 1;
    }
    (s, s)
}

/// Builds the weak system: entry `(h, k) = factor_k (-1)^alpha sum U^beta
/// d^alpha phi_h dx dt`, right-hand side `-sum U d_t phi_h dx dt`, and the
/// leading-coefficient scores `s(h, k) = factor_k beta sum |U^(beta-1)
/// d^alpha phi_h| dx dt` (one for the constant term). The absolute value
/// sits inside the sum: outside it, every `beta = 1, alpha >= 1` score is
/// a quadrature residue of an exactly vanishing integral.
pub fn assemble_weak(u: &Field, dict: &Dictionary, phi: &TestFunction, stride: (usize, usize)) -> Result<LinearSystem> {
    let g = *u.grid();
    let pairs: Vec<(usize, usize, f64)> = dict
        .terms()
        .iter()
        .map(|t| {
            t.weak_equivalent()
                .ok_or_else(|| Error::Unsupported(format!("feature {} has no weak form", t.label)))
        })
        .collect::<Result<_>>()?;
    let max_alpha = pairs.iter().map(|p| p.0).max().unwrap_or(0);
    let layout = WeakLayout::new(&g, phi, max_alpha, stride)?;
    let rows = layout.rows();
    let h = rows.len();

    let powers = |b: usize| -> Vec<f64> { u.values().iter().map(|v| v.powi(b as i32)).collect() };
    let kt0 = &layout.kt.derivs[0];
    let kt0_abs: Vec<f64> = kt0.iter().map(|v| v.abs()).collect();
    let cols_and_scores = crate::map_ordered(&pairs, |&(a, b, f)| {
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        let col: Vec<f64> = if b == 0 {
            // Constant feature: d^a of the bump integrates to zero for a >= 1.
            layout.integrate(&vec![1.0; g.len()], &layout.kx.derivs[a], kt0)
        } else {
            layout.integrate(&powers(b), &layout.kx.derivs[a], kt0)
        };
        let col: Vec<f64> = col.into_iter().map(|v| v * sign * f).collect();
        let score: Vec<f64> = if b == 0 {
            vec![1.0; h]
        } else {
            let base: Vec<f64> = powers(b - 1).into_iter().map(f64::abs).collect();
            let kx: Vec<f64> = layout.kx.derivs[a].iter().map(|v| v.abs()).collect();
            layout
                .integrate(&base, &kx, &kt0_abs)
                .into_iter()
                .map(|v| (f * b as f64).abs() * v)
                .collect()
        };
        (col, score)
    });
    let nf = pairs.len();
    let mut matrix = DMatrix::zeros(h, nf);
    let mut scores = DMatrix::zeros(h, nf);
    for (k, (c, s)) in cols_and_scores.into_iter().enumerate() {
        matrix.set_column(k, &DVector::from_vec(c));
        scores.set_column(k, &DVector::from_vec(s));
    }
    let rhs: Vec<f64> = layout
        .integrate(u.values(), &layout.kx.derivs[0], &layout.kt.derivs[1])
        .into_iter()
        .map(|v| -v)
        .collect();
    let cols = dict
        .terms()
        .iter()
        .enumerate()
        .map(|(k, t)| ColMeta {
            label: t.label.clone(),
            term: k,
            divisor: 1.0,
            raw_norm: matrix.column(k).norm(),
        })
        .collect();
    let sys = LinearSystem {
        form: SystemForm::Weak,
        matrix,
        rhs: DVector::from_vec(rhs),
        rows,
        cols,
        scores: Some(scores),
        n_terms: dict.len(),
        warnings: Vec::new(),
    };
    sys.validate()?;
    Ok(sys)
}

/// The score matrix of a weak system.
pub fn leading_coefficient_scores(sys: &LinearSystem) -> Result<&DMatrix<f64>> {
    sys.scores
        .as_ref()
        .ok_or_else(|| Error::Unsupported("leading-coefficient scores need a weak system".into()))
}

fn drop_and_scale(sys: &LinearSystem, scales: &[f64], why: &str) -> LinearSystem {
    let keep: Vec<usize> = (0..sys.ncols())
        .filter(|&k| scales[k] > 0.0 && scales[k].is_finite())
        .collect();
    let mut out = sys.select_columns(&keep);
    for k in 0..sys.ncols() {
        if !keep.contains(&k) {
            out.warnings
                .push(format!("column {} dropped: {why}", sys.cols[k].label));
        }
    }
    for (j, &k) in keep.iter().enumerate() {
        let s = scales[k];
        out.matrix.column_mut(j).scale_mut(1.0 / s);
        if let Some(sc) = out.scores.as_mut() {
            sc.column_mut(j).scale_mut(1.0 / s);
        }
        out.cols[j].divisor *= s;
    }
    out
}

/// Divides column `k` by the row-mean of `s(., k)`.
pub fn error_normalize(sys: &LinearSystem, s: &DMatrix<f64>) -> Result<LinearSystem> {
    if s.shape() != sys.matrix.shape() {
        return Err(Error::DimensionMismatch(format!(
            "score matrix {:?} vs system {:?}",
            s.shape(),
            sys.matrix.shape()
        )));
    }
    let h = s.nrows().max(1) as f64;
    let means: Vec<f64> = s.column_iter().map(|c| c.sum() / h).collect();
    Ok(drop_and_scale(sys, &means, "zero mean leading-coefficient score"))
}

/// Scales every column to unit Euclidean norm.
pub fn column_normalize(sys: &LinearSystem) -> LinearSystem {
    let norms: Vec<f64> = sys.matrix.column_iter().map(|c| c.norm()).collect();
    drop_and_scale(sys, &norms, "zero column")
}

/// Result of the high-dynamic-region search.
#[derive(Debug, Clone, PartialEq)]
pub struct HighDynamicRegion {
    /// Selected rows, ascending.
    pub rows: Vec<usize>,
    /// Junction threshold; `None` when the fallback (all rows) applied.
    pub gamma: Option<f64>,
    /// Junction bin (1-based) of the piecewise-linear fit.
    pub junction: Option<usize>,
}

/// Weighted least squares of `B(j)` by the continuous one-knot model
/// `c0 + c1 j + c2 max(0, j - j0)`, weights `1 / B(j)^2`. Returns the
/// weighted squared error. `j0 = None` fits a single line.
fn junction_fit(b: &[f64], j0: Option<usize>) -> f64 {
    let cols = if j0.is_some() { 3 } else { 2 };
    let mut a = DMatrix::zeros(b.len(), cols);
    let mut y = DVector::zeros(b.len());
    for (r, &bj) in b.iter().enumerate() {
        let j = (r + 1) as f64;
        let w = 1.0 / bj;
        a[(r, 0)] = w;
        a[(r, 1)] = j * w;
        if let Some(k) = j0 {
            a[(r, 2)] = (j - k as f64).max(0.0) * w;
        }
        y[r] = 1.0;
    }
    let sol = crate::linalg::lstsq(&a, &y);
    (&a * sol.x - y).norm_squared()
}

/// Cumulative histogram of `scores` into `bins` equal-width bins over
/// `[min, max]`. Returns `(B, min, width)`.
pub fn cumulative_histogram(scores: &[f64], bins: usize) -> (Vec<f64>, f64, f64) {
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0.0; bins];
    for &s in scores {
        let j = if width > 0.0 {
            (((s - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[j] += 1.0;
    }
    let mut acc = 0.0;
    let b = counts
        .into_iter()
        .map(|c| {
            acc += c;
            acc
        })
        .collect();
    (b, lo, width)
}

/// Rows whose score `s(h)` reaches the junction threshold of the score
/// distribution.
///
/// The junction bin `j0` minimises [`junction_fit`] over `1..bins`; the
/// threshold is the right edge of that bin. All rows are returned when the
/// scores are all equal, when a single line fits the cumulative histogram as
/// well as any knot, or when no row clears the threshold.
pub fn high_dynamic_region_from_scores(scores: &[f64], bins: usize) -> Result<HighDynamicRegion> {
    if scores.is_empty() {
        return Err(Error::EmptySelection);
    }
    if bins < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 bins, got {bins}")));
    }
    let all = HighDynamicRegion {
        rows: (0..scores.len()).collect(),
        gamma: None,
        junction: None,
    };
    let (b, lo, width) = cumulative_histogram(scores, bins);
    if !(width > 0.0) {
        return Ok(all);
    }
    let line = junction_fit(&b, None);
    let mut best = (f64::INFINITY, 0usize);
    for j0 in 1..bins {
        let e = junction_fit(&b, Some(j0));
        if e < best.0 {
            best = (e, j0);
        }
    }
    if best.0 >= line * (1.0 - 1e-9) {
        return Ok(all);
    }
    let gamma = lo + best.1 as f64 * width;
    let rows: Vec<usize> = (0..scores.len()).filter(|&h| scores[h] >= gamma).collect();
    if rows.is_empty() {
        return Ok(all);
    }
    Ok(HighDynamicRegion {
        rows,
        gamma: Some(gamma),
        junction: Some(best.1),
    })
}

/// High-dynamic region using the `score_feature` column of the scores.
pub fn high_dynamic_region(sys: &LinearSystem, score_feature: &str, bins: usize) -> Result<HighDynamicRegion> {
    let s = leading_coefficient_scores(sys)?;
    let k = sys
        .column_of(score_feature)
        .ok_or_else(|| Error::InvalidArgument(format!("score feature {score_feature} not in system")))?;
    let col: Vec<f64> = s.column(k).iter().cloned().collect();
    high_dynamic_region_from_scores(&col, bins)
}

/// Restriction to the rows `h` (in the given order).
pub fn narrow_system(sys: &LinearSystem, h: &[usize]) -> Result<LinearSystem> {
    if h.is_empty() {
        return Err(Error::EmptySelection);
    }
    if let Some(&bad) = h.iter().find(|&&r| r >= sys.nrows()) {
        return Err(Error::InvalidArgument(format!("row {bad} out of range")));
    }
    Ok(LinearSystem {
        form: sys.form,
        matrix: crate::linalg::select_rows(&sys.matrix, h),
        rhs: crate::linalg::select_entries(&sys.rhs, h),
        rows: h.iter().map(|&r| sys.rows[r]).collect(),
        cols: sys.cols.clone(),
        scores: sys.scores.as_ref().map(|s| crate::linalg::select_rows(s, h)),
        n_terms: sys.n_terms,
        warnings: sys.warnings.clone(),
    })
}

/// Largest normalized inner product between distinct columns and the pair
/// attaining it.
pub fn mutual_coherence(sys: &LinearSystem) -> Result<(f64, (usize, usize))> {
    mutual_coherence_of(&sys.matrix)
}

pub fn mutual_coherence_of(a: &DMatrix<f64>) -> Result<(f64, (usize, usize))> {
    let n = a.ncols();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "mutual coherence needs at least two columns".into(),
        ));
    }
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let gram = a.tr_mul(a);
    let mut best = (0.0, (0, 1));
    for j in 0..n {
        for l in j + 1..n {
            let d = norms[j] * norms[l];
            let mu = if d > 0.0 { gram[(j, l)].abs() / d } else { 0.0 };
            if mu > best.0 {
                best = (mu, (j, l));
            }
        }
    }
    Ok(best)
}
