//! Uniform space-time grids, sampled fields and the additive noise model.

use crate::prelude::*;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Uniform grid `x_i = x0 + i dx`, `t_n = t0 + n dt`.
///
/// A periodic grid covers `[x0, x0 + nx dx)`; a Dirichlet grid includes both
/// endpoints, `[x0, x0 + (nx - 1) dx]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    pub boundary: Boundary,
}

impl Grid {
    pub const MIN_NX: usize = 8;
    pub const MIN_NT: usize = 4;

    pub fn new(x0: f64, dx: f64, nx: usize, t0: f64, dt: f64, nt: usize, boundary: Boundary) -> Result<Self> {
        let grid = Grid {
            x0,
            dx,
            nx,
            t0,
            dt,
            nt,
            boundary,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid over `[a, b]` (Dirichlet, endpoints included) or `[a, b)`
    /// (periodic) with `nt` slices spanning `[0, t_final]`.
    pub fn on_interval(a: f64, b: f64, nx: usize, t_final: f64, nt: usize, boundary: Boundary) -> Result<Self> {
        if nx < 2 || nt < 2 || !(b > a) || !(t_final > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "interval [{a}, {b}] with nx={nx}, t_final={t_final}, nt={nt}"
            )));
        }
        let dx = match boundary {
            Boundary::Periodic => (b - a) / nx as f64,
            Boundary::Dirichlet => (b - a) / (nx - 1) as f64,
        };
        let dt = t_final / (nt - 1) as f64;
        Self::new(a, dx, nx, 0.0, dt, nt, boundary)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) || !self.dx.is_finite() {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {}", self.dx)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {}", self.dt)));
        }
        if self.nx < Self::MIN_NX {
            return Err(Error::InvalidGrid(format!(
                "nx must be at least {}, got {}",
                Self::MIN_NX,
                self.nx
            )));
        }
        if self.nt < Self::MIN_NT {
            return Err(Error::InvalidGrid(format!(
                "nt must be at least {}, got {}",
                Self::MIN_NT,
                self.nt
            )));
        }
        if !self.x0.is_finite() || !self.t0.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    #[inline]
    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of the spatial domain (the period for periodic grids).
    pub fn length(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.nx as f64 * self.dx,
            Boundary::Dirichlet => (self.nx - 1) as f64 * self.dx,
        }
    }

    pub fn t_final(&self) -> f64 {
        self.t(self.nt - 1)
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Same spatial layout, first `nt` time slices.
    pub fn truncated(&self, nt: usize) -> Grid {
        Grid { nt, ..*self }
    }
}

/// Samples `U_i^n` stored row-major by time slice: `values[n * nx + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for n in 0..grid.nt {
            let t = grid.t(n);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), t));
            }
        }
        Self::new(grid, values)
    }

    /// Builds a field from time slices, each of length `grid.nx`.
    pub fn from_slices(grid: Grid, slices: &[Vec<f64>]) -> Result<Self> {
        if slices.len() != grid.nt || slices.iter().any(|s| s.len() != grid.nx) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} slices of length {}",
                grid.nt, grid.nx
            )));
        }
        Self::new(grid, slices.concat())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.values[n * self.grid.nx + i]
    }

    /// The spatial profile at time index `n`.
    pub fn slice(&self, n: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[n * nx..(n + 1) * nx]
    }

    /// The time series at spatial index `i`.
    pub fn series(&self, i: usize) -> Vec<f64> {
        (0..self.grid.nt).map(|n| self.get(i, n)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Mean of the squared samples, square-rooted.
    pub fn rms(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (s / self.values.len() as f64).sqrt()
    }

    /// First `nt` time slices.
    pub fn truncated(&self, nt: usize) -> Result<Field> {
        let nt = nt.min(self.grid.nt);
        Field::new(self.grid.truncated(nt), self.values[..nt * self.grid.nx].to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseKind {
    /// `sigma = level * rms(u)`.
    PercentOfRms,
    /// `sigma = level * rms(u - (max u + min u) / 2)`.
    NsrOfCenteredRms,
}

/// `level` is a fraction: `p / 100` for [`NoiseKind::PercentOfRms`],
/// `sigma_NSR` for [`NoiseKind::NsrOfCenteredRms`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn percent(p: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::PercentOfRms,
            level: p / 100.0,
            seed,
        }
    }

    pub fn nsr(level: f64, seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::NsrOfCenteredRms,
            level,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0) || !self.level.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise level must be nonnegative, got {}",
                self.level
            )));
        }
        Ok(())
    }

    /// Standard deviation this spec induces on `clean`.
    pub fn sigma(&self, clean: &Field) -> Result<f64> {
        self.validate()?;
        match self.kind {
            NoiseKind::PercentOfRms => sigma_from_percent(clean, 100.0 * self.level),
            NoiseKind::NsrOfCenteredRms => sigma_from_nsr(clean, self.level),
        }
    }
}

pub fn sigma_from_percent(clean: &Field, p: f64) -> Result<f64> {
    if clean.values.is_empty() {
        return Err(Error::EmptyField);
    }
    if !(p >= 0.0) {
        return Err(Error::InvalidArgument(format!("percent must be nonnegative, got {p}")));
    }
    Ok(p / 100.0 * clean.rms())
}

pub fn sigma_from_nsr(clean: &Field, nsr: f64) -> Result<f64> {
    if clean.values.is_empty() {
        return Err(Error::EmptyField);
    }
    if !(nsr >= 0.0) {
        return Err(Error::InvalidArgument(format!("nsr must be nonnegative, got {nsr}")));
    }
    let (lo, hi) = clean
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let mid = 0.5 * (hi + lo);
    let s: f64 = clean.values.iter().map(|v| (v - mid) * (v - mid)).sum();
    Ok(nsr * (s / clean.values.len() as f64).sqrt())
}

/// Standard normal draws from a ChaCha8 stream seeded with `seed`.
pub fn standard_normals(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `clean + N(0, sigma^2)` with `sigma` from the [`NoiseSpec`]. Deterministic per seed.
pub fn add_gaussian_noise(clean: &Field, spec: &NoiseSpec) -> Result<Field> {
    let sigma = spec.sigma(clean)?;
    if sigma == 0.0 {
        return Ok(clean.clone());
    }
    let z = standard_normals(clean.values.len(), spec.seed);
    let values = clean.values.iter().zip(z).map(|(v, e)| v + sigma * e).collect();
    Field::new(clean.grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    fn grid(nx: usize, nt: usize) -> Grid {
        Grid::on_interval(0.0, 1.0, nx, 1.0, nt, Boundary::Periodic).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0.0, 0.0, 16, 0.0, 0.1, 8, Boundary::Periodic).is_err());
        assert!(Grid::new(0.0, 0.1, 16, 0.0, -0.1, 8, Boundary::Periodic).is_err());
        assert!(Grid::new(0.0, 0.1, 4, 0.0, 0.1, 8, Boundary::Periodic).is_err());
        assert!(Grid::new(0.0, 0.1, 16, 0.0, 0.1, 2, Boundary::Periodic).is_err());
    }

    #[test]
    fn field_layout_is_space_fastest() {
        let g = grid(8, 4);
        let f = Field::from_fn(g, |x, t| x + 10.0 * t).unwrap();
        assert_abs_diff_eq!(f.get(3, 2), g.x(3) + 10.0 * g.t(2));
        assert_eq!(f.slice(2)[3], f.values()[2 * 8 + 3]);
        assert_eq!(f.series(3)[2], f.get(3, 2));
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = grid(8, 4);
        let mut v = vec![0.0; 32];
        v[5] = f64::NAN;
        assert_eq!(Field::new(g, v), Err(Error::NonFinite(5)));
    }

    #[test]
    fn sigma_of_constant_field() {
        let f = Field::from_fn(grid(16, 8), |_, _| 2.0).unwrap();
        assert_abs_diff_eq!(sigma_from_percent(&f, 10.0).unwrap(), 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(sigma_from_nsr(&f, 0.7).unwrap(), 0.0, epsilon = 1e-14);
        let z = Field::from_fn(grid(16, 8), |_, _| 0.0).unwrap();
        assert_eq!(sigma_from_percent(&z, 50.0).unwrap(), 0.0);
    }

    #[test]
    fn sigma_nsr_alternating_sign() {
        let g = grid(16, 8);
        let v = (0..g.len()).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let f = Field::new(g, v).unwrap();
        assert_abs_diff_eq!(sigma_from_nsr(&f, 1.0).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma_nsr_of_sine_matches_direct_sum() {
        let g = Grid::on_interval(0.0, 2.0 * PI, 1000, 1.0, 4, Boundary::Periodic).unwrap();
        let f = Field::from_fn(g, |x, _| x.sin()).unwrap();
        // Oracle: direct summation of the centered square.
        let vals = f.values();
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        let mid = (hi + lo) / 2.0;
        let mut acc = 0.0;
        for v in vals {
            acc += (v - mid).powi(2);
        }
        let oracle = 0.5 * (acc / vals.len() as f64).sqrt();
        let got = sigma_from_nsr(&f, 0.5).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(got, 0.5 * 0.5f64.sqrt(), epsilon = 1e-4);
    }

    #[test]
    fn noise_levels_scale_linearly() {
        let f = Field::from_fn(grid(32, 8), |x, t| (2.0 * PI * x).sin() + t).unwrap();
        let a = sigma_from_percent(&f, 3.0).unwrap();
        let b = sigma_from_percent(&f, 6.0).unwrap();
        assert!(a >= 0.0);
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-14);
        let a = sigma_from_nsr(&f, 0.1).unwrap();
        let b = sigma_from_nsr(&f, 0.3).unwrap();
        assert!(a >= 0.0);
        assert_abs_diff_eq!(b, 3.0 * a, epsilon = 1e-14);
    }

    #[test]
    fn zero_noise_is_identity_and_seed_is_deterministic() {
        let f = Field::from_fn(grid(32, 8), |x, _| x * x).unwrap();
        assert_eq!(add_gaussian_noise(&f, &NoiseSpec::percent(0.0, 1)).unwrap(), f);
        let a = add_gaussian_noise(&f, &NoiseSpec::percent(5.0, 42)).unwrap();
        let b = add_gaussian_noise(&f, &NoiseSpec::percent(5.0, 42)).unwrap();
        assert_eq!(a.values(), b.values());
        let c = add_gaussian_noise(&f, &NoiseSpec::percent(5.0, 43)).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn negative_level_is_rejected() {
        let f = Field::from_fn(grid(16, 8), |x, _| x).unwrap();
        assert!(add_gaussian_noise(&f, &NoiseSpec::nsr(-0.1, 0)).is_err());
    }

    #[test]
    fn empirical_noise_statistics() {
        // 128 x 96 samples; sample mean and std of the perturbation.
        let g = grid(128, 96);
        let f = Field::from_fn(g, |x, t| (4.0 * PI * x).sin() * (1.0 - t) + 0.3).unwrap();
        let spec = NoiseSpec::percent(8.0, 7);
        let sigma = spec.sigma(&f).unwrap();
        let noisy = add_gaussian_noise(&f, &spec).unwrap();
        let d: Vec<f64> = noisy.values().iter().zip(f.values()).map(|(a, b)| a - b).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.05 * sigma);
        assert!((var.sqrt() - sigma).abs() < 0.05 * sigma);
    }
}
