//! Benchmark data generation and time evolution of candidate models.

use crate::denoise::{fd_filter, Filter};
use crate::dictionary::{eval_feature_pointwise, DerivativeTable, Dictionary, FeatureTerm, TermForm};
use crate::fft::{derivative_symbol, wavenumber, Fft};
use crate::grid::{Boundary, Field, Grid};
use crate::prelude::*;
use crate::{Error, Result};
use core::f64::consts::PI;
use num_complex::Complex64;

/// Benchmark equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Pde {
    /// `u_t = -u u_x`
    Burgers,
    /// `u_t = -u u_x + 0.1 u_xx`
    ViscousBurgers,
    /// `u_t = -u_x`
    Transport,
    /// `u_t = -u_x + 0.05 u_xx`
    TransportDiffusion,
    /// `u_t = -0.5 u u_x - u_xxx`
    KdV,
    /// `u_t = -u u_x - u_xx - u_xxxx`
    KS,
    /// `u_t = (1 + 0.5 sin(2 pi x)) u_x`
    VaryingAdvection,
}

impl Pde {
    pub fn name(&self) -> &'static str {
        match self {
            Pde::Burgers => "burgers",
            Pde::ViscousBurgers => "viscous_burgers",
            Pde::Transport => "transport",
            Pde::TransportDiffusion => "transport_diffusion",
            Pde::KdV => "kdv",
            Pde::KS => "ks",
            Pde::VaryingAdvection => "varying_advection",
        }
    }

    pub fn from_name(s: &str) -> Option<Pde> {
        Some(match s {
            "burgers" => Pde::Burgers,
            "viscous_burgers" | "viscous-burgers" => Pde::ViscousBurgers,
            "transport" => Pde::Transport,
            "transport_diffusion" | "transport-diffusion" => Pde::TransportDiffusion,
            "kdv" => Pde::KdV,
            "ks" => Pde::KS,
            "varying_advection" | "varying-advection" => Pde::VaryingAdvection,
            _ => return None,
        })
    }

    /// The generating model as (term, coefficient) pairs; `None` for the
    /// varying-coefficient equation.
    pub fn true_model(&self) -> Option<Vec<(FeatureTerm, f64)>> {
        let uux = FeatureTerm::monomial(&[1, 1]);
        let d = |k: usize| {
            let mut e = vec![0; k + 1];
            e[k] = 1;
            FeatureTerm::monomial(&e)
        };
        Some(match self {
            Pde::Burgers => vec![(uux, -1.0)],
            Pde::ViscousBurgers => vec![(uux, -1.0), (d(2), 0.1)],
            Pde::Transport => vec![(d(1), -1.0)],
            Pde::TransportDiffusion => vec![(d(1), -1.0), (d(2), 0.05)],
            Pde::KdV => vec![(uux, -0.5), (d(3), -1.0)],
            Pde::KS => vec![(uux, -1.0), (d(2), -1.0), (d(4), -1.0)],
            Pde::VaryingAdvection => return None,
        })
    }

    /// True labels and coefficients.
    pub fn true_support(&self) -> Vec<(String, f64)> {
        match self.true_model() {
            Some(m) => m.into_iter().map(|(t, c)| (t.label, c)).collect(),
            None => vec![("u_x".into(), 1.0)],
        }
    }

    pub fn varying_coefficient(x: f64) -> f64 {
        1.0 + 0.5 * (2.0 * PI * x).sin()
    }

    /// Diagonal linear part (Fourier symbol) for integrating-factor stepping.
    fn linear_symbol(&self, kappa: f64) -> Complex64 {
        let ik = Complex64::new(0.0, kappa);
        match self {
            Pde::Burgers | Pde::VaryingAdvection => Complex64::new(0.0, 0.0),
            Pde::ViscousBurgers => ik * ik * 0.1,
            Pde::Transport => -ik,
            Pde::TransportDiffusion => -ik + ik * ik * 0.05,
            Pde::KdV => -ik * ik * ik,
            Pde::KS => -(ik * ik) - ik * ik * ik * ik,
        }
    }

    /// Coefficient `c` of the nonlinear flux term `c (u^2/2)_x`.
    fn flux_coefficient(&self) -> f64 {
        match self {
            Pde::Burgers | Pde::ViscousBurgers | Pde::KS => -1.0,
            Pde::KdV => -0.5,
            _ => 0.0,
        }
    }
}

/// Initial profiles.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum InitialCondition {
    /// `sum_j amp_j sin(2 pi freq_j (x - x0) / L + phase_j)` where `L` is the
    /// domain length.
    Modes { modes: Vec<(f64, f64, f64)> },
    /// `amp exp(-((x - center) / width)^2)`, wrapped onto periodic domains.
    Bump { center: f64, width: f64, amp: f64 },
    /// `cos(x / 16) (1 + sin(x / 16))`.
    KsClassic,
    /// Explicit nodal values.
    Samples { values: Vec<f64> },
}

impl InitialCondition {
    /// `sin(2 pi f x / L)`.
    pub fn sine(freq: f64) -> Self {
        InitialCondition::Modes {
            modes: vec![(1.0, freq, 0.0)],
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let l = grid.length();
        let v: Vec<f64> = match self {
            InitialCondition::Modes { modes } => (0..grid.nx)
                .map(|i| {
                    let s = (grid.x(i) - grid.x0) / l;
                    modes.iter().map(|(a, f, p)| a * (2.0 * PI * f * s + p).sin()).sum()
                })
                .collect(),
            InitialCondition::Bump { center, width, amp } => (0..grid.nx)
                .map(|i| {
                    let x = grid.x(i);
                    let g = |d: f64| (-(d / width) * (d / width)).exp();
                    match grid.boundary {
                        Boundary::Periodic => (-3..=3).map(|w| g(x - center + w as f64 * l)).sum::<f64>() * amp,
                        Boundary::Dirichlet => amp * g(x - center),
                    }
                })
                .collect(),
            InitialCondition::KsClassic => (0..grid.nx)
                .map(|i| {
                    let x = grid.x(i);
                    (x / 16.0).cos() * (1.0 + (x / 16.0).sin())
                })
                .collect(),
            InitialCondition::Samples { values } => {
                if values.len() != grid.nx {
                    return Err(Error::DimensionMismatch(format!(
                        "initial samples have length {}, grid nx is {}",
                        values.len(),
                        grid.nx
                    )));
                }
                values.clone()
            }
        };
        if let Some(p) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(p));
        }
        Ok(v)
    }
}

/// Solves `pde` on `grid` and returns the clean field.
///
/// Periodic grids use pseudo-spectral derivatives with integrating-factor
/// RK4 on the diagonal linear part. Dirichlet grids use second-order central
/// differences with classical RK4, boundary nodes held at their initial
/// values. At least `refine` internal steps are taken per output interval,
/// more when the explicit part demands it.
pub fn simulate_reference(pde: Pde, grid: &Grid, init: &InitialCondition, refine: usize) -> Result<Field> {
    grid.validate()?;
    if refine == 0 {
        return Err(Error::InvalidArgument("refine must be at least 1".into()));
    }
    let u0 = init.sample(grid)?;
    let slices = match grid.boundary {
        Boundary::Periodic => reference_spectral(pde, grid, u0, refine)?,
        Boundary::Dirichlet => {
            if matches!(pde, Pde::KdV | Pde::KS) {
                return Err(Error::Unsupported(format!("{} requires a periodic grid", pde.name())));
            }
            reference_fd(pde, grid, u0, refine)?
        }
    };
    Field::from_slices(*grid, &slices)
}

fn check_finite(v: &[f64], step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp(step))
    }
}

fn reference_spectral(pde: Pde, grid: &Grid, u0: Vec<f64>, refine: usize) -> Result<Vec<Vec<f64>>> {
    let n = grid.nx;
    let l = grid.length();
    let fft = Fft::new(n);
    let kappa: Vec<f64> = (0..n).map(|k| 2.0 * PI * wavenumber(k, n) / l).collect();
    let dsym: Vec<Complex64> = (0..n).map(|k| derivative_symbol(k, n, l, 1)).collect();
    let lin: Vec<Complex64> = kappa.iter().map(|&k| pde.linear_symbol(k)).collect();
    let flux = pde.flux_coefficient();
    let xs = grid.xs();
    let avec: Vec<f64> = xs
        .iter()
        .map(|&x| Pde::varying_coefficient((x - grid.x0) / l))
        .collect();
    let kmax = PI / grid.dx;

    let to_phys = |h: &[Complex64]| -> Vec<f64> {
        let mut b = h.to_vec();
        fft.inverse(&mut b);
        b.into_iter().map(|c| c.re).collect()
    };
    let to_hat = |u: &[f64]| -> Vec<Complex64> {
        let mut b: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.forward(&mut b);
        b
    };
    let nonlinear = |h: &[Complex64]| -> Vec<Complex64> {
        match pde {
            Pde::VaryingAdvection => {
                let ux: Vec<Complex64> = h.iter().zip(&dsym).map(|(a, b)| a * b).collect();
                let ux = to_phys(&ux);
                let prod: Vec<f64> = ux.iter().zip(&avec).map(|(a, b)| a * b).collect();
                to_hat(&prod)
            }
            _ if flux != 0.0 => {
                let u = to_phys(h);
                let sq: Vec<f64> = u.iter().map(|v| 0.5 * v * v).collect();
                to_hat(&sq).into_iter().zip(&dsym).map(|(a, b)| a * b * flux).collect()
            }
            _ => vec![Complex64::new(0.0, 0.0); h.len()],
        }
    };

    let mut out = Vec::with_capacity(grid.nt);
    let mut u = u0;
    out.push(u.clone());
    let mut h = to_hat(&u);
    for step in 1..grid.nt {
        let umax = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lam = match pde {
            Pde::VaryingAdvection => 1.5 * kmax,
            _ => flux.abs() * umax * kmax,
        };
        let m = substeps(grid.dt, lam, 2.0, refine);
        let dt = grid.dt / m as f64;
        let e_half: Vec<Complex64> = lin.iter().map(|&z| (z * dt * 0.5).exp()).collect();
        let e_full: Vec<Complex64> = e_half.iter().map(|z| z * z).collect();
        for _ in 0..m {
            let a: Vec<Complex64> = nonlinear(&h).into_iter().map(|z| z * dt).collect();
            let hb: Vec<Complex64> = (0..n).map(|k| e_half[k] * (h[k] + a[k] * 0.5)).collect();
            let b: Vec<Complex64> = nonlinear(&hb).into_iter().map(|z| z * dt).collect();
            let hc: Vec<Complex64> = (0..n).map(|k| e_half[k] * h[k] + b[k] * 0.5).collect();
            let c: Vec<Complex64> = nonlinear(&hc).into_iter().map(|z| z * dt).collect();
            let hd: Vec<Complex64> = (0..n).map(|k| e_full[k] * h[k] + e_half[k] * c[k]).collect();
            let d: Vec<Complex64> = nonlinear(&hd).into_iter().map(|z| z * dt).collect();
            for k in 0..n {
                h[k] = e_full[k] * h[k] + (e_full[k] * a[k] + e_half[k] * (b[k] + c[k]) * 2.0 + d[k]) / 6.0;
            }
            // Keep the transform of a real signal real.
            if n.is_multiple_of(2) {
                h[n / 2] = Complex64::new(h[n / 2].re, 0.0);
            }
        }
        u = to_phys(&h);
        check_finite(&u, step)?;
        out.push(u.clone());
    }
    Ok(out)
}

/// Number of internal steps for one output interval so that `lam * step`
/// stays below `limit`, never fewer than `min`.
fn substeps(dt: f64, lam: f64, limit: f64, min: usize) -> usize {
    let need = (dt * lam / limit).ceil();
    if need.is_finite() && need > min as f64 {
        need.min(1e9) as usize
    } else {
        min
    }
}

fn reference_fd(pde: Pde, grid: &Grid, u0: Vec<f64>, refine: usize) -> Result<Vec<Vec<f64>>> {
    let terms = pde
        .true_model()
        .ok_or_else(|| Error::Unsupported("varying advection requires a periodic grid".into()))?;
    let (terms, coeffs): (Vec<_>, Vec<_>) = terms.into_iter().unzip();
    let dict = Dictionary::from_terms(terms)?;
    let ops = SpatialOps::new(grid, Scheme::ForwardEulerFD, dict.max_order())?;
    let rhs = |u: &[f64]| -> Result<Vec<f64>> { model_rhs(&dict, &coeffs, &ops, u) };
    let mut out = Vec::with_capacity(grid.nt);
    let mut u = u0;
    let (left, right) = (u[0], u[grid.nx - 1]);
    out.push(u.clone());
    for step in 1..grid.nt {
        let (odd, even) = stiffness(&dict, &coeffs, &ops, &u)?;
        let m = substeps(grid.dt, odd + even, 2.0, refine);
        let dt = grid.dt / m as f64;
        for _ in 0..m {
            let k1 = rhs(&u)?;
            let u2: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
            let k2 = rhs(&u2)?;
            let u3: Vec<f64> = u.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
            let k3 = rhs(&u3)?;
            let u4: Vec<f64> = u.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
            let k4 = rhs(&u4)?;
            for i in 0..u.len() {
                u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            u[0] = left;
            u[grid.nx - 1] = right;
        }
        check_finite(&u, step)?;
        out.push(u.clone());
    }
    Ok(out)
}

/// How spatial derivatives inside features are computed during evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    ForwardEulerSpectral,
    #[cfg_attr(feature = "serde", serde(rename = "forward_euler_fd"))]
    ForwardEulerFD,
}

/// A candidate `u_t = sum_k c_k f_k` ready for time evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSpec {
    pub dictionary: Dictionary,
    pub coeffs: Vec<f64>,
    pub grid: Grid,
    pub scheme: Scheme,
}

impl PdeSpec {
    pub fn new(dictionary: Dictionary, coeffs: Vec<f64>, grid: Grid, scheme: Scheme) -> Result<Self> {
        if coeffs.len() != dictionary.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} terms",
                coeffs.len(),
                dictionary.len()
            )));
        }
        if scheme == Scheme::ForwardEulerSpectral && grid.boundary != Boundary::Periodic {
            return Err(Error::Unsupported("spectral evolution requires a periodic grid".into()));
        }
        Ok(PdeSpec {
            dictionary,
            coeffs,
            grid,
            scheme,
        })
    }

    /// Only the terms with nonzero coefficients.
    fn active(&self) -> Result<(Dictionary, Vec<f64>)> {
        let (t, c): (Vec<_>, Vec<_>) = self
            .dictionary
            .terms()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(t, &c)| (t.clone(), c))
            .unzip();
        Ok((Dictionary::from_terms(t)?, c))
    }
}

pub(crate) enum SpatialOps {
    Fd {
        filters: Vec<Filter>,
        dx: f64,
    },
    Spectral {
        fft: Fft,
        symbols: Vec<Vec<Complex64>>,
        dx: f64,
    },
}

impl SpatialOps {
    pub(crate) fn new(grid: &Grid, scheme: Scheme, max_order: usize) -> Result<Self> {
        let n = grid.nx;
        Ok(match scheme {
            Scheme::ForwardEulerFD => SpatialOps::Fd {
                filters: (1..=max_order.max(1))
                    .map(|o| fd_filter(n, grid.dx, o, grid.boundary))
                    .collect::<Result<_>>()?,
                dx: grid.dx,
            },
            Scheme::ForwardEulerSpectral => {
                let l = grid.length();
                SpatialOps::Spectral {
                    fft: Fft::new(n),
                    symbols: (1..=max_order.max(1))
                        .map(|o| (0..n).map(|k| derivative_symbol(k, n, l, o)).collect())
                        .collect(),
                    dx: grid.dx,
                }
            }
        })
    }

    fn derivative(&self, u: &[f64], order: usize) -> Vec<f64> {
        if order == 0 {
            return u.to_vec();
        }
        match self {
            SpatialOps::Fd { filters, .. } => filters[order - 1].apply(u),
            SpatialOps::Spectral { fft, symbols, .. } => {
                let mut h: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                fft.forward(&mut h);
                for (a, s) in h.iter_mut().zip(&symbols[order - 1]) {
                    *a *= s;
                }
                fft.inverse(&mut h);
                h.into_iter().map(|c| c.re).collect()
            }
        }
    }

    /// Bound on the magnitude of the discrete symbol of `d^order/dx^order`.
    fn symbol_bound(&self, order: usize) -> f64 {
        match self {
            SpatialOps::Fd { dx, .. } => match order {
                0 => 1.0,
                1 => 1.0 / dx,
                2 => 4.0 / (dx * dx),
                3 => 2.6 / (dx * dx * dx),
                _ => 16.0 / (dx * dx * dx * dx),
            },
            SpatialOps::Spectral { dx, .. } => (PI / dx).powi(order as i32),
        }
    }
}

pub(crate) fn derivative_table(dict: &Dictionary, ops: &SpatialOps, u: &[f64]) -> DerivativeTable {
    let max = dict.max_order();
    let derivs = (0..=max).map(|o| ops.derivative(u, o)).collect();
    let mut power_derivs = BTreeMap::new();
    for (a, b) in dict.power_derivatives() {
        let p: Vec<f64> = u.iter().map(|v| v.powi(b as i32)).collect();
        power_derivs.insert((a, b), ops.derivative(&p, a));
    }
    DerivativeTable { derivs, power_derivs }
}

fn model_rhs(dict: &Dictionary, coeffs: &[f64], ops: &SpatialOps, u: &[f64]) -> Result<Vec<f64>> {
    let table = derivative_table(dict, ops, u);
    let mut out = vec![0.0; u.len()];
    for (t, &c) in dict.terms().iter().zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(eval_feature_pointwise(t, &table)?) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Linearised symbol bounds `(odd, even)`: the contribution of odd-order
/// derivatives (oscillatory) and of even orders (growth or decay).
fn stiffness(dict: &Dictionary, coeffs: &[f64], ops: &SpatialOps, u: &[f64]) -> Result<(f64, f64)> {
    let table = derivative_table(dict, ops, u);
    let maxabs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut odd = 0.0;
    let mut even = 0.0;
    let mut add = |order: usize, mag: f64| {
        let s = mag * ops.symbol_bound(order);
        if order % 2 == 1 {
            odd += s;
        } else {
            even += s;
        }
    };
    for (t, &c) in dict.terms().iter().zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        let c = c.abs() * t.scale.abs();
        match &t.form {
            TermForm::Weak { beta: 0, .. } => {}
            TermForm::Weak { alpha, beta } => {
                let umax = maxabs(&table.derivs[0]);
                add(*alpha, c * *beta as f64 * umax.powi(*beta as i32 - 1));
            }
            TermForm::Monomial(e) => {
                for (j, &p) in e.iter().enumerate() {
                    if p == 0 {
                        continue;
                    }
                    let mut m = 0.0f64;
                    for node in 0..u.len() {
                        let mut v = p as f64 * table.derivs[j][node].abs().powi(p as i32 - 1);
                        for (l, &q) in e.iter().enumerate() {
                            if l != j && q > 0 {
                                v *= table.derivs[l][node].abs().powi(q as i32);
                            }
                        }
                        m = m.max(v);
                    }
                    add(j, c * m);
                }
            }
        }
    }
    Ok((odd, even))
}

/// Result of a candidate evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    /// States at the observation times; `states[0]` is the starting state.
    pub states: Vec<Vec<f64>>,
    /// Observation interval in which the evolution diverged, if it did.
    pub diverged: Option<usize>,
    /// Euler substeps taken per observation interval.
    pub substeps: usize,
}

impl Evolution {
    pub fn is_diverged(&self) -> bool {
        self.diverged.is_some()
    }
}

/// Maximum Euler substeps per observation interval.
pub const MAX_SUBSTEPS: usize = 1 << 14;

/// Forward-Euler evolution of `model` from `from`, recording `horizon`
/// states spaced by the grid's `dt` (the first one is `from`).
///
/// The substep starts at the largest `dt / 2^j` not above `fine_dt` and is
/// halved until `max|lambda| * step <= 0.5` and the oscillatory growth over
/// the whole horizon, `lambda_odd^2 * step * T`, stays below one. Past
/// [`MAX_SUBSTEPS`] the evolution is reported as diverged.
pub fn evolve_candidate(model: &PdeSpec, fine_dt: f64, horizon: usize, from: &[f64]) -> Result<Evolution> {
    let grid = &model.grid;
    if from.len() != grid.nx {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, grid nx is {}",
            from.len(),
            grid.nx
        )));
    }
    if horizon == 0 || horizon > grid.nt {
        return Err(Error::InvalidArgument(format!(
            "horizon must be in 1..={}, got {horizon}",
            grid.nt
        )));
    }
    if !(fine_dt > 0.0) || fine_dt > grid.dt / 5.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "fine_dt must be in (0, dt/5], got {fine_dt} with dt {}",
            grid.dt
        )));
    }
    let (dict, coeffs) = model.active()?;
    let mut states = Vec::with_capacity(horizon);
    states.push(from.to_vec());
    if dict.is_empty() || horizon == 1 {
        for _ in 1..horizon {
            states.push(from.to_vec());
        }
        return Ok(Evolution {
            states,
            diverged: None,
            substeps: 1,
        });
    }
    let ops = SpatialOps::new(grid, model.scheme, dict.max_order())?;
    let (odd, even) = stiffness(&dict, &coeffs, &ops, from)?;
    let span = (horizon - 1) as f64 * grid.dt;
    let mut m = (grid.dt / fine_dt).ceil().max(1.0) as usize;
    m = m.next_power_of_two();
    loop {
        let h = grid.dt / m as f64;
        if (odd + even) * h <= 0.5 && odd * odd * h * span <= 1.0 {
            break;
        }
        if m >= MAX_SUBSTEPS {
            return Ok(Evolution {
                states,
                diverged: Some(0),
                substeps: m,
            });
        }
        m *= 2;
    }
    let h = grid.dt / m as f64;
    let dirichlet = grid.boundary == Boundary::Dirichlet;
    let (left, right) = (from[0], from[grid.nx - 1]);
    // Anything this far above the starting amplitude is treated as blow-up.
    let bound = 1e6 * (1.0 + from.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let mut u = from.to_vec();
    for step in 1..horizon {
        for _ in 0..m {
            let r = model_rhs(&dict, &coeffs, &ops, &u)?;
            for (a, b) in u.iter_mut().zip(&r) {
                *a += h * b;
            }
            if dirichlet {
                u[0] = left;
                u[grid.nx - 1] = right;
            }
        }
        if u.iter().any(|v| !v.is_finite() || v.abs() > bound) {
            return Ok(Evolution {
                states,
                diverged: Some(step),
                substeps: m,
            });
        }
        states.push(u.clone());
    }
    Ok(Evolution {
        states,
        diverged: None,
        substeps: m,
    })
}
