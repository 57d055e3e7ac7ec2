//! Bundled benchmark setups and the scaled replications built on them.
//!
//! Grids, final times and initial conditions are calibrated choices; the
//! published experiments leave most of them unstated.

use crate::config::{NoiseConfig, SimulationConfig};
use ident_core::denoise::SmootherConfig;
use ident_core::dictionary::Dictionary;
use ident_core::grid::{add_gaussian_noise, Boundary, Field};
use ident_core::metrics::nsr;
use ident_core::pipeline::{evaluate, run, Identification, PipelineConfig, PipelineKind};
use ident_core::simulate::{InitialCondition, Pde};
use ident_core::system::assemble_differential;
use serde::Serialize;
use std::f64::consts::PI;

pub type Result<T> = core::result::Result<T, ident_core::Error>;

/// Two-mode profile `0.5 sin(6 pi x / L) + 0.5 sin(2 pi x / L)`.
pub fn two_mode_init() -> InitialCondition {
    InitialCondition::Modes {
        modes: vec![(0.5, 3.0, 0.0), (0.5, 1.0, 0.0)],
    }
}

/// Four modes with unequal phases, rich enough to separate `u`, `u^2`, `u^3`
/// and the odd derivatives.
pub fn rich_init() -> InitialCondition {
    InitialCondition::Modes {
        modes: vec![(1.0, 1.0, 0.0), (0.6, 2.0, 1.0), (0.4, 3.0, 2.0), (0.25, 5.0, 0.5)],
    }
}

/// A simulated data set plus the pipeline that identifies it.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub name: &'static str,
    pub sim: SimulationConfig,
    pub noise: Option<NoiseConfig>,
    pub pipeline: PipelineConfig,
}

fn sim(pde: Pde, boundary: Boundary, nx: usize, nt: usize, t_final: f64, init: InitialCondition) -> SimulationConfig {
    SimulationConfig {
        pde,
        nx,
        nt,
        t_final,
        boundary,
        init,
        ..SimulationConfig::default()
    }
}

impl Benchmark {
    fn burgers_ident(name: &'static str, noise: Option<NoiseConfig>, smoother: SmootherConfig) -> Self {
        Benchmark {
            name,
            sim: sim(
                Pde::Burgers,
                Boundary::Dirichlet,
                101,
                51,
                0.05,
                InitialCondition::sine(2.0),
            ),
            noise,
            pipeline: PipelineConfig {
                smoother,
                ..PipelineConfig::for_kind(PipelineKind::Ident)
            },
        }
    }

    /// IDENT on clean Burgers data, `sin(4 pi x)` on `[0, 1]`.
    pub fn burgers_clean() -> Self {
        Self::burgers_ident("burgers_clean", None, SmootherConfig::lsma())
    }

    /// IDENT on 8% noise without denoising.
    pub fn burgers_raw() -> Self {
        Self::burgers_ident(
            "burgers_8pct_raw",
            Some(NoiseConfig::percent(8.0)),
            SmootherConfig::identity(),
        )
    }

    /// IDENT on 8% noise with LSMA denoising.
    pub fn burgers_lsma() -> Self {
        Self::burgers_ident(
            "burgers_8pct_lsma",
            Some(NoiseConfig::percent(8.0)),
            SmootherConfig::lsma(),
        )
    }

    /// Robust-IDENT, transport at 30% noise.
    pub fn transport_robust() -> Self {
        Benchmark {
            name: "transport_30pct",
            sim: sim(Pde::Transport, Boundary::Periodic, 96, 51, 0.5, two_mode_init()),
            noise: Some(NoiseConfig::percent(30.0)),
            pipeline: PipelineConfig::for_kind(PipelineKind::RobustIdent),
        }
    }

    /// Robust-IDENT, viscous Burgers at 5% noise.
    pub fn viscous_burgers_robust() -> Self {
        Benchmark {
            name: "viscous_burgers_5pct",
            sim: sim(Pde::ViscousBurgers, Boundary::Dirichlet, 201, 51, 0.05, two_mode_init()),
            noise: Some(NoiseConfig::percent(5.0)),
            pipeline: PipelineConfig::for_kind(PipelineKind::RobustIdent),
        }
    }

    /// Weak-IDENT, transport-diffusion at `sigma_NSR = 0.5`.
    pub fn transport_diffusion_weak() -> Self {
        Benchmark {
            name: "transport_diffusion_nsr0.5",
            sim: sim(Pde::TransportDiffusion, Boundary::Periodic, 256, 201, 0.5, rich_init()),
            noise: Some(NoiseConfig::nsr(0.5)),
            pipeline: PipelineConfig::for_kind(PipelineKind::WeakIdent),
        }
    }

    /// Weak-IDENT, clean KdV on `[0, 2 pi)`.
    pub fn kdv_weak() -> Self {
        Benchmark {
            name: "kdv_clean",
            sim: SimulationConfig {
                length: 2.0 * PI,
                ..sim(Pde::KdV, Boundary::Periodic, 256, 201, 0.5, rich_init())
            },
            noise: None,
            pipeline: PipelineConfig::for_kind(PipelineKind::WeakIdent),
        }
    }

    /// Weak-IDENT on clean periodic Burgers data (the bundled sample).
    pub fn burgers_weak_sample() -> Self {
        Benchmark {
            name: "burgers_weak_sample",
            sim: sim(Pde::Burgers, Boundary::Periodic, 128, 51, 0.1, rich_init()),
            noise: None,
            pipeline: PipelineConfig::for_kind(PipelineKind::WeakIdent),
        }
    }

    /// GP-IDENT, `u_t = (1 + 0.5 sin 2 pi x) u_x` at 1% noise.
    pub fn varying_advection() -> Self {
        Benchmark {
            name: "varying_advection_1pct",
            sim: sim(Pde::VaryingAdvection, Boundary::Periodic, 96, 51, 0.5, two_mode_init()),
            noise: Some(NoiseConfig::percent(1.0)),
            pipeline: PipelineConfig::for_kind(PipelineKind::GpIdent),
        }
    }

    pub fn clean(&self) -> Result<Field> {
        self.sim.run().map_err(|e| match e {
            crate::config::ConfigError::Core(c) => c,
            other => ident_core::Error::InvalidArgument(other.to_string()),
        })
    }

    /// The observed field for `seed` given the clean one.
    pub fn observe(&self, clean: &Field, seed: u64) -> Result<Field> {
        match self.noise {
            Some(n) => add_gaussian_noise(clean, &n.spec(seed)),
            None => Ok(clean.clone()),
        }
    }
}

/// Outcome of one identification against known terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub terms: Vec<(String, f64)>,
    pub exact_support: bool,
    pub e_c: f64,
}

impl RunSummary {
    pub fn new(seed: u64, ident: &Identification, truth: &[(String, f64)]) -> Result<Self> {
        let e = evaluate(ident, truth)?;
        Ok(RunSummary {
            seed,
            terms: ident.best().terms(&ident.dictionary),
            exact_support: e.support.jaccard == 1.0,
            e_c: e.coefficients.e_c,
        })
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == label).map(|t| t.1)
    }
}

/// Identifies `seeds` independent noisy copies of the benchmark's data.
pub fn run_seeds(b: &Benchmark, seeds: u64) -> Result<Vec<RunSummary>> {
    let clean = b.clean()?;
    let truth = b.sim.pde.true_support();
    (0..seeds)
        .map(|seed| {
            let u = b.observe(&clean, seed)?;
            RunSummary::new(seed, &run(&u, &b.pipeline)?, &truth)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedStats {
    pub benchmark: String,
    pub runs: Vec<RunSummary>,
    pub exact: usize,
    pub median_e_c: f64,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    match s.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => s[n / 2],
        n => 0.5 * (s[n / 2 - 1] + s[n / 2]),
    }
}

pub fn seed_stats(b: &Benchmark, seeds: u64) -> Result<SeedStats> {
    let runs = run_seeds(b, seeds)?;
    let exact = runs.iter().filter(|r| r.exact_support).count();
    let median_e_c = median(&runs.iter().map(|r| r.e_c).collect::<Vec<_>>());
    Ok(SeedStats {
        benchmark: b.name.into(),
        runs,
        exact,
        median_e_c,
    })
}

/// IDENT on Burgers data: clean, noisy without denoising, noisy with LSMA.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub clean: RunSummary,
    pub raw: SeedStats,
    pub lsma: SeedStats,
}

pub fn table1(seeds: u64) -> Result<Table1> {
    Ok(Table1 {
        clean: run_seeds(&Benchmark::burgers_clean(), 1)?.remove(0),
        raw: seed_stats(&Benchmark::burgers_raw(), seeds)?,
        lsma: seed_stats(&Benchmark::burgers_lsma(), seeds)?,
    })
}

/// Noise-to-signal ratios of the raw finite-difference system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NsrSweep {
    pub pde: Pde,
    /// `(noise percent, NSR)`.
    pub points: Vec<(f64, f64)>,
}

/// NSR of the IDENT dictionary's raw finite-difference system of `s` at
/// each noise percentage, one noise draw (`seed`) per level.
pub fn nsr_sweep(s: &SimulationConfig, percents: &[f64], seed: u64) -> Result<NsrSweep> {
    let b = Benchmark {
        name: "nsr",
        sim: s.clone(),
        noise: None,
        pipeline: PipelineConfig::for_kind(PipelineKind::Ident),
    };
    let clean = b.clean()?;
    let dict = Dictionary::build(b.pipeline.dictionary)?;
    let truth = s.pde.true_support();
    let points = percents
        .iter()
        .map(|&p| {
            let u = add_gaussian_noise(&clean, &NoiseConfig::percent(p).spec(seed))?;
            let sys = assemble_differential(&u, &dict, &SmootherConfig::identity())?;
            let c: Vec<f64> = sys
                .labels()
                .iter()
                .map(|l| truth.iter().find(|t| &t.0 == l).map_or(0.0, |t| t.1))
                .collect();
            Ok((p, nsr(&sys, &c)?))
        })
        .collect::<Result<_>>()?;
    Ok(NsrSweep { pde: s.pde, points })
}

/// Grid for the Burgers NSR sweep.
pub fn burgers_nsr_sim() -> SimulationConfig {
    sim(
        Pde::Burgers,
        Boundary::Dirichlet,
        201,
        26,
        0.05,
        InitialCondition::sine(2.0),
    )
}

/// Grid for the viscous Burgers NSR sweep.
pub fn viscous_burgers_nsr_sim() -> SimulationConfig {
    sim(
        Pde::ViscousBurgers,
        Boundary::Dirichlet,
        351,
        26,
        0.1,
        InitialCondition::sine(1.0),
    )
}

pub const BURGERS_NSR_PERCENTS: [f64; 8] = [0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0];
pub const VISCOUS_NSR_PERCENTS: [f64; 3] = [0.02, 0.04, 0.12];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2 {
    pub burgers: NsrSweep,
    pub viscous_burgers: NsrSweep,
}

pub fn table2() -> Result<Table2> {
    Ok(Table2 {
        burgers: nsr_sweep(&burgers_nsr_sim(), &BURGERS_NSR_PERCENTS, 0)?,
        viscous_burgers: nsr_sweep(&viscous_burgers_nsr_sim(), &VISCOUS_NSR_PERCENTS, 0)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table3 {
    pub transport: SeedStats,
    pub viscous_burgers: SeedStats,
}

pub fn table3(seeds: u64) -> Result<Table3> {
    Ok(Table3 {
        transport: seed_stats(&Benchmark::transport_robust(), seeds)?,
        viscous_burgers: seed_stats(&Benchmark::viscous_burgers_robust(), seeds)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table4 {
    pub transport_diffusion: SeedStats,
    pub kdv: RunSummary,
}

pub fn table4(seeds: u64) -> Result<Table4> {
    Ok(Table4 {
        transport_diffusion: seed_stats(&Benchmark::transport_diffusion_weak(), seeds)?,
        kdv: run_seeds(&Benchmark::kdv_weak(), 1)?.remove(0),
    })
}

/// Varying-coefficient run: support and the `L^2` error of the `u_x`
/// coefficient function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VaryingSummary {
    pub seed: u64,
    pub labels: Vec<String>,
    pub jaccard: f64,
    /// `||a_hat - a||_2 / ||a||_2` on the grid nodes; `None` when `u_x` was
    /// not selected.
    pub l2_error: Option<f64>,
}

pub fn varying_runs(b: &Benchmark, seeds: u64) -> Result<Vec<VaryingSummary>> {
    let clean = b.clean()?;
    let truth = vec![("u_x".to_owned(), 1.0)];
    let l = b.sim.length;
    (0..seeds)
        .map(|seed| {
            let ident = run(&b.observe(&clean, seed)?, &b.pipeline)?;
            let e = evaluate(&ident, &truth)?;
            let best = ident.best();
            let l2_error = best.curves.iter().find(|c| c.label == "u_x").map(|c| {
                let (num, den) = c.x.iter().zip(&c.values).fold((0.0, 0.0), |(n, d), (x, v)| {
                    let a = Pde::varying_coefficient((x - b.sim.x0) / l);
                    (n + (v - a) * (v - a), d + a * a)
                });
                (num / den).sqrt()
            });
            Ok(VaryingSummary {
                seed,
                labels: best.labels.clone(),
                jaccard: e.support.jaccard,
                l2_error,
            })
        })
        .collect()
}
