//! Subcommands and flag handling.

use crate::config::{parse_init, ConfigError, NoiseConfig, RunConfig};
use crate::field_io::{format_system, read_field, read_text, write_field, write_text};
use crate::replicate::{self, Benchmark};
use crate::report::{write_outputs, Report};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ident_core::denoise::SmootherConfig;
use ident_core::dictionary::{Dictionary, DictionarySpec, DictionaryStyle};
use ident_core::grid::{add_gaussian_noise, Boundary};
use ident_core::metrics::{coefficient_errors, support_scores};
use ident_core::pipeline::{evaluate, run, PipelineKind};
use ident_core::simulate::Pde;
use ident_core::system::{assemble_differential, assemble_weak, default_stride, TestFunction};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "ident",
    version,
    about = "Identify a differential equation from one noisy space-time field"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate benchmark data as a field CSV.
    Simulate(SimulateArgs),
    /// Build a feature system and dump it as CSV.
    Assemble(AssembleArgs),
    /// Run an identification pipeline and write a report with plot series.
    Identify(IdentifyArgs),
    /// Score a report against known terms.
    Evaluate(EvaluateArgs),
    /// Run a bundled benchmark replication.
    Replicate(ReplicateArgs),
}

/// Flags shared by every data-producing subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise as a percentage of the field's RMS.
    #[arg(long, conflicts_with = "noise_nsr")]
    pub noise_percent: Option<f64>,
    /// Noise as sigma_NSR relative to the centered RMS.
    #[arg(long)]
    pub noise_nsr: Option<f64>,
}

impl CommonArgs {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json(&read_text(p)?, p.clone())?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.noise_percent {
            cfg.noise = Some(NoiseConfig::percent(p));
        }
        if let Some(s) = self.noise_nsr {
            cfg.noise = Some(NoiseConfig::nsr(s));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BoundaryArg {
    Periodic,
    Dirichlet,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Periodic => Boundary::Periodic,
            BoundaryArg::Dirichlet => Boundary::Dirichlet,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// burgers, viscous_burgers, transport, transport_diffusion, kdv, ks or
    /// varying_advection.
    #[arg(long)]
    pub pde: Option<String>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub nt: Option<usize>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long, value_enum)]
    pub boundary: Option<BoundaryArg>,
    /// `sine:<f>`, `modes:<a>/<f>/<phase>;...`, `bump:<c>/<w>/<a>` or `ks`.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub refine: Option<usize>,
    /// Output field CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    Weak,
    Fd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SmootherArg {
    Identity,
    Lsma,
    Mls,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    /// Field CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "weak")]
    pub form: FormArg,
    #[arg(long, default_value_t = 3)]
    pub dict_alpha: usize,
    #[arg(long, default_value_t = 3)]
    pub dict_beta: usize,
    /// Total degree cap of the finite-difference dictionary.
    #[arg(long, default_value_t = 2)]
    pub dict_degree: usize,
    #[arg(long)]
    pub mx: Option<usize>,
    #[arg(long)]
    pub mt: Option<usize>,
    #[arg(long)]
    pub px: Option<u32>,
    #[arg(long)]
    pub pt: Option<u32>,
    #[arg(long, value_enum, default_value = "identity")]
    pub smoother: SmootherArg,
    /// Output system CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// ident, robust_ident, weak_ident, gp_ident or caslr.
    #[arg(long)]
    pub pipeline: Option<String>,
    /// Field CSV; overrides the config's `data` and `simulate`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "ident-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Report written by `identify`.
    #[arg(long)]
    pub report: PathBuf,
    /// Known terms, `label=value,...`.
    #[arg(long, conflicts_with = "pde")]
    pub truth: Option<String>,
    /// Take the known terms from a benchmark equation.
    #[arg(long)]
    pub pde: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Table {
    Table1,
    Table2,
    Table3,
    Table4,
    Varying,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[arg(value_enum)]
    pub table: Table,
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Write the summary JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// How a successful command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// The identification finished but raised flags.
    Flagged,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::Flagged => 2,
        }
    }
}

fn pde(name: &str) -> anyhow::Result<Pde> {
    Pde::from_name(name).with_context(|| format!("unknown equation {name:?}"))
}

fn pipeline_kind(name: &str) -> anyhow::Result<PipelineKind> {
    PipelineKind::from_name(name).with_context(|| format!("unknown pipeline {name:?}"))
}

pub fn execute(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Assemble(a) => assemble(a),
        Command::Identify(a) => identify(a),
        Command::Evaluate(a) => evaluate_report(a),
        Command::Replicate(a) => replicate_table(a),
    }
}

fn simulate(a: SimulateArgs) -> anyhow::Result<Outcome> {
    let cfg = a.common.load()?;
    let mut s = cfg.simulate.clone().unwrap_or_default();
    if let Some(p) = &a.pde {
        s.pde = pde(p)?;
    }
    s.nx = a.nx.unwrap_or(s.nx);
    s.nt = a.nt.unwrap_or(s.nt);
    s.x0 = a.x0.unwrap_or(s.x0);
    s.length = a.length.unwrap_or(s.length);
    s.t_final = a.t_final.unwrap_or(s.t_final);
    s.refine = a.refine.unwrap_or(s.refine);
    if let Some(b) = a.boundary {
        s.boundary = b.into();
    }
    if let Some(i) = &a.init {
        s.init = parse_init(i)?;
    }
    let mut u = s.run()?;
    if let Some(n) = cfg.noise {
        u = add_gaussian_noise(&u, &n.spec(cfg.seed))?;
    }
    write_field(&u, &a.out)?;
    Ok(Outcome::Done)
}

fn assemble(a: AssembleArgs) -> anyhow::Result<Outcome> {
    let u = read_field(&a.data)?;
    let sys = match a.form {
        FormArg::Weak => {
            let dict = Dictionary::build(DictionarySpec {
                style: DictionaryStyle::WeakForm,
                max_alpha: a.dict_alpha,
                max_beta: a.dict_beta,
                max_total_degree: 0,
            })?;
            let d = TestFunction::default_for(u.grid(), a.dict_alpha);
            let phi = TestFunction {
                mx: a.mx.unwrap_or(d.mx),
                mt: a.mt.unwrap_or(d.mt),
                px: a.px.unwrap_or(d.px),
                pt: a.pt.unwrap_or(d.pt),
            };
            assemble_weak(&u, &dict, &phi, default_stride(u.grid(), &phi))?
        }
        FormArg::Fd => {
            let dict = Dictionary::build(DictionarySpec {
                style: DictionaryStyle::GeneralMonomial,
                max_alpha: a.dict_alpha,
                max_beta: a.dict_beta,
                max_total_degree: a.dict_degree,
            })?;
            let smoother = match a.smoother {
                SmootherArg::Identity => SmootherConfig::identity(),
                SmootherArg::Lsma => SmootherConfig::lsma(),
                SmootherArg::Mls => SmootherConfig::default(),
            };
            assemble_differential(&u, &dict, &smoother)?
        }
    };
    write_text(&a.out, &format_system(&sys))?;
    Ok(Outcome::Done)
}

fn identify(a: IdentifyArgs) -> anyhow::Result<Outcome> {
    let mut cfg = a.common.load()?;
    if let Some(p) = &a.pipeline {
        cfg.set_pipeline(pipeline_kind(p)?);
    }
    if let Some(d) = &a.data {
        cfg.data = Some(d.clone());
    }
    cfg.pipeline.validate()?;
    let clean = match (&cfg.data, &cfg.simulate) {
        (Some(path), _) => read_field(path)?,
        (None, Some(s)) => s.run()?,
        (None, None) => return Err(ConfigError::NoData.into()),
    };
    let u = match cfg.noise {
        Some(n) => add_gaussian_noise(&clean, &n.spec(cfg.seed))?,
        None => clean,
    };
    let ident = run(&u, &cfg.pipeline)?;
    let evaluation = cfg.truth().map(|t| evaluate(&ident, &t)).transpose()?;
    let flagged = ident.has_flags();
    let report = Report::new(cfg, ident, evaluation);
    write_outputs(&a.out, &report, &u)?;
    println!("{}", chosen_line(&report.chosen.coefficients));
    Ok(if flagged { Outcome::Flagged } else { Outcome::Done })
}

fn chosen_line(terms: &[(String, f64)]) -> String {
    let rhs: Vec<String> = terms.iter().map(|(l, c)| format!("{c:+.6} {l}")).collect();
    format!("u_t = {}", rhs.join(" "))
}

pub fn parse_truth(s: &str) -> anyhow::Result<Vec<(String, f64)>> {
    s.split(',')
        .map(|kv| {
            let (l, v) = kv
                .split_once('=')
                .with_context(|| format!("expected label=value, got {kv:?}"))?;
            Ok((
                l.trim().to_owned(),
                v.trim().parse::<f64>().with_context(|| format!("coefficient of {l}"))?,
            ))
        })
        .collect()
}

/// Support scores and coefficient errors of a written report.
pub fn score_report(path: &Path, truth: &[(String, f64)]) -> anyhow::Result<serde_json::Value> {
    let v: serde_json::Value =
        serde_json::from_str(&read_text(path)?).with_context(|| format!("{}", path.display()))?;
    if v["schema"] != 1 {
        bail!("{}: unsupported report schema {}", path.display(), v["schema"]);
    }
    let chosen: Vec<(String, f64)> = serde_json::from_value(v["chosen"]["coefficients"].clone())
        .with_context(|| format!("{}: malformed chosen coefficients", path.display()))?;
    let hat: Vec<&str> = chosen.iter().map(|t| t.0.as_str()).collect();
    let want: Vec<&str> = truth.iter().map(|t| t.0.as_str()).collect();
    let support = support_scores(&hat, &want)?;
    let mut labels: Vec<&str> = want.clone();
    labels.extend(hat.iter().filter(|l| !want.contains(l)));
    let value = |set: &[(String, f64)], l: &str| set.iter().find(|t| t.0 == l).map_or(0.0, |t| t.1);
    let c_hat: Vec<f64> = labels.iter().map(|l| value(&chosen, l)).collect();
    let c_true: Vec<f64> = labels.iter().map(|l| value(truth, l)).collect();
    let coefficients = coefficient_errors(&c_hat, &c_true)?;
    Ok(serde_json::json!({ "support": support, "coefficients": coefficients }))
}

fn evaluate_report(a: EvaluateArgs) -> anyhow::Result<Outcome> {
    let truth = match (&a.truth, &a.pde) {
        (Some(t), _) => parse_truth(t)?,
        (None, Some(p)) => pde(p)?.true_support(),
        (None, None) => bail!("pass --truth or --pde"),
    };
    println!("{}", serde_json::to_string_pretty(&score_report(&a.report, &truth)?)?);
    Ok(Outcome::Done)
}

fn fraction(k: usize, n: usize) -> String {
    format!("{k}/{n}")
}

fn replicate_table(a: ReplicateArgs) -> anyhow::Result<Outcome> {
    let n = a.seeds as usize;
    let summary = match a.table {
        Table::Table1 => {
            let t = replicate::table1(a.seeds)?;
            println!("clean: {}", chosen_line(&t.clean.terms));
            println!("8% raw: exact support {}", fraction(t.raw.exact, n));
            println!("8% LSMA: exact support {}", fraction(t.lsma.exact, n));
            serde_json::to_value(t)?
        }
        Table::Table2 => {
            let t = replicate::table2()?;
            for s in [&t.burgers, &t.viscous_burgers] {
                for (p, v) in &s.points {
                    println!("{} {p}%: NSR {v:.3}", s.pde.name());
                }
            }
            serde_json::to_value(t)?
        }
        Table::Table3 => {
            let t = replicate::table3(a.seeds)?;
            for s in [&t.transport, &t.viscous_burgers] {
                println!(
                    "{}: exact {} median e_c {:.4}",
                    s.benchmark,
                    fraction(s.exact, n),
                    s.median_e_c
                );
            }
            serde_json::to_value(t)?
        }
        Table::Table4 => {
            let t = replicate::table4(a.seeds)?;
            let s = &t.transport_diffusion;
            println!(
                "{}: exact {} median e_c {:.4}",
                s.benchmark,
                fraction(s.exact, n),
                s.median_e_c
            );
            println!("kdv clean: {}", chosen_line(&t.kdv.terms));
            serde_json::to_value(t)?
        }
        Table::Varying => {
            let runs = replicate::varying_runs(&Benchmark::varying_advection(), a.seeds)?;
            let exact = runs.iter().filter(|r| r.jaccard == 1.0).count();
            let errs: Vec<f64> = runs.iter().map(|r| r.l2_error.unwrap_or(f64::INFINITY)).collect();
            println!(
                "varying advection: jaccard 1 in {} median L2 {:.4}",
                fraction(exact, n),
                replicate::median(&errs)
            );
            serde_json::to_value(runs)?
        }
    };
    if let Some(p) = &a.out {
        write_text(p, &serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(Outcome::Done)
}
