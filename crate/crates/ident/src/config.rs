//! Run configuration: a single JSON document whose keys command-line flags
//! may override.
//!
//! Precedence, highest first: command-line flag, config file key, built-in
//! default.

use ident_core::grid::{Boundary, Field, Grid, NoiseKind, NoiseSpec};
use ident_core::pipeline::{PipelineConfig, PipelineKind};
use ident_core::simulate::{simulate_reference, InitialCondition, Pde};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid initial condition {0:?}: {1}")]
    Init(String, String),
    #[error("config needs either `data` or `simulate`")]
    NoData,
    #[error(transparent)]
    Core(#[from] ident_core::Error),
}

/// Benchmark data generated on the fly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub pde: Pde,
    pub nx: usize,
    pub nt: usize,
    pub x0: f64,
    pub length: f64,
    pub t_final: f64,
    pub boundary: Boundary,
    pub init: InitialCondition,
    /// Internal reference substeps per output interval.
    pub refine: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            pde: Pde::Burgers,
            nx: 101,
            nt: 51,
            x0: 0.0,
            length: 1.0,
            t_final: 0.05,
            boundary: Boundary::Dirichlet,
            init: InitialCondition::sine(2.0),
            refine: 10,
        }
    }
}

impl SimulationConfig {
    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Ok(Grid::on_interval(
            self.x0,
            self.x0 + self.length,
            self.nx,
            self.t_final,
            self.nt,
            self.boundary,
        )?)
    }

    pub fn run(&self) -> Result<Field, ConfigError> {
        Ok(simulate_reference(self.pde, &self.grid()?, &self.init, self.refine)?)
    }
}

/// Noise level as a fraction, see [`NoiseSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub level: f64,
}

impl NoiseConfig {
    pub fn percent(p: f64) -> Self {
        NoiseConfig {
            kind: NoiseKind::PercentOfRms,
            level: p / 100.0,
        }
    }

    pub fn nsr(level: f64) -> Self {
        NoiseConfig {
            kind: NoiseKind::NsrOfCenteredRms,
            level,
        }
    }

    pub fn spec(&self, seed: u64) -> NoiseSpec {
        NoiseSpec {
            kind: self.kind,
            level: self.level,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Field CSV to identify from; takes precedence over `simulate`.
    pub data: Option<PathBuf>,
    pub simulate: Option<SimulationConfig>,
    pub noise: Option<NoiseConfig>,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    /// Known terms for the evaluation block; defaults to the simulated
    /// equation's terms.
    pub truth: Option<Vec<(String, f64)>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            simulate: None,
            noise: None,
            seed: 0,
            pipeline: PipelineConfig::for_kind(PipelineKind::WeakIdent),
            truth: None,
        }
    }
}

impl RunConfig {
    /// Missing pipeline keys take the defaults of the pipeline named in
    /// `pipeline.pipeline` (Weak-IDENT when absent).
    pub fn from_json(text: &str, path: PathBuf) -> Result<Self, ConfigError> {
        let json = |source| ConfigError::Json {
            path: path.clone(),
            source,
        };
        let mut doc: serde_json::Value = serde_json::from_str(text).map_err(json)?;
        if let Some(user) = doc.get_mut("pipeline").and_then(|p| p.as_object_mut()) {
            let kind = match user.get("pipeline") {
                Some(k) => serde_json::from_value(k.clone()).map_err(json)?,
                None => PipelineKind::WeakIdent,
            };
            let mut base = serde_json::to_value(PipelineConfig::for_kind(kind)).map_err(json)?;
            if let Some(b) = base.as_object_mut() {
                b.extend(user.iter().map(|(k, v)| (k.clone(), v.clone())));
            }
            *doc.get_mut("pipeline").expect("checked above") = base;
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(json)?;
        cfg.pipeline.validate()?;
        Ok(cfg)
    }

    /// Switches pipelines, resetting the pipeline settings to that
    /// pipeline's defaults unless they already belong to it.
    pub fn set_pipeline(&mut self, kind: PipelineKind) {
        if self.pipeline.pipeline != kind {
            self.pipeline = PipelineConfig::for_kind(kind);
        }
    }

    pub fn truth(&self) -> Option<Vec<(String, f64)>> {
        self.truth.clone().or_else(|| {
            self.simulate
                .as_ref()
                .and_then(|s| s.pde.true_model().map(|_| s.pde.true_support()))
        })
    }
}

/// Parses `sine:<freq>`, `modes:<amp>/<freq>/<phase>;...`,
/// `bump:<center>/<width>/<amp>` or `ks`.
pub fn parse_init(s: &str) -> Result<InitialCondition, ConfigError> {
    let bad = |m: &str| ConfigError::Init(s.to_owned(), m.to_owned());
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let nums = |part: &str, n: usize| -> Result<Vec<f64>, ConfigError> {
        let v: Vec<f64> = part
            .split('/')
            .map(|x| x.trim().parse::<f64>().map_err(|e| bad(&e.to_string())))
            .collect::<Result<_, _>>()?;
        if v.len() != n {
            return Err(bad(&format!("expected {n} numbers in {part:?}")));
        }
        Ok(v)
    };
    match kind {
        "sine" => Ok(InitialCondition::sine(nums(rest, 1)?[0])),
        "modes" => Ok(InitialCondition::Modes {
            modes: rest
                .split(';')
                .map(|m| nums(m, 3).map(|v| (v[0], v[1], v[2])))
                .collect::<Result<_, _>>()?,
        }),
        "bump" => {
            let v = nums(rest, 3)?;
            Ok(InitialCondition::Bump {
                center: v[0],
                width: v[1],
                amp: v[2],
            })
        }
        "ks" => Ok(InitialCondition::KsClassic),
        _ => Err(bad("unknown kind; use sine, modes, bump or ks")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_syntax() {
        assert_eq!(parse_init("sine:2").unwrap(), InitialCondition::sine(2.0));
        assert_eq!(
            parse_init("modes:0.5/3/0;0.5/1/0").unwrap(),
            InitialCondition::Modes {
                modes: vec![(0.5, 3.0, 0.0), (0.5, 1.0, 0.0)]
            }
        );
        assert!(matches!(
            parse_init("bump:0.5/0.1/1").unwrap(),
            InitialCondition::Bump { .. }
        ));
        assert!(parse_init("modes:1/2").is_err());
        assert!(parse_init("square:1").is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = RunConfig::from_json(r#"{"seed": 7, "simulate": {"pde": "transport"}}"#, "c.json".into()).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.simulate.as_ref().unwrap().nx, SimulationConfig::default().nx);
        assert_eq!(cfg.truth().unwrap(), vec![("u_x".to_owned(), -1.0)]);
    }

    #[test]
    fn pipeline_defaults_follow_named_kind() {
        let cfg = RunConfig::from_json(r#"{"pipeline": {"pipeline": "ident", "n_lambda": 7}}"#, "c".into()).unwrap();
        let want = PipelineConfig {
            n_lambda: 7,
            ..PipelineConfig::for_kind(PipelineKind::Ident)
        };
        assert_eq!(cfg.pipeline, want);
    }

    #[test]
    fn bad_json_names_path() {
        let e = RunConfig::from_json("{", "conf.json".into()).unwrap_err();
        assert!(e.to_string().contains("conf.json"));
    }

    #[test]
    fn invalid_pipeline_settings_rejected() {
        assert!(RunConfig::from_json(r#"{"pipeline": {"cee_alpha": 2.0}}"#, "c".into()).is_err());
    }

    #[test]
    fn switching_pipeline_resets_defaults() {
        let mut cfg = RunConfig::default();
        cfg.set_pipeline(PipelineKind::Ident);
        assert_eq!(cfg.pipeline, PipelineConfig::for_kind(PipelineKind::Ident));
    }
}
