//! JSON run reports and CSV plot series.

use crate::config::RunConfig;
use crate::field_io::{write_text, FileError};
use ident_core::grid::Field;
use ident_core::pipeline::{Evaluation, Identification};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const SCHEMA: u32 = 1;
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Serialize)]
pub struct Chosen {
    pub support: Vec<String>,
    pub coefficients: Vec<(String, f64)>,
    pub flags: Vec<String>,
}

/// Everything needed to reproduce and audit a run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub version: &'static str,
    pub seed: u64,
    pub config: RunConfig,
    pub dictionary: Vec<String>,
    pub chosen: Chosen,
    pub evaluation: Option<Evaluation>,
    pub identification: Identification,
}

impl Report {
    pub fn new(config: RunConfig, identification: Identification, evaluation: Option<Evaluation>) -> Self {
        let best = identification.best();
        let mut flags: Vec<String> = identification.flags.clone();
        flags.extend(best.flags.iter().cloned());
        Report {
            schema: SCHEMA,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            dictionary: identification.dictionary.clone(),
            chosen: Chosen {
                support: best.labels.clone(),
                coefficients: best.terms(&identification.dictionary),
                flags,
            },
            config,
            evaluation,
            identification,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report types serialize infallibly")
    }
}

/// One row per candidate with every score any candidate carries.
pub fn candidates_csv(ident: &Identification) -> String {
    let keys: BTreeSet<&String> = ident.candidates.iter().flat_map(|c| c.scores.keys()).collect();
    let mut out = String::from("index,sparsity,chosen,residual,support");
    for k in &keys {
        let _ = write!(out, ",{k}");
    }
    out.push('\n');
    for (i, c) in ident.candidates.iter().enumerate() {
        let _ = write!(
            out,
            "{i},{},{},{:?},{}",
            c.labels.len(),
            u8::from(i == ident.chosen),
            c.residual,
            c.labels.join(";")
        );
        for k in &keys {
            match c.scores.get(*k) {
                Some(v) => {
                    let _ = write!(out, ",{v:?}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// `k,s_k` for the reduction-in-residual curve.
pub fn rr_csv(ident: &Identification) -> String {
    let mut out = String::from("k,s_k\n");
    for (k, s) in ident.rr_curve.iter().enumerate() {
        let _ = writeln!(out, "{},{s:?}", k + 1);
    }
    out
}

/// Coefficient functions of the chosen candidate, long form.
pub fn coefficients_csv(ident: &Identification) -> String {
    let mut out = String::from("label,x,value\n");
    for c in &ident.best().curves {
        for (x, v) in c.x.iter().zip(&c.values) {
            let _ = writeln!(out, "{},{x:?},{v:?}", c.label);
        }
    }
    out
}

/// Heat-map grid `x,t,u` of the identified field.
pub fn field_csv(u: &Field) -> String {
    let g = u.grid();
    let mut out = String::from("x,t,u\n");
    for n in 0..g.nt {
        for (i, v) in u.slice(n).iter().enumerate() {
            let _ = writeln!(out, "{:?},{:?},{v:?}", g.x(i), g.t(n));
        }
    }
    out
}

/// Writes the report and plot series into `dir`, returning the paths.
pub fn write_outputs(dir: &Path, report: &Report, field: &Field) -> Result<Vec<PathBuf>, FileError> {
    fs::create_dir_all(dir).map_err(|source| FileError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let ident = &report.identification;
    let files = [
        (REPORT_FILE, report.to_json()),
        ("candidates.csv", candidates_csv(ident)),
        ("rr_curve.csv", rr_csv(ident)),
        ("coefficients.csv", coefficients_csv(ident)),
        ("field.csv", field_csv(field)),
    ];
    files
        .into_iter()
        .map(|(name, text)| {
            let p = dir.join(name);
            write_text(&p, &text)?;
            Ok(p)
        })
        .collect()
}
