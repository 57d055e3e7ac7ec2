//! The named identification pipelines, each a pure function from a field
//! and a configuration to an [`Identification`].

use crate::denoise::{smooth_field, SmootherConfig, SmootherKind};
use crate::dictionary::{Dictionary, DictionarySpec, DictionaryStyle};
use crate::grid::Field;
use crate::metrics::{coefficient_errors, support_scores, CoefficientErrors, SupportScores};
use crate::prelude::*;
use crate::select::{
    bee, cee, default_mtee_window, lasso_path_supports, mtee, rr_select, tee, DEFAULT_BEE_GRID, DEFAULT_BEE_TOL,
    DEFAULT_CEE_ALPHA, DEFAULT_N_RR, DEFAULT_RR_RHO, LASSO_PATH_LEN, MAX_SUBSET_BASE,
};
use crate::simulate::{PdeSpec, Scheme};
use crate::sparse::{
    group_subspace_pursuit, least_squares_on_support, subspace_pursuit, trim, CandidateModel, DEFAULT_TRIM_RHO,
};
use crate::system::{
    assemble_differential, assemble_weak, column_normalize, default_stride, error_normalize, high_dynamic_region,
    leading_coefficient_scores, narrow_system, LinearSystem, TestFunction,
};
use crate::varying::{
    build_basis, caslr, expand_system, group_lambda_max, group_lasso, patch_ranges, split_by_patches, BasisKind,
    FeatureMask, GroupSystem,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PipelineKind {
    /// Differential system, LASSO path subsets, time evolution error.
    Ident,
    /// Differential system with SDD, subspace pursuit, multi-shooting error.
    RobustIdent,
    /// Weak system, narrow fit, subspace pursuit, trimming, cross validation.
    WeakIdent,
    /// Varying coefficients: group system, group subspace pursuit, RR.
    GpIdent,
    /// Varying coefficients: patchwise regression, RRC.
    Caslr,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 5] = [
        PipelineKind::Ident,
        PipelineKind::RobustIdent,
        PipelineKind::WeakIdent,
        PipelineKind::GpIdent,
        PipelineKind::Caslr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::Ident => "ident",
            PipelineKind::RobustIdent => "robust_ident",
            PipelineKind::WeakIdent => "weak_ident",
            PipelineKind::GpIdent => "gp_ident",
            PipelineKind::Caslr => "caslr",
        }
    }

    pub fn from_name(s: &str) -> Option<PipelineKind> {
        PipelineKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Column scaling applied before the weak-form sparse search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Normalization {
    /// Unit Euclidean column norms.
    Column,
    /// Division by the mean leading-coefficient score.
    Error,
}

/// Model-selection rule for the robust pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Selector {
    Tee,
    Mtee,
    Cee,
    Rr,
}

impl Selector {
    pub fn name(self) -> &'static str {
        match self {
            Selector::Tee => "tee",
            Selector::Mtee => "mtee",
            Selector::Cee => "cee",
            Selector::Rr => "rr",
        }
    }
}

/// Basis settings for the varying-coefficient pipelines.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BasisConfig {
    pub kind: BasisKind,
    /// Number of spatial functions; `None` selects it by the plateau test
    /// over [`DEFAULT_BEE_GRID`].
    pub nb: Option<usize>,
    pub in_time: bool,
    /// Per-feature prior, in dictionary order.
    pub mask: Option<Vec<FeatureMask>>,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig {
            kind: BasisKind::BSpline { order: 3 },
            nb: Some(20),
            in_time: false,
            mask: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PipelineConfig {
    pub pipeline: PipelineKind,
    pub dictionary: DictionarySpec,
    pub smoother: SmootherConfig,
    /// Spatial scheme for candidate evolution.
    pub scheme: Scheme,
    /// Evolution substep bound; `None` means `dt / 10`.
    pub fine_dt: Option<f64>,
    /// Largest sparsity tried by the greedy pipelines (default: all).
    pub max_sparsity: Option<usize>,
    pub test_function: Option<TestFunction>,
    pub stride: Option<(usize, usize)>,
    pub weak_normalization: Normalization,
    pub hdr_bins: usize,
    /// Feature whose leading-coefficient scores define the narrow rows.
    pub hdr_feature: String,
    pub trim_rho: f64,
    /// Contribution threshold applied to every candidate before the
    /// evolution-based selectors see it; zero disables it.
    pub candidate_trim_rho: f64,
    pub cee_alpha: f64,
    pub mtee_window: Option<usize>,
    pub selector: Selector,
    pub n_lambda: usize,
    pub subset_cap: usize,
    pub n_rr: usize,
    pub rr_rho: f64,
    pub basis: BasisConfig,
    pub patches: usize,
    pub patch_overlap: f64,
    /// RRC penalty; `None` uses the mean candidate error.
    pub rrc_rho: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::for_kind(PipelineKind::WeakIdent)
    }
}

impl PipelineConfig {
    /// Defaults for each pipeline.
    pub fn for_kind(kind: PipelineKind) -> Self {
        let monomial = DictionarySpec {
            style: DictionaryStyle::GeneralMonomial,
            max_alpha: 2,
            max_beta: 2,
            max_total_degree: 2,
        };
        let (dictionary, smoother) = match kind {
            PipelineKind::Ident => (monomial, SmootherConfig::lsma()),
            PipelineKind::RobustIdent => (
                DictionarySpec {
                    max_alpha: 3,
                    ..monomial
                },
                SmootherConfig::default(),
            ),
            PipelineKind::WeakIdent => (
                DictionarySpec {
                    style: DictionaryStyle::WeakForm,
                    max_alpha: 3,
                    max_beta: 3,
                    max_total_degree: 0,
                },
                SmootherConfig::identity(),
            ),
            PipelineKind::GpIdent => (monomial, SmootherConfig::identity()),
            PipelineKind::Caslr => (monomial, SmootherConfig::default()),
        };
        PipelineConfig {
            pipeline: kind,
            dictionary,
            smoother,
            scheme: Scheme::ForwardEulerFD,
            fine_dt: None,
            max_sparsity: None,
            test_function: None,
            stride: None,
            weak_normalization: Normalization::Column,
            hdr_bins: 200,
            hdr_feature: "u*u_x".into(),
            trim_rho: DEFAULT_TRIM_RHO,
            candidate_trim_rho: DEFAULT_CANDIDATE_TRIM_RHO,
            cee_alpha: DEFAULT_CEE_ALPHA,
            mtee_window: None,
            selector: Selector::Mtee,
            n_lambda: LASSO_PATH_LEN,
            subset_cap: MAX_SUBSET_BASE,
            n_rr: DEFAULT_N_RR,
            rr_rho: DEFAULT_RR_RHO,
            basis: BasisConfig::default(),
            patches: 6,
            patch_overlap: 0.25,
            rrc_rho: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.smoother.validate()?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if let Some(f) = self.fine_dt {
            if !(f > 0.0) {
                return bad("fine_dt must be positive");
            }
        }
        if self.max_sparsity == Some(0) {
            return bad("max_sparsity must be at least 1");
        }
        if !(0.0..1.0).contains(&self.candidate_trim_rho) || !(0.0..1.0).contains(&self.trim_rho) {
            return bad("trim thresholds must be in [0, 1)");
        }
        if !(self.cee_alpha > 0.0 && self.cee_alpha < 1.0) {
            return bad("cee_alpha must be in (0, 1)");
        }
        if self.hdr_bins < 3 {
            return bad("hdr_bins must be at least 3");
        }
        if self.n_lambda == 0 || self.subset_cap == 0 {
            return bad("n_lambda and subset_cap must be positive");
        }
        if self.subset_cap > 20 {
            return bad("subset_cap above 20 is not enumerable");
        }
        if self.n_rr == 0 || !(self.rr_rho > 0.0) {
            return bad("n_rr must be positive and rr_rho > 0");
        }
        if self.patches == 0 || !(0.0..1.0).contains(&self.patch_overlap) {
            return bad("need patches >= 1 and patch_overlap in [0, 1)");
        }
        Ok(())
    }
}

/// Sampled coefficient function of one feature.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CoefficientCurve {
    pub label: String,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Candidate {
    /// Active feature labels, in dictionary order.
    pub labels: Vec<String>,
    /// Physical coefficients in dictionary order (spatial means for
    /// varying coefficients).
    pub coeffs: Vec<f64>,
    pub residual: f64,
    pub scores: BTreeMap<String, f64>,
    pub flags: Vec<String>,
    pub curves: Vec<CoefficientCurve>,
}

impl Candidate {
    /// `(label, coefficient)` for every active feature.
    pub fn terms(&self, dictionary: &[String]) -> Vec<(String, f64)> {
        dictionary
            .iter()
            .zip(&self.coeffs)
            .filter(|(l, _)| self.labels.contains(l))
            .map(|(l, c)| (l.clone(), *c))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Identification {
    pub pipeline: PipelineKind,
    pub dictionary: Vec<String>,
    pub candidates: Vec<Candidate>,
    /// Index of the selected candidate.
    pub chosen: usize,
    /// Name of the score the choice minimized.
    pub selector: String,
    /// Reduction-in-residual curve `s_k`, when the pipeline computes one.
    pub rr_curve: Vec<f64>,
    /// Basis size used by the group pipelines.
    pub nb: Option<usize>,
    /// Rows of the system the search ran on.
    pub rows: usize,
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
}

impl Identification {
    pub fn best(&self) -> &Candidate {
        &self.candidates[self.chosen]
    }

    pub fn has_flags(&self) -> bool {
        !self.flags.is_empty() || !self.best().flags.is_empty()
    }
}

/// Default contribution threshold for candidates scored by time evolution.
pub const DEFAULT_CANDIDATE_TRIM_RHO: f64 = 0.1;

pub const ALL_DIVERGED: &str = "all_candidates_diverged";
pub const RR_FALLBACK: &str = "rr_no_threshold_crossing";
pub const BEE_NO_PLATEAU: &str = "bee_no_plateau";

/// Runs the pipeline named in `cfg` on `u`.
pub fn run(u: &Field, cfg: &PipelineConfig) -> Result<Identification> {
    cfg.validate()?;
    let dict = Dictionary::build(cfg.dictionary)?;
    match cfg.pipeline {
        PipelineKind::Ident => ident(u, &dict, cfg),
        PipelineKind::RobustIdent => robust_ident(u, &dict, cfg),
        PipelineKind::WeakIdent => weak_ident(u, &dict, cfg),
        PipelineKind::GpIdent => gp_ident(u, &dict, cfg),
        PipelineKind::Caslr => caslr_pipeline(u, &dict, cfg),
    }
}

fn fine_dt(u: &Field, cfg: &PipelineConfig) -> f64 {
    cfg.fine_dt.unwrap_or(u.grid().dt / 10.0)
}

fn denoised(u: &Field, cfg: &PipelineConfig) -> Result<Field> {
    match cfg.smoother.kind {
        SmootherKind::Identity => Ok(u.clone()),
        _ => smooth_field(u, &cfg.smoother),
    }
}

fn to_candidate(sys: &LinearSystem, m: &CandidateModel) -> Candidate {
    let mut labels: Vec<(usize, String)> = m
        .support
        .iter()
        .map(|&j| (sys.cols[j].term, sys.cols[j].label.clone()))
        .collect();
    labels.sort();
    Candidate {
        labels: labels.into_iter().map(|p| p.1).collect(),
        coeffs: m.dictionary_coeffs(sys),
        residual: m.residual,
        scores: m.scores.clone(),
        flags: m.flags.clone(),
        curves: Vec::new(),
    }
}

fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v < values[b]) {
            best = Some(j);
        }
    }
    best
}

fn max_k(cfg: &PipelineConfig, n: usize, rows: usize) -> usize {
    cfg.max_sparsity.unwrap_or(n).min(n).min(rows).max(1)
}

fn dedup_models(models: Vec<CandidateModel>) -> Vec<CandidateModel> {
    let mut seen = BTreeSet::new();
    models.into_iter().filter(|m| seen.insert(m.support.clone())).collect()
}

/// Trims every model at `rho` when it is positive.
fn trim_all(sys: &LinearSystem, models: Vec<CandidateModel>, rho: f64) -> Result<Vec<CandidateModel>> {
    if rho > 0.0 {
        models.iter().map(|m| trim(sys, m, rho)).collect()
    } else {
        Ok(models)
    }
}

fn evolve_spec(
    dict: &Dictionary,
    sys: &LinearSystem,
    m: &CandidateModel,
    u: &Field,
    cfg: &PipelineConfig,
) -> Result<PdeSpec> {
    PdeSpec::new(dict.clone(), m.dictionary_coeffs(sys), *u.grid(), cfg.scheme)
}

fn ident(u: &Field, dict: &Dictionary, cfg: &PipelineConfig) -> Result<Identification> {
    let raw = assemble_differential(u, dict, &cfg.smoother)?;
    let sys = column_normalize(&raw);
    let supports = lasso_path_supports(&sys, cfg.n_lambda, cfg.subset_cap)?;
    if supports.is_empty() {
        return Err(Error::EmptySelection);
    }
    let models = supports
        .iter()
        .map(|s| least_squares_on_support(&sys, s))
        .collect::<Result<Vec<_>>>()?;
    let models = dedup_models(trim_all(&sys, models, cfg.candidate_trim_rho)?);
    let start = denoised(u, cfg)?.slice(0).to_vec();
    let fine = fine_dt(u, cfg);
    let scored = crate::map_ordered(&models, |m| -> Result<(CandidateModel, f64)> {
        let t = tee(&evolve_spec(dict, &sys, m, u, cfg)?, u, &start, fine)?;
        Ok((m.clone(), t))
    });
    let mut candidates = Vec::with_capacity(scored.len());
    let mut tees = Vec::with_capacity(scored.len());
    for r in scored {
        let (m, t) = r?;
        let mut c = to_candidate(&sys, &m);
        c.scores.insert("tee".into(), t);
        candidates.push(c);
        tees.push(t);
    }
    let mut flags = Vec::new();
    let chosen = argmin(&tees).unwrap_or_else(|| {
        flags.push(ALL_DIVERGED.to_owned());
        0
    });
    Ok(Identification {
        pipeline: PipelineKind::Ident,
        dictionary: dict.labels(),
        candidates,
        chosen,
        selector: Selector::Tee.name().into(),
        rr_curve: Vec::new(),
        nb: None,
        rows: sys.nrows(),
        flags,
        warnings: sys.warnings,
    })
}

fn robust_ident(u: &Field, dict: &Dictionary, cfg: &PipelineConfig) -> Result<Identification> {
    let raw = assemble_differential(u, dict, &cfg.smoother)?;
    let sys = column_normalize(&raw);
    let kmax = max_k(cfg, sys.ncols(), sys.nrows());
    let ks: Vec<usize> = (1..=kmax).collect();
    let sp: Vec<CandidateModel> = crate::map_ordered(&ks, |&k| subspace_pursuit(&sys, k))
        .into_iter()
        .collect::<Result<_>>()?;
    let residuals: Vec<f64> = sp.iter().map(|m| m.residual).collect();
    let trimmed = trim_all(&sys, sp, cfg.candidate_trim_rho)?;
    let per_k: Vec<Vec<usize>> = trimmed.iter().map(|m| m.support.clone()).collect();
    let models = dedup_models(trimmed);
    let starts = denoised(u, cfg)?;
    let fine = fine_dt(u, cfg);
    let w = cfg.mtee_window.unwrap_or_else(|| default_mtee_window(u.grid().nt));
    let scored = crate::map_ordered(&models, |m| -> Result<(f64, f64, f64, Vec<String>)> {
        let spec = evolve_spec(dict, &sys, m, u, cfg)?;
        let mt = mtee(&spec, u, &starts, fine, w)?;
        let t = if cfg.selector == Selector::Tee {
            tee(&spec, u, starts.slice(0), fine)?
        } else {
            f64::NAN
        };
        let cv = cee(&sys, &m.support, cfg.cee_alpha)?;
        Ok((mt, t, cv.value, cv.flags))
    });
    let mut candidates = Vec::new();
    let mut keys = Vec::new();
    for (m, r) in models.iter().zip(scored) {
        let (mt, t, cv, fl) = r?;
        let mut c = to_candidate(&sys, m);
        c.scores.insert("mtee".into(), mt);
        c.scores.insert("cee".into(), cv);
        if t.is_finite() || cfg.selector == Selector::Tee {
            c.scores.insert("tee".into(), t);
        }
        c.flags.extend(fl);
        keys.push(match cfg.selector {
            Selector::Mtee | Selector::Rr => mt,
            Selector::Tee => t,
            Selector::Cee => cv,
        });
        candidates.push(c);
    }
    let mut flags = Vec::new();
    let mut rr_curve = Vec::new();
    let chosen = if cfg.selector == Selector::Rr {
        let rr = rr_select(&residuals, cfg.n_rr, cfg.rr_rho)?;
        if rr.fallback {
            flags.push(RR_FALLBACK.to_owned());
        }
        rr_curve = rr.s;
        let support = &per_k[rr.k - 1];
        models
            .iter()
            .position(|m| &m.support == support)
            .ok_or(Error::EmptySelection)?
    } else {
        argmin(&keys).unwrap_or_else(|| {
            flags.push(ALL_DIVERGED.to_owned());
            0
        })
    };
    Ok(Identification {
        pipeline: PipelineKind::RobustIdent,
        dictionary: dict.labels(),
        candidates,
        chosen,
        selector: cfg.selector.name().into(),
        rr_curve,
        nb: None,
        rows: sys.nrows(),
        flags,
        warnings: sys.warnings,
    })
}

fn weak_ident(u: &Field, dict: &Dictionary, cfg: &PipelineConfig) -> Result<Identification> {
    let g = *u.grid();
    let max_alpha = dict
        .terms()
        .iter()
        .filter_map(|t| t.weak_pair())
        .map(|p| p.0)
        .max()
        .unwrap_or(0);
    let phi = cfg
        .test_function
        .unwrap_or_else(|| TestFunction::default_for(&g, max_alpha));
    let stride = cfg.stride.unwrap_or_else(|| default_stride(&g, &phi));
    let raw = assemble_weak(u, dict, &phi, stride)?;
    let sys = match cfg.weak_normalization {
        Normalization::Column => column_normalize(&raw),
        Normalization::Error => error_normalize(&raw, &leading_coefficient_scores(&raw)?.clone())?,
    };
    let mut warnings = sys.warnings.clone();
    let narrow = match sys.column_of(&cfg.hdr_feature) {
        Some(_) => {
            let h = high_dynamic_region(&sys, &cfg.hdr_feature, cfg.hdr_bins)?;
            narrow_system(&sys, &h.rows)?
        }
        None => {
            warnings.push(format!("feature {} absent; narrow fit uses all rows", cfg.hdr_feature));
            sys.clone()
        }
    };
    let kmax = max_k(cfg, sys.ncols(), narrow.nrows());
    let ks: Vec<usize> = (1..=kmax).collect();
    let fits = crate::map_ordered(&ks, |&k| -> Result<CandidateModel> {
        let m = subspace_pursuit(&sys, k)?;
        trim(&sys, &m, cfg.trim_rho)
    });
    let models = dedup_models(fits.into_iter().collect::<Result<_>>()?);
    let mut candidates = Vec::new();
    let mut cvs = Vec::new();
    for m in &models {
        let cv = cee(&sys, &m.support, cfg.cee_alpha)?;
        let mut c = to_candidate(&narrow, &least_squares_on_support(&narrow, &m.support)?);
        c.scores.insert("cee".into(), cv.value);
        c.flags.extend(cv.flags);
        cvs.push(cv.value);
        candidates.push(c);
    }
    let chosen = argmin(&cvs).unwrap_or(0);
    Ok(Identification {
        pipeline: PipelineKind::WeakIdent,
        dictionary: dict.labels(),
        candidates,
        chosen,
        selector: Selector::Cee.name().into(),
        rr_curve: Vec::new(),
        nb: None,
        rows: narrow.nrows(),
        flags: Vec::new(),
        warnings,
    })
}

/// Group-LASSO penalty used by the basis-size plateau test, relative to
/// the smallest all-zero penalty.
pub const BEE_LAMBDA_FRACTION: f64 = 1e-3;

/// Block magnitudes of the group-LASSO solution on `gsys` (columns scaled
/// by their max norm before the fit).
pub fn bee_magnitudes(gsys: &GroupSystem) -> Result<Vec<f64>> {
    let mut scaled = gsys.clone();
    for j in 0..gsys.ncols() {
        let s = gsys.matrix.column(j).amax();
        if s > 0.0 {
            scaled.matrix.column_mut(j).scale_mut(1.0 / s);
        }
    }
    let lam = BEE_LAMBDA_FRACTION * group_lambda_max(&scaled);
    let fit = group_lasso(&scaled, lam, 1e-8, 20_000)?;
    Ok(gsys.block_magnitudes(&fit.coeffs))
}

fn group_system(u: &Field, raw: &LinearSystem, cfg: &PipelineConfig, nb: usize) -> Result<GroupSystem> {
    let basis = build_basis(cfg.basis.kind, nb, u.grid(), cfg.basis.in_time)?;
    expand_system(raw, u.grid(), &basis, cfg.basis.mask.as_deref())
}

/// Picks the basis size by the plateau of block magnitudes over `grid`.
pub fn select_nb(u: &Field, raw: &LinearSystem, cfg: &PipelineConfig, grid: &[usize]) -> Result<(usize, bool)> {
    let mags = grid
        .iter()
        .map(|&nb| Ok((nb, bee_magnitudes(&group_system(u, raw, cfg, nb)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let c = bee(&mags, DEFAULT_BEE_TOL)?;
    Ok((c.nb, c.no_plateau))
}

fn group_candidate(gsys: &GroupSystem, m: &crate::sparse::GroupModel, n_terms: usize) -> Candidate {
    let t0 = gsys.grid.t0;
    let xs = gsys.grid.xs();
    let mut coeffs = vec![0.0; n_terms];
    let mut curves = Vec::new();
    let mut active: Vec<(usize, String)> = Vec::new();
    for &g in &m.groups {
        let values = gsys.coefficient_curve(&m.coeffs, g, t0);
        coeffs[gsys.terms[g]] = values.iter().sum::<f64>() / values.len() as f64;
        active.push((gsys.terms[g], gsys.labels[g].clone()));
        curves.push(CoefficientCurve {
            label: gsys.labels[g].clone(),
            x: xs.clone(),
            values,
        });
    }
    active.sort();
    let mut scores = BTreeMap::new();
    scores.insert("residual".into(), m.residual);
    Candidate {
        labels: active.into_iter().map(|p| p.1).collect(),
        coeffs,
        residual: m.residual,
        scores,
        flags: m.flags.clone(),
        curves,
    }
}

fn gp_ident(u: &Field, dict: &Dictionary, cfg: &PipelineConfig) -> Result<Identification> {
    let raw = assemble_differential(u, dict, &cfg.smoother)?;
    let mut flags = Vec::new();
    let nb = match cfg.basis.nb {
        Some(nb) => nb,
        None => {
            let (nb, no_plateau) = select_nb(u, &raw, cfg, &DEFAULT_BEE_GRID)?;
            if no_plateau {
                flags.push(BEE_NO_PLATEAU.to_owned());
            }
            nb
        }
    };
    let gsys = group_system(u, &raw, cfg, nb)?;
    let kmax = max_k(cfg, gsys.n_groups(), gsys.nrows());
    let ks: Vec<usize> = (1..=kmax).collect();
    let models: Vec<crate::sparse::GroupModel> = crate::map_ordered(&ks, |&k| group_subspace_pursuit(&gsys, k))
        .into_iter()
        .collect::<Result<_>>()?;
    let residuals: Vec<f64> = models.iter().map(|m| m.residual).collect();
    let rr = rr_select(&residuals, cfg.n_rr, cfg.rr_rho)?;
    if rr.fallback {
        flags.push(RR_FALLBACK.to_owned());
    }
    let candidates = models.iter().map(|m| group_candidate(&gsys, m, dict.len())).collect();
    Ok(Identification {
        pipeline: PipelineKind::GpIdent,
        dictionary: dict.labels(),
        candidates,
        chosen: rr.k - 1,
        selector: Selector::Rr.name().into(),
        rr_curve: rr.s,
        nb: Some(nb),
        rows: gsys.nrows(),
        flags,
        warnings: raw.warnings,
    })
}

fn caslr_pipeline(u: &Field, dict: &Dictionary, cfg: &PipelineConfig) -> Result<Identification> {
    let raw = assemble_differential(u, dict, &cfg.smoother)?;
    let sys = column_normalize(&raw);
    let g = u.grid();
    let ranges = patch_ranges(g.nx, cfg.patches, cfg.patch_overlap)?;
    let patches = split_by_patches(&sys, &ranges);
    let res = caslr(&patches, cfg.rrc_rho)?;
    let centers: Vec<f64> = ranges.iter().map(|r| 0.5 * (g.x(r.start) + g.x(r.end - 1))).collect();
    let candidates = res
        .candidates
        .iter()
        .enumerate()
        .skip(1)
        .map(|(l, c)| {
            let mut coeffs = vec![0.0; dict.len()];
            let mut curves = Vec::new();
            let mut labels: Vec<(usize, String)> = Vec::new();
            for &j in &c.support {
                let term = sys.cols[j].term;
                let values: Vec<f64> = c.patch_coeffs.iter().map(|p| p[j]).collect();
                coeffs[term] = values.iter().sum::<f64>() / values.len() as f64;
                labels.push((term, sys.cols[j].label.clone()));
                curves.push(CoefficientCurve {
                    label: sys.cols[j].label.clone(),
                    x: centers.clone(),
                    values,
                });
            }
            labels.sort();
            let mut scores = BTreeMap::new();
            scores.insert("error".into(), c.error);
            if let Some(s) = res.scores.get(l - 1) {
                scores.insert("rrc".into(), *s);
            }
            Candidate {
                labels: labels.into_iter().map(|p| p.1).collect(),
                coeffs,
                residual: c.error.sqrt(),
                scores,
                flags: c.flags.clone(),
                curves,
            }
        })
        .collect();
    Ok(Identification {
        pipeline: PipelineKind::Caslr,
        dictionary: dict.labels(),
        candidates,
        chosen: res.chosen - 1,
        selector: "rrc".into(),
        rr_curve: res.scores,
        nb: None,
        rows: sys.nrows(),
        flags: Vec::new(),
        warnings: sys.warnings,
    })
}

/// Accuracy of an identification against known terms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Evaluation {
    pub support: SupportScores,
    /// Over the union of the true and identified features.
    pub coefficients: CoefficientErrors,
}

/// Compares the chosen candidate with `truth` (label, coefficient).
pub fn evaluate(ident: &Identification, truth: &[(String, f64)]) -> Result<Evaluation> {
    let best = ident.best();
    let true_labels: Vec<&str> = truth.iter().map(|p| p.0.as_str()).collect();
    let hat: Vec<&str> = best.labels.iter().map(|s| s.as_str()).collect();
    let support = support_scores(&hat, &true_labels)?;
    let mut union: Vec<&str> = true_labels.clone();
    for l in &hat {
        if !union.contains(l) {
            union.push(l);
        }
    }
    let value = |l: &str| {
        ident.dictionary.iter().position(|d| d == l).map_or(0.0, |p| {
            if best.labels.iter().any(|b| b == l) {
                best.coeffs[p]
            } else {
                0.0
            }
        })
    };
    let c_hat: Vec<f64> = union.iter().map(|l| value(l)).collect();
    let c_true: Vec<f64> = union
        .iter()
        .map(|l| truth.iter().find(|p| p.0 == *l).map_or(0.0, |p| p.1))
        .collect();
    Ok(Evaluation {
        support,
        coefficients: coefficient_errors(&c_hat, &c_true)?,
    })
}
