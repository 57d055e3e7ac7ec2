//! Feature terms and their pointwise evaluation.

use crate::prelude::*;
use crate::{Error, Result};

pub const MAX_ALPHA: usize = 4;
pub const MAX_BETA: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DictionaryStyle {
    WeakForm,
    GeneralMonomial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermForm {
    /// `d^alpha/dx^alpha (u^beta)`.
    Weak { alpha: usize, beta: usize },
    /// `prod_j (d^j u / dx^j)^{e_j}`, indexed by derivative order.
    Monomial(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTerm {
    pub form: TermForm,
    pub label: String,
    /// The feature is `scale * form`. Weak terms `(u^b)_x` carry `1/b` so
    /// their coefficients are those of `u^(b-1) u_x`.
    pub scale: f64,
}

fn deriv_label(order: usize) -> String {
    if order == 0 {
        "u".to_owned()
    } else {
        let mut s = String::from("u_");
        for _ in 0..order {
            s.push('x');
        }
        s
    }
}

fn power_label(base: &str, p: usize) -> String {
    if p == 1 {
        base.to_owned()
    } else {
        format!("{base}^{p}")
    }
}

fn monomial_label(exps: &[usize]) -> String {
    let parts: Vec<String> = exps
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(j, &e)| power_label(&deriv_label(j), e))
        .collect();
    if parts.is_empty() {
        "1".to_owned()
    } else {
        parts.join("*")
    }
}

impl FeatureTerm {
    pub fn constant() -> Self {
        FeatureTerm {
            form: TermForm::Monomial(Vec::new()),
            label: "1".into(),
            scale: 1.0,
        }
    }

    pub fn weak(alpha: usize, beta: usize) -> Self {
        let (label, scale) = match (alpha, beta) {
            (_, 0) => ("1".to_owned(), 1.0),
            (0, b) => (power_label("u", b), 1.0),
            (a, 1) => (deriv_label(a), 1.0),
            (1, b) => (format!("{}*u_x", power_label("u", b - 1)), 1.0 / b as f64),
            (a, b) => {
                let mut s = format!("(u^{b})_");
                for _ in 0..a {
                    s.push('x');
                }
                (s, 1.0)
            }
        };
        FeatureTerm {
            form: TermForm::Weak { alpha, beta },
            label,
            scale,
        }
    }

    /// Monomial from exponents indexed by derivative order. Trailing zeros
    /// are stripped.
    pub fn monomial(exponents: &[usize]) -> Self {
        let mut e = exponents.to_vec();
        while e.last() == Some(&0) {
            e.pop();
        }
        FeatureTerm {
            label: monomial_label(&e),
            form: TermForm::Monomial(e),
            scale: 1.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        match &self.form {
            TermForm::Weak { beta, .. } => *beta == 0,
            TermForm::Monomial(e) => e.iter().all(|&x| x == 0),
        }
    }

    /// Highest spatial derivative order the term involves.
    pub fn max_order(&self) -> usize {
        match &self.form {
            TermForm::Weak { alpha, beta } => {
                if *beta == 0 {
                    0
                } else {
                    *alpha
                }
            }
            TermForm::Monomial(e) => e.iter().rposition(|&x| x > 0).unwrap_or(0),
        }
    }

    /// `(alpha, beta)` when the term is a weak-form term or a monomial that
    /// equals one (`u^b`, `d^a u`, `u^(b-1) u_x`).
    pub fn weak_pair(&self) -> Option<(usize, usize)> {
        self.weak_equivalent().map(|(a, b, _)| (a, b))
    }

    /// `(alpha, beta, factor)` with the feature equal to
    /// `factor * d^alpha (u^beta)`.
    pub fn weak_equivalent(&self) -> Option<(usize, usize, f64)> {
        let (a, b) = self.raw_weak_pair()?;
        let factor = match self.form {
            TermForm::Weak { .. } => self.scale,
            TermForm::Monomial(_) if a == 1 && b >= 2 => self.scale / b as f64,
            TermForm::Monomial(_) => self.scale,
        };
        Some((a, b, factor))
    }

    fn raw_weak_pair(&self) -> Option<(usize, usize)> {
        match &self.form {
            TermForm::Weak { alpha, beta } => Some((*alpha, *beta)),
            TermForm::Monomial(e) => {
                let nz: Vec<(usize, usize)> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x > 0)
                    .map(|(j, &x)| (j, x))
                    .collect();
                match nz.as_slice() {
                    [] => Some((0, 0)),
                    [(0, b)] => Some((0, *b)),
                    [(a, 1)] => Some((*a, 1)),
                    [(0, b), (1, 1)] => Some((1, b + 1)),
                    _ => None,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DictionarySpec {
    pub style: DictionaryStyle,
    pub max_alpha: usize,
    pub max_beta: usize,
    /// Cap on the total polynomial degree of a monomial (ignored by the
    /// weak-form style).
    pub max_total_degree: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    terms: Vec<FeatureTerm>,
    pub spec: Option<DictionarySpec>,
}

impl Dictionary {
    pub fn build(spec: DictionarySpec) -> Result<Self> {
        build_dictionary(spec.max_alpha, spec.max_beta, spec.style, spec.max_total_degree)
    }

    /// A dictionary from explicit terms. Labels must be unique.
    pub fn from_terms(terms: Vec<FeatureTerm>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for t in &terms {
            if !seen.insert(t.label.clone()) {
                return Err(Error::InvalidArgument(format!("duplicate feature label {}", t.label)));
            }
        }
        Ok(Dictionary { terms, spec: None })
    }

    pub fn terms(&self) -> &[FeatureTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.label.clone()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.terms.iter().position(|t| t.label == label)
    }

    /// Indices for `labels`, failing on the first unknown one.
    pub fn indices_of(&self, labels: &[&str]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.index_of(l)
                    .ok_or_else(|| Error::InvalidArgument(format!("feature {l} is not in the dictionary")))
            })
            .collect()
    }

    /// Highest derivative order over all terms.
    pub fn max_order(&self) -> usize {
        self.terms.iter().map(|t| t.max_order()).max().unwrap_or(0)
    }

    /// Every `(alpha, beta)` with `alpha >= 1, beta >= 2` that the weak
    /// terms need as derivatives of powers.
    pub fn power_derivatives(&self) -> BTreeSet<(usize, usize)> {
        self.terms
            .iter()
            .filter_map(|t| match t.form {
                TermForm::Weak { alpha, beta } if alpha >= 1 && beta >= 2 => Some((alpha, beta)),
                _ => None,
            })
            .collect()
    }

    /// Whether every term is a weak-form term (or equivalent monomial).
    pub fn is_weak_compatible(&self) -> bool {
        self.terms.iter().all(|t| t.weak_pair().is_some())
    }
}

pub fn build_dictionary(
    max_alpha: usize,
    max_beta: usize,
    style: DictionaryStyle,
    max_total_degree: usize,
) -> Result<Dictionary> {
    if max_alpha > MAX_ALPHA || max_beta > MAX_BETA {
        return Err(Error::DictionaryLimits(format!(
            "max_alpha {max_alpha} (limit {MAX_ALPHA}), max_beta {max_beta} (limit {MAX_BETA})"
        )));
    }
    let spec = DictionarySpec {
        style,
        max_alpha,
        max_beta,
        max_total_degree,
    };
    let terms = match style {
        DictionaryStyle::WeakForm => {
            let mut t = Vec::new();
            for alpha in 0..=max_alpha {
                for beta in 0..=max_beta {
                    if alpha >= 1 && beta == 0 {
                        continue;
                    }
                    t.push(FeatureTerm::weak(alpha, beta));
                }
            }
            t
        }
        DictionaryStyle::GeneralMonomial => {
            let dims = max_alpha + 1;
            let mut all: Vec<Vec<usize>> = Vec::new();
            let mut cur = vec![0usize; dims];
            loop {
                let deg: usize = cur.iter().sum();
                if deg <= max_total_degree {
                    all.push(cur.clone());
                }
                // Odometer over `0..=max_beta` per slot.
                let mut j = 0;
                loop {
                    if j == dims {
                        break;
                    }
                    if cur[j] < max_beta {
                        cur[j] += 1;
                        break;
                    }
                    cur[j] = 0;
                    j += 1;
                }
                if j == dims {
                    break;
                }
            }
            all.sort_by(|a, b| {
                let ord = |e: &[usize]| e.iter().rposition(|&x| x > 0).unwrap_or(0);
                let deg = |e: &[usize]| e.iter().sum::<usize>();
                ord(a).cmp(&ord(b)).then(deg(a).cmp(&deg(b))).then_with(|| {
                    for j in (0..dims).rev() {
                        if a[j] != b[j] {
                            return b[j].cmp(&a[j]);
                        }
                    }
                    core::cmp::Ordering::Equal
                })
            });
            all.iter().map(|e| FeatureTerm::monomial(e)).collect()
        }
    };
    let mut d = Dictionary::from_terms(terms)?;
    d.spec = Some(spec);
    Ok(d)
}

/// Derivative estimates the evaluator draws from. All arrays share a length
/// (one value per grid node or per system row).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DerivativeTable {
    /// `derivs[j]` approximates `d^j u / dx^j`; `derivs[0]` is `u`.
    pub derivs: Vec<Vec<f64>>,
    /// `d^alpha (u^beta)` for weak terms with `alpha >= 1, beta >= 2`.
    pub power_derivs: BTreeMap<(usize, usize), Vec<f64>>,
}

impl DerivativeTable {
    pub fn len(&self) -> usize {
        self.derivs.first().map(|d| d.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn deriv(table: &DerivativeTable, order: usize) -> Result<&[f64]> {
    table
        .derivs
        .get(order)
        .map(|v| v.as_slice())
        .ok_or_else(|| Error::MissingDerivative(deriv_label(order)))
}

/// Pointwise value of `term` at every node of the table.
pub fn eval_feature_pointwise(term: &FeatureTerm, table: &DerivativeTable) -> Result<Vec<f64>> {
    let n = table.len();
    let out = match &term.form {
        TermForm::Weak { beta: 0, .. } => vec![1.0; n],
        TermForm::Weak { alpha: 0, beta } => {
            let u = deriv(table, 0)?;
            u.iter().map(|v| v.powi(*beta as i32)).collect()
        }
        TermForm::Weak { alpha, beta: 1 } => deriv(table, *alpha)?.to_vec(),
        TermForm::Weak { alpha, beta } => table
            .power_derivs
            .get(&(*alpha, *beta))
            .ok_or_else(|| Error::MissingDerivative(term.label.clone()))?
            .clone(),
        TermForm::Monomial(e) => {
            let mut out = vec![1.0; n];
            for (j, &p) in e.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                let d = deriv(table, j)?;
                for (o, v) in out.iter_mut().zip(d) {
                    *o *= v.powi(p as i32);
                }
            }
            out
        }
    };
    if term.scale != 1.0 {
        Ok(out.into_iter().map(|v| v * term.scale).collect())
    } else {
        Ok(out)
    }
}
