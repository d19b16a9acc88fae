//! Support counting and the chi-square goodness-of-fit decision.
//!
//! The observed count `o` is the number of documents whose relation graph
//! supports the hypothesis. The user supplies the expected count `e`.
//! `chi2 = (o - e)^2 / e` is referred to the chi-square distribution with
//! one degree of freedom, and the hypothesis is accepted when `p >= alpha`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::extraction::{Polarity, Relation};
use crate::hypothesis::Hypothesis;
use crate::store::{PaperGraph, RelationStore};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEGREES_OF_FREEDOM: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("expected frequency must be positive, got {0}")]
    NonPositiveExpected(f64),
    #[error("chi-square statistic must be non-negative, got {0}")]
    NegativeChiSquare(f64),
    #[error("degrees of freedom must be at least 1")]
    ZeroDegreesOfFreedom,
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportMode {
    /// A direct edge between the two entities with the hypothesis polarity.
    #[default]
    Strict,
    /// Any simple path whose product of edge polarities equals the
    /// hypothesis polarity.
    Path,
}

impl FromStr for SupportMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(SupportMode::Strict),
            "path" => Ok(SupportMode::Path),
            other => Err(format!("unknown support mode {other:?} (expected strict or path)")),
        }
    }
}

impl fmt::Display for SupportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SupportMode::Strict => "strict",
            SupportMode::Path => "path",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SupportOptions {
    pub mode: SupportMode,
    /// Only edges whose predicate equals the hypothesis predicate count.
    pub match_predicate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "Accepted")]
    Accept,
    #[serde(rename = "Rejected")]
    Reject,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Accept => "Accepted",
            Decision::Reject => "Rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportCount {
    pub observed: usize,
    pub total: usize,
    pub supporting_doc_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub hypothesis: Hypothesis,
    pub observed: usize,
    pub total: usize,
    pub expected: f64,
    /// `observed - expected`.
    pub deviation: f64,
    pub chi2: f64,
    pub df: u32,
    pub p_value: f64,
    pub alpha: f64,
    pub decision: Decision,
    pub mode: SupportMode,
    pub match_predicate: bool,
    pub supporting_doc_ids: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestParams {
    pub expected: f64,
    pub alpha: f64,
    pub support: SupportOptions,
}

impl TestParams {
    pub fn new(expected: f64) -> Self {
        Self {
            expected,
            alpha: DEFAULT_ALPHA,
            support: SupportOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if !(self.expected > 0.0 && self.expected.is_finite()) {
            return Err(StatsError::NonPositiveExpected(self.expected));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(StatsError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

fn edge_allowed(edge: &Relation, h: &Hypothesis, opts: SupportOptions) -> bool {
    !opts.match_predicate || edge.predicate == h.predicate
}

/// Whether one document's relation graph supports `h`.
pub fn paper_supports(g: &PaperGraph, h: &Hypothesis, opts: SupportOptions) -> bool {
    match opts.mode {
        SupportMode::Strict => g
            .edges
            .iter()
            .any(|e| e.connects(&h.subject, &h.object) && e.polarity == h.polarity && edge_allowed(e, h, opts)),
        SupportMode::Path => {
            let mut adjacency: BTreeMap<&str, Vec<(&str, Polarity)>> = BTreeMap::new();
            for e in g.edges.iter().filter(|e| edge_allowed(e, h, opts)) {
                adjacency.entry(&e.subject).or_default().push((&e.object, e.polarity));
                adjacency.entry(&e.object).or_default().push((&e.subject, e.polarity));
            }
            let mut on_path = BTreeSet::new();
            on_path.insert(h.subject.as_str());
            signed_path_exists(
                &adjacency,
                &h.subject,
                &h.object,
                Polarity::Positive,
                h.polarity,
                &mut on_path,
            )
        }
    }
}

/// Depth-first search over simple paths, stopping at the first path to
/// `target` whose sign product is `want`.
fn signed_path_exists<'a>(
    adjacency: &BTreeMap<&'a str, Vec<(&'a str, Polarity)>>,
    at: &str,
    target: &str,
    sign: Polarity,
    want: Polarity,
    on_path: &mut BTreeSet<&'a str>,
) -> bool {
    let Some(next) = adjacency.get(at) else {
        return false;
    };
    for &(node, polarity) in next {
        let product = sign * polarity;
        if node == target {
            if product == want {
                return true;
            }
            continue;
        }
        if on_path.insert(node) {
            if signed_path_exists(adjacency, node, target, product, want, on_path) {
                return true;
            }
            on_path.remove(node);
        }
    }
    false
}

/// Counts the corpus documents supporting `h`. Documents without a
/// registered relation graph count as unsupported.
pub fn count_support(store: &RelationStore, corpus: &Corpus, h: &Hypothesis, opts: SupportOptions) -> SupportCount {
    let supporting_doc_ids: Vec<String> = corpus
        .iter()
        .filter(|doc| {
            store
                .paper_graph(&doc.doc_id)
                .is_ok_and(|g| paper_supports(&g, h, opts))
        })
        .map(|doc| doc.doc_id.clone())
        .collect();
    SupportCount {
        observed: supporting_doc_ids.len(),
        total: corpus.len(),
        supporting_doc_ids,
    }
}

/// `(o - e)^2 / e`.
pub fn chi_square(observed: f64, expected: f64) -> Result<f64, StatsError> {
    if !(expected > 0.0 && expected.is_finite()) {
        return Err(StatsError::NonPositiveExpected(expected));
    }
    let d = observed - expected;
    Ok(d * d / expected)
}

/// Upper-tail probability of the chi-square distribution with `df` degrees
/// of freedom, `Q(df/2, chi2/2)`.
pub fn p_value(chi2: f64, df: u32) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::ZeroDegreesOfFreedom);
    }
    if chi2.is_nan() || chi2 < 0.0 {
        return Err(StatsError::NegativeChiSquare(chi2));
    }
    Ok(regularized_upper_gamma(f64::from(df) / 2.0, chi2 / 2.0))
}

/// Accept iff `p >= alpha`.
pub fn decide(p: f64, alpha: f64) -> Decision {
    if p >= alpha {
        Decision::Accept
    } else {
        Decision::Reject
    }
}

/// Chi-square test of an already counted hypothesis.
pub fn evaluate(h: &Hypothesis, support: SupportCount, params: &TestParams) -> Result<TestResult, StatsError> {
    params.validate()?;
    let observed = support.observed as f64;
    let chi2 = chi_square(observed, params.expected)?;
    let p = p_value(chi2, DEGREES_OF_FREEDOM)?;
    Ok(TestResult {
        hypothesis: h.clone(),
        observed: support.observed,
        total: support.total,
        expected: params.expected,
        deviation: observed - params.expected,
        chi2,
        df: DEGREES_OF_FREEDOM,
        p_value: p,
        alpha: params.alpha,
        decision: decide(p, params.alpha),
        mode: params.support.mode,
        match_predicate: params.support.match_predicate,
        supporting_doc_ids: support.supporting_doc_ids,
    })
}

/// Counts support for `h` over the corpus and runs the test.
pub fn evaluate_hypothesis(
    h: &Hypothesis,
    store: &RelationStore,
    corpus: &Corpus,
    params: &TestParams,
) -> Result<TestResult, StatsError> {
    params.validate()?;
    let support = count_support(store, corpus, h, params.support);
    evaluate(h, support, params)
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 10_000;

/// `Q(a, x) = Gamma(a, x) / Gamma(a)`: power series for `x < a + 1`,
/// continued fraction otherwise.
pub(crate) fn regularized_upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..MAX_ITER {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        (1.0 - sum * log_prefactor.exp()).clamp(0.0, 1.0)
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        (log_prefactor.exp() * h).clamp(0.0, 1.0)
    }
}
