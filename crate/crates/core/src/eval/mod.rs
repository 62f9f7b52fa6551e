//! Top-k accuracy, MCES and Tanimoto metrics over ranked candidate lists.
//!
//! Structure identity is canonical SMILES equality. MCES is computed on the
//! heavy-atom graph with a fixed penalty when no candidate parses.

mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fingerprint::{morgan_fingerprint, tanimoto, Fingerprint, DEFAULT_RADIUS, DEFAULT_WIDTH};
use crate::mces::{mces_distance, mces_lower_bound, McesConfig};
use crate::molgraph::Molecule;
use crate::smiles::{canonical_smiles, parse_smiles};

pub use report::{
    evaluate_run, read_predictions, write_prediction, AggregateSection, EvalError, MalformedLine, MetricsReport,
    Prediction, PredictionRecord,
};

pub const DEFAULT_MCES_PENALTY: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Cutoffs, strictly increasing.
    pub ks: Vec<usize>,
    pub mces: McesConfig,
    /// MCES reported when none of the first k candidates parse.
    pub mces_penalty: f64,
    pub radius: u32,
    pub width: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: vec![1, 10],
            mces: McesConfig::default(),
            mces_penalty: DEFAULT_MCES_PENALTY,
            radius: DEFAULT_RADIUS,
            width: DEFAULT_WIDTH,
        }
    }
}

/// Metrics of one example at every configured k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleResult {
    pub id: String,
    pub hit: Vec<bool>,
    pub mces_best: Vec<f64>,
    pub tanimoto_best: Vec<f64>,
    pub candidate_count: usize,
    /// Fraction of candidates that parse; 0 with no candidates.
    pub validity_rate: f64,
    /// False when some MCES value is only an upper bound.
    pub mces_exact: bool,
    /// Set when the prediction line could not be used.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

struct Truth {
    mol: Molecule,
    canonical: String,
    fp: Fingerprint,
}

impl Truth {
    fn new(mol: &Molecule, cfg: &EvalConfig) -> Self {
        Truth {
            canonical: canonical_smiles(mol),
            fp: morgan_fingerprint(mol, cfg.radius, cfg.width),
            mol: mol.clone(),
        }
    }
}

fn parse_prefix<S: AsRef<str>>(candidates: &[S], k: usize) -> Vec<Option<Molecule>> {
    candidates
        .iter()
        .take(k)
        .map(|c| parse_smiles(c.as_ref()).ok())
        .collect()
}

/// True iff one of the first `k` candidates is the truth structure.
pub fn topk_accuracy<S: AsRef<str>>(candidates: &[S], truth: &Molecule, k: usize) -> bool {
    let want = canonical_smiles(truth);
    parse_prefix(candidates, k)
        .iter()
        .flatten()
        .any(|m| canonical_smiles(m) == want)
}

/// Smallest MCES distance to the truth among the first `k` parseable
/// candidates, or `penalty` if none parse.
pub fn topk_mces<S: AsRef<str>>(candidates: &[S], truth: &Molecule, k: usize, cfg: &McesConfig, penalty: f64) -> f64 {
    parse_prefix(candidates, k)
        .iter()
        .flatten()
        .map(|m| f64::from(mces_distance(truth, m, cfg).distance))
        .reduce(f64::min)
        .unwrap_or(penalty)
}

/// Largest Tanimoto similarity to the truth among the first `k` parseable
/// candidates, or 0 if none parse.
pub fn topk_tanimoto<S: AsRef<str>>(candidates: &[S], truth: &Molecule, k: usize, radius: u32, width: usize) -> f64 {
    let t = morgan_fingerprint(truth, radius, width);
    parse_prefix(candidates, k)
        .iter()
        .flatten()
        .map(|m| tanimoto(&t, &morgan_fingerprint(m, radius, width)).expect("same width"))
        .fold(0.0, f64::max)
}

/// All metrics for one example in one pass over its candidates.
pub fn evaluate_example<S: AsRef<str>>(
    id: &str,
    candidates: &[S],
    truth: &Molecule,
    cfg: &EvalConfig,
) -> ExampleResult {
    let truth = Truth::new(truth, cfg);
    let kmax = cfg.ks.iter().copied().max().unwrap_or(0);
    let valid = candidates.iter().filter(|c| parse_smiles(c.as_ref()).is_ok()).count();
    let mut hit = false;
    let mut best_mces: Option<f64> = None;
    let mut best_tan = 0.0f64;
    let mut exact = true;
    // Running values after each prefix length.
    let mut running = Vec::with_capacity(kmax);
    for c in candidates.iter().take(kmax) {
        if let Ok(m) = parse_smiles(c.as_ref()) {
            if canonical_smiles(&m) == truth.canonical {
                hit = true;
                best_mces = Some(0.0);
                best_tan = best_tan.max(1.0);
            } else {
                best_tan = best_tan
                    .max(tanimoto(&truth.fp, &morgan_fingerprint(&m, cfg.radius, cfg.width)).expect("same width"));
                // A pair whose lower bound cannot beat the current best does
                // not change the minimum.
                let skip = best_mces.is_some_and(|b| f64::from(mces_lower_bound(&truth.mol, &m, &cfg.mces)) >= b);
                if !skip {
                    let r = mces_distance(&truth.mol, &m, &cfg.mces);
                    let d = f64::from(r.distance);
                    if best_mces.is_none_or(|b| d < b) {
                        best_mces = Some(d);
                    }
                    exact &= r.exact;
                }
            }
        }
        running.push((hit, best_mces, best_tan));
    }
    let at = |k: usize| -> (bool, Option<f64>, f64) {
        if k == 0 || running.is_empty() {
            (false, None, 0.0)
        } else {
            running[k.min(running.len()) - 1]
        }
    };
    ExampleResult {
        id: id.to_string(),
        hit: cfg.ks.iter().map(|&k| at(k).0).collect(),
        mces_best: cfg.ks.iter().map(|&k| at(k).1.unwrap_or(cfg.mces_penalty)).collect(),
        tanimoto_best: cfg.ks.iter().map(|&k| at(k).2).collect(),
        candidate_count: candidates.len(),
        validity_rate: if candidates.is_empty() {
            0.0
        } else {
            valid as f64 / candidates.len() as f64
        },
        mces_exact: exact,
        error: None,
    }
}

/// Result for an example whose predictions could not be read.
pub(crate) fn failed_example(id: &str, cfg: &EvalConfig, message: String) -> ExampleResult {
    ExampleResult {
        id: id.to_string(),
        hit: vec![false; cfg.ks.len()],
        mces_best: vec![cfg.mces_penalty; cfg.ks.len()],
        tanimoto_best: vec![0.0; cfg.ks.len()],
        candidate_count: 0,
        validity_rate: 0.0,
        mces_exact: true,
        error: Some(message),
    }
}

/// Compensated (Neumaier) sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Per-k means over examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub k: usize,
    pub examples: usize,
    pub hits: usize,
    pub accuracy: f64,
    pub mean_mces: f64,
    pub mean_tanimoto: f64,
}

pub fn aggregate(results: &[ExampleResult], ks: &[usize]) -> Vec<Aggregate> {
    let n = results.len();
    let mean = |s: f64| if n == 0 { 0.0 } else { s / n as f64 };
    ks.iter()
        .enumerate()
        .map(|(i, &k)| {
            let hits = results.iter().filter(|r| r.hit[i]).count();
            Aggregate {
                k,
                examples: n,
                hits,
                accuracy: mean(hits as f64),
                mean_mces: mean(neumaier_sum(results.iter().map(|r| r.mces_best[i]))),
                mean_tanimoto: mean(neumaier_sum(results.iter().map(|r| r.tanimoto_best[i]))),
            }
        })
        .collect()
}

/// Evaluate many examples in parallel; the output is sorted by id.
pub fn evaluate_examples<S: AsRef<str> + Sync>(
    items: &[(String, Vec<S>, Molecule)],
    cfg: &EvalConfig,
) -> Vec<ExampleResult> {
    let mut out: Vec<ExampleResult> = items
        .par_iter()
        .map(|(id, cands, truth)| evaluate_example(id, cands, truth, cfg))
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}
