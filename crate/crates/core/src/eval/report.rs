use std::collections::{BTreeMap, HashSet};
use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{aggregate, evaluate_example, failed_example, neumaier_sum, Aggregate, EvalConfig, ExampleResult};
use crate::molgraph::Molecule;
use crate::smiles::{parse_smiles, CorpusRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub smiles: String,
    pub logprob: f64,
}

impl AsRef<str> for Prediction {
    fn as_ref(&self) -> &str {
        &self.smiles
    }
}

/// One line of a predictions file: candidates best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub candidates: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalformedLine {
    pub line: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id: Option<String>,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: prediction id {id:?} is not in the truth corpus")]
    UnknownId { line: usize, id: String },
    #[error("line {line}: duplicate prediction id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("truth corpus lists id {0:?} twice")]
    DuplicateTruth(String),
    #[error("truth {id:?} does not parse: {message}")]
    BadTruth { id: String, message: String },
    #[error("invalid evaluation config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: EvalConfig,
    pub per_example: Vec<ExampleResult>,
    pub aggregate: AggregateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSection {
    pub examples: usize,
    pub failed: usize,
    /// Truth entries with no prediction line; not part of the means.
    pub unpredicted: usize,
    pub mean_validity: f64,
    pub mces_exact: bool,
    pub by_k: Vec<Aggregate>,
    pub malformed: Vec<MalformedLine>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Flat table of the aggregates, one row per k.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("k\texamples\taccuracy\tmean_mces\tmean_tanimoto\n");
        for a in &self.aggregate.by_k {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                a.k, a.examples, a.accuracy, a.mean_mces, a.mean_tanimoto
            ));
        }
        s
    }
}

pub fn write_prediction<W: Write>(w: &mut W, record: &PredictionRecord) -> io::Result<()> {
    serde_json::to_writer(&mut *w, record)?;
    w.write_all(b"\n")
}

/// Read JSON-lines predictions. Lines that do not parse are returned
/// separately (with the id if one can be recovered) instead of failing.
pub fn read_predictions<R: BufRead>(reader: R) -> io::Result<(Vec<(usize, PredictionRecord)>, Vec<MalformedLine>)> {
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PredictionRecord>(&line) {
            Ok(r) => good.push((n, r)),
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|x| x.as_str()).map(str::to_string));
                bad.push(MalformedLine {
                    line: n,
                    id,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok((good, bad))
}

/// Score a predictions file against a truth corpus.
pub fn evaluate_run<R: BufRead>(
    predictions: R,
    truth: &[CorpusRecord],
    cfg: &EvalConfig,
) -> Result<MetricsReport, EvalError> {
    if cfg.ks.is_empty() || cfg.ks.contains(&0) || cfg.ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::Config("ks must be positive and strictly increasing".into()));
    }
    let mut truth_by_id: BTreeMap<&str, &CorpusRecord> = BTreeMap::new();
    for r in truth {
        if truth_by_id.insert(&r.id, r).is_some() {
            return Err(EvalError::DuplicateTruth(r.id.clone()));
        }
    }
    let (records, malformed) = read_predictions(predictions)?;

    let mut seen = HashSet::new();
    let mut jobs: Vec<(&str, Option<&[Prediction]>, Option<String>)> = Vec::new();
    let mut check = |line: usize, id: &str| -> Result<(), EvalError> {
        if !truth_by_id.contains_key(id) {
            return Err(EvalError::UnknownId {
                line,
                id: id.to_string(),
            });
        }
        if !seen.insert(id.to_string()) {
            return Err(EvalError::DuplicateId {
                line,
                id: id.to_string(),
            });
        }
        Ok(())
    };
    for (line, r) in &records {
        check(*line, &r.id)?;
        jobs.push((&r.id, Some(&r.candidates), None));
    }
    for m in &malformed {
        if let Some(id) = &m.id {
            check(m.line, id)?;
            jobs.push((id, None, Some(format!("line {}: {}", m.line, m.message))));
        }
    }

    let mut parsed: BTreeMap<&str, Molecule> = BTreeMap::new();
    for (id, cands, _) in &jobs {
        if cands.is_some() {
            let rec = truth_by_id[id];
            let mol = parse_smiles(&rec.smiles).map_err(|e| EvalError::BadTruth {
                id: rec.id.clone(),
                message: e.to_string(),
            })?;
            parsed.insert(id, mol);
        }
    }

    let mut per_example: Vec<ExampleResult> = jobs
        .par_iter()
        .map(|(id, cands, err)| match (cands, err) {
            (Some(c), _) => evaluate_example(id, c, &parsed[id], cfg),
            (None, e) => failed_example(id, cfg, e.clone().unwrap_or_default()),
        })
        .collect();
    per_example.sort_by(|a, b| a.id.cmp(&b.id));

    let n = per_example.len();
    let section = AggregateSection {
        examples: n,
        failed: per_example.iter().filter(|r| r.error.is_some()).count(),
        unpredicted: truth_by_id.len() - n,
        mean_validity: if n == 0 {
            0.0
        } else {
            neumaier_sum(per_example.iter().map(|r| r.validity_rate)) / n as f64
        },
        mces_exact: per_example.iter().all(|r| r.mces_exact),
        by_k: aggregate(&per_example, &cfg.ks),
        malformed: malformed.into_iter().filter(|m| m.id.is_none()).collect(),
    };
    Ok(MetricsReport {
        config: cfg.clone(),
        per_example,
        aggregate: section,
    })
}
