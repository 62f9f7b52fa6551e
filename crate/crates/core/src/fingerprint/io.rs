//! JSON-lines fingerprint records.
//!
//! Each line is `{"id", "width", "probs": [..]}` or the compact
//! `{"id", "width", "onbits": [..]}`, optionally with a `"generator"` field
//! naming the bit space the record came from.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{threshold_onbits, FingerprintError, OnBitSequence, ProbFingerprint};

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: FingerprintError },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Probs(ProbFingerprint),
    OnBits(OnBitSequence),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintRecord {
    pub id: String,
    pub width: usize,
    pub payload: Payload,
    pub generator: Option<String>,
}

impl FingerprintRecord {
    /// On-bits of the record; probability payloads are thresholded at `t`.
    pub fn onbits(&self, t: f64) -> OnBitSequence {
        match &self.payload {
            Payload::Probs(p) => threshold_onbits(p, t),
            Payload::OnBits(o) => o.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Line {
    id: String,
    width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    onbits: Option<Vec<u32>>,
}

fn parse_line(text: &str, line: usize) -> Result<FingerprintRecord, RecordError> {
    let raw: Line = serde_json::from_str(text).map_err(|e| RecordError::Malformed {
        line,
        message: e.to_string(),
    })?;
    let invalid = |source| RecordError::Invalid { line, source };
    if raw.width == 0 {
        return Err(invalid(FingerprintError::ZeroWidth));
    }
    let payload = match (raw.probs, raw.onbits) {
        (Some(p), None) => {
            if p.len() != raw.width {
                return Err(invalid(FingerprintError::LengthMismatch {
                    expected: raw.width,
                    got: p.len(),
                }));
            }
            Payload::Probs(ProbFingerprint::new(p).map_err(invalid)?)
        }
        (None, Some(o)) => Payload::OnBits(OnBitSequence::new(o, raw.width).map_err(invalid)?),
        _ => {
            return Err(RecordError::Malformed {
                line,
                message: "expected exactly one of \"probs\" or \"onbits\"".into(),
            })
        }
    };
    Ok(FingerprintRecord {
        id: raw.id,
        width: raw.width,
        payload,
        generator: raw.generator,
    })
}

/// Read every record. Blank lines are skipped; the first bad line is an error.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<FingerprintRecord>, RecordError> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, k + 1)?);
    }
    Ok(out)
}

pub fn write_record<W: Write>(mut w: W, record: &FingerprintRecord) -> io::Result<()> {
    let (probs, onbits) = match &record.payload {
        Payload::Probs(p) => (Some(p.probs().to_vec()), None),
        Payload::OnBits(o) => (None, Some(o.indices().to_vec())),
    };
    let line = Line {
        id: record.id.clone(),
        width: record.width,
        generator: record.generator.clone(),
        probs,
        onbits,
    };
    serde_json::to_writer(&mut w, &line)?;
    w.write_all(b"\n")
}
