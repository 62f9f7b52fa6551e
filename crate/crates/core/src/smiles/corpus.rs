//! Line-oriented SMILES corpus files: `<id>\t<smiles>` or bare `<smiles>`.
//! Blank lines and lines starting with `#` are skipped. Bare lines get the
//! id `L<line number>`.

use std::io::{self, BufRead};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRecord {
    pub id: String,
    pub smiles: String,
    /// 1-based line number in the source file.
    pub line: usize,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: empty SMILES field")]
    EmptySmiles { line: usize },
}

pub fn parse_corpus_line(line: &str, number: usize) -> Result<Option<CorpusRecord>, CorpusError> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (id, smiles) = match line.split_once('\t') {
        Some((id, rest)) => (id.trim().to_string(), rest.trim()),
        None => (format!("L{number}"), line.trim()),
    };
    if smiles.is_empty() {
        return Err(CorpusError::EmptySmiles { line: number });
    }
    Ok(Some(CorpusRecord {
        id,
        smiles: smiles.to_string(),
        line: number,
    }))
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        if let Some(r) = parse_corpus_line(&line?, k + 1)? {
            out.push(r);
        }
    }
    Ok(out)
}
