use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use fp2mol::decoder::{
    beam_search, load_model, save_model, train, BeamConfig, DecodeError, DecoderModel, ToyTransformerParams,
    TrainConfig, TrainError, TrainingExample,
};
use fp2mol::eval::{evaluate_run, write_prediction, EvalConfig, EvalError, Prediction, PredictionRecord};
use fp2mol::fingerprint::{
    fingerprint_to_onbits, generator_id, morgan_fingerprint, read_records, write_record, FingerprintRecord,
    OnBitSequence, Payload, DEFAULT_RADIUS, DEFAULT_THRESHOLD, DEFAULT_WIDTH,
};
use fp2mol::smiles::{canonical_smiles, parse_smiles, read_corpus, tokenize_smiles, CorpusRecord};
use log::{debug, info, warn};
use rayon::prelude::*;
use serde_json::json;

use crate::artifacts::{read_input, sha256_hex, FileDigest, RunManifest};
use crate::settings::FileConfig;
use crate::{CliError, DecodeArgs, EvaluateArgs, FingerprintArgs, TrainArgs};

const PROVENANCE_RULE: &str =
    "fingerprints used for decoding must come from the same generator and width as the training fingerprints";

fn load_corpus(path: &Path, manifest: &mut RunManifest) -> Result<Vec<CorpusRecord>, CliError> {
    let bytes = read_input(path)?;
    manifest.inputs.push(FileDigest::of(path, &bytes));
    read_corpus(&bytes[..]).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_records(path: &Path, manifest: &mut RunManifest) -> Result<Vec<FingerprintRecord>, CliError> {
    let bytes = read_input(path)?;
    manifest.inputs.push(FileDigest::of(path, &bytes));
    read_records(&bytes[..]).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// The one generator id shared by all records. Records without an id only
/// mix with other records without one.
fn single_generator(records: &[FingerprintRecord]) -> Result<Option<String>, CliError> {
    let set: BTreeSet<Option<&str>> = records.iter().map(|r| r.generator.as_deref()).collect();
    if set.len() > 1 {
        let names: Vec<String> = set
            .iter()
            .map(|g| g.map_or("<unrecorded>".to_string(), str::to_string))
            .collect();
        return Err(CliError::Data(format!(
            "fingerprint records mix generators ({}); {PROVENANCE_RULE}",
            names.join(", ")
        )));
    }
    Ok(set.into_iter().next().flatten().map(str::to_string))
}

fn single_width(records: &[FingerprintRecord]) -> Result<usize, CliError> {
    let widths: BTreeSet<usize> = records.iter().map(|r| r.width).collect();
    match widths.len() {
        0 => Err(CliError::Data("no fingerprint records".into())),
        1 => Ok(*widths.first().unwrap()),
        _ => Err(CliError::Data(format!(
            "fingerprint records have different widths {widths:?}; {PROVENANCE_RULE}"
        ))),
    }
}

pub fn run_fingerprint(a: &FingerprintArgs, file: &FileConfig) -> Result<(), CliError> {
    let radius = a.radius.or(file.fingerprint.radius).unwrap_or(DEFAULT_RADIUS);
    let width = a.width.or(file.fingerprint.width).unwrap_or(DEFAULT_WIDTH);
    if width == 0 {
        return Err(CliError::Usage("width must be positive".into()));
    }
    let generator = generator_id(radius, width);
    let mut manifest = RunManifest::new("fingerprint", json!({ "radius": radius, "width": width }));
    manifest.generator = Some(generator.clone());
    let corpus = load_corpus(&a.corpus, &mut manifest)?;

    let results: Vec<Result<FingerprintRecord, String>> = corpus
        .par_iter()
        .map(|r| {
            let mol = parse_smiles(&r.smiles).map_err(|e| format!("line {}: {}: {e}", r.line, r.id))?;
            Ok(FingerprintRecord {
                id: r.id.clone(),
                width,
                payload: Payload::OnBits(fingerprint_to_onbits(&morgan_fingerprint(&mol, radius, width))),
                generator: Some(generator.clone()),
            })
        })
        .collect();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut count = 0;
    for (r, res) in corpus.iter().zip(results) {
        match res {
            Ok(rec) if seen.insert(rec.id.clone()) => {
                write_record(&mut out, &rec).map_err(|e| CliError::Internal(e.to_string()))?;
                count += 1;
            }
            Ok(rec) => {
                warn!("line {}: duplicate id {}, skipped", r.line, rec.id);
                manifest.warnings += 1;
            }
            Err(msg) => {
                warn!("{msg}");
                manifest.warnings += 1;
            }
        }
    }
    manifest.output(&a.out, &out)?;
    info!("{count} records written, {} warnings", manifest.warnings);
    manifest.finish(&a.out)?;
    Ok(())
}

fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::Config(m) => CliError::Usage(m),
        TrainError::EmptyCorpus | TrainError::Example { .. } => CliError::Data(e.to_string()),
        TrainError::NonFinite { .. } => CliError::Internal(e.to_string()),
    }
}

pub fn run_train(a: &TrainArgs, file: &FileConfig) -> Result<(), CliError> {
    let t = &file.train;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        learning_rate: a.lr.or(t.lr).unwrap_or(defaults.learning_rate),
        batch_size: a.batch.or(t.batch).unwrap_or(defaults.batch_size),
        epochs: a.epochs.or(t.epochs).unwrap_or(defaults.epochs),
        seed: a.seed.or(t.seed).unwrap_or(defaults.seed),
    };
    let pd = ToyTransformerParams::default();
    let params = ToyTransformerParams {
        embed_dim: a.embed_dim.or(t.embed_dim).unwrap_or(pd.embed_dim),
        layers: a.layers.or(t.layers).unwrap_or(pd.layers),
        heads: a.heads.or(t.heads).unwrap_or(pd.heads),
        feedforward_dim: a.ff_dim.or(t.ff_dim).unwrap_or(pd.feedforward_dim),
        max_onbits: a.max_onbits.or(t.max_onbits).unwrap_or(pd.max_onbits),
        max_tokens: a.max_tokens.or(t.max_tokens).unwrap_or(pd.max_tokens),
    };
    let threshold = a.threshold.or(file.decode.threshold).unwrap_or(DEFAULT_THRESHOLD);
    if cfg.epochs == 0 {
        return Err(CliError::Usage("epochs must be at least 1: nothing to train".into()));
    }
    params.validate().map_err(CliError::Usage)?;

    let mut manifest = RunManifest::new(
        "train",
        json!({ "train": cfg, "params": params, "threshold": threshold }),
    );
    manifest.seed = Some(cfg.seed);
    let corpus = load_corpus(&a.corpus, &mut manifest)?;
    let records = load_records(&a.fingerprints, &mut manifest)?;
    let generator = single_generator(&records)?;
    let width = single_width(&records)?;
    let by_id: HashMap<&str, &FingerprintRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();

    let mut examples = Vec::new();
    for r in &corpus {
        let Some(fp) = by_id.get(r.id.as_str()) else {
            warn!("line {}: no fingerprint for {}", r.line, r.id);
            manifest.warnings += 1;
            continue;
        };
        let tokens = parse_smiles(&r.smiles)
            .map_err(|e| e.to_string())
            .and_then(|m| tokenize_smiles(&canonical_smiles(&m)).map_err(|e| e.to_string()));
        match tokens {
            Ok(tokens) => examples.push(TrainingExample {
                onbits: fp.onbits(threshold),
                tokens,
            }),
            Err(e) => {
                warn!("line {}: {}: {e}", r.line, r.id);
                manifest.warnings += 1;
            }
        }
    }
    if examples.is_empty() {
        return Err(CliError::Data(
            "no corpus entry joined with a fingerprint record".into(),
        ));
    }
    info!("training on {} examples", examples.len());
    let (mut model, report) = train(&params, width, &examples, &cfg).map_err(train_error)?;
    model.set_generator(generator.clone());
    let bytes = save_model(&model);
    manifest.generator = generator;
    manifest.vocab_hash = Some(model.vocab().hash());
    manifest.model_hash = Some(sha256_hex(&bytes));
    manifest.output(&a.out, &bytes)?;
    let mut log = format!("epoch\tloss\n0\t{}\n", report.initial_loss);
    for (i, l) in report.epoch_losses.iter().enumerate() {
        log.push_str(&format!("{}\t{l}\n", i + 1));
    }
    manifest.output(&crate::artifacts::sibling(&a.out, ".loss.tsv"), log.as_bytes())?;
    manifest.finish(&a.out)?;
    Ok(())
}

/// Beam-search every input, in parallel, keeping input order.
pub fn decode_all<M: DecoderModel>(
    model: &M,
    inputs: &[(String, OnBitSequence)],
    cfg: &BeamConfig,
) -> Result<Vec<PredictionRecord>, DecodeError> {
    inputs
        .par_iter()
        .map(|(id, onbits)| {
            let cands = beam_search(model, onbits, cfg)?;
            Ok(PredictionRecord {
                id: id.clone(),
                candidates: cands
                    .into_iter()
                    .map(|c| Prediction {
                        smiles: c.smiles,
                        logprob: c.logprob,
                    })
                    .collect(),
            })
        })
        .collect()
}

pub fn run_decode(a: &DecodeArgs, file: &FileConfig) -> Result<(), CliError> {
    let d = &file.decode;
    let defaults = BeamConfig::default();
    let threshold = a.threshold.or(d.threshold).unwrap_or(DEFAULT_THRESHOLD);
    let cfg = BeamConfig {
        beam: a.beam.or(d.beam).unwrap_or(defaults.beam),
        max_len: a.max_len.or(d.max_len).unwrap_or(defaults.max_len),
        dedup: true,
    };
    if cfg.beam == 0 || cfg.max_len == 0 {
        return Err(CliError::Usage("beam and max-len must be at least 1".into()));
    }
    let mut manifest = RunManifest::new(
        "decode",
        json!({ "threshold": threshold, "beam": cfg.beam, "max_len": cfg.max_len, "dedup": cfg.dedup }),
    );
    let model_bytes = read_input(&a.model)?;
    manifest.inputs.push(FileDigest::of(&a.model, &model_bytes));
    let model = load_model(&model_bytes).map_err(|e| CliError::Data(format!("{}: {e}", a.model.display())))?;
    manifest.model_hash = Some(sha256_hex(&model_bytes));
    manifest.vocab_hash = Some(model.vocab().hash());

    let records = load_records(&a.fingerprints, &mut manifest)?;
    let generator = single_generator(&records)?;
    if let (Some(m), Some(r)) = (model.generator(), generator.as_deref()) {
        if m != r {
            return Err(CliError::Data(format!(
                "model was trained on {m} fingerprints but the records come from {r}; {PROVENANCE_RULE}"
            )));
        }
    }
    if let Some(r) = records.iter().find(|r| r.width != model.width()) {
        return Err(CliError::Data(format!(
            "record {} has width {} but the model expects {}; {PROVENANCE_RULE}",
            r.id,
            r.width,
            model.width()
        )));
    }
    manifest.generator = generator;
    if threshold > 1.0 {
        warn!("threshold {threshold} is above 1: probability records decode from an empty on-bit set");
        manifest.warnings += 1;
    }
    let inputs: Vec<(String, OnBitSequence)> = records.iter().map(|r| (r.id.clone(), r.onbits(threshold))).collect();
    let empty = inputs.iter().filter(|(_, o)| o.is_empty()).count();
    if empty > 0 {
        warn!("{empty} of {} inputs have no on-bits", inputs.len());
        manifest.warnings += 1;
    }
    let predictions = decode_all(&model, &inputs, &cfg).map_err(|e| CliError::Data(e.to_string()))?;

    let mut out = Vec::new();
    let mut valid_total = 0.0;
    for p in &predictions {
        let valid = p.candidates.iter().filter(|c| parse_smiles(&c.smiles).is_ok()).count();
        let rate = if p.candidates.is_empty() {
            0.0
        } else {
            valid as f64 / p.candidates.len() as f64
        };
        debug!("{}: {} candidates, validity {rate:.3}", p.id, p.candidates.len());
        valid_total += rate;
        write_prediction(&mut out, p).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    if !predictions.is_empty() {
        info!(
            "decoded {} inputs, mean validity {:.3}",
            predictions.len(),
            valid_total / predictions.len() as f64
        );
    }
    manifest.output(&a.out, &out)?;
    manifest.finish(&a.out)?;
    Ok(())
}

fn tsv_path(out: &Path) -> PathBuf {
    let p = out.with_extension("tsv");
    if p == out {
        crate::artifacts::sibling(out, ".tsv")
    } else {
        p
    }
}

pub fn run_evaluate(a: &EvaluateArgs, file: &FileConfig) -> Result<(), CliError> {
    let e = &file.evaluate;
    let mut cfg = EvalConfig::default();
    if let Some(k) = a.k.clone().or(e.k.clone()) {
        cfg.ks = k;
    }
    if let Some(p) = a.mces_penalty.or(e.mces_penalty) {
        cfg.mces_penalty = p;
    }
    if let Some(n) = a.node_budget.or(e.node_budget) {
        cfg.mces.node_budget = n;
    }
    if let Some(s) = a.time_budget.or(e.time_budget) {
        cfg.mces.time_budget =
            Duration::try_from_secs_f64(s).map_err(|err| CliError::Usage(format!("time budget: {err}")))?;
    }
    let mut manifest = RunManifest::new("evaluate", serde_json::to_value(&cfg).unwrap_or_default());
    let truth = load_corpus(&a.truth, &mut manifest)?;
    let preds = read_input(&a.predictions)?;
    manifest.inputs.push(FileDigest::of(&a.predictions, &preds));
    let report = evaluate_run(&preds[..], &truth, &cfg).map_err(|err| match err {
        EvalError::Config(m) => CliError::Usage(m),
        other => CliError::Data(other.to_string()),
    })?;
    for m in &report.aggregate.malformed {
        warn!("predictions line {}: {}", m.line, m.message);
    }
    for r in report.per_example.iter().filter(|r| r.error.is_some()) {
        warn!("{}: {}", r.id, r.error.as_deref().unwrap_or_default());
    }
    manifest.warnings += report.aggregate.malformed.len() + report.aggregate.failed;
    for agg in &report.aggregate.by_k {
        info!(
            "top-{}: accuracy {:.4}, MCES {:.3}, Tanimoto {:.4}",
            agg.k, agg.accuracy, agg.mean_mces, agg.mean_tanimoto
        );
    }
    manifest.output(&a.out, report.to_json().as_bytes())?;
    manifest.output(&tsv_path(&a.out), report.to_tsv().as_bytes())?;
    manifest.finish(&a.out)?;
    Ok(())
}
