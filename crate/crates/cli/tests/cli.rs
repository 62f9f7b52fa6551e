use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fp2mol::decoder::{beam_search, greedy_decode, load_model, BeamConfig, TableModel};
use fp2mol::eval::{evaluate_run, EvalConfig};
use fp2mol::fingerprint::OnBitSequence;
use fp2mol::smiles::{read_corpus, Vocab};
use fp2mol_cli::artifacts::sha256_hex;
use fp2mol_cli::decode_all;
use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = "a\tCCO\nb\tc1ccccc1\nc\tCC(=O)O\nd\tCN\ne\tOCCN\n";

const TINY_MODEL: [&str; 12] = [
    "--embed-dim",
    "16",
    "--layers",
    "1",
    "--heads",
    "2",
    "--ff-dim",
    "32",
    "--max-tokens",
    "32",
    "--batch",
    "2",
];

fn fp2mol(args: &[&str], dir: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fp2mol"));
    for (k, _) in std::env::vars() {
        if k.starts_with("FP2MOL_") {
            cmd.env_remove(k);
        }
    }
    cmd.current_dir(dir).args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Fingerprint and train on the small corpus inside `dir`.
fn small_model(dir: &Path, seed: &str) {
    write(dir, "corpus.smi", SMALL);
    ok(&fp2mol(
        &[
            "fingerprint",
            "--corpus",
            "corpus.smi",
            "--out",
            "fp.jsonl",
            "--width",
            "256",
        ],
        dir,
    ));
    let mut args = vec![
        "train",
        "--corpus",
        "corpus.smi",
        "--fingerprints",
        "fp.jsonl",
        "--out",
        "model.bin",
        "--epochs",
        "3",
        "--seed",
        seed,
    ];
    args.extend(TINY_MODEL);
    ok(&fp2mol(&args, dir));
}

#[test]
fn one_line_corpus() {
    let d = TempDir::new().unwrap();
    write(d.path(), "one.smi", "x\tCCO\n");
    ok(&fp2mol(
        &["fingerprint", "--corpus", "one.smi", "--out", "fp.jsonl"],
        d.path(),
    ));
    let recs = lines(&d.path().join("fp.jsonl"));
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0]["id"], "x");
    assert_eq!(recs[0]["width"], 4096);
    assert_eq!(recs[0]["onbits"].as_array().unwrap().len(), 6);

    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("fp.jsonl.manifest.json")).unwrap()).unwrap();
    let bytes = fs::read(d.path().join("fp.jsonl")).unwrap();
    assert_eq!(manifest["outputs"][0]["sha256"], sha256_hex(&bytes));
    assert_eq!(manifest["inputs"][0]["sha256"], sha256_hex(b"x\tCCO\n"));
    assert_eq!(manifest["command"], "fingerprint");
}

#[test]
fn bad_corpus_line_is_skipped_with_a_warning() {
    let d = TempDir::new().unwrap();
    write(d.path(), "c.smi", "a\tCCO\nb\tC1CC\nc\tCN\n");
    let out = fp2mol(&["fingerprint", "--corpus", "c.smi", "--out", "fp.jsonl"], d.path());
    ok(&out);
    let ids: Vec<Value> = lines(&d.path().join("fp.jsonl"))
        .iter()
        .map(|r| r["id"].clone())
        .collect();
    assert_eq!(ids, vec!["a", "c"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("WARN"));
}

#[test]
fn fingerprint_reruns_are_byte_identical() {
    let d = TempDir::new().unwrap();
    let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/corpus.smi");
    ok(&fp2mol(
        &["fingerprint", "--corpus", corpus, "--out", "a.jsonl"],
        d.path(),
    ));
    ok(&fp2mol(
        &["fingerprint", "--corpus", corpus, "--out", "b.jsonl", "--jobs", "1"],
        d.path(),
    ));
    assert_eq!(
        fs::read(d.path().join("a.jsonl")).unwrap(),
        fs::read(d.path().join("b.jsonl")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    write(d.path(), "corpus.smi", SMALL);
    ok(&fp2mol(
        &["fingerprint", "--corpus", "corpus.smi", "--out", "fp.jsonl"],
        d.path(),
    ));
    let zero = fp2mol(
        &[
            "train",
            "--corpus",
            "corpus.smi",
            "--fingerprints",
            "fp.jsonl",
            "--out",
            "m.bin",
            "--epochs",
            "0",
        ],
        d.path(),
    );
    assert_eq!(zero.status.code(), Some(1));
    assert!(!d.path().join("m.bin").exists());
    assert_eq!(fp2mol(&["frobnicate"], d.path()).status.code(), Some(1));
    assert_eq!(
        fp2mol(&["fingerprint", "--corpus", "missing.smi", "--out", "x"], d.path())
            .status
            .code(),
        Some(2)
    );
    write(d.path(), "junk.bin", "not a model");
    let bad_model = fp2mol(
        &[
            "decode",
            "--model",
            "junk.bin",
            "--fingerprints",
            "fp.jsonl",
            "--out",
            "p",
        ],
        d.path(),
    );
    assert_eq!(bad_model.status.code(), Some(2));
}

#[test]
fn same_seed_gives_the_same_model() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    small_model(a.path(), "9");
    small_model(b.path(), "9");
    let ma = fs::read(a.path().join("model.bin")).unwrap();
    assert_eq!(ma, fs::read(b.path().join("model.bin")).unwrap());
    let loss = fs::read_to_string(a.path().join("model.bin.loss.tsv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 1 + 3);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("model.bin.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["model_hash"], sha256_hex(&ma));
    assert_eq!(manifest["seed"], 9);
}

#[test]
fn decode_with_beam_one_matches_greedy() {
    let d = TempDir::new().unwrap();
    small_model(d.path(), "1");
    ok(&fp2mol(
        &[
            "decode",
            "--model",
            "model.bin",
            "--fingerprints",
            "fp.jsonl",
            "--out",
            "p.jsonl",
            "--beam",
            "1",
            "--max-len",
            "20",
        ],
        d.path(),
    ));
    let model = load_model(&fs::read(d.path().join("model.bin")).unwrap()).unwrap();
    let recs = fp2mol::fingerprint::read_records(&fs::read(d.path().join("fp.jsonl")).unwrap()[..]).unwrap();
    let preds = lines(&d.path().join("p.jsonl"));
    assert_eq!(preds.len(), recs.len());
    for (r, p) in recs.iter().zip(&preds) {
        let g = greedy_decode(&model, &r.onbits(0.5), 20).unwrap();
        assert_eq!(p["id"], r.id.as_str());
        assert_eq!(p["candidates"][0]["smiles"], g.smiles.as_str());
        assert_eq!(p["candidates"][0]["logprob"].as_f64().unwrap(), g.logprob);
    }
}

#[test]
fn threshold_above_one_decodes_empty_sets() {
    let d = TempDir::new().unwrap();
    small_model(d.path(), "1");
    let probs: Vec<String> = (0..256)
        .map(|i| if i % 7 == 0 { "1.0" } else { "0.25" }.to_string())
        .collect();
    write(
        d.path(),
        "probs.jsonl",
        &format!("{{\"id\":\"q\",\"width\":256,\"probs\":[{}]}}\n", probs.join(",")),
    );
    let out = fp2mol(
        &[
            "decode",
            "--model",
            "model.bin",
            "--fingerprints",
            "probs.jsonl",
            "--out",
            "p.jsonl",
            "--threshold",
            "1.01",
            "--beam",
            "2",
            "--max-len",
            "10",
        ],
        d.path(),
    );
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("above 1"));
    let model = load_model(&fs::read(d.path().join("model.bin")).unwrap()).unwrap();
    let cfg = BeamConfig {
        beam: 2,
        max_len: 10,
        dedup: true,
    };
    let want = beam_search(&model, &OnBitSequence::empty(), &cfg).unwrap();
    let got = &lines(&d.path().join("p.jsonl"))[0]["candidates"];
    assert_eq!(got.as_array().unwrap().len(), want.len());
    for (g, w) in got.as_array().unwrap().iter().zip(&want) {
        assert_eq!(g["smiles"], w.smiles.as_str());
    }
}

#[test]
fn decode_all_matches_beam_search() {
    let vocab = Vocab::from_tokens(["C", "O", "N"]).unwrap();
    let mut m = TableModel::new(vocab, 8);
    m.set_fallback_weights(&[0.0, 0.0, 0.3, 0.0, 0.4, 0.2, 0.1]);
    m.set_weights(vec![1, 4], &[0.0, 0.0, 0.1, 0.0, 0.2, 0.6, 0.1]);
    let inputs: Vec<(String, OnBitSequence)> = (0..6)
        .map(|i| (format!("i{i}"), OnBitSequence::new(vec![i], 8).unwrap()))
        .collect();
    let cfg = BeamConfig {
        beam: 3,
        max_len: 4,
        dedup: true,
    };
    let all = decode_all(&m, &inputs, &cfg).unwrap();
    for ((id, on), rec) in inputs.iter().zip(&all) {
        assert_eq!(&rec.id, id);
        let want = beam_search(&m, on, &cfg).unwrap();
        let got: Vec<(&str, f64)> = rec.candidates.iter().map(|c| (c.smiles.as_str(), c.logprob)).collect();
        let want: Vec<(&str, f64)> = want.iter().map(|c| (c.smiles.as_str(), c.logprob)).collect();
        assert_eq!(got, want);
    }
    assert!(decode_all(&m, &[("x".into(), OnBitSequence::new(vec![9], 16).unwrap())], &cfg).is_err());
}

fn prediction_line(id: &str, smiles: &[&str]) -> String {
    let c: Vec<String> = smiles
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{{\"smiles\":\"{s}\",\"logprob\":{}}}", -(i as f64) - 0.5))
        .collect();
    format!("{{\"id\":\"{id}\",\"candidates\":[{}]}}\n", c.join(","))
}

#[test]
fn evaluate_fixtures() {
    let d = TempDir::new().unwrap();
    write(d.path(), "truth.smi", "a\tCCO\nb\tc1ccccc1\n");
    let perfect = prediction_line("a", &["OCC"]) + &prediction_line("b", &["C1=CC=CC=C1"]);
    write(d.path(), "perfect.jsonl", &perfect);
    ok(&fp2mol(
        &[
            "evaluate",
            "--predictions",
            "perfect.jsonl",
            "--truth",
            "truth.smi",
            "--out",
            "perfect.json",
            "--k",
            "1,2",
        ],
        d.path(),
    ));
    let r: Value = serde_json::from_str(&fs::read_to_string(d.path().join("perfect.json")).unwrap()).unwrap();
    for agg in r["aggregate"]["by_k"].as_array().unwrap() {
        assert_eq!(agg["accuracy"], 1.0);
        assert_eq!(agg["mean_mces"], 0.0);
        assert_eq!(agg["mean_tanimoto"], 1.0);
    }
    let tsv = fs::read_to_string(d.path().join("perfect.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 3);

    let rank2 = prediction_line("a", &["CCC", "OCC"]) + &prediction_line("b", &["CC", "c1ccccc1"]);
    write(d.path(), "rank2.jsonl", &rank2);
    ok(&fp2mol(
        &[
            "evaluate",
            "--predictions",
            "rank2.jsonl",
            "--truth",
            "truth.smi",
            "--out",
            "rank2.json",
            "--k",
            "1,2",
        ],
        d.path(),
    ));
    let text = fs::read_to_string(d.path().join("rank2.json")).unwrap();
    let r: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(r["aggregate"]["by_k"][0]["accuracy"], 0.0);
    assert_eq!(r["aggregate"]["by_k"][1]["accuracy"], 1.0);

    // The written report is exactly the library's.
    let truth = read_corpus(&b"a\tCCO\nb\tc1ccccc1\n"[..]).unwrap();
    let cfg = EvalConfig {
        ks: vec![1, 2],
        ..EvalConfig::default()
    };
    assert_eq!(text, evaluate_run(rank2.as_bytes(), &truth, &cfg).unwrap().to_json());
}

#[test]
fn mixed_provenance_is_rejected() {
    let d = TempDir::new().unwrap();
    small_model(d.path(), "1");
    let mixed = "{\"id\":\"a\",\"width\":256,\"onbits\":[1],\"generator\":\"g1\"}\n{\"id\":\"b\",\"width\":256,\"onbits\":[2],\"generator\":\"g2\"}\n";
    write(d.path(), "mixed.jsonl", mixed);
    let out = fp2mol(
        &[
            "train",
            "--corpus",
            "corpus.smi",
            "--fingerprints",
            "mixed.jsonl",
            "--out",
            "m2.bin",
            "--epochs",
            "1",
        ],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("same generator"));

    let other = "{\"id\":\"a\",\"width\":256,\"onbits\":[1],\"generator\":\"elsewhere\"}\n";
    write(d.path(), "other.jsonl", other);
    let out = fp2mol(
        &[
            "decode",
            "--model",
            "model.bin",
            "--fingerprints",
            "other.jsonl",
            "--out",
            "p",
        ],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let wide = "{\"id\":\"a\",\"width\":512,\"onbits\":[1]}\n";
    write(d.path(), "wide.jsonl", wide);
    let out = fp2mol(
        &[
            "decode",
            "--model",
            "model.bin",
            "--fingerprints",
            "wide.jsonl",
            "--out",
            "p",
        ],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_beat_environment_beats_config_file() {
    let d = TempDir::new().unwrap();
    write(d.path(), "one.smi", "x\tCCO\n");
    write(d.path(), "cfg.toml", "[fingerprint]\nwidth = 128\n");
    let width = |name: &str| lines(&d.path().join(name))[0]["width"].as_u64().unwrap();
    let run = |out: &str, env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_fp2mol"));
        for (k, _) in std::env::vars() {
            if k.starts_with("FP2MOL_") {
                cmd.env_remove(k);
            }
        }
        cmd.current_dir(d.path()).args([
            "--config",
            "cfg.toml",
            "fingerprint",
            "--corpus",
            "one.smi",
            "--out",
            out,
        ]);
        if let Some(e) = env {
            cmd.env("FP2MOL_WIDTH", e);
        }
        if let Some(f) = flag {
            cmd.args(["--width", f]);
        }
        ok(&cmd.output().unwrap());
    };
    run("file.jsonl", None, None);
    run("env.jsonl", Some("256"), None);
    run("flag.jsonl", Some("256"), Some("512"));
    assert_eq!(width("file.jsonl"), 128);
    assert_eq!(width("env.jsonl"), 256);
    assert_eq!(width("flag.jsonl"), 512);

    write(d.path(), "bad.toml", "[fingerprint]\nwidht = 1\n");
    let out = fp2mol(
        &[
            "--config",
            "bad.toml",
            "fingerprint",
            "--corpus",
            "one.smi",
            "--out",
            "z",
        ],
        d.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}
