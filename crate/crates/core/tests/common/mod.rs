#![allow(dead_code)]

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::OnceLock;

use fp2mol::molgraph::Molecule;
use fp2mol::smiles::{parse_smiles, read_corpus, CorpusRecord};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn corpus() -> &'static [CorpusRecord] {
    static CORPUS: OnceLock<Vec<CorpusRecord>> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let f = File::open(data_path("corpus.smi")).expect("bundled corpus");
        read_corpus(BufReader::new(f)).expect("corpus reads")
    })
}

pub fn corpus_molecules() -> &'static [Molecule] {
    static MOLS: OnceLock<Vec<Molecule>> = OnceLock::new();
    MOLS.get_or_init(|| {
        corpus()
            .iter()
            .map(|r| parse_smiles(&r.smiles).unwrap_or_else(|e| panic!("{}: {e}", r.id)))
            .collect()
    })
}

pub fn random_permutation<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Random small SMILES over C, N, O, S with branches, one optional ring
/// closure and occasional double bonds. Not every output is valid.
pub fn random_small_smiles<R: Rng>(rng: &mut R, max_atoms: usize) -> String {
    let n = rng.gen_range(1..=max_atoms);
    let elems = ["C", "C", "C", "N", "O", "S"];
    let mut s = String::new();
    let mut open = 0;
    let mut ring_open = false;
    let mut ring_used = false;
    for i in 0..n {
        if i > 0 {
            if open > 0 && rng.gen_bool(0.3) {
                s.push(')');
                open -= 1;
            } else if i + 1 < n && rng.gen_bool(0.25) {
                s.push('(');
                open += 1;
            }
            if rng.gen_bool(0.15) {
                s.push('=');
            }
        }
        s.push_str(elems[rng.gen_range(0..elems.len())]);
        if !ring_used && !ring_open && i + 2 < n && rng.gen_bool(0.2) {
            s.push('1');
            ring_open = true;
        } else if ring_open && rng.gen_bool(0.4) {
            s.push('1');
            ring_open = false;
            ring_used = true;
        }
    }
    if ring_open {
        s.push('1');
    }
    for _ in 0..open {
        s.push(')');
    }
    s
}

/// A random parseable molecule with at most `max_atoms` heavy atoms.
pub fn random_small_molecule<R: Rng>(rng: &mut R, max_atoms: usize) -> (String, Molecule) {
    loop {
        let s = random_small_smiles(rng, max_atoms);
        if let Ok(m) = parse_smiles(&s) {
            if m.is_valence_valid() && m.heavy_atom_count() <= max_atoms {
                return (s, m);
            }
        }
    }
}
