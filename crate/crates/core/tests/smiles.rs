mod common;

use std::collections::HashSet;

use common::{corpus, corpus_molecules, random_permutation};
use fp2mol::molgraph::{graphs_isomorphic, BondOrder, Molecule};
use fp2mol::smiles::{
    canonical_ranks, canonical_smiles, detokenize, kekulize, parse_smiles, symmetry_classes, token_kind,
    tokenize_smiles, write_smiles, SmilesError, TokenSequence, Vocab,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mol(s: &str) -> Molecule {
    parse_smiles(s).unwrap()
}

fn toks(v: &[&str]) -> TokenSequence {
    TokenSequence::new(v.iter().map(|s| s.to_string()).collect())
}

#[test]
fn parse_examples() {
    let ethane = mol("CC");
    assert_eq!(ethane.atom_count(), 2);
    assert_eq!(ethane.bond_count(), 1);
    assert_eq!(ethane.bond(0).order, BondOrder::Single);
    assert!((0..2).all(|i| ethane.implicit_hydrogens(i) == 3));

    let benzene = mol("c1ccccc1");
    assert_eq!(benzene.atom_count(), 6);
    assert!(benzene.atoms().iter().all(|a| a.aromatic && a.element == 6));
    assert!(benzene.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
    assert_eq!(fp2mol::molgraph::perceive_rings(&benzene).len(), 1);

    assert!(matches!(
        parse_smiles("C1CC"),
        Err(SmilesError::UnclosedRing { ring: 1, .. })
    ));
}

#[test]
fn canonical_examples() {
    assert_eq!(canonical_smiles(&mol("OCC")), canonical_smiles(&mol("CCO")));
    let kekule = mol("C1=CC=CC=C1");
    let aromatic = mol("c1ccccc1");
    assert_eq!(canonical_smiles(&kekule), canonical_smiles(&aromatic));
    assert!(graphs_isomorphic(&kekule, &aromatic));
}

#[test]
fn rank_examples() {
    let ethane = canonical_ranks(&mol("CC"));
    assert_ne!(ethane[0], ethane[1]);
    let ethanol = mol("CCO");
    let r = canonical_ranks(&ethanol);
    let distinct: HashSet<usize> = r.iter().copied().collect();
    assert_eq!(distinct.len(), 3);
    let s = symmetry_classes(&ethanol);
    assert!(s[0] != s[1] && s[1] != s[2] && s[0] != s[2]);
    let sym = symmetry_classes(&mol("CC"));
    assert_eq!(sym[0], sym[1]);
}

/// Each atom's bonds after kekulization: aromatic atoms carry at most one
/// double bond and the valence rules still hold.
fn check_kekule(m: &Molecule) {
    let k = kekulize(m).unwrap();
    assert!(k.bonds().iter().all(|b| b.order != BondOrder::Aromatic));
    for i in 0..k.atom_count() {
        let doubles = k
            .neighbors(i)
            .iter()
            .filter(|n| k.bond(n.bond).order == BondOrder::Double)
            .count();
        if m.atom(i).aromatic {
            assert!(doubles <= 1, "atom {i}");
        }
        assert_eq!(k.total_hydrogens(i), m.total_hydrogens(i));
    }
    assert!(k.is_valence_valid());
}

#[test]
fn kekulize_examples() {
    let benzene = kekulize(&mol("c1ccccc1")).unwrap();
    let count = |o| benzene.bonds().iter().filter(|b| b.order == o).count();
    assert_eq!(count(BondOrder::Double), 3);
    assert_eq!(count(BondOrder::Single), 3);
    // Every carbon in exactly one double bond.
    for i in 0..6 {
        let d = benzene
            .neighbors(i)
            .iter()
            .filter(|n| benzene.bond(n.bond).order == BondOrder::Double)
            .count();
        assert_eq!(d, 1);
    }
    check_kekule(&mol("c1ccncc1"));
    let lone = parse_smiles_raw("c");
    assert!(kekulize(&lone).is_err());
}

fn parse_smiles_raw(s: &str) -> Molecule {
    fp2mol::smiles::parse_smiles_with(
        s,
        fp2mol::smiles::ParseOptions {
            perceive_aromaticity: false,
        },
    )
    .unwrap()
}

#[test]
fn corpus_kekulizes() {
    for (r, m) in corpus().iter().zip(corpus_molecules()) {
        if m.atoms().iter().any(|a| a.aromatic) {
            let k = kekulize(m).unwrap_or_else(|e| panic!("{}: {e}", r.id));
            assert!(
                graphs_isomorphic(&parse_smiles(&canonical_smiles(&k)).unwrap(), m),
                "{}",
                r.id
            );
        }
    }
}

#[test]
fn tokenizer_examples() {
    assert_eq!(tokenize_smiles("CCO").unwrap(), toks(&["C", "C", "O"]));
    assert_eq!(tokenize_smiles("C(Cl)Br").unwrap(), toks(&["C", "(", "Cl", ")", "Br"]));
    assert_eq!(tokenize_smiles("[NH4+]").unwrap(), toks(&["[NH4+]"]));
    assert_eq!(detokenize(&toks(&["C", "C", "O"])), "CCO");
    assert_eq!(detokenize(&toks(&[])), "");
}

#[test]
fn corpus_round_trips() {
    for (r, m) in corpus().iter().zip(corpus_molecules()) {
        let canon = canonical_smiles(m);
        let back = parse_smiles(&canon).unwrap_or_else(|e| panic!("{}: {canon}: {e}", r.id));
        assert!(graphs_isomorphic(&back, m), "{} {} -> {canon}", r.id, r.smiles);
        assert_eq!(canonical_smiles(&back), canon, "idempotence {}", r.id);
        let plain = write_smiles(m, false).unwrap();
        assert!(
            graphs_isomorphic(&parse_smiles(&plain).unwrap(), m),
            "{} -> {plain}",
            r.id
        );
    }
}

#[test]
fn corpus_tokenizes_losslessly() {
    for r in corpus() {
        let t = tokenize_smiles(&r.smiles).unwrap();
        assert_eq!(detokenize(&t), r.smiles);
        assert!(t.iter().all(|x| token_kind(x).is_some()), "{}", r.id);
        let c = canonical_smiles(&parse_smiles(&r.smiles).unwrap());
        assert_eq!(detokenize(&tokenize_smiles(&c).unwrap()), c);
    }
}

#[test]
fn vocabulary_round_trip() {
    let seqs: Vec<TokenSequence> = corpus().iter().map(|r| tokenize_smiles(&r.smiles).unwrap()).collect();
    let v = Vocab::build(seqs.iter());
    let back = Vocab::from_json(&v.to_json()).unwrap();
    assert_eq!(back.hash(), v.hash());
    for s in &seqs {
        assert_eq!(&v.decode(&v.encode(s)).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn canonical_form_ignores_atom_order(idx in 0usize..650, seed in any::<u64>()) {
        let m = &corpus_molecules()[idx % corpus_molecules().len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_permutation(m.atom_count(), &mut rng);
        let q = m.permuted(&p);
        prop_assert_eq!(canonical_smiles(&q), canonical_smiles(m));
        let (sm, sq) = (symmetry_classes(m), symmetry_classes(&q));
        for i in 0..m.atom_count() {
            prop_assert_eq!(sm[i], sq[p[i]]);
        }
        // Atoms holding the same canonical rank are symmetry-equivalent.
        let (rm, rq) = (canonical_ranks(m), canonical_ranks(&q));
        let mut by_rank_q = vec![0; q.atom_count()];
        for (a, &r) in rq.iter().enumerate() {
            by_rank_q[r] = a;
        }
        for i in 0..m.atom_count() {
            prop_assert_eq!(sm[i], sq[by_rank_q[rm[i]]]);
        }
    }

    #[test]
    fn tokenizer_is_lossless_on_arbitrary_grammar_text(
        parts in proptest::collection::vec(
            prop_oneof![
                Just("C"), Just("c"), Just("Cl"), Just("Br"), Just("N"), Just("o"), Just("("), Just(")"),
                Just("="), Just("#"), Just("1"), Just("%12"), Just("[NH4+]"), Just("[13CH3]"), Just("."),
                Just("/"), Just("\\"), Just("[C@@H]"),
            ],
            0..30,
        )
    ) {
        let text: String = parts.concat();
        let t = tokenize_smiles(&text).unwrap();
        prop_assert_eq!(detokenize(&t), text);
        prop_assert_eq!(t.len(), parts.len());
    }
}
