mod common;

use std::collections::HashSet;

use common::{corpus, corpus_molecules, random_permutation};
use fp2mol::molgraph::{graphs_isomorphic, heavy_atom_count, implicit_hydrogens, perceive_rings, Molecule};
use fp2mol::smiles::{parse_smiles, write_smiles};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mol(s: &str) -> Molecule {
    parse_smiles(s).unwrap()
}

#[test]
fn implicit_hydrogen_examples() {
    assert_eq!(implicit_hydrogens(&mol("C"), 0), 4);
    assert_eq!(implicit_hydrogens(&mol("CC"), 0), 3);
    let benzene = mol("c1ccccc1");
    assert!((0..6).all(|i| implicit_hydrogens(&benzene, i) == 1));
}

#[test]
fn heavy_atom_examples() {
    assert_eq!(heavy_atom_count(&mol("[OH2]")), 1);
    assert_eq!(heavy_atom_count(&mol("c1ccccc1")), 6);
    assert_eq!(heavy_atom_count(&Molecule::empty()), 0);
}

#[test]
fn isomorphism_examples() {
    assert!(graphs_isomorphic(&mol("c1ccccc1"), &mol("c1cc(ccc1)")));
    assert!(!graphs_isomorphic(&mol("CCO"), &mol("COC")));
}

/// Every simple cycle as a sorted edge list, by depth-first search from the
/// smallest vertex on the cycle. Gives up past `limit` cycles.
fn all_simple_cycles(m: &Molecule, limit: usize) -> Option<Vec<Vec<usize>>> {
    fn dfs(
        m: &Molecule,
        start: usize,
        at: usize,
        path_atoms: &mut Vec<usize>,
        path_bonds: &mut Vec<usize>,
        out: &mut HashSet<Vec<usize>>,
        limit: usize,
    ) -> bool {
        for n in m.neighbors(at) {
            if n.atom == start && path_bonds.len() >= 2 && !path_bonds.contains(&n.bond) {
                let mut cyc = path_bonds.clone();
                cyc.push(n.bond);
                cyc.sort_unstable();
                out.insert(cyc);
                if out.len() > limit {
                    return false;
                }
            } else if n.atom > start && !path_atoms.contains(&n.atom) {
                path_atoms.push(n.atom);
                path_bonds.push(n.bond);
                let ok = dfs(m, start, n.atom, path_atoms, path_bonds, out, limit);
                path_atoms.pop();
                path_bonds.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    let mut out = HashSet::new();
    for s in 0..m.atom_count() {
        if !dfs(m, s, s, &mut vec![s], &mut Vec::new(), &mut out, limit) {
            return None;
        }
    }
    Some(out.into_iter().collect())
}

/// Sizes of a minimum cycle basis: shortest cycles first, kept when
/// independent over GF(2) of the ones already kept.
fn minimum_cycle_basis_sizes(m: &Molecule, limit: usize) -> Option<Vec<usize>> {
    let mut cycles = all_simple_cycles(m, limit)?;
    cycles.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let words = m.bond_count().div_ceil(64);
    let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
    let mut sizes = Vec::new();
    for c in cycles {
        let mut v = vec![0u64; words];
        for &b in &c {
            v[b / 64] |= 1 << (b % 64);
        }
        for (pivot, row) in &basis {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (x, y) in v.iter_mut().zip(row) {
                    *x ^= y;
                }
            }
        }
        if let Some(p) = (0..m.bond_count()).find(|&b| v[b / 64] >> (b % 64) & 1 == 1) {
            basis.push((p, v));
            sizes.push(c.len());
        }
    }
    sizes.sort_unstable();
    Some(sizes)
}

#[test]
fn naphthalene_has_two_six_rings() {
    let m = mol("c1ccc2ccccc2c1");
    let rings = perceive_rings(&m);
    assert_eq!(rings.len(), 2);
    assert!(rings.iter().all(|r| r.len() == 6));
    assert_eq!(minimum_cycle_basis_sizes(&m, 1000), Some(vec![6, 6]));
    assert!(perceive_rings(&mol("CC")).is_empty());
    assert_eq!(perceive_rings(&mol("c1ccccc1")).len(), 1);
}

#[test]
fn ring_count_is_cycle_rank_on_corpus() {
    for (r, m) in corpus().iter().zip(corpus_molecules()) {
        let expected = m.bond_count() + m.component_count() - m.atom_count();
        assert_eq!(perceive_rings(m).len(), expected, "{} {}", r.id, r.smiles);
    }
}

#[test]
fn ring_sizes_match_minimum_cycle_basis_on_corpus() {
    let mut checked = 0;
    for (r, m) in corpus().iter().zip(corpus_molecules()) {
        let Some(want) = minimum_cycle_basis_sizes(m, 5000) else {
            continue;
        };
        let mut got: Vec<usize> = perceive_rings(m).iter().map(Vec::len).collect();
        got.sort_unstable();
        assert_eq!(got, want, "{} {}", r.id, r.smiles);
        checked += 1;
    }
    assert!(checked >= 640, "only {checked} molecules had enumerable cycles");
}

/// Counts from an external toolkit for the bundled corpus.
#[test]
fn counts_match_reference_toolkit() {
    let text =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/reference_counts.tsv")).unwrap();
    let by_id: std::collections::HashMap<&str, &Molecule> =
        corpus().iter().map(|r| r.id.as_str()).zip(corpus_molecules()).collect();
    let mut rows = 0;
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split('\t').collect();
        let m = by_id[f[0]];
        let num = |i: usize| f[i].parse::<i64>().unwrap();
        let heavy: Vec<usize> = (0..m.atom_count()).filter(|&i| !m.atom(i).is_hydrogen()).collect();
        let heavy_bonds = m
            .bonds()
            .iter()
            .filter(|b| !m.atom(b.begin).is_hydrogen() && !m.atom(b.end).is_hydrogen())
            .count();
        let total_h: i64 = heavy
            .iter()
            .map(|&i| {
                let attached = m.neighbors(i).iter().filter(|n| m.atom(n.atom).is_hydrogen()).count();
                i64::from(m.total_hydrogens(i)) + attached as i64
            })
            .sum();
        let aromatic = m.atoms().iter().filter(|a| a.aromatic).count();
        let charge: i64 = m.atoms().iter().map(|a| i64::from(a.formal_charge)).sum();
        assert_eq!(heavy.len() as i64, num(1), "{line}");
        assert_eq!(heavy_bonds as i64, num(2), "{line}");
        assert_eq!(total_h, num(3), "{line}");
        assert_eq!(aromatic as i64, num(4), "{line}");
        assert_eq!(charge, num(5), "{line}");
        assert_eq!(m.component_count() as i64, num(6), "{line}");
        rows += 1;
    }
    assert_eq!(rows, corpus().len());
}

#[test]
fn permuted_corpus_molecules_stay_isomorphic() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (r, m) in corpus().iter().zip(corpus_molecules()) {
        for _ in 0..100 {
            let p = random_permutation(m.atom_count(), &mut rng);
            assert!(graphs_isomorphic(m, &m.permuted(&p)), "{}", r.id);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hydrogen_totals_survive_permutation_and_rewrite(idx in 0usize..650, seed in any::<u64>()) {
        let m = &corpus_molecules()[idx % corpus_molecules().len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_permutation(m.atom_count(), &mut rng);
        let q = m.permuted(&p);
        for i in 0..m.atom_count() {
            prop_assert_eq!(q.total_hydrogens(p[i]), m.total_hydrogens(i));
            prop_assert_eq!(q.implicit_hydrogens(p[i]), m.implicit_hydrogens(i));
        }
        // Writing in the permuted atom order and reading back keeps every
        // hydrogen.
        let text = write_smiles(&q, false).unwrap();
        let back = parse_smiles(&text).unwrap();
        let total = |x: &Molecule| (0..x.atom_count()).map(|i| u32::from(x.total_hydrogens(i))).sum::<u32>()
            + x.atoms().iter().filter(|a| a.is_hydrogen()).count() as u32;
        prop_assert_eq!(total(&back), total(m));
        prop_assert!(graphs_isomorphic(&back, m));
    }
}
