use std::collections::VecDeque;

use thiserror::Error;

use crate::elements;
use crate::molgraph::{BondOrder, Molecule};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KekulizeError {
    #[error("aromatic atom {0} is not part of an aromatic ring")]
    NotInRing(usize),
    #[error("no alternating single/double assignment exists ({unmatched} atoms left without a double bond)")]
    NoValidAssignment { unmatched: usize },
}

/// Whether an aromatic atom must receive a double bond in the Kekulé form.
fn needs_double_bond(mol: &Molecule, atom: usize) -> bool {
    let a = mol.atom(atom);
    let Some(allowed) = elements::allowed_valences(a.element, a.formal_charge) else {
        return false;
    };
    let mut aromatic_bonds = 0i32;
    let mut other = 0i32;
    for nb in mol.neighbors(atom) {
        match mol.bond(nb.bond).order {
            BondOrder::Aromatic => aromatic_bonds += 1,
            o => other += o.half_units() as i32 / 2,
        }
    }
    let free = i32::from(allowed[0]) - i32::from(mol.total_hydrogens(atom)) - other - aromatic_bonds;
    free >= 1
}

/// Replace aromatic bonds by an alternating single/double assignment.
///
/// Atoms that need a double bond are matched along aromatic bonds with a
/// maximum-cardinality matching; matched bonds become double, the rest
/// single. Hydrogen counts are left untouched.
pub fn kekulize(mol: &Molecule) -> Result<Molecule, KekulizeError> {
    let n = mol.atom_count();
    for i in 0..n {
        if mol.atom(i).aromatic {
            let in_ring = mol
                .neighbors(i)
                .iter()
                .any(|nb| mol.bond(nb.bond).order == BondOrder::Aromatic && mol.is_ring_bond(nb.bond));
            if !in_ring {
                return Err(KekulizeError::NotInRing(i));
            }
        }
    }
    let has_aromatic_bond = mol.bonds().iter().any(|b| b.order == BondOrder::Aromatic);
    if !has_aromatic_bond {
        return Ok(mol.with_orders_and_aromaticity(
            &mol.bonds().iter().map(|b| b.order).collect::<Vec<_>>(),
            &vec![false; n],
        ));
    }

    let on_aromatic: Vec<bool> = (0..n)
        .map(|i| {
            mol.neighbors(i)
                .iter()
                .any(|nb| mol.bond(nb.bond).order == BondOrder::Aromatic)
        })
        .collect();
    let need: Vec<bool> = (0..n).map(|i| on_aromatic[i] && needs_double_bond(mol, i)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for b in mol.bonds() {
        if b.order == BondOrder::Aromatic && need[b.begin] && need[b.end] {
            adj[b.begin].push(b.end);
            adj[b.end].push(b.begin);
        }
    }
    let mate = maximum_matching(&adj);
    let unmatched = (0..n).filter(|&i| need[i] && mate[i].is_none()).count();
    if unmatched > 0 {
        return Err(KekulizeError::NoValidAssignment { unmatched });
    }
    let orders: Vec<BondOrder> = mol
        .bonds()
        .iter()
        .map(|b| match b.order {
            BondOrder::Aromatic if mate[b.begin] == Some(b.end) => BondOrder::Double,
            BondOrder::Aromatic => BondOrder::Single,
            o => o,
        })
        .collect();
    Ok(mol.with_orders_and_aromaticity(&orders, &vec![false; n]))
}

/// Edmonds' blossom algorithm. Returns each vertex's partner.
pub(crate) fn maximum_matching(adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let n = adj.len();
    let mut mate: Vec<Option<usize>> = vec![None; n];
    // Greedy start; the augmenting search finishes the job.
    for v in 0..n {
        if mate[v].is_none() {
            if let Some(&w) = adj[v].iter().find(|&&w| mate[w].is_none()) {
                mate[v] = Some(w);
                mate[w] = Some(v);
            }
        }
    }
    for root in 0..n {
        if mate[root].is_none() && !adj[root].is_empty() {
            if let Some(end) = find_augmenting_path(adj, &mate, root) {
                augment(&mut mate, end.1, end.0);
            }
        }
    }
    mate
}

fn augment(mate: &mut [Option<usize>], parent: Vec<Option<usize>>, mut v: usize) {
    loop {
        let pv = parent[v].expect("augmenting path parent");
        let next = mate[pv];
        mate[v] = Some(pv);
        mate[pv] = Some(v);
        match next {
            Some(w) => v = w,
            None => break,
        }
    }
}

fn find_augmenting_path(
    adj: &[Vec<usize>],
    mate: &[Option<usize>],
    root: usize,
) -> Option<(usize, Vec<Option<usize>>)> {
    let n = adj.len();
    let mut used = vec![false; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut base: Vec<usize> = (0..n).collect();
    used[root] = true;
    let mut queue = VecDeque::from([root]);

    while let Some(v) = queue.pop_front() {
        for &to in &adj[v] {
            if base[v] == base[to] || mate[v] == Some(to) {
                continue;
            }
            let to_is_outer = to == root || mate[to].is_some_and(|m| parent[m].is_some());
            if to_is_outer {
                let cur = lowest_common_ancestor(mate, &parent, &base, v, to);
                let mut blossom = vec![false; n];
                mark_path(mate, &mut parent, &base, &mut blossom, v, cur, to);
                mark_path(mate, &mut parent, &base, &mut blossom, to, cur, v);
                for i in 0..n {
                    if blossom[base[i]] {
                        base[i] = cur;
                        if !used[i] {
                            used[i] = true;
                            queue.push_back(i);
                        }
                    }
                }
            } else if parent[to].is_none() {
                parent[to] = Some(v);
                match mate[to] {
                    None => return Some((to, parent)),
                    Some(m) => {
                        used[m] = true;
                        queue.push_back(m);
                    }
                }
            }
        }
    }
    None
}

fn lowest_common_ancestor(
    mate: &[Option<usize>],
    parent: &[Option<usize>],
    base: &[usize],
    mut a: usize,
    mut b: usize,
) -> usize {
    let mut seen = vec![false; mate.len()];
    loop {
        a = base[a];
        seen[a] = true;
        match mate[a] {
            None => break,
            Some(m) => a = parent[m].expect("outer vertex has parent"),
        }
    }
    loop {
        b = base[b];
        if seen[b] {
            return b;
        }
        b = parent[mate[b].expect("matched")].expect("outer vertex has parent");
    }
}

fn mark_path(
    mate: &[Option<usize>],
    parent: &mut [Option<usize>],
    base: &[usize],
    blossom: &mut [bool],
    mut v: usize,
    b: usize,
    mut child: usize,
) {
    while base[v] != b {
        let m = mate[v].expect("matched");
        blossom[base[v]] = true;
        blossom[base[m]] = true;
        parent[v] = Some(child);
        child = m;
        v = parent[m].expect("outer vertex has parent");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::{parse_smiles_with, ParseOptions};

    fn raw(s: &str) -> Molecule {
        parse_smiles_with(
            s,
            ParseOptions {
                perceive_aromaticity: false,
            },
        )
        .unwrap()
    }

    fn doubles(m: &Molecule) -> usize {
        m.bonds().iter().filter(|b| b.order == BondOrder::Double).count()
    }

    #[test]
    fn benzene_alternates() {
        let k = kekulize(&raw("c1ccccc1")).unwrap();
        assert_eq!(doubles(&k), 3);
        assert_eq!(k.bonds().iter().filter(|b| b.order == BondOrder::Single).count(), 3);
        for i in 0..6 {
            assert_eq!(k.total_hydrogens(i), 1);
            let d = k
                .neighbors(i)
                .iter()
                .filter(|nb| k.bond(nb.bond).order == BondOrder::Double)
                .count();
            assert_eq!(d, 1);
        }
        assert!(k.atoms().iter().all(|a| !a.aromatic));
        assert!(k.is_valence_valid());
    }

    #[test]
    fn pyridine_and_pyrrole() {
        let k = kekulize(&raw("c1ccncc1")).unwrap();
        assert_eq!(doubles(&k), 3);
        assert!(k.is_valence_valid());
        let k = kekulize(&raw("c1cc[nH]c1")).unwrap();
        assert_eq!(doubles(&k), 2);
        assert!(k.is_valence_valid());
    }

    #[test]
    fn fused_systems() {
        for s in [
            "c1ccc2ccccc2c1",
            "c1ccc2[nH]ccc2c1",
            "c1ccc2c(c1)ccc1ccccc12",
            "c1cccc2cccc2c1",
            "Cc1ccc(-c2ccccn2)cc1",
        ] {
            let k = kekulize(&raw(s)).unwrap_or_else(|e| panic!("{s}: {e}"));
            assert!(k.is_valence_valid(), "{s}");
        }
    }

    #[test]
    fn lone_aromatic_atom_fails() {
        assert!(matches!(kekulize(&raw("c")), Err(KekulizeError::NotInRing(0))));
    }

    #[test]
    fn odd_ring_without_donor_fails() {
        assert!(matches!(
            kekulize(&raw("c1cccc1")),
            Err(KekulizeError::NoValidAssignment { .. })
        ));
    }

    #[test]
    fn blossom_handles_odd_cycles() {
        // Pentagon with a pendant: perfect matching needs the blossom step.
        let adj = vec![vec![1, 4, 5], vec![0, 2], vec![1, 3], vec![2, 4], vec![3, 0], vec![0]];
        let mut mate = vec![None; 6];
        // Force the bad greedy start the blossom search must recover from.
        mate[0] = Some(1);
        mate[1] = Some(0);
        mate[2] = Some(3);
        mate[3] = Some(2);
        let mut m = mate.clone();
        for root in 0..6 {
            if m[root].is_none() {
                if let Some((end, parent)) = find_augmenting_path(&adj, &m, root) {
                    augment(&mut m, parent, end);
                }
            }
        }
        assert_eq!(m.iter().filter(|x| x.is_none()).count(), 0);
        assert_eq!(maximum_matching(&adj).iter().filter(|x| x.is_none()).count(), 0);
    }
}
