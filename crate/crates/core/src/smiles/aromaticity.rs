//! Hückel aromaticity perception on Kekulé structures.

use std::collections::BTreeSet;

use super::kekulize::kekulize;
use crate::elements::{self, BORON, CARBON, NITROGEN, OXYGEN};
use crate::molgraph::{perceive_rings, BondOrder, Molecule};

/// Largest fused ring system for which every connected ring subset is tried.
const MAX_SYSTEM_FOR_SUBSETS: usize = 8;

/// Pi electrons an atom donates to a ring, `None` if it cannot be aromatic.
fn pi_electrons(mol: &Molecule, i: usize) -> Option<u32> {
    let a = mol.atom(i);
    if !elements::can_be_aromatic(a.element) || !mol.is_ring_atom(i) {
        return None;
    }
    let mut double = None;
    for nb in mol.neighbors(i) {
        match mol.bond(nb.bond).order {
            BondOrder::Double if double.is_none() => double = Some(*nb),
            BondOrder::Double | BondOrder::Triple | BondOrder::Aromatic => return None,
            BondOrder::Single => {}
        }
    }
    let connections = mol.degree(i) + usize::from(mol.total_hydrogens(i));
    let charge = a.formal_charge;
    match double {
        Some(nb) if mol.is_ring_bond(nb.bond) => Some(1),
        Some(nb) => {
            // Exocyclic double bond on a ring carbon. Towards a heteroatom
            // (C=O, C=N, C=S) it gives no electrons, towards carbon one.
            let partner = mol.atom(nb.atom).element;
            match (a.element, partner) {
                (CARBON, CARBON) => Some(1),
                (CARBON, p) if elements::can_be_aromatic(p) => Some(0),
                _ => None,
            }
        }
        None => match (a.element, charge) {
            (CARBON, -1) => Some(2),
            (CARBON, 1) => Some(0),
            (BORON, 0) if connections == 3 => Some(0),
            (NITROGEN | elements::PHOSPHORUS | elements::ARSENIC, 0) if connections == 3 => Some(2),
            (NITROGEN, -1) if connections == 2 => Some(2),
            (OXYGEN | elements::SULFUR | elements::SELENIUM, 0) if connections == 2 => Some(2),
            _ => None,
        },
    }
}

fn is_huckel(electrons: u32) -> bool {
    electrons >= 2 && (electrons - 2).is_multiple_of(4)
}

/// Aromatic atom and bond flags for a molecule without aromatic bonds.
///
/// Each SSSR ring whose atoms all donate pi electrons and total `4n + 2` is
/// aromatic. Fused systems additionally test every connected union of
/// member rings, so e.g. azulene is aromatic as a whole.
pub fn perceive_aromaticity(mol: &Molecule) -> (Vec<bool>, Vec<bool>) {
    let mut atom_flags = vec![false; mol.atom_count()];
    let mut bond_flags = vec![false; mol.bond_count()];
    let electrons: Vec<Option<u32>> = (0..mol.atom_count()).map(|i| pi_electrons(mol, i)).collect();
    let rings: Vec<Vec<usize>> = perceive_rings(mol)
        .into_iter()
        .filter(|r| r.iter().all(|&a| electrons[a].is_some()))
        .collect();
    if rings.is_empty() {
        return (atom_flags, bond_flags);
    }
    let ring_bonds: Vec<BTreeSet<usize>> = rings
        .iter()
        .map(|r| {
            (0..r.len())
                .map(|k| mol.bond_between(r[k], r[(k + 1) % r.len()]).unwrap())
                .collect()
        })
        .collect();

    let mut mark = |members: &[usize]| {
        let atoms: BTreeSet<usize> = members.iter().flat_map(|&r| rings[r].iter().copied()).collect();
        let total: u32 = atoms.iter().map(|&a| electrons[a].unwrap()).sum();
        if is_huckel(total) {
            for &a in &atoms {
                atom_flags[a] = true;
            }
            for &r in members {
                for &b in &ring_bonds[r] {
                    bond_flags[b] = true;
                }
            }
        }
    };

    // Rings are fused when they share a bond.
    let n = rings.len();
    let fused = |x: usize, y: usize| !ring_bonds[x].is_disjoint(&ring_bonds[y]);
    let mut system = vec![usize::MAX; n];
    let mut systems: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if system[start] != usize::MAX {
            continue;
        }
        let id = systems.len();
        let mut members = vec![start];
        system[start] = id;
        let mut k = 0;
        while k < members.len() {
            let r = members[k];
            for other in 0..n {
                if system[other] == usize::MAX && fused(r, other) {
                    system[other] = id;
                    members.push(other);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        systems.push(members);
    }

    for members in &systems {
        for &r in members {
            mark(&[r]);
        }
        let m = members.len();
        if m == 1 {
            continue;
        }
        if m <= MAX_SYSTEM_FOR_SUBSETS {
            for mask in 1u32..(1 << m) {
                if mask.count_ones() < 2 {
                    continue;
                }
                let subset: Vec<usize> = (0..m).filter(|&k| mask >> k & 1 == 1).map(|k| members[k]).collect();
                if connected(&subset, &fused) {
                    mark(&subset);
                }
            }
        } else {
            for (x, &a) in members.iter().enumerate() {
                for &b in &members[x + 1..] {
                    if fused(a, b) {
                        mark(&[a, b]);
                    }
                }
            }
        }
    }
    (atom_flags, bond_flags)
}

fn connected(subset: &[usize], fused: &impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; subset.len()];
    seen[0] = true;
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        for j in 0..subset.len() {
            if !seen[j] && fused(subset[i], subset[j]) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Normalise aromaticity: kekulize, perceive, and mark perceived rings
/// aromatic. Atoms and bonds written aromatic in the input stay aromatic.
/// If the input cannot be kekulized it is returned unchanged.
pub fn aromatize(mol: &Molecule) -> Molecule {
    if !(0..mol.atom_count()).any(|i| mol.is_ring_atom(i)) {
        return mol.clone();
    }
    let kekule = if mol.bonds().iter().any(|b| b.order == BondOrder::Aromatic) {
        match kekulize(mol) {
            Ok(k) => k,
            Err(_) => return mol.clone(),
        }
    } else {
        mol.clone()
    };
    let (atoms, bonds) = perceive_aromaticity(&kekule);
    let orders: Vec<BondOrder> = mol
        .bonds()
        .iter()
        .zip(&bonds)
        .map(|(b, &ar)| if ar { BondOrder::Aromatic } else { b.order })
        .collect();
    let flags: Vec<bool> = mol
        .atoms()
        .iter()
        .zip(&atoms)
        .map(|(a, &ar)| a.aromatic || ar)
        .collect();
    mol.with_orders_and_aromaticity(&orders, &flags)
}
