use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::canon::canonical_ranks;
use super::kekulize::kekulize;
use super::SmilesError;
use crate::elements;
use crate::molgraph::{implicit_from_valence, BondOrder, Molecule};

#[derive(Debug, Clone, Copy, Default)]
pub struct WriteOptions {
    /// Order atoms by canonical rank instead of input index.
    pub canonical: bool,
    /// Write explicit single/double bonds instead of aromatic lowercase.
    pub kekulize: bool,
}

/// Write a SMILES string; the output re-parses to an isomorphic graph.
pub fn write_smiles(mol: &Molecule, canonical: bool) -> Result<String, SmilesError> {
    write_smiles_with(
        mol,
        WriteOptions {
            canonical,
            kekulize: false,
        },
    )
}

pub fn write_smiles_with(mol: &Molecule, options: WriteOptions) -> Result<String, SmilesError> {
    let kekulized;
    let mol = if options.kekulize && mol.atoms().iter().any(|a| a.aromatic) {
        kekulized = kekulize(mol)?;
        &kekulized
    } else {
        mol
    };
    let ranks = if options.canonical {
        canonical_ranks(mol)
    } else {
        (0..mol.atom_count()).collect()
    };
    Ok(Writer::new(mol, &ranks).write())
}

/// Canonical SMILES, the structure-identity key used throughout evaluation.
pub fn canonical_smiles(mol: &Molecule) -> String {
    Writer::new(mol, &canonical_ranks(mol)).write()
}

struct Writer<'a> {
    mol: &'a Molecule,
    ranks: &'a [usize],
    visited: Vec<bool>,
    children: Vec<Vec<(usize, usize)>>,
    /// Ring bonds per atom as (bond, partner); the earlier-visited end opens.
    ring_ends: Vec<Vec<(usize, usize)>>,
    ring_bond: Vec<bool>,
    visit_order: Vec<usize>,
}

impl<'a> Writer<'a> {
    fn new(mol: &'a Molecule, ranks: &'a [usize]) -> Self {
        let n = mol.atom_count();
        Writer {
            mol,
            ranks,
            visited: vec![false; n],
            children: vec![Vec::new(); n],
            ring_ends: vec![Vec::new(); n],
            ring_bond: vec![false; mol.bond_count()],
            visit_order: vec![usize::MAX; n],
        }
    }

    fn sorted_neighbors(&self, atom: usize) -> Vec<(usize, usize)> {
        let mut nb: Vec<(usize, usize)> = self.mol.neighbors(atom).iter().map(|n| (n.atom, n.bond)).collect();
        nb.sort_by_key(|&(a, _)| self.ranks[a]);
        nb
    }

    fn write(mut self) -> String {
        let n = self.mol.atom_count();
        let mut roots: Vec<usize> = (0..n).collect();
        roots.sort_by_key(|&i| self.ranks[i]);
        let mut out = String::new();
        let mut counter = 0;
        for root in roots {
            if self.visited[root] {
                continue;
            }
            self.discover(root, usize::MAX, &mut counter);
            if !out.is_empty() {
                out.push('.');
            }
            let mut digits = BTreeSet::new();
            let mut assigned = vec![0u32; self.mol.bond_count()];
            self.emit(root, &mut out, &mut digits, &mut assigned);
        }
        out
    }

    /// First pass: depth-first spanning tree and ring-closure bonds.
    fn discover(&mut self, root: usize, via: usize, counter: &mut usize) {
        let mut stack = vec![(root, via)];
        // Iterative pre-order DFS that visits neighbours in rank order.
        while let Some((u, via)) = stack.pop() {
            if self.visited[u] {
                // Reached twice before being expanded: this edge closes a ring.
                self.mark_ring(via);
                continue;
            }
            self.visited[u] = true;
            self.visit_order[u] = *counter;
            *counter += 1;
            if via != usize::MAX {
                let parent = self.mol.bond(via).other(u);
                self.children[parent].push((u, via));
            }
            let nbs = self.sorted_neighbors(u);
            for &(w, b) in nbs.iter().rev() {
                if b == via || self.ring_bond[b] {
                    continue;
                }
                if self.visited[w] {
                    self.mark_ring(b);
                } else {
                    stack.push((w, b));
                }
            }
        }
    }

    fn mark_ring(&mut self, bond: usize) {
        if self.ring_bond[bond] {
            return;
        }
        self.ring_bond[bond] = true;
        let b = *self.mol.bond(bond);
        self.ring_ends[b.begin].push((bond, b.end));
        self.ring_ends[b.end].push((bond, b.begin));
    }

    fn emit(&self, u: usize, out: &mut String, free: &mut BTreeSet<u32>, assigned: &mut [u32]) {
        out.push_str(&atom_token(self.mol, u));
        let mut ends = self.ring_ends[u].clone();
        // Closings (partner already written) first, then openings, each in
        // the order their partners were visited.
        ends.sort_by_key(|&(_, w)| (self.visit_order[w] > self.visit_order[u], self.visit_order[w]));
        for (bond, w) in ends {
            if self.visit_order[w] < self.visit_order[u] {
                let d = assigned[bond];
                out.push_str(bond_symbol(self.mol, bond));
                push_ring_digit(out, d);
                free.remove(&d);
            } else {
                let d = (1..).find(|d| !free.contains(d)).unwrap();
                free.insert(d);
                assigned[bond] = d;
                push_ring_digit(out, d);
            }
        }
        let children = &self.children[u];
        for (k, &(w, bond)) in children.iter().enumerate() {
            let last = k + 1 == children.len();
            if !last {
                out.push('(');
            }
            out.push_str(bond_symbol(self.mol, bond));
            self.emit(w, out, free, assigned);
            if !last {
                out.push(')');
            }
        }
    }
}

fn push_ring_digit(out: &mut String, d: u32) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn bond_symbol(mol: &Molecule, bond: usize) -> &'static str {
    let b = mol.bond(bond);
    let both_aromatic = mol.atom(b.begin).aromatic && mol.atom(b.end).aromatic;
    match b.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

/// Atom text: bare organic symbol when re-parsing would recover the same
/// hydrogen count, bracket form otherwise.
fn atom_token(mol: &Molecule, i: usize) -> String {
    let a = mol.atom(i);
    let hydrogens = mol.total_hydrogens(i);
    let symbol = a.symbol();
    let written = if a.aromatic {
        symbol.to_ascii_lowercase()
    } else {
        symbol.to_string()
    };
    let bare_ok = elements::is_organic_subset(a.element)
        && a.formal_charge == 0
        && a.isotope.is_none()
        && (!a.aromatic || matches!(a.element, 5 | 6 | 7 | 8 | 15 | 16))
        && {
            let used = mol.bond_order_half_units(i) / 2;
            implicit_from_valence(a.element, 0, a.aromatic, used).0 == hydrogens
        };
    if bare_ok {
        return written;
    }
    let mut s = String::from("[");
    if let Some(iso) = a.isotope {
        let _ = write!(s, "{iso}");
    }
    s.push_str(&written);
    match hydrogens {
        0 => {}
        1 => s.push('H'),
        h => {
            let _ = write!(s, "H{h}");
        }
    }
    match a.formal_charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => {
            let _ = write!(s, "+{c}");
        }
        c => {
            let _ = write!(s, "-{}", -c);
        }
    }
    s.push(']');
    s
}
