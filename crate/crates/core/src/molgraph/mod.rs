//! Attributed molecular graphs.
//!
//! A [`Molecule`] is an immutable simple graph of [`Atom`]s and [`Bond`]s.
//! Hydrogen counts are resolved once at construction (implicit hydrogens
//! from the valence table, plus any explicit ones) and then carried along
//! unchanged by every transformation, so permuting, kekulizing, or
//! re-aromatizing a molecule never shifts its hydrogen bookkeeping.

mod isomorphism;
mod rings;

use std::collections::HashSet;

use thiserror::Error;

use crate::elements;

pub use isomorphism::graphs_isomorphic;
pub use rings::perceive_rings;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MolError {
    #[error("unknown atomic number {0}")]
    UnknownElement(u8),
    #[error("element {0} cannot be aromatic")]
    AromaticNotAllowed(&'static str),
    #[error("bond endpoint {0} out of range")]
    AtomOutOfRange(usize),
    #[error("self-loop on atom {0}")]
    SelfLoop(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("hydrogen count list has {got} entries for {expected} atoms")]
    HydrogenCountMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Bond order in half units (aromatic = 1.5 -> 3).
    pub fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: u8,
    pub formal_charge: i8,
    /// Hydrogens written explicitly (bracket `H` count or folded `[H]` atoms).
    pub explicit_h: u8,
    pub aromatic: bool,
    pub isotope: Option<u16>,
    /// Bracket atoms never receive implicit hydrogens.
    pub bracket: bool,
}

impl Atom {
    /// An organic-subset style atom that takes implicit hydrogens.
    pub fn new(element: u8) -> Self {
        Atom {
            element,
            formal_charge: 0,
            explicit_h: 0,
            aromatic: false,
            isotope: None,
            bracket: false,
        }
    }

    pub fn aromatic(element: u8) -> Self {
        Atom {
            aromatic: true,
            ..Atom::new(element)
        }
    }

    pub fn is_hydrogen(&self) -> bool {
        self.element == elements::HYDROGEN
    }

    pub fn symbol(&self) -> &'static str {
        elements::symbol(self.element).unwrap_or("*")
    }

    fn takes_implicit_h(&self) -> bool {
        !self.bracket && elements::is_organic_subset(self.element)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub begin: usize,
    pub end: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.begin == atom {
            self.end
        } else {
            self.begin
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub atom: usize,
    pub bond: usize,
}

/// Incrementally assembles a [`Molecule`], rejecting self-loops and
/// multi-bonds as they are added.
#[derive(Debug, Default, Clone)]
pub struct MoleculeBuilder {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    pairs: HashSet<(usize, usize)>,
}

impl MoleculeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, index: usize) -> Option<&Atom> {
        self.atoms.get(index)
    }

    pub fn add_atom(&mut self, atom: Atom) -> Result<usize, MolError> {
        let symbol = elements::symbol(atom.element).ok_or(MolError::UnknownElement(atom.element))?;
        if atom.aromatic && !elements::can_be_aromatic(atom.element) {
            return Err(MolError::AromaticNotAllowed(symbol));
        }
        self.atoms.push(atom);
        Ok(self.atoms.len() - 1)
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, MolError> {
        let n = self.atoms.len();
        if a >= n {
            return Err(MolError::AtomOutOfRange(a));
        }
        if b >= n {
            return Err(MolError::AtomOutOfRange(b));
        }
        if a == b {
            return Err(MolError::SelfLoop(a));
        }
        let key = (a.min(b), a.max(b));
        if !self.pairs.insert(key) {
            return Err(MolError::DuplicateBond(key.0, key.1));
        }
        self.bonds.push(Bond {
            begin: a,
            end: b,
            order,
        });
        Ok(self.bonds.len() - 1)
    }

    pub fn has_bond(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a.min(b), a.max(b)))
    }

    /// Finish, resolving implicit hydrogens from the valence table.
    pub fn build(self) -> Molecule {
        Molecule::assemble(self.atoms, self.bonds, None)
    }

    /// Finish with caller-supplied total hydrogen counts per atom.
    pub fn build_with_hydrogens(self, hydrogens: Vec<u8>) -> Result<Molecule, MolError> {
        if hydrogens.len() != self.atoms.len() {
            return Err(MolError::HydrogenCountMismatch {
                expected: self.atoms.len(),
                got: hydrogens.len(),
            });
        }
        Ok(Molecule::assemble(self.atoms, self.bonds, Some(hydrogens)))
    }
}

#[derive(Debug, Clone)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<Neighbor>>,
    hydrogens: Vec<u8>,
    ring_bond: Vec<bool>,
    valence_valid: bool,
}

impl Molecule {
    pub fn empty() -> Self {
        Molecule::assemble(Vec::new(), Vec::new(), None)
    }

    fn assemble(atoms: Vec<Atom>, bonds: Vec<Bond>, hydrogens: Option<Vec<u8>>) -> Self {
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, b) in bonds.iter().enumerate() {
            adjacency[b.begin].push(Neighbor { atom: b.end, bond: i });
            adjacency[b.end].push(Neighbor { atom: b.begin, bond: i });
        }
        let mut mol = Molecule {
            ring_bond: Vec::new(),
            hydrogens: Vec::new(),
            atoms,
            bonds,
            adjacency,
            valence_valid: true,
        };
        mol.ring_bond = rings::ring_bonds(&mol);
        let hydrogens = hydrogens.unwrap_or_else(|| {
            (0..mol.atoms.len())
                .map(|i| mol.atoms[i].explicit_h + mol.resolve_implicit(i).0)
                .collect()
        });
        mol.hydrogens = hydrogens;
        mol.valence_valid = (0..mol.atoms.len()).all(|i| mol.valence_ok(i));
        mol
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, index: usize) -> &Atom {
        &self.atoms[index]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn bond(&self, index: usize) -> &Bond {
        &self.bonds[index]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn neighbors(&self, atom: usize) -> &[Neighbor] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn heavy_degree(&self, atom: usize) -> usize {
        self.adjacency[atom]
            .iter()
            .filter(|n| !self.atoms[n.atom].is_hydrogen())
            .count()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|n| n.atom == b).map(|n| n.bond)
    }

    /// Total hydrogens attached to an atom (explicit plus implicit).
    pub fn total_hydrogens(&self, atom: usize) -> u8 {
        self.hydrogens[atom]
    }

    pub fn hydrogen_counts(&self) -> &[u8] {
        &self.hydrogens
    }

    pub fn implicit_hydrogens(&self, atom: usize) -> u8 {
        self.hydrogens[atom].saturating_sub(self.atoms[atom].explicit_h)
    }

    pub fn is_valence_valid(&self) -> bool {
        self.valence_valid
    }

    pub fn is_ring_bond(&self, bond: usize) -> bool {
        self.ring_bond[bond]
    }

    pub fn is_ring_atom(&self, atom: usize) -> bool {
        self.adjacency[atom].iter().any(|n| self.ring_bond[n.bond])
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| !a.is_hydrogen()).count()
    }

    /// Sum of bond orders in half units.
    pub fn bond_order_half_units(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|n| self.bonds[n.bond].order.half_units())
            .sum()
    }

    /// Implicit hydrogens the valence table gives this atom in its current
    /// bonding, and whether that bonding is within the table.
    pub(crate) fn resolve_implicit(&self, atom: usize) -> (u8, bool) {
        let a = &self.atoms[atom];
        if !a.takes_implicit_h() {
            return (0, true);
        }
        implicit_from_valence(
            a.element,
            a.formal_charge,
            a.aromatic,
            self.bond_order_half_units(atom) / 2 + u32::from(a.explicit_h),
        )
    }

    fn valence_ok(&self, atom: usize) -> bool {
        let a = &self.atoms[atom];
        let Some(allowed) = elements::allowed_valences(a.element, a.formal_charge) else {
            return true;
        };
        let total = self.bond_order_half_units(atom) / 2 + u32::from(self.hydrogens[atom]);
        let max = u32::from(*allowed.last().unwrap());
        if a.aromatic {
            total <= max + 1
        } else {
            allowed.iter().any(|&v| u32::from(v) == total)
        }
    }

    /// Connected component id for every atom, numbered in order of first atom.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.atoms.len()];
        let mut next = 0;
        for start in 0..self.atoms.len() {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for n in &self.adjacency[u] {
                    if comp[n.atom] == usize::MAX {
                        comp[n.atom] = next;
                        stack.push(n.atom);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// Copy of the molecule with atom `i` moved to position `perm[i]`.
    /// Bonds are re-sorted by their new endpoints so bond order changes too.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut atoms = vec![None; self.atoms.len()];
        let mut hydrogens = vec![0u8; self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = Some(self.atoms[old].clone());
            hydrogens[new] = self.hydrogens[old];
        }
        let atoms: Vec<Atom> = atoms
            .into_iter()
            .map(|a| a.expect("perm is not a permutation"))
            .collect();
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| Bond {
                begin: perm[b.begin],
                end: perm[b.end],
                order: b.order,
            })
            .collect();
        bonds.sort_by_key(|b| (b.begin.min(b.end), b.begin.max(b.end)));
        Molecule::assemble(atoms, bonds, Some(hydrogens))
    }

    /// Rebuild with new bond orders and aromatic flags, keeping hydrogen
    /// counts fixed.
    pub(crate) fn with_orders_and_aromaticity(&self, orders: &[BondOrder], aromatic_atoms: &[bool]) -> Molecule {
        let atoms = self
            .atoms
            .iter()
            .zip(aromatic_atoms)
            .map(|(a, &ar)| Atom {
                aromatic: ar,
                ..a.clone()
            })
            .collect();
        let bonds = self
            .bonds
            .iter()
            .zip(orders)
            .map(|(b, &order)| Bond { order, ..*b })
            .collect();
        Molecule::assemble(atoms, bonds, Some(self.hydrogens.clone()))
    }

    /// Remove plain hydrogen atoms (neutral, no isotope, single-bonded to one
    /// heavy atom) and add them to their neighbour's explicit hydrogen count.
    pub fn fold_hydrogens(&self) -> Molecule {
        let foldable: Vec<bool> = (0..self.atoms.len())
            .map(|i| {
                let a = &self.atoms[i];
                a.is_hydrogen()
                    && a.formal_charge == 0
                    && a.isotope.is_none()
                    && a.explicit_h == 0
                    && self.adjacency[i].len() == 1
                    && {
                        let n = self.adjacency[i][0];
                        !self.atoms[n.atom].is_hydrogen() && self.bonds[n.bond].order == BondOrder::Single
                    }
            })
            .collect();
        if !foldable.iter().any(|&f| f) {
            return self.clone();
        }
        let mut index = vec![usize::MAX; self.atoms.len()];
        let mut atoms = Vec::new();
        let mut hydrogens = Vec::new();
        for i in 0..self.atoms.len() {
            if !foldable[i] {
                index[i] = atoms.len();
                atoms.push(self.atoms[i].clone());
                hydrogens.push(self.hydrogens[i]);
            }
        }
        for i in 0..self.atoms.len() {
            if foldable[i] {
                let heavy = index[self.adjacency[i][0].atom];
                atoms[heavy].explicit_h += 1;
                hydrogens[heavy] += 1;
            }
        }
        let bonds = self
            .bonds
            .iter()
            .filter(|b| !foldable[b.begin] && !foldable[b.end])
            .map(|b| Bond {
                begin: index[b.begin],
                end: index[b.end],
                order: b.order,
            })
            .collect();
        Molecule::assemble(atoms, bonds, Some(hydrogens))
    }
}

/// Implicit hydrogen count from the valence table.
///
/// `used` is the rounded-down bond-order sum plus explicit hydrogens.
/// Aromatic atoms take the lowest table valence; others take the smallest
/// valence that accommodates `used`. Returns `(0, false)` when no valence
/// fits.
pub(crate) fn implicit_from_valence(element: u8, charge: i8, aromatic: bool, used: u32) -> (u8, bool) {
    let Some(allowed) = elements::allowed_valences(element, charge) else {
        return (0, true);
    };
    if aromatic {
        let v = u32::from(allowed[0]);
        return (
            v.saturating_sub(used) as u8,
            used <= u32::from(*allowed.last().unwrap()) + 1,
        );
    }
    match allowed.iter().map(|&v| u32::from(v)).find(|&v| v >= used) {
        Some(v) => ((v - used) as u8, true),
        None => (0, false),
    }
}

/// Implicit hydrogens on `atom_index`.
pub fn implicit_hydrogens(mol: &Molecule, atom_index: usize) -> u8 {
    mol.implicit_hydrogens(atom_index)
}

/// Number of non-hydrogen atoms.
pub fn heavy_atom_count(mol: &Molecule) -> usize {
    mol.heavy_atom_count()
}
