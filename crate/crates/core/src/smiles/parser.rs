use std::collections::BTreeMap;

use log::warn;

use super::aromaticity::aromatize;
use super::tokenizer::{lex, token_kind, TokenKind};
use super::SmilesError;
use crate::elements;
use crate::molgraph::{Atom, BondOrder, MolError, Molecule, MoleculeBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondSymbol {
    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Single => BondOrder::Single,
            BondSymbol::Double => BondOrder::Double,
            BondSymbol::Triple => BondOrder::Triple,
            BondSymbol::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct OpenRing {
    atom: usize,
    bond: Option<BondSymbol>,
    position: usize,
}

/// Options controlling post-processing after the raw graph is read.
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Kekulize and re-perceive aromaticity so Kekulé and aromatic spellings
    /// of the same structure yield the same graph.
    pub perceive_aromaticity: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            perceive_aromaticity: true,
        }
    }
}

/// Parse a SMILES string with default options.
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    parse_smiles_with(text, ParseOptions::default())
}

pub fn parse_smiles_with(text: &str, options: ParseOptions) -> Result<Molecule, SmilesError> {
    let tokens = lex(text)?;
    let mut builder = MoleculeBuilder::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondSymbol, usize)> = None;
    let mut branches: Vec<(usize, usize)> = Vec::new();
    let mut rings: BTreeMap<u32, OpenRing> = BTreeMap::new();
    let mut stereo = false;

    let syntax = |position: usize, message: &str| SmilesError::Syntax {
        position,
        message: message.to_string(),
    };

    for &(pos, tok) in &tokens {
        let kind = token_kind(tok).ok_or_else(|| syntax(pos, "malformed token"))?;
        match kind {
            TokenKind::Atom | TokenKind::BracketAtom => {
                let atom = if kind == TokenKind::Atom {
                    organic_atom(tok)
                } else {
                    let (atom, chiral) = bracket_atom(tok, pos)?;
                    stereo |= chiral;
                    atom
                };
                let idx = builder.add_atom(atom).map_err(|e| mol_error(e, pos))?;
                match prev {
                    Some(p) => {
                        let order = resolve_bond(&builder, p, idx, pending.map(|b| b.0));
                        builder.add_bond(p, idx, order).map_err(|e| mol_error(e, pos))?;
                    }
                    None => {
                        if let Some((_, bpos)) = pending {
                            return Err(syntax(bpos, "bond has no preceding atom"));
                        }
                    }
                }
                pending = None;
                prev = Some(idx);
            }
            TokenKind::Bond => {
                if pending.is_some() {
                    return Err(syntax(pos, "two consecutive bond symbols"));
                }
                if prev.is_none() {
                    return Err(syntax(pos, "bond has no preceding atom"));
                }
                let sym = match tok {
                    "-" => BondSymbol::Single,
                    "/" | "\\" => {
                        stereo = true;
                        BondSymbol::Single
                    }
                    "=" => BondSymbol::Double,
                    "#" => BondSymbol::Triple,
                    ":" => BondSymbol::Aromatic,
                    "$" => {
                        return Err(SmilesError::Unsupported {
                            position: pos,
                            feature: "quadruple bond",
                        })
                    }
                    _ => unreachable!(),
                };
                pending = Some((sym, pos));
            }
            TokenKind::BranchOpen => {
                let p = prev.ok_or_else(|| syntax(pos, "branch has no preceding atom"))?;
                if pending.is_some() {
                    return Err(syntax(pos, "bond before '('"));
                }
                branches.push((p, pos));
            }
            TokenKind::BranchClose => {
                let (p, _) = branches
                    .pop()
                    .ok_or(SmilesError::UnmatchedParenthesis { position: pos })?;
                if let Some((_, bpos)) = pending {
                    return Err(syntax(bpos, "dangling bond before ')'"));
                }
                prev = Some(p);
            }
            TokenKind::Dot => {
                if let Some((_, bpos)) = pending {
                    return Err(syntax(bpos, "dangling bond before '.'"));
                }
                if prev.is_none() {
                    return Err(syntax(pos, "'.' has no preceding atom"));
                }
                prev = None;
            }
            TokenKind::RingClosure => {
                let atom = prev.ok_or_else(|| syntax(pos, "ring closure has no preceding atom"))?;
                let number: u32 = tok.trim_start_matches('%').parse().unwrap();
                let bond = pending.take().map(|b| b.0);
                match rings.remove(&number) {
                    Some(open) => {
                        let sym = match (open.bond, bond) {
                            (Some(a), Some(b)) if a != b => {
                                return Err(syntax(pos, "conflicting ring-closure bond symbols"))
                            }
                            (a, b) => a.or(b),
                        };
                        if open.atom == atom {
                            return Err(syntax(pos, "ring closure onto the same atom"));
                        }
                        let order = resolve_bond(&builder, open.atom, atom, sym);
                        builder
                            .add_bond(open.atom, atom, order)
                            .map_err(|e| mol_error(e, pos))?;
                    }
                    None => {
                        rings.insert(
                            number,
                            OpenRing {
                                atom,
                                bond,
                                position: pos,
                            },
                        );
                    }
                }
            }
            TokenKind::Wildcard => {
                return Err(SmilesError::Unsupported {
                    position: pos,
                    feature: "wildcard atom",
                })
            }
        }
    }
    if let Some((_, bpos)) = pending {
        return Err(syntax(bpos, "dangling bond at end of input"));
    }
    if let Some((&number, open)) = rings.iter().next() {
        return Err(SmilesError::UnclosedRing {
            ring: number,
            position: open.position,
        });
    }
    if let Some(&(_, pos)) = branches.last() {
        return Err(SmilesError::UnmatchedParenthesis { position: pos });
    }
    if stereo {
        warn!("stereochemistry in {text:?} ignored");
    }

    let mol = demote_acyclic_aromatic_bonds(builder).fold_hydrogens();
    Ok(if options.perceive_aromaticity {
        aromatize(&mol)
    } else {
        mol
    })
}

/// Aromatic bonds must lie in rings; anything else (e.g. the implicit bond
/// between two phenyl rings) is single.
fn demote_acyclic_aromatic_bonds(builder: MoleculeBuilder) -> Molecule {
    let draft = builder.clone().build();
    if !draft
        .bonds()
        .iter()
        .enumerate()
        .any(|(i, b)| b.order == BondOrder::Aromatic && !draft.is_ring_bond(i))
    {
        return draft;
    }
    let mut rebuilt = MoleculeBuilder::new();
    for a in draft.atoms() {
        rebuilt.add_atom(a.clone()).expect("atoms already validated");
    }
    for (i, b) in draft.bonds().iter().enumerate() {
        let order = if b.order == BondOrder::Aromatic && !draft.is_ring_bond(i) {
            BondOrder::Single
        } else {
            b.order
        };
        rebuilt
            .add_bond(b.begin, b.end, order)
            .expect("bonds already validated");
    }
    rebuilt.build()
}

fn resolve_bond(builder: &MoleculeBuilder, a: usize, b: usize, sym: Option<BondSymbol>) -> BondOrder {
    match sym {
        Some(s) => s.order(),
        None => {
            let aromatic = |i| builder.atom(i).is_some_and(|x: &Atom| x.aromatic);
            let both_aromatic = aromatic(a) && aromatic(b);
            if both_aromatic {
                BondOrder::Aromatic
            } else {
                BondOrder::Single
            }
        }
    }
}

fn mol_error(e: MolError, position: usize) -> SmilesError {
    match e {
        MolError::DuplicateBond(..) | MolError::SelfLoop(_) => SmilesError::Syntax {
            position,
            message: e.to_string(),
        },
        other => SmilesError::Graph {
            position,
            source: other,
        },
    }
}

fn organic_atom(tok: &str) -> Atom {
    let aromatic = tok.chars().next().unwrap().is_ascii_lowercase();
    let symbol = if aromatic {
        tok.to_ascii_uppercase()
    } else {
        tok.to_string()
    };
    let element = elements::atomic_number(&symbol).expect("organic token");
    Atom {
        aromatic,
        ..Atom::new(element)
    }
}

/// Parse `[isotope? symbol chirality? hcount? charge? class?]`.
/// Returns the atom and whether a chirality marker was present.
fn bracket_atom(tok: &str, position: usize) -> Result<(Atom, bool), SmilesError> {
    let body = &tok[1..tok.len() - 1];
    let b = body.as_bytes();
    let mut i = 0;
    let err = |offset: usize, message: &str| SmilesError::Syntax {
        position: position + 1 + offset,
        message: message.to_string(),
    };

    let digits_end = |mut j: usize| {
        while j < b.len() && b[j].is_ascii_digit() {
            j += 1;
        }
        j
    };

    let j = digits_end(i);
    let isotope = if j > i {
        let v: u16 = body[i..j].parse().map_err(|_| err(i, "isotope out of range"))?;
        if v == 0 {
            return Err(err(i, "isotope must be positive"));
        }
        Some(v)
    } else {
        None
    };
    i = j;

    let (element, aromatic, sym_len) = {
        let rest = &body[i..];
        let two = rest.get(..2);
        if let Some(t) = two.filter(|t| *t == "se" || *t == "as") {
            (elements::atomic_number(&capitalize(t)).unwrap(), true, 2)
        } else if let Some(c) = rest.chars().next().filter(|c| "cnopsb".contains(*c)) {
            (
                elements::atomic_number(&c.to_ascii_uppercase().to_string()).unwrap(),
                true,
                1,
            )
        } else if rest.starts_with(|c: char| c.is_ascii_uppercase()) {
            let two_letter = two
                .filter(|t| t.as_bytes()[1].is_ascii_lowercase())
                .and_then(elements::atomic_number);
            match two_letter {
                Some(z) => (z, false, 2),
                None => {
                    let one = &rest[..1];
                    match elements::atomic_number(one) {
                        Some(z) => (z, false, 1),
                        None => {
                            return Err(SmilesError::UnknownElement {
                                symbol: rest.chars().take(2).collect(),
                                position: position + 1 + i,
                            })
                        }
                    }
                }
            }
        } else if rest.starts_with('*') {
            return Err(SmilesError::Unsupported {
                position,
                feature: "wildcard atom",
            });
        } else {
            return Err(SmilesError::UnknownElement {
                symbol: rest.chars().take(2).collect(),
                position: position + 1 + i,
            });
        }
    };
    i += sym_len;

    let mut chiral = false;
    if i < b.len() && b[i] == b'@' {
        chiral = true;
        while i < b.len() && b[i] == b'@' {
            i += 1;
        }
        // @TH1, @AL2, @SP3, @TB12, @OH25
        if i + 1 < b.len() && b[i].is_ascii_uppercase() && b[i + 1].is_ascii_uppercase() {
            i = digits_end(i + 2);
        }
    }

    let mut hcount = 0u8;
    if i < b.len() && b[i] == b'H' {
        i += 1;
        let j = digits_end(i);
        hcount = if j > i {
            body[i..j].parse().map_err(|_| err(i, "hydrogen count out of range"))?
        } else {
            1
        };
        i = j;
    }

    let mut charge: i32 = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        let sign = if b[i] == b'+' { 1 } else { -1 };
        let sym = b[i];
        i += 1;
        let j = digits_end(i);
        if j > i {
            charge = sign * body[i..j].parse::<i32>().map_err(|_| err(i, "charge out of range"))?;
            i = j;
        } else {
            charge = sign;
            while i < b.len() && b[i] == sym {
                charge += sign;
                i += 1;
            }
        }
        if charge.abs() > 15 {
            return Err(err(i, "charge out of range"));
        }
    }

    if i < b.len() && b[i] == b':' {
        let j = digits_end(i + 1);
        if j == i + 1 {
            return Err(err(i, "atom class needs digits"));
        }
        i = j;
    }
    if i != b.len() {
        return Err(err(i, "unexpected character in bracket atom"));
    }

    Ok((
        Atom {
            element,
            formal_charge: charge as i8,
            explicit_h: hcount,
            aromatic,
            isotope,
            bracket: true,
        },
        chiral,
    ))
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::perceive_rings;

    #[test]
    fn ethane() {
        let m = parse_smiles("CC").unwrap();
        assert_eq!(m.atom_count(), 2);
        assert_eq!(m.bond_count(), 1);
        assert_eq!(m.bond(0).order, BondOrder::Single);
        assert_eq!(m.total_hydrogens(0), 3);
        assert_eq!(m.total_hydrogens(1), 3);
    }

    #[test]
    fn benzene_aromatic() {
        let m = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(m.atom_count(), 6);
        assert!(m.atoms().iter().all(|a| a.aromatic && a.element == 6));
        assert_eq!(m.bond_count(), 6);
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
        assert_eq!(perceive_rings(&m).len(), 1);
        assert!((0..6).all(|i| m.total_hydrogens(i) == 1));
    }

    #[test]
    fn unclosed_ring() {
        assert!(matches!(
            parse_smiles("C1CC"),
            Err(SmilesError::UnclosedRing { ring: 1, .. })
        ));
    }

    #[test]
    fn unmatched_parentheses() {
        assert!(matches!(
            parse_smiles("CC)C"),
            Err(SmilesError::UnmatchedParenthesis { position: 2 })
        ));
        assert!(matches!(
            parse_smiles("CC(C"),
            Err(SmilesError::UnmatchedParenthesis { position: 2 })
        ));
    }

    #[test]
    fn unknown_element() {
        assert!(matches!(parse_smiles("[Xx]"), Err(SmilesError::UnknownElement { .. })));
        assert!(matches!(parse_smiles("[Zz+]"), Err(SmilesError::UnknownElement { .. })));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_smiles("C==C") {
            Err(SmilesError::Syntax { position, .. }) => assert_eq!(position, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_smiles("=C"),
            Err(SmilesError::Syntax { position: 0, .. })
        ));
        assert!(matches!(parse_smiles("C1C1"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("C11"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("C.."), Err(SmilesError::Syntax { .. })));
    }

    #[test]
    fn bracket_atoms() {
        let m = parse_smiles("[NH4+]").unwrap();
        let a = m.atom(0);
        assert_eq!((a.element, a.formal_charge, a.explicit_h), (7, 1, 4));
        assert!(m.is_valence_valid());

        let m = parse_smiles("[13CH4]").unwrap();
        assert_eq!(m.atom(0).isotope, Some(13));
        assert_eq!(m.total_hydrogens(0), 4);

        let m = parse_smiles("[O-]C(=O)C").unwrap();
        assert_eq!(m.atom(0).formal_charge, -1);

        let m = parse_smiles("[Fe++]").unwrap();
        assert_eq!(m.atom(0).formal_charge, 2);
        let m = parse_smiles("[Cu+2]").unwrap();
        assert_eq!(m.atom(0).formal_charge, 2);
        let m = parse_smiles("[CH3:7]C").unwrap();
        assert_eq!(m.total_hydrogens(0), 3);
        let m = parse_smiles("[Sc]").unwrap();
        assert_eq!(m.atom(0).element, 21);
    }

    #[test]
    fn water_as_bracket_has_one_heavy_atom() {
        let m = parse_smiles("[OH2]").unwrap();
        assert_eq!(m.heavy_atom_count(), 1);
        assert_eq!(m.total_hydrogens(0), 2);
    }

    #[test]
    fn ring_closure_bonds() {
        let m = parse_smiles("C1CCCCC=1").unwrap();
        assert_eq!(m.bonds().iter().filter(|b| b.order == BondOrder::Double).count(), 1);
        let m = parse_smiles("C=1CCCCC1").unwrap();
        assert_eq!(m.bonds().iter().filter(|b| b.order == BondOrder::Double).count(), 1);
        assert!(parse_smiles("C=1CCCCC#1").is_err());
        let m = parse_smiles("C%10CC%10").unwrap();
        assert_eq!(m.bond_count(), 3);
    }

    #[test]
    fn stereo_is_stripped() {
        let a = parse_smiles("F/C=C/F").unwrap();
        let b = parse_smiles("FC=CF").unwrap();
        assert!(crate::molgraph::graphs_isomorphic(&a, &b));
        let c = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        let d = parse_smiles("NC(C)C(=O)O").unwrap();
        assert!(crate::molgraph::graphs_isomorphic(&c, &d));
    }

    #[test]
    fn explicit_hydrogens_fold() {
        let m = parse_smiles("[H]C([H])([H])[H]").unwrap();
        assert_eq!(m.atom_count(), 1);
        assert_eq!(m.total_hydrogens(0), 4);
        let h2 = parse_smiles("[H][H]").unwrap();
        assert_eq!(h2.atom_count(), 2);
    }

    #[test]
    fn biphenyl_link_is_single() {
        let m = parse_smiles("c1ccccc1c1ccccc1").unwrap();
        let singles = m.bonds().iter().filter(|b| b.order == BondOrder::Single).count();
        assert_eq!(singles, 1);
    }

    #[test]
    fn disconnected_fragments() {
        let m = parse_smiles("[Na+].[Cl-]").unwrap();
        assert_eq!(m.atom_count(), 2);
        assert_eq!(m.bond_count(), 0);
        assert_eq!(m.component_count(), 2);
    }

    #[test]
    fn empty_string_is_empty_molecule() {
        assert!(parse_smiles("").unwrap().is_empty());
    }

    #[test]
    fn unsupported_features() {
        assert!(matches!(parse_smiles("C*C"), Err(SmilesError::Unsupported { .. })));
        assert!(matches!(parse_smiles("C$C"), Err(SmilesError::Unsupported { .. })));
    }
}
