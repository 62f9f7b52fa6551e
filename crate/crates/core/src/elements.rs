//! Periodic table lookups and the valence model used for implicit hydrogens.

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",
    "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce",
    "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir",
    "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc",
    "Lv", "Ts", "Og",
];

pub const HYDROGEN: u8 = 1;
pub const BORON: u8 = 5;
pub const CARBON: u8 = 6;
pub const NITROGEN: u8 = 7;
pub const OXYGEN: u8 = 8;
pub const PHOSPHORUS: u8 = 15;
pub const SULFUR: u8 = 16;
pub const ARSENIC: u8 = 33;
pub const SELENIUM: u8 = 34;

/// Symbol for an atomic number, `None` outside 1..=118.
pub fn symbol(atomic_number: u8) -> Option<&'static str> {
    SYMBOLS.get(usize::from(atomic_number).checked_sub(1)?).copied()
}

/// Atomic number for a capitalised element symbol.
pub fn atomic_number(symbol: &str) -> Option<u8> {
    SYMBOLS.iter().position(|s| *s == symbol).map(|i| (i + 1) as u8)
}

/// Elements that may be written without brackets and receive implicit hydrogens.
pub fn is_organic_subset(atomic_number: u8) -> bool {
    matches!(atomic_number, 5 | 6 | 7 | 8 | 9 | 15 | 16 | 17 | 35 | 53)
}

/// Elements allowed to carry the aromatic flag.
pub fn can_be_aromatic(atomic_number: u8) -> bool {
    matches!(
        atomic_number,
        BORON | CARBON | NITROGEN | OXYGEN | PHOSPHORUS | SULFUR | SELENIUM | ARSENIC
    )
}

/// Number of valence electrons and period for the main-group elements the
/// valence model covers.
fn main_group(atomic_number: u8) -> Option<(i32, u8)> {
    Some(match atomic_number {
        5 => (3, 2),
        6 => (4, 2),
        7 => (5, 2),
        8 => (6, 2),
        9 => (7, 2),
        14 => (4, 3),
        15 => (5, 3),
        16 => (6, 3),
        17 => (7, 3),
        32 => (4, 4),
        33 => (5, 4),
        34 => (6, 4),
        35 => (7, 4),
        52 => (6, 5),
        53 => (7, 5),
        _ => return None,
    })
}

/// Allowed valences for an element with a formal charge, ascending.
///
/// Neutral organic-subset values follow the usual SMILES table
/// (B 3, C 4, N 3, O 2, P 3/5, S 2/4/6, halogens 1). Charged atoms use the
/// isoelectronic neighbour (N+ like C, O- like F, C- like N, ...). Returns
/// `None` for elements outside the model; those are never valence-checked.
pub fn allowed_valences(atomic_number: u8, charge: i8) -> Option<Vec<u8>> {
    if atomic_number == HYDROGEN {
        return match charge {
            0 => Some(vec![1]),
            1 | -1 => Some(vec![0]),
            _ => None,
        };
    }
    let (electrons, period) = main_group(atomic_number)?;
    let e = electrons - i32::from(charge);
    if !(1..=7).contains(&e) {
        return None;
    }
    let base = if e <= 4 { e } else { 8 - e };
    let mut out = vec![base as u8];
    // Expanded octets (P 5, S 4/6) for period >= 3; halogens stay at 1.
    if period >= 3 && (5..=6).contains(&e) {
        let mut v = base + 2;
        while v <= e {
            out.push(v as u8);
            v += 2;
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbols_round_trip() {
        for z in 1..=118u8 {
            let s = symbol(z).unwrap();
            assert_eq!(atomic_number(s), Some(z));
        }
        assert_eq!(symbol(0), None);
        assert_eq!(symbol(119), None);
        assert_eq!(atomic_number("Xx"), None);
    }

    #[test]
    fn organic_valences() {
        assert_eq!(allowed_valences(5, 0).unwrap(), vec![3]);
        assert_eq!(allowed_valences(6, 0).unwrap(), vec![4]);
        assert_eq!(allowed_valences(7, 0).unwrap(), vec![3]);
        assert_eq!(allowed_valences(8, 0).unwrap(), vec![2]);
        assert_eq!(allowed_valences(15, 0).unwrap(), vec![3, 5]);
        assert_eq!(allowed_valences(16, 0).unwrap(), vec![2, 4, 6]);
        for halogen in [9, 17, 35, 53] {
            assert_eq!(allowed_valences(halogen, 0).unwrap(), vec![1]);
        }
    }

    #[test]
    fn charged_valences() {
        assert_eq!(allowed_valences(7, 1).unwrap(), vec![4]);
        assert_eq!(allowed_valences(8, -1).unwrap(), vec![1]);
        assert_eq!(allowed_valences(8, 1).unwrap(), vec![3]);
        assert_eq!(allowed_valences(6, -1).unwrap(), vec![3]);
        assert_eq!(allowed_valences(5, -1).unwrap(), vec![4]);
        assert_eq!(allowed_valences(26, 2), None);
    }
}
