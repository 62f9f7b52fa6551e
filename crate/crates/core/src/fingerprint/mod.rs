//! Morgan circular fingerprints, probability-fingerprint thresholding and
//! Tanimoto similarity.
//!
//! Environment identifiers are 64-bit FNV-1a hashes over a fixed
//! little-endian serialization, so bit patterns are stable across platforms
//! but are not compatible with other toolkits' Morgan bit spaces.

mod io;

use std::collections::HashSet;

use thiserror::Error;

use crate::molgraph::Molecule;

pub use io::{read_records, write_record, FingerprintRecord, Payload, RecordError};

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_WIDTH: usize = 4096;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Identifier of this generator's bit space. Fingerprint files carry it so
/// files from different generators are never mixed in one run.
pub fn generator_id(radius: u32, width: usize) -> String {
    format!("fp2mol-morgan-fnv1a64-v1/r{radius}/w{width}")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FingerprintError {
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("width must be positive")]
    ZeroWidth,
    #[error("bit index {index} out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },
    #[error("on-bit indices must be strictly increasing (at position {0})")]
    NotIncreasing(usize),
    #[error("probability {value} at index {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },
    #[error("expected {expected} probabilities, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Fixed-width bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    width: usize,
    words: Vec<u64>,
}

impl Fingerprint {
    pub fn new(width: usize) -> Self {
        Fingerprint {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn from_onbits(onbits: &OnBitSequence, width: usize) -> Result<Self, FingerprintError> {
        let mut f = Fingerprint::new(width);
        for &i in onbits.indices() {
            let i = i as usize;
            if i >= width {
                return Err(FingerprintError::IndexOutOfRange { index: i, width });
            }
            f.set(i);
        }
        Ok(f)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.width, "bit {i} out of range");
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.width && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(k * 64 + b)
            })
        })
    }

    /// Little-endian packed bits, `ceil(width / 8)` bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.width.div_ceil(8));
        out
    }

    /// Real-valued view with probabilities 0 and 1.
    pub fn as_probs(&self) -> ProbFingerprint {
        ProbFingerprint {
            probs: (0..self.width).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Per-bit probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbFingerprint {
    probs: Vec<f64>,
}

impl ProbFingerprint {
    pub fn new(probs: Vec<f64>) -> Result<Self, FingerprintError> {
        if probs.is_empty() {
            return Err(FingerprintError::ZeroWidth);
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
            return Err(FingerprintError::ProbabilityOutOfRange { index, value });
        }
        Ok(ProbFingerprint { probs })
    }

    pub fn width(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Strictly increasing on-bit indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct OnBitSequence {
    indices: Vec<u32>,
}

impl OnBitSequence {
    pub fn new(indices: Vec<u32>, width: usize) -> Result<Self, FingerprintError> {
        for (k, pair) in indices.windows(2).enumerate() {
            if pair[0] >= pair[1] {
                return Err(FingerprintError::NotIncreasing(k + 1));
            }
        }
        if let Some(&last) = indices.last() {
            if last as usize >= width {
                return Err(FingerprintError::IndexOutOfRange {
                    index: last as usize,
                    width,
                });
            }
        }
        Ok(OnBitSequence { indices })
    }

    pub fn empty() -> Self {
        OnBitSequence::default()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// One atom-centred environment that survived deduplication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Environment {
    pub atom: usize,
    pub radius: u32,
    pub id: u64,
    /// Sorted bond indices covered by the environment.
    pub bonds: Vec<usize>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(FNV_OFFSET)
    }

    fn bytes(&mut self, data: &[u8]) {
        for &b in data {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }
}

/// FNV-1a 64 of a byte string.
pub fn fnv1a64(data: &[u8]) -> u64 {
    let mut h = Fnv::new();
    h.bytes(data);
    h.0
}

fn atom_hash(mol: &Molecule, i: usize) -> u64 {
    let a = mol.atom(i);
    let explicit_h_atoms = mol
        .neighbors(i)
        .iter()
        .filter(|n| mol.atom(n.atom).is_hydrogen())
        .count() as u32;
    let mut h = Fnv::new();
    h.bytes(&[a.element]);
    h.bytes(&(mol.heavy_degree(i) as u32).to_le_bytes());
    h.bytes(&i32::from(a.formal_charge).to_le_bytes());
    h.bytes(&(u32::from(mol.total_hydrogens(i)) + explicit_h_atoms).to_le_bytes());
    h.bytes(&[u8::from(a.aromatic), u8::from(mol.is_ring_atom(i))]);
    h.0
}

/// All environments up to `radius` after bond-set deduplication, ordered
/// by radius. Hydrogen atoms are not environment centres.
pub fn raw_environments(mol: &Molecule, radius: u32) -> Vec<Environment> {
    let heavy: Vec<usize> = (0..mol.atom_count()).filter(|&i| !mol.atom(i).is_hydrogen()).collect();
    let mut ids = vec![0u64; mol.atom_count()];
    let mut bondsets: Vec<Vec<usize>> = vec![Vec::new(); mol.atom_count()];
    let mut out = Vec::new();
    for &i in &heavy {
        ids[i] = atom_hash(mol, i);
        out.push(Environment {
            atom: i,
            radius: 0,
            id: ids[i],
            bonds: Vec::new(),
        });
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::from([Vec::new()]);
    for r in 1..=radius {
        let mut next_ids = ids.clone();
        let mut next_sets = bondsets.clone();
        for &i in &heavy {
            let mut pairs: Vec<(u8, u64)> = Vec::new();
            let mut set = bondsets[i].clone();
            for nb in mol.neighbors(i) {
                if mol.atom(nb.atom).is_hydrogen() {
                    continue;
                }
                pairs.push((mol.bond(nb.bond).order.code(), ids[nb.atom]));
                set.push(nb.bond);
                set.extend_from_slice(&bondsets[nb.atom]);
            }
            pairs.sort_unstable();
            set.sort_unstable();
            set.dedup();
            let mut h = Fnv::new();
            h.bytes(&r.to_le_bytes());
            h.bytes(&ids[i].to_le_bytes());
            for (order, id) in pairs {
                h.bytes(&[order]);
                h.bytes(&id.to_le_bytes());
            }
            next_ids[i] = h.0;
            next_sets[i] = set;
        }
        // Same bond set twice: keep the smallest identifier.
        let mut layer: Vec<(&Vec<usize>, u64, usize)> =
            heavy.iter().map(|&i| (&next_sets[i], next_ids[i], i)).collect();
        layer.sort_unstable();
        for (set, id, atom) in layer {
            if seen.insert(set.clone()) {
                out.push(Environment {
                    atom,
                    radius: r,
                    id,
                    bonds: set.clone(),
                });
            }
        }
        ids = next_ids;
        bondsets = next_sets;
    }
    out
}

/// Morgan fingerprint folded to `width` bits.
pub fn morgan_fingerprint(mol: &Molecule, radius: u32, width: usize) -> Fingerprint {
    assert!(width >= 1, "fingerprint width must be positive");
    let mut f = Fingerprint::new(width);
    for env in raw_environments(mol, radius) {
        f.set((env.id % width as u64) as usize);
    }
    f
}

/// `|a & b| / |a | b|`; two empty fingerprints score 0.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.width != b.width {
        return Err(FingerprintError::WidthMismatch(a.width, b.width));
    }
    let (mut both, mut either) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        both += (x & y).count_ones();
        either += (x | y).count_ones();
    }
    Ok(if either == 0 {
        0.0
    } else {
        f64::from(both) / f64::from(either)
    })
}

/// Indices with probability `>= t`, ascending.
pub fn threshold_onbits(p: &ProbFingerprint, t: f64) -> OnBitSequence {
    OnBitSequence {
        indices: p
            .probs
            .iter()
            .enumerate()
            .filter(|(_, &x)| x >= t)
            .map(|(i, _)| i as u32)
            .collect(),
    }
}

pub fn fingerprint_to_onbits(f: &Fingerprint) -> OnBitSequence {
    OnBitSequence {
        indices: f.iter_ones().map(|i| i as u32).collect(),
    }
}
