//! Canonical atom ranking.
//!
//! Atoms start from an invariant tuple and are refined by neighbour colours
//! until the partition is stable. Remaining ties are broken by an
//! individualize-and-refine search: each member of the first non-singleton
//! cell is tried in turn, and the leaf with the lexicographically smallest
//! graph certificate wins. Automorphisms found between equal leaves prune
//! symmetric branches.

use std::cmp::Ordering;

use crate::molgraph::Molecule;

/// Leaves visited before the search settles for the best one found.
const LEAF_BUDGET: usize = 4096;

type Invariant = (u8, i8, usize, u8, bool, bool, u16);

fn invariant(mol: &Molecule, i: usize) -> Invariant {
    let a = mol.atom(i);
    (
        a.element,
        a.formal_charge,
        mol.degree(i),
        mol.total_hydrogens(i),
        a.aromatic,
        mol.is_ring_atom(i),
        a.isotope.unwrap_or(0),
    )
}

/// Dense ranks of `keys`, ordered by key.
fn dense_rank<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut r = 0;
    for k in 0..order.len() {
        if k > 0 && keys[order[k]] != keys[order[k - 1]] {
            r += 1;
        }
        ranks[order[k]] = r;
    }
    ranks
}

fn class_count(colors: &[usize]) -> usize {
    colors.iter().max().map_or(0, |m| m + 1)
}

/// Refine colours by sorted (bond order, neighbour colour) lists to a stable
/// partition. Cell order is preserved: a refined colour only ever splits.
fn refine(mol: &Molecule, mut colors: Vec<usize>) -> Vec<usize> {
    let mut classes = class_count(&colors);
    loop {
        let sigs: Vec<(usize, Vec<(usize, u8)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut nb: Vec<(usize, u8)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|n| (colors[n.atom], mol.bond(n.bond).order.code()))
                    .collect();
                nb.sort_unstable();
                (colors[i], nb)
            })
            .collect();
        colors = dense_rank(&sigs);
        let next = class_count(&colors);
        if next == classes {
            return colors;
        }
        classes = next;
    }
}

/// Certificate of a discrete colouring: atom labels in rank order followed
/// by the sorted edge list in rank space.
#[derive(PartialEq, Eq, PartialOrd, Ord, Clone)]
struct Certificate {
    labels: Vec<Invariant>,
    edges: Vec<(usize, usize, u8)>,
}

fn certificate(mol: &Molecule, ranks: &[usize]) -> Certificate {
    let mut labels = vec![(0, 0, 0, 0, false, false, 0); ranks.len()];
    for (i, &r) in ranks.iter().enumerate() {
        labels[r] = invariant(mol, i);
    }
    let mut edges: Vec<(usize, usize, u8)> = mol
        .bonds()
        .iter()
        .map(|b| {
            let (x, y) = (ranks[b.begin], ranks[b.end]);
            (x.min(y), x.max(y), b.order.code())
        })
        .collect();
    edges.sort_unstable();
    Certificate { labels, edges }
}

struct Search<'a> {
    mol: &'a Molecule,
    best: Option<(Certificate, Vec<usize>)>,
    automorphisms: Vec<Vec<usize>>,
    leaves: usize,
}

impl Search<'_> {
    fn leaf(&mut self, ranks: Vec<usize>) {
        self.leaves += 1;
        let cert = certificate(self.mol, &ranks);
        match &self.best {
            None => self.best = Some((cert, ranks)),
            Some((best_cert, best_ranks)) => match cert.cmp(best_cert) {
                Ordering::Less => self.best = Some((cert, ranks)),
                Ordering::Equal => {
                    // Atom with rank r here corresponds to atom with rank r in best.
                    let mut by_rank = vec![0; ranks.len()];
                    for (i, &r) in best_ranks.iter().enumerate() {
                        by_rank[r] = i;
                    }
                    let gamma: Vec<usize> = ranks.iter().map(|&r| by_rank[r]).collect();
                    if gamma.iter().enumerate().any(|(i, &g)| i != g) {
                        self.automorphisms.push(gamma);
                    }
                }
                Ordering::Greater => {}
            },
        }
    }

    fn explore(&mut self, colors: Vec<usize>, path: &mut Vec<usize>) {
        let n = colors.len();
        if class_count(&colors) == n {
            self.leaf(colors);
            return;
        }
        // First non-singleton cell.
        let mut sizes = vec![0usize; n];
        for &c in &colors {
            sizes[c] += 1;
        }
        let target = (0..n).find(|&c| sizes[c] > 1).unwrap();
        let members: Vec<usize> = (0..n).filter(|&i| colors[i] == target).collect();

        let mut explored: Vec<usize> = Vec::new();
        for &v in &members {
            if self.leaves >= LEAF_BUDGET {
                return;
            }
            if !explored.is_empty() && self.same_orbit(path, &explored, v) {
                continue;
            }
            let individualized: Vec<usize> = colors
                .iter()
                .enumerate()
                .map(|(i, &c)| 2 * c + usize::from(c == target && i != v))
                .collect();
            let refined = refine(self.mol, dense_rank(&individualized));
            path.push(v);
            self.explore(refined, path);
            path.pop();
            explored.push(v);
        }
    }

    /// Whether `v` shares an orbit with an explored atom under the
    /// automorphisms found so far that fix `path` pointwise.
    fn same_orbit(&self, path: &[usize], explored: &[usize], v: usize) -> bool {
        let n = self.mol.atom_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut any = false;
        for gamma in &self.automorphisms {
            if path.iter().any(|&p| gamma[p] != p) {
                continue;
            }
            any = true;
            for (x, &gx) in gamma.iter().enumerate() {
                let (a, b) = (find(&mut parent, x), find(&mut parent, gx));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        if !any {
            return false;
        }
        let rv = find(&mut parent, v);
        explored.iter().any(|&e| find(&mut parent, e) == rv)
    }
}

/// Canonical rank of every atom: a permutation of `0..n` that depends only
/// on the labelled graph, not on the input atom order.
pub fn canonical_ranks(mol: &Molecule) -> Vec<usize> {
    let n = mol.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let inv: Vec<Invariant> = (0..n).map(|i| invariant(mol, i)).collect();
    let start = refine(mol, dense_rank(&inv));
    let mut search = Search {
        mol,
        best: None,
        automorphisms: Vec::new(),
        leaves: 0,
    };
    search.explore(start, &mut Vec::new());
    search.best.expect("at least one leaf").1
}

/// Symmetry classes after refinement alone (no tie breaking); equal values
/// mean refinement could not distinguish the atoms.
pub fn symmetry_classes(mol: &Molecule) -> Vec<usize> {
    let inv: Vec<Invariant> = (0..mol.atom_count()).map(|i| invariant(mol, i)).collect();
    refine(mol, dense_rank(&inv))
}
