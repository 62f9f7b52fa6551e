use std::collections::{HashSet, VecDeque};

use super::Molecule;

/// Bonds that lie on at least one cycle (i.e. are not bridges).
pub(super) fn ring_bonds(mol: &Molecule) -> Vec<bool> {
    let n = mol.atom_count();
    let mut ring = vec![true; mol.bond_count()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut time = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (atom, bond used to enter, next neighbour position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = time;
        low[root] = time;
        time += 1;
        while let Some(top) = stack.last_mut() {
            let (u, via, pos) = *top;
            if pos < mol.neighbors(u).len() {
                top.2 += 1;
                let nb = mol.neighbors(u)[pos];
                if nb.bond == via {
                    continue;
                }
                if disc[nb.atom] == usize::MAX {
                    disc[nb.atom] = time;
                    low[nb.atom] = time;
                    time += 1;
                    stack.push((nb.atom, nb.bond, 0));
                } else {
                    low[u] = low[u].min(disc[nb.atom]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        ring[via] = false;
                    }
                }
            }
        }
    }
    ring
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct EdgeSet(Vec<u64>);

impl EdgeSet {
    fn new(bits: usize) -> Self {
        EdgeSet(vec![0; bits.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn xor(&mut self, other: &EdgeSet) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn lowest(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }
}

struct Candidate {
    atoms: Vec<usize>,
    edges: EdgeSet,
}

/// Smallest set of smallest rings.
///
/// Candidate cycles are generated Horton-style (a shortest-path tree from
/// every ring atom closed by every ring bond), sorted by size, and kept when
/// independent over GF(2) until the cycle rank `|E| - |V| + components` is
/// reached. Each ring is returned as a cyclic atom sequence.
pub fn perceive_rings(mol: &Molecule) -> Vec<Vec<usize>> {
    let rank = (mol.bond_count() + mol.component_count()).saturating_sub(mol.atom_count());
    if rank == 0 {
        return Vec::new();
    }
    let n = mol.atom_count();
    let m = mol.bond_count();
    let ring_atom: Vec<bool> = (0..n).map(|i| mol.is_ring_atom(i)).collect();

    let mut seen: HashSet<EdgeSet> = HashSet::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    for root in (0..n).filter(|&i| ring_atom[i]) {
        // BFS restricted to ring bonds.
        let mut parent = vec![usize::MAX; n];
        let mut parent_bond = vec![usize::MAX; n];
        let mut dist = vec![usize::MAX; n];
        dist[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for nb in mol.neighbors(u) {
                if mol.is_ring_bond(nb.bond) && dist[nb.atom] == usize::MAX {
                    dist[nb.atom] = dist[u] + 1;
                    parent[nb.atom] = u;
                    parent_bond[nb.atom] = nb.bond;
                    queue.push_back(nb.atom);
                }
            }
        }
        let path = |mut v: usize| {
            let mut p = vec![v];
            while v != root {
                v = parent[v];
                p.push(v);
            }
            p.reverse();
            p
        };
        for (bi, bond) in mol.bonds().iter().enumerate() {
            if !mol.is_ring_bond(bi) {
                continue;
            }
            let (x, y) = (bond.begin, bond.end);
            if dist[x] == usize::MAX || dist[y] == usize::MAX {
                continue;
            }
            if parent_bond[x] == bi || parent_bond[y] == bi {
                continue;
            }
            let px = path(x);
            let py = path(y);
            let shared: HashSet<usize> = px[1..].iter().copied().collect();
            if py[1..].iter().any(|a| shared.contains(a)) {
                continue;
            }
            let mut edges = EdgeSet::new(m);
            edges.set(bi);
            for w in px.windows(2).chain(py.windows(2)) {
                edges.set(mol.bond_between(w[0], w[1]).unwrap());
            }
            if !seen.insert(edges.clone()) {
                continue;
            }
            let mut atoms = px;
            atoms.extend(py[1..].iter().rev());
            candidates.push(Candidate { atoms, edges });
        }
    }
    candidates.sort_by(|a, b| {
        a.atoms.len().cmp(&b.atoms.len()).then_with(|| {
            let mut sa = a.atoms.clone();
            let mut sb = b.atoms.clone();
            sa.sort_unstable();
            sb.sort_unstable();
            sa.cmp(&sb)
        })
    });

    // Basis rows have pairwise distinct lowest bits.
    let mut basis: Vec<(usize, EdgeSet)> = Vec::new();
    let mut rings = Vec::new();
    for cand in candidates {
        let mut v = cand.edges.clone();
        loop {
            let Some(p) = v.lowest() else { break };
            match basis.iter().find(|(piv, _)| *piv == p) {
                Some((_, row)) => v.xor(row),
                None => break,
            }
        }
        if let Some(p) = v.lowest() {
            basis.push((p, v));
            rings.push(cand.atoms);
            if rings.len() == rank {
                break;
            }
        }
    }
    rings
}
