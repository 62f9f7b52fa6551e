//! Maximum common edge subgraph distance on heavy-atom graphs.
//!
//! The distance is `|E1| + |E2| - 2 * common`, where `common` is the largest
//! number of bonds preserved by an element-preserving partial injection of
//! atoms. The exact search assigns each atom of the smaller graph either a
//! partner or nothing, pruning with a bond-label multiset bound.

mod oracle;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::molgraph::{graphs_isomorphic, BondOrder, Molecule};

pub use oracle::{mces_oracle, OracleError, ORACLE_MAX_EDGES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BondMatch {
    /// Bond orders must agree (aromatic matches only aromatic).
    StrictOrder,
    /// Any bond matches any bond.
    AnyOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McesConfig {
    pub bond_match: BondMatch,
    /// Largest heavy-atom count on either side for which a result may be exact.
    pub max_nodes_exact: usize,
    /// Wall-clock cap per pair.
    #[serde(with = "duration_secs")]
    pub time_budget: Duration,
    /// Search nodes per pair. Unlike the wall-clock cap this limit is
    /// deterministic, so it is the one that normally binds.
    pub node_budget: u64,
}

impl Default for McesConfig {
    fn default() -> Self {
        McesConfig {
            bond_match: BondMatch::StrictOrder,
            max_nodes_exact: 20,
            time_budget: Duration::from_secs(5),
            node_budget: 50_000,
        }
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McesResult {
    pub distance: u32,
    pub common_edges: u32,
    pub exact: bool,
    pub elapsed: Duration,
}

/// Heavy-atom graph with packed edge labels.
#[derive(Debug, Clone)]
pub(crate) struct LabeledGraph {
    pub(crate) elements: Vec<u8>,
    pub(crate) edges: Vec<(usize, usize, u8)>,
    /// `bond[u][v]` is the bond class between u and v.
    pub(crate) bond: Vec<Vec<Option<u8>>>,
}

fn bond_class(order: BondOrder, mode: BondMatch) -> u8 {
    match mode {
        BondMatch::StrictOrder => order.code(),
        BondMatch::AnyOrder => 0,
    }
}

impl LabeledGraph {
    pub(crate) fn new(mol: &Molecule, mode: BondMatch) -> Self {
        let mut index = vec![usize::MAX; mol.atom_count()];
        let mut elements = Vec::new();
        for (i, a) in mol.atoms().iter().enumerate() {
            if !a.is_hydrogen() {
                index[i] = elements.len();
                elements.push(a.element);
            }
        }
        let n = elements.len();
        let mut bond = vec![vec![None; n]; n];
        let mut edges = Vec::new();
        for b in mol.bonds() {
            let (u, v) = (index[b.begin], index[b.end]);
            if u == usize::MAX || v == usize::MAX {
                continue;
            }
            let c = bond_class(b.order, mode);
            bond[u][v] = Some(c);
            bond[v][u] = Some(c);
            edges.push((u, v, c));
        }
        LabeledGraph { elements, edges, bond }
    }

    pub(crate) fn atom_count(&self) -> usize {
        self.elements.len()
    }

    pub(crate) fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn label(&self, e: usize) -> u32 {
        let (u, v, c) = self.edges[e];
        let (x, y) = (
            self.elements[u].min(self.elements[v]),
            self.elements[u].max(self.elements[v]),
        );
        u32::from(x) << 16 | u32::from(y) << 8 | u32::from(c)
    }
}

/// Size of the multiset intersection of two sorted label lists.
fn sorted_intersection(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Distance lower bound from bond-label multisets alone.
pub fn mces_lower_bound(a: &Molecule, b: &Molecule, cfg: &McesConfig) -> u32 {
    let (ga, gb) = (
        LabeledGraph::new(a, cfg.bond_match),
        LabeledGraph::new(b, cfg.bond_match),
    );
    let mut la: Vec<u32> = (0..ga.edge_count()).map(|e| ga.label(e)).collect();
    let mut lb: Vec<u32> = (0..gb.edge_count()).map(|e| gb.label(e)).collect();
    la.sort_unstable();
    lb.sort_unstable();
    (la.len() + lb.len() - 2 * sorted_intersection(&la, &lb)) as u32
}

const UNDECIDED: usize = usize::MAX;
const UNMAPPED: usize = usize::MAX - 1;

struct Search<'a> {
    g1: &'a LabeledGraph,
    g2: &'a LabeledGraph,
    nbrs1: Vec<Vec<(usize, u8)>>,
    nbrs2: Vec<Vec<(usize, u8)>>,
    /// Same-element atoms of `g2` for each atom of `g1`.
    compatible: Vec<Vec<usize>>,
    order: Vec<usize>,
    map: Vec<usize>,
    used: Vec<bool>,
    labels1: Vec<u32>,
    labels2: Vec<u32>,
    best: usize,
    nodes: u64,
    node_budget: u64,
    deadline: Instant,
    aborted: bool,
}

fn neighbor_lists(g: &LabeledGraph) -> Vec<Vec<(usize, u8)>> {
    let mut out = vec![Vec::new(); g.atom_count()];
    for &(u, v, c) in &g.edges {
        out[u].push((v, c));
        out[v].push((u, c));
    }
    out
}

impl Search<'_> {
    /// Preserved edges plus a label-multiset bound on what is still open.
    fn multiset_bound(&self, current: usize) -> usize {
        let mut r1: Vec<u32> = Vec::new();
        for (e, &(u, v, _)) in self.g1.edges.iter().enumerate() {
            let (mu, mv) = (self.map[u], self.map[v]);
            if mu == UNMAPPED || mv == UNMAPPED || (mu != UNDECIDED && mv != UNDECIDED) {
                continue;
            }
            r1.push(self.labels1[e]);
        }
        if r1.is_empty() {
            return current;
        }
        let mut r2: Vec<u32> = self
            .g2
            .edges
            .iter()
            .enumerate()
            .filter(|(_, &(x, y, _))| !self.used[x] || !self.used[y])
            .map(|(e, _)| self.labels2[e])
            .collect();
        r1.sort_unstable();
        r2.sort_unstable();
        current + sorted_intersection(&r1, &r2)
    }

    /// Twice the edges `u -> v` could still contribute: edges to mapped
    /// neighbours count 2, edges between two open atoms count 1 at each end.
    fn potential(&self, u: usize, v: usize) -> usize {
        let mut fixed = 0;
        let mut open1: Vec<(u8, u8)> = Vec::new();
        for &(w, c) in &self.nbrs1[u] {
            match self.map[w] {
                UNMAPPED => {}
                UNDECIDED => open1.push((self.g1.elements[w], c)),
                mw => {
                    if self.g2.bond[v][mw] == Some(c) {
                        fixed += 1;
                    }
                }
            }
        }
        let mut open = 0;
        if !open1.is_empty() {
            for &(x, c) in &self.nbrs2[v] {
                if self.used[x] {
                    continue;
                }
                let key = (self.g2.elements[x], c);
                if let Some(k) = open1.iter().position(|&l| l == key) {
                    open1.swap_remove(k);
                    open += 1;
                }
            }
        }
        2 * fixed + open
    }

    /// Per-atom bound: every open atom takes its best partner independently.
    fn atom_bound(&self, current: usize, depth: usize) -> usize {
        let mut twice = 0;
        for &u in &self.order[depth..] {
            twice += self.compatible[u]
                .iter()
                .filter(|&&v| !self.used[v])
                .map(|&v| self.potential(u, v))
                .max()
                .unwrap_or(0);
        }
        current + twice / 2
    }

    /// Edges gained by mapping `u` to `v` given the decided atoms.
    fn gain(&self, u: usize, v: usize) -> usize {
        self.nbrs1[u]
            .iter()
            .filter(|&&(w, c)| {
                let mw = self.map[w];
                mw < UNMAPPED && self.g2.bond[v][mw] == Some(c)
            })
            .count()
    }

    /// Partners for `u` ordered by immediate gain, then potential.
    fn candidates(&self, u: usize) -> Vec<(usize, usize)> {
        let mut c: Vec<(usize, usize, usize)> = self.compatible[u]
            .iter()
            .filter(|&&v| !self.used[v])
            .map(|&v| (self.gain(u, v), self.potential(u, v), v))
            .collect();
        c.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        c.into_iter().map(|(g, _, v)| (g, v)).collect()
    }

    fn reset(&mut self) {
        self.map.iter_mut().for_each(|m| *m = UNDECIDED);
        self.used.iter_mut().for_each(|x| *x = false);
    }

    /// Greedy completion with the first atom pinned to `seed`.
    fn greedy(&mut self, seed: usize) -> usize {
        let mut total = 0;
        for k in 0..self.order.len() {
            let u = self.order[k];
            let pick = if k == 0 {
                Some((0, seed))
            } else {
                self.candidates(u).first().copied()
            };
            match pick {
                Some((g, v)) => {
                    self.map[u] = v;
                    self.used[v] = true;
                    total += g;
                }
                None => self.map[u] = UNMAPPED,
            }
        }
        self.reset();
        total
    }

    fn explore(&mut self, depth: usize, current: usize) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes >= self.node_budget || (self.nodes.is_multiple_of(256) && Instant::now() >= self.deadline) {
            self.aborted = true;
            return;
        }
        if current > self.best {
            self.best = current;
        }
        if depth == self.order.len()
            || self.multiset_bound(current) <= self.best
            || self.atom_bound(current, depth) <= self.best
        {
            return;
        }
        let u = self.order[depth];
        for (g, v) in self.candidates(u) {
            self.map[u] = v;
            self.used[v] = true;
            self.explore(depth + 1, current + g);
            self.used[v] = false;
            self.map[u] = UNDECIDED;
            if self.aborted {
                return;
            }
        }
        self.map[u] = UNMAPPED;
        self.explore(depth + 1, current);
        self.map[u] = UNDECIDED;
    }
}

/// Atoms ordered so each one after the first in its component touches an
/// earlier one; highest degree first.
fn search_order(g: &LabeledGraph) -> Vec<usize> {
    let n = g.atom_count();
    let degree: Vec<usize> = (0..n).map(|u| g.bond[u].iter().flatten().count()).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n)
            .filter(|&u| !placed[u])
            .max_by_key(|&u| (degree[u], usize::MAX - u))
            .unwrap();
        placed[start] = true;
        order.push(start);
        let mut k = order.len() - 1;
        while k < order.len() {
            let u = order[k];
            let mut next: Vec<usize> = (0..n).filter(|&w| !placed[w] && g.bond[u][w].is_some()).collect();
            next.sort_by_key(|&w| (usize::MAX - degree[w], w));
            for w in next {
                placed[w] = true;
                order.push(w);
            }
            k += 1;
        }
    }
    order
}

/// MCES distance; exact when both graphs are within the size gate and the
/// search finishes within budget, otherwise an upper bound.
pub fn mces_distance(a: &Molecule, b: &Molecule, cfg: &McesConfig) -> McesResult {
    let start = Instant::now();
    let ga = LabeledGraph::new(a, cfg.bond_match);
    let gb = LabeledGraph::new(b, cfg.bond_match);
    let within_gate = ga.atom_count() <= cfg.max_nodes_exact && gb.atom_count() <= cfg.max_nodes_exact;
    let result = |common: usize, complete: bool| McesResult {
        distance: (ga.edge_count() + gb.edge_count() - 2 * common) as u32,
        common_edges: common as u32,
        exact: within_gate && complete,
        elapsed: start.elapsed(),
    };
    if ga.edge_count() == gb.edge_count() && graphs_isomorphic(a, b) {
        return result(ga.edge_count(), true);
    }
    // Branch over the smaller graph; the optimum does not depend on the choice.
    let key = |g: &LabeledGraph| (g.atom_count(), g.edge_count());
    let (g1, g2) = if key(&gb) < key(&ga) { (&gb, &ga) } else { (&ga, &gb) };
    let order = search_order(g1);
    let compatible = (0..g1.atom_count())
        .map(|u| {
            (0..g2.atom_count())
                .filter(|&v| g2.elements[v] == g1.elements[u])
                .collect()
        })
        .collect();
    let mut search = Search {
        g1,
        g2,
        nbrs1: neighbor_lists(g1),
        nbrs2: neighbor_lists(g2),
        compatible,
        order,
        map: vec![UNDECIDED; g1.atom_count()],
        used: vec![false; g2.atom_count()],
        labels1: (0..g1.edge_count()).map(|e| g1.label(e)).collect(),
        labels2: (0..g2.edge_count()).map(|e| g2.label(e)).collect(),
        best: 0,
        nodes: 0,
        node_budget: cfg.node_budget.max(1),
        deadline: start + cfg.time_budget,
        aborted: false,
    };
    let ceiling = search.multiset_bound(0).min(search.atom_bound(0, 0));
    if let Some(&first) = search.order.first() {
        for seed in search.compatible[first].clone() {
            let g = search.greedy(seed);
            search.best = search.best.max(g);
            if search.best == ceiling {
                break;
            }
        }
    }
    if search.best < ceiling {
        search.explore(0, 0);
    }
    result(search.best, !search.aborted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn d(a: &str, b: &str) -> McesResult {
        mces_distance(
            &parse_smiles(a).unwrap(),
            &parse_smiles(b).unwrap(),
            &McesConfig::default(),
        )
    }

    #[test]
    fn small_cases() {
        assert_eq!(d("CC", "CCC").distance, 1);
        assert_eq!(d("CC", "CCC").common_edges, 1);
        assert_eq!(d("CC", "[OH2]").distance, 1);
        let same = d("c1ccccc1O", "Oc1ccccc1");
        assert_eq!((same.distance, same.common_edges, same.exact), (0, 7, true));
        assert_eq!(d("C", "C").distance, 0);
        assert_eq!(d("CCO", "CCN").distance, 2);
    }

    #[test]
    fn bond_order_policy() {
        let (a, b) = (parse_smiles("C=C").unwrap(), parse_smiles("CC").unwrap());
        assert_eq!(mces_distance(&a, &b, &McesConfig::default()).distance, 2);
        let any = McesConfig {
            bond_match: BondMatch::AnyOrder,
            ..McesConfig::default()
        };
        assert_eq!(mces_distance(&a, &b, &any).distance, 0);
    }

    #[test]
    fn lower_bound_examples() {
        let cfg = McesConfig::default();
        let (cc, co) = (parse_smiles("CC").unwrap(), parse_smiles("CO").unwrap());
        assert_eq!(mces_lower_bound(&cc, &co, &cfg), 2);
        assert_eq!(mces_lower_bound(&cc, &cc, &cfg), 0);
    }

    #[test]
    fn size_gate_marks_inexact() {
        let cfg = McesConfig {
            max_nodes_exact: 3,
            ..McesConfig::default()
        };
        let m = parse_smiles("CCCC").unwrap();
        let r = mces_distance(&m, &m, &cfg);
        assert!(!r.exact);
        assert_eq!(r.distance, 0);
    }

    #[test]
    fn node_budget_gives_upper_bound() {
        let cfg = McesConfig {
            node_budget: 1,
            ..McesConfig::default()
        };
        let a = parse_smiles("CC(C)Cc1ccc(cc1)C(C)C(=O)O").unwrap();
        let b = parse_smiles("CC(=O)Nc1ccc(O)cc1").unwrap();
        let quick = mces_distance(&a, &b, &cfg);
        let full = mces_distance(&a, &b, &McesConfig::default());
        assert!(full.exact);
        assert!(quick.distance >= full.distance);
        if quick.exact {
            assert_eq!(quick.distance, full.distance);
        }
        assert!(mces_lower_bound(&a, &b, &cfg) <= full.distance);
    }
}
