//! Exhaustive MCES by edge-subset enumeration, for cross-checking the
//! branch-and-bound search on small graphs.

use std::time::Instant;

use thiserror::Error;

use super::{LabeledGraph, McesConfig, McesResult};
use crate::molgraph::Molecule;

pub const ORACLE_MAX_EDGES: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("oracle limited to {ORACLE_MAX_EDGES} bonds per molecule, got {0}")]
pub struct OracleError(pub usize);

/// Whether the edges of `g1` selected by `mask` embed into `g2`: an
/// injective, element-preserving map of their endpoints sending every
/// selected edge to an edge of `g2` with the same bond class.
fn embeds(g1: &LabeledGraph, mask: u32, g2: &LabeledGraph) -> bool {
    let edges: Vec<(usize, usize, u8)> = (0..g1.edge_count())
        .filter(|e| mask >> e & 1 == 1)
        .map(|e| g1.edges[e])
        .collect();
    let mut atoms: Vec<usize> = edges.iter().flat_map(|&(u, v, _)| [u, v]).collect();
    atoms.sort_unstable();
    atoms.dedup();
    let mut image = vec![usize::MAX; g1.atom_count()];
    let mut used = vec![false; g2.atom_count()];
    assign(0, &atoms, &edges, g1, g2, &mut image, &mut used)
}

fn assign(
    k: usize,
    atoms: &[usize],
    edges: &[(usize, usize, u8)],
    g1: &LabeledGraph,
    g2: &LabeledGraph,
    image: &mut [usize],
    used: &mut [bool],
) -> bool {
    if k == atoms.len() {
        return edges.iter().all(|&(u, v, c)| g2.bond[image[u]][image[v]] == Some(c));
    }
    let u = atoms[k];
    for v in 0..g2.atom_count() {
        if used[v] || g2.elements[v] != g1.elements[u] {
            continue;
        }
        image[u] = v;
        used[v] = true;
        if assign(k + 1, atoms, edges, g1, g2, image, used) {
            return true;
        }
        used[v] = false;
        image[u] = usize::MAX;
    }
    false
}

/// Exact MCES by trying every bond subset of `a`, largest first.
pub fn mces_oracle(a: &Molecule, b: &Molecule, cfg: &McesConfig) -> Result<McesResult, OracleError> {
    let start = Instant::now();
    let ga = LabeledGraph::new(a, cfg.bond_match);
    let gb = LabeledGraph::new(b, cfg.bond_match);
    for g in [&ga, &gb] {
        if g.edge_count() > ORACLE_MAX_EDGES {
            return Err(OracleError(g.edge_count()));
        }
    }
    let m = ga.edge_count();
    let mut masks: Vec<u32> = (0..1u32 << m).collect();
    masks.sort_by_key(|x| std::cmp::Reverse(x.count_ones()));
    let common = masks
        .into_iter()
        .find(|&mask| embeds(&ga, mask, &gb))
        .map_or(0, u32::count_ones);
    Ok(McesResult {
        distance: (ga.edge_count() + gb.edge_count()) as u32 - 2 * common,
        common_edges: common,
        exact: true,
        elapsed: start.elapsed(),
    })
}
