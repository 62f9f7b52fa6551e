use std::collections::HashMap;

use super::Molecule;

type Label = (u8, i8, Option<u16>, bool, u8, usize);

fn atom_label(mol: &Molecule, i: usize) -> Label {
    let a = mol.atom(i);
    (
        a.element,
        a.formal_charge,
        a.isotope,
        a.aromatic,
        mol.total_hydrogens(i),
        mol.degree(i),
    )
}

/// Colour refinement run jointly over both graphs so colours are comparable.
fn joint_colors(a: &Molecule, b: &Molecule) -> (Vec<usize>, Vec<usize>) {
    let mols = [a, b];
    let mut colors: Vec<Vec<usize>> = {
        let labels: Vec<Vec<Label>> = mols
            .iter()
            .map(|m| (0..m.atom_count()).map(|i| atom_label(m, i)).collect())
            .collect();
        let mut all: Vec<&Label> = labels.iter().flatten().collect();
        all.sort();
        all.dedup();
        let index: HashMap<&Label, usize> = all.into_iter().enumerate().map(|(i, l)| (l, i)).collect();
        labels.iter().map(|ls| ls.iter().map(|l| index[l]).collect()).collect()
    };
    let mut classes = colors.iter().flatten().max().map_or(0, |m| m + 1);
    loop {
        let sigs: Vec<Vec<(usize, Vec<(u8, usize)>)>> = mols
            .iter()
            .zip(&colors)
            .map(|(m, col)| {
                (0..m.atom_count())
                    .map(|i| {
                        let mut nb: Vec<(u8, usize)> = m
                            .neighbors(i)
                            .iter()
                            .map(|n| (m.bond(n.bond).order.code(), col[n.atom]))
                            .collect();
                        nb.sort_unstable();
                        (col[i], nb)
                    })
                    .collect()
            })
            .collect();
        let mut all: Vec<&(usize, Vec<(u8, usize)>)> = sigs.iter().flatten().collect();
        all.sort();
        all.dedup();
        let next = all.len();
        let index: HashMap<&(usize, Vec<(u8, usize)>), usize> =
            all.into_iter().enumerate().map(|(i, s)| (s, i)).collect();
        colors = sigs.iter().map(|ss| ss.iter().map(|s| index[s]).collect()).collect();
        if next == classes {
            break;
        }
        classes = next;
    }
    let cb = colors.pop().unwrap();
    let ca = colors.pop().unwrap();
    (ca, cb)
}

/// Exact structural equality: a bijection of atoms preserving element,
/// charge, isotope, aromaticity, hydrogen count and bond orders.
pub fn graphs_isomorphic(a: &Molecule, b: &Molecule) -> bool {
    if a.atom_count() != b.atom_count() || a.bond_count() != b.bond_count() {
        return false;
    }
    let n = a.atom_count();
    if n == 0 {
        return true;
    }
    let (ca, cb) = joint_colors(a, b);
    let mut hist: HashMap<usize, (usize, usize)> = HashMap::new();
    for &c in &ca {
        hist.entry(c).or_default().0 += 1;
    }
    for &c in &cb {
        hist.entry(c).or_default().1 += 1;
    }
    if hist.values().any(|(x, y)| x != y) {
        return false;
    }

    // Match order: grow from already-ordered atoms, preferring small classes.
    let class_size = |i: usize| hist[&ca[i]].0;
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let frontier = (0..n)
            .filter(|&i| !placed[i] && a.neighbors(i).iter().any(|nb| placed[nb.atom]))
            .min_by_key(|&i| (class_size(i), i));
        let next = frontier.unwrap_or_else(|| {
            (0..n)
                .filter(|&i| !placed[i])
                .min_by_key(|&i| (class_size(i), i))
                .unwrap()
        });
        placed[next] = true;
        order.push(next);
    }

    let mut by_color: HashMap<usize, Vec<usize>> = HashMap::new();
    for (j, &c) in cb.iter().enumerate() {
        by_color.entry(c).or_default().push(j);
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    extend(a, b, &order, 0, &ca, &by_color, &mut map, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    a: &Molecule,
    b: &Molecule,
    order: &[usize],
    depth: usize,
    ca: &[usize],
    by_color: &HashMap<usize, Vec<usize>>,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&u) = order.get(depth) else {
        return true;
    };
    let mapped_nb: Vec<(usize, u8)> = a
        .neighbors(u)
        .iter()
        .filter(|nb| map[nb.atom] != usize::MAX)
        .map(|nb| (map[nb.atom], a.bond(nb.bond).order.code()))
        .collect();
    for &v in &by_color[&ca[u]] {
        if used[v] {
            continue;
        }
        let v_mapped = b.neighbors(v).iter().filter(|nb| used[nb.atom]).count();
        if v_mapped != mapped_nb.len() {
            continue;
        }
        let consistent = mapped_nb
            .iter()
            .all(|&(w, order)| b.bond_between(v, w).is_some_and(|bi| b.bond(bi).order.code() == order));
        if !consistent {
            continue;
        }
        map[u] = v;
        used[v] = true;
        if extend(a, b, order, depth + 1, ca, by_color, map, used) {
            return true;
        }
        map[u] = usize::MAX;
        used[v] = false;
    }
    false
}
