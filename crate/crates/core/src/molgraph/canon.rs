//! Canonical atom ranking by iterative invariant refinement with an
//! individualization search over the remaining ties.
//!
//! Every leaf of the search is a total order of the atoms; the leaf whose
//! encoding (labels, bonds and map numbers in rank order) is smallest wins.
//! Two graphs get identical encodings exactly when they are isomorphic, so
//! rank-to-rank correspondence between them is an isomorphism.

use std::cmp::Ordering;

use super::MolGraph;
use crate::smiles::{write_graph, WriteOptions};

/// Leaf budget for pathological symmetric inputs.
const MAX_LEAVES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CanonOptions {
    /// Treat map numbers as part of the atom label. When false, maps are
    /// ignored entirely.
    pub use_maps: bool,
}

pub(super) type Label = [i64; 7];

pub(super) fn atom_label(g: &MolGraph, idx: usize, opts: CanonOptions) -> Label {
    let atom = g.atom(idx);
    [
        atom.element.is_hydrogen() as i64,
        g.degree(idx) as i64,
        atom.element.atomic_number() as i64,
        atom.isotope.map_or(0, |i| i as i64),
        atom.charge as i64,
        atom.implicit_h as i64,
        if opts.use_maps { atom.map.map_or(0, |m| m as i64) } else { 0 },
    ]
}

/// Refines a coloring until the number of classes stops growing. Colors are
/// dense class indices whose order is preserved across rounds.
pub(super) fn refine(g: &MolGraph, mut colors: Vec<usize>) -> Vec<usize> {
    let n = colors.len();
    let mut classes = count_classes(&colors);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..n)
            .map(|i| {
                let mut nb: Vec<(usize, u8)> = g
                    .neighbors(i)
                    .map(|j| (colors[j], g.bond_order(i, j)))
                    .collect();
                nb.sort_unstable();
                (colors[i], nb)
            })
            .collect();
        let mut uniq: Vec<&(usize, Vec<(usize, u8)>)> = keys.iter().collect();
        uniq.sort();
        uniq.dedup();
        colors = keys
            .iter()
            .map(|k| uniq.binary_search(&k).expect("key present"))
            .collect();
        let next = uniq.len();
        if next == classes {
            return colors;
        }
        classes = next;
    }
}

fn count_classes(colors: &[usize]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Encoding {
    labels: Vec<Label>,
    edges: Vec<(usize, usize, u8)>,
    maps: Vec<u32>,
}

fn encode(g: &MolGraph, ranks: &[usize], labels: &[Label], opts: CanonOptions) -> Encoding {
    let n = ranks.len();
    let mut by_rank = vec![0usize; n];
    for (atom, &r) in ranks.iter().enumerate() {
        by_rank[r] = atom;
    }
    let mut edges: Vec<(usize, usize, u8)> = g
        .bonds()
        .map(|((a, b), bond)| {
            let (ra, rb) = (ranks[a], ranks[b]);
            (ra.min(rb), ra.max(rb), bond.order)
        })
        .collect();
    edges.sort_unstable();
    Encoding {
        labels: by_rank.iter().map(|&a| labels[a]).collect(),
        edges,
        maps: if opts.use_maps {
            by_rank
                .iter()
                .map(|&a| g.atom(a).map.unwrap_or(0))
                .collect()
        } else {
            Vec::new()
        },
    }
}

struct Search<'a> {
    g: &'a MolGraph,
    labels: Vec<Label>,
    opts: CanonOptions,
    best: Option<(Encoding, Vec<usize>)>,
    leaves: usize,
}

impl Search<'_> {
    fn twins(&self, u: usize, v: usize) -> bool {
        let g = self.g;
        self.labels[u] == self.labels[v]
            && g.neighbors(u).all(|w| w == v || g.bond_order(u, w) == g.bond_order(v, w))
            && g.neighbors(v).all(|w| w == u || g.bond_order(u, w) == g.bond_order(v, w))
    }

    fn descend(&mut self, colors: Vec<usize>) {
        if self.leaves >= MAX_LEAVES {
            return;
        }
        let n = colors.len();
        // first non-singleton cell, by color
        let mut counts = vec![0usize; n];
        for &c in &colors {
            counts[c] += 1;
        }
        let Some(cell) = (0..n).find(|&c| counts[c] > 1) else {
            self.leaves += 1;
            let enc = encode(self.g, &colors, &self.labels, self.opts);
            let better = match &self.best {
                None => true,
                Some((best, _)) => enc.cmp(best) == Ordering::Less,
            };
            if better {
                self.best = Some((enc, colors));
            }
            return;
        };
        let members: Vec<usize> = (0..n).filter(|&i| colors[i] == cell).collect();
        let mut tried: Vec<usize> = Vec::new();
        for &v in &members {
            // swapping twins is an automorphism, so their subtrees give the same leaves
            if tried.iter().any(|&u| self.twins(u, v)) {
                continue;
            }
            tried.push(v);
            let split: Vec<usize> = colors
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    if c > cell || (c == cell && i != v) {
                        c + 1
                    } else {
                        c
                    }
                })
                .collect();
            let refined = refine(self.g, split);
            self.descend(refined);
        }
    }
}

/// Canonical rank (0-based, unique) for every atom of `g`.
pub fn canonical_labeling(g: &MolGraph, opts: CanonOptions) -> Vec<usize> {
    let n = g.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let labels: Vec<Label> = (0..n).map(|i| atom_label(g, i, opts)).collect();
    let mut uniq = labels.clone();
    uniq.sort_unstable();
    uniq.dedup();
    let initial: Vec<usize> = labels
        .iter()
        .map(|l| uniq.binary_search(l).expect("label present"))
        .collect();
    let colors = refine(g, initial);
    let mut search = Search {
        g,
        labels,
        opts,
        best: None,
        leaves: 0,
    };
    search.descend(colors);
    search.best.expect("at least one leaf").1
}

/// Map-free canonical key: the canonical SMILES of `g` with hydrogens
/// folded, stereo marks dropped and components sorted.
pub fn canonical_form(g: &MolGraph) -> String {
    let folded = g.without_maps().fold_hydrogens(|_| false);
    write_graph(
        &folded,
        &WriteOptions {
            use_maps: false,
            stereo: false,
            force_brackets: false,
        },
    )
    .text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn key(s: &str) -> String {
        canonical_form(&parse_smiles(s).unwrap())
    }

    #[test]
    fn methane_written_two_ways() {
        assert_eq!(key("C"), key("[H]C([H])([H])[H]"));
        assert_eq!(key("[CH4]"), key("C"));
    }

    #[test]
    fn map_numbers_do_not_change_the_key() {
        assert_eq!(
            key("CC(=O)CCCC[O-]"),
            key("[CH3:1][C:2](=[O:3])[CH2:4][CH2:5][CH2:6][CH2:7][O-:8]")
        );
    }

    #[test]
    fn reference_strings() {
        assert_eq!(key("O=CCCCC(C)=O"), "CC(=O)CCCC=O");
        assert_eq!(key("[O-]CCCCC(C)=O"), "CC(=O)CCCC[O-]");
        assert_eq!(key("[BH4-].O.O=CCCCC(=O)C"), "CC(=O)CCCC=O.O.[BH4-]");
        assert_eq!(key("[BH3]"), "B");
        assert_eq!(key("[OH-]"), "[OH-]");
    }

    #[test]
    fn distinguishes_isomers() {
        assert_ne!(key("CCO"), key("COC"));
        assert_ne!(key("CC(C)C"), key("CCCC"));
        assert_ne!(key("C1CC1C"), key("C=CCC"));
    }

    #[test]
    fn symmetric_graphs_terminate() {
        let k = key("C1CCCCC1");
        assert_eq!(k, key("C1CCCCC1"));
        assert_eq!(key("c1ccccc1"), key("C1=CC=CC=C1"));
        assert_eq!(
            key("C12(C)C(C)(C)C1(C)C2(C)C"),
            key("CC12C(C)(C)C1(C)C2(C)C")
        );
    }
}
