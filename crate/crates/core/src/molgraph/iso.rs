//! Explicit isomorphism search between two graphs, used to bind a written
//! structure onto atoms of a larger state.

use super::canon::{atom_label, refine, CanonOptions, Label};
use super::MolGraph;

/// Finds a mapping `m` with `m[i]` = atom of `b` matched to atom `i` of `a`,
/// respecting element, charge, isotope, hydrogen counts and bond orders.
/// `prefer(i)` names a preferred partner that is tried first.
pub fn find_isomorphism(
    a: &MolGraph,
    b: &MolGraph,
    prefer: &dyn Fn(usize) -> Option<usize>,
) -> Option<Vec<usize>> {
    let n = a.atom_count();
    if n != b.atom_count() || a.bond_count() != b.bond_count() {
        return None;
    }
    if n == 0 {
        return Some(Vec::new());
    }
    let union = a.union(b);
    let opts = CanonOptions { use_maps: false };
    let labels: Vec<Label> = (0..2 * n).map(|i| atom_label(&union, i, opts)).collect();
    let mut uniq = labels.clone();
    uniq.sort_unstable();
    uniq.dedup();
    let initial = labels
        .iter()
        .map(|l| uniq.binary_search(l).unwrap())
        .collect();
    let colors = refine(&union, initial);
    let (ca, cb) = colors.split_at(n);
    let mut sa = ca.to_vec();
    let mut sb = cb.to_vec();
    sa.sort_unstable();
    sb.sort_unstable();
    if sa != sb {
        return None;
    }

    // BFS order so each atom after the first of its component has a matched
    // neighbor when it is placed.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut i = order.len();
        order.push(start);
        while i < order.len() {
            let v = order[i];
            for w in a.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    order.push(w);
                }
            }
            i += 1;
        }
    }

    let mut m: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    let mut search = Matcher {
        a,
        b,
        ca,
        cb,
        prefer,
        order: &order,
        m: &mut m,
        used: &mut used,
    };
    if search.place(0) {
        Some(m.into_iter().map(|x| x.expect("complete match")).collect())
    } else {
        None
    }
}

struct Matcher<'a> {
    a: &'a MolGraph,
    b: &'a MolGraph,
    ca: &'a [usize],
    cb: &'a [usize],
    prefer: &'a dyn Fn(usize) -> Option<usize>,
    order: &'a [usize],
    m: &'a mut Vec<Option<usize>>,
    used: &'a mut Vec<bool>,
}

impl Matcher<'_> {
    fn fits(&self, v: usize, w: usize) -> bool {
        if self.used[w] || self.ca[v] != self.cb[w] {
            return false;
        }
        self.a.neighbors(v).all(|u| match self.m[u] {
            Some(mu) => self.b.bond_order(w, mu) == self.a.bond_order(v, u),
            None => true,
        })
    }

    fn place(&mut self, k: usize) -> bool {
        let Some(&v) = self.order.get(k) else {
            return true;
        };
        let anchor = self.a.neighbors(v).find_map(|u| self.m[u]);
        let mut candidates: Vec<usize> = match anchor {
            Some(mu) => self.b.neighbors(mu).collect(),
            None => (0..self.b.atom_count()).collect(),
        };
        if let Some(p) = (self.prefer)(v) {
            if let Some(pos) = candidates.iter().position(|&c| c == p) {
                candidates.remove(pos);
                candidates.insert(0, p);
            }
        }
        for w in candidates {
            if self.fits(v, w) {
                self.m[v] = Some(w);
                self.used[w] = true;
                if self.place(k + 1) {
                    return true;
                }
                self.m[v] = None;
                self.used[w] = false;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    #[test]
    fn matches_reordered_molecule() {
        let a = parse_smiles("OCC(=O)C").unwrap();
        let b = parse_smiles("CC(=O)CO").unwrap();
        let m = find_isomorphism(&a, &b, &|_| None).unwrap();
        for (i, &j) in m.iter().enumerate() {
            assert_eq!(a.atom(i).element, b.atom(j).element);
            assert_eq!(a.atom(i).implicit_h, b.atom(j).implicit_h);
        }
    }

    #[test]
    fn rejects_isomers() {
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("COC").unwrap();
        assert!(find_isomorphism(&a, &b, &|_| None).is_none());
    }

    #[test]
    fn honours_preference_under_symmetry() {
        let a = parse_smiles("O.O").unwrap();
        let b = parse_smiles("O.O").unwrap();
        let m = find_isomorphism(&a, &b, &|i| Some(1 - i)).unwrap();
        assert_eq!(m, vec![1, 0]);
    }
}
