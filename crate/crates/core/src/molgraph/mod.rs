//! Molecular graph with formal charges, atom-map numbers and optional
//! explicit hydrogens.
//!
//! Bond orders are always integers (1, 2 or 3); aromatic input is kekulized
//! by the SMILES reader before it reaches this type. Hydrogens live either as
//! an implicit count on their heavy atom or as separate atoms flagged
//! `explicit_h`. The engine works on fully explicit graphs, the writers fold
//! hydrogens back into counts.

mod canon;
mod iso;
mod valence;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::element::Element;

pub use canon::{canonical_form, canonical_labeling, CanonOptions};
pub use iso::find_isomorphism;
pub use valence::{validate, StabilityReport, ValenceTable, Violation, ViolationKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("atom index {0} out of range")]
    NoSuchAtom(usize),
    #[error("bond endpoints must differ (atom {0})")]
    SelfBond(usize),
    #[error("bond order {0} outside 1..=3")]
    BadBondOrder(u8),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("map number {0} used twice")]
    DuplicateMap(u32),
    #[error("element `{0}` has no entry in the valence table")]
    UnknownElement(String),
}

/// Bond-direction mark (`/` or `\`) kept verbatim; it has no semantics here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BondDirection {
    /// Atom the mark was written after.
    pub from: usize,
    pub up: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bond {
    pub order: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<BondDirection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<u32>,
    /// A hydrogen written out as its own atom.
    #[serde(default)]
    pub explicit_h: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isotope: Option<u16>,
    /// Hydrogens carried as a count rather than as atoms.
    #[serde(default)]
    pub implicit_h: u8,
    /// Chirality tag as written (`@`, `@@`, ...). Inert.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chirality: Option<String>,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            charge: 0,
            map: None,
            explicit_h: element.is_hydrogen(),
            isotope: None,
            implicit_h: 0,
            chirality: None,
        }
    }

    pub fn with_charge(mut self, charge: i8) -> Atom {
        self.charge = charge;
        self
    }

    pub fn with_map(mut self, map: u32) -> Atom {
        self.map = Some(map);
        self
    }

    pub fn with_implicit_h(mut self, count: u8) -> Atom {
        self.implicit_h = count;
        self
    }
}

/// Element counts (hydrogens included) plus net charge.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Formula {
    pub counts: BTreeMap<Element, u32>,
    pub charge: i32,
}

impl Formula {
    /// True when every element of `self` is available in `other`.
    pub fn is_subset_of(&self, other: &Formula) -> bool {
        self.counts
            .iter()
            .all(|(el, n)| other.counts.get(el).copied().unwrap_or(0) >= *n)
    }

    pub fn add(&mut self, other: &Formula) {
        for (el, n) in &other.counts {
            *self.counts.entry(*el).or_insert(0) += n;
        }
        self.charge += other.charge;
    }

    pub fn heavy_atoms(&self) -> u32 {
        self.counts
            .iter()
            .filter(|(el, _)| !el.is_hydrogen())
            .map(|(_, n)| n)
            .sum()
    }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Hill order: C, H, then alphabetical.
        let mut keys: Vec<&Element> = self.counts.keys().collect();
        let has_c = self.counts.contains_key(&Element::C);
        keys.sort_by_key(|el| {
            let rank = match (has_c, **el) {
                (true, Element::C) => 0,
                (true, Element::H) => 1,
                _ => 2,
            };
            (rank, el.symbol())
        });
        for el in keys {
            let n = self.counts[el];
            if n == 1 {
                write!(f, "{el}")?;
            } else {
                write!(f, "{el}{n}")?;
            }
        }
        match self.charge {
            0 => Ok(()),
            1 => write!(f, "+"),
            -1 => write!(f, "-"),
            c if c > 0 => write!(f, "+{c}"),
            c => write!(f, "{c}"),
        }
    }
}

/// Molecular graph. Atom identifiers are indices into the atom list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: BTreeMap<(usize, usize), Bond>,
    adjacency: Vec<BTreeSet<usize>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl MolGraph {
    pub fn new() -> MolGraph {
        MolGraph::default()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(BTreeSet::new());
        self.atoms.len() - 1
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: u8) -> Result<(), GraphError> {
        self.check_pair(a, b)?;
        if !(1..=3).contains(&order) {
            return Err(GraphError::BadBondOrder(order));
        }
        let k = key(a, b);
        if self.bonds.contains_key(&k) {
            return Err(GraphError::DuplicateBond(k.0, k.1));
        }
        self.bonds.insert(
            k,
            Bond {
                order,
                direction: None,
            },
        );
        self.adjacency[a].insert(b);
        self.adjacency[b].insert(a);
        Ok(())
    }

    /// Sets a bond order; order 0 deletes the bond.
    pub fn set_bond_order(&mut self, a: usize, b: usize, order: u8) -> Result<(), GraphError> {
        self.check_pair(a, b)?;
        if order > 3 {
            return Err(GraphError::BadBondOrder(order));
        }
        let k = key(a, b);
        if order == 0 {
            self.bonds.remove(&k);
            self.adjacency[a].remove(&b);
            self.adjacency[b].remove(&a);
        } else {
            self.bonds
                .entry(k)
                .and_modify(|bond| bond.order = order)
                .or_insert(Bond {
                    order,
                    direction: None,
                });
            self.adjacency[a].insert(b);
            self.adjacency[b].insert(a);
        }
        Ok(())
    }

    pub(crate) fn set_bond_direction(&mut self, a: usize, b: usize, dir: BondDirection) {
        if let Some(bond) = self.bonds.get_mut(&key(a, b)) {
            bond.direction = Some(dir);
        }
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<(), GraphError> {
        if a >= self.atoms.len() {
            return Err(GraphError::NoSuchAtom(a));
        }
        if b >= self.atoms.len() {
            return Err(GraphError::NoSuchAtom(b));
        }
        if a == b {
            return Err(GraphError::SelfBond(a));
        }
        Ok(())
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, idx: usize) -> &Atom {
        &self.atoms[idx]
    }

    pub fn atom_mut(&mut self, idx: usize) -> &mut Atom {
        &mut self.atoms[idx]
    }

    pub fn bonds(&self) -> impl Iterator<Item = ((usize, usize), &Bond)> + '_ {
        self.bonds.iter().map(|(k, b)| (*k, b))
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn bond(&self, a: usize, b: usize) -> Option<&Bond> {
        self.bonds.get(&key(a, b))
    }

    pub fn bond_order(&self, a: usize, b: usize) -> u8 {
        self.bond(a, b).map_or(0, |bond| bond.order)
    }

    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[idx].iter().copied()
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.adjacency[idx].len()
    }

    /// Sum of bond orders including implicit hydrogens.
    pub fn valence_sum(&self, idx: usize) -> u32 {
        let explicit: u32 = self
            .neighbors(idx)
            .map(|n| self.bond_order(idx, n) as u32)
            .sum();
        explicit + self.atoms[idx].implicit_h as u32
    }

    /// Hydrogens attached to `idx`, implicit and explicit.
    pub fn total_h(&self, idx: usize) -> u32 {
        let explicit = self
            .neighbors(idx)
            .filter(|&n| self.atoms[n].element.is_hydrogen())
            .count() as u32;
        explicit + self.atoms[idx].implicit_h as u32
    }

    /// Nonbonding electron count V - q - B, if the element has a
    /// main-group valence shell.
    pub fn nonbonding_electrons(&self, idx: usize) -> Option<i32> {
        let atom = &self.atoms[idx];
        let v = atom.element.valence_electrons()? as i32;
        Some(v - atom.charge as i32 - self.valence_sum(idx) as i32)
    }

    pub fn lone_pairs(&self, idx: usize) -> u32 {
        match self.nonbonding_electrons(idx) {
            Some(n) if n > 0 => (n / 2) as u32,
            Some(_) => 0,
            None => u32::from(self.atoms[idx].element.is_transition_metal()),
        }
    }

    pub fn find_map(&self, map: u32) -> Option<usize> {
        self.atoms.iter().position(|a| a.map == Some(map))
    }

    /// Map number → atom index for every mapped atom.
    pub fn map_index(&self) -> HashMap<u32, usize> {
        self.atoms
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map.map(|m| (m, i)))
            .collect()
    }

    pub fn max_map(&self) -> u32 {
        self.atoms.iter().filter_map(|a| a.map).max().unwrap_or(0)
    }

    pub fn check_unique_maps(&self) -> Result<(), GraphError> {
        let mut seen = BTreeSet::new();
        for atom in &self.atoms {
            if let Some(m) = atom.map {
                if !seen.insert(m) {
                    return Err(GraphError::DuplicateMap(m));
                }
            }
        }
        Ok(())
    }

    pub fn total_charge(&self) -> i32 {
        self.atoms.iter().map(|a| a.charge as i32).sum()
    }

    /// Element counts including hydrogens, plus net charge.
    pub fn formula(&self) -> Formula {
        let mut f = Formula::default();
        for atom in &self.atoms {
            *f.counts.entry(atom.element).or_insert(0) += 1;
            if atom.implicit_h > 0 {
                *f.counts.entry(Element::H).or_insert(0) += atom.implicit_h as u32;
            }
            f.charge += atom.charge as i32;
        }
        f
    }

    /// Connected components as sorted atom index lists, ordered by their
    /// smallest index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let cur = comp[i];
                for nb in self.neighbors(cur) {
                    if !seen[nb] {
                        seen[nb] = true;
                        comp.push(nb);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Component index for every atom.
    pub fn component_ids(&self) -> Vec<usize> {
        let mut ids = vec![0; self.atoms.len()];
        for (c, comp) in self.components().iter().enumerate() {
            for &a in comp {
                ids[a] = c;
            }
        }
        ids
    }

    /// Induced subgraph over `atoms` (in the given order). Returns the graph
    /// and the old index of every new atom.
    pub fn subgraph(&self, atoms: &[usize]) -> MolGraph {
        let mut g = MolGraph::new();
        let mut remap = HashMap::with_capacity(atoms.len());
        for &old in atoms {
            remap.insert(old, g.add_atom(self.atoms[old].clone()));
        }
        for (&(a, b), bond) in &self.bonds {
            if let (Some(&na), Some(&nb)) = (remap.get(&a), remap.get(&b)) {
                g.bonds.insert(key(na, nb), remap_direction(bond, &remap));
                g.adjacency[na].insert(nb);
                g.adjacency[nb].insert(na);
            }
        }
        g
    }

    /// Disjoint union; atoms of `other` are appended.
    pub fn union(&self, other: &MolGraph) -> MolGraph {
        let mut g = self.clone();
        g.append(other);
        g
    }

    pub fn append(&mut self, other: &MolGraph) {
        let offset = self.atoms.len();
        for atom in &other.atoms {
            self.add_atom(atom.clone());
        }
        for (&(a, b), bond) in &other.bonds {
            let mut bond = bond.clone();
            if let Some(dir) = bond.direction.as_mut() {
                dir.from += offset;
            }
            self.bonds.insert((a + offset, b + offset), bond);
            self.adjacency[a + offset].insert(b + offset);
            self.adjacency[b + offset].insert(a + offset);
        }
    }

    /// Every component as its own graph.
    pub fn split_components(&self) -> Vec<MolGraph> {
        self.components().iter().map(|c| self.subgraph(c)).collect()
    }

    /// Copy with every implicit hydrogen turned into an explicit H atom.
    pub fn with_explicit_hydrogens(&self) -> MolGraph {
        let mut g = MolGraph::new();
        for atom in &self.atoms {
            let mut a = atom.clone();
            a.implicit_h = 0;
            g.add_atom(a);
        }
        for (&k, bond) in &self.bonds {
            g.bonds.insert(k, bond.clone());
            g.adjacency[k.0].insert(k.1);
            g.adjacency[k.1].insert(k.0);
        }
        for (idx, atom) in self.atoms.iter().enumerate() {
            for _ in 0..atom.implicit_h {
                let h = g.add_atom(Atom::new(Element::H));
                g.bonds.insert(
                    (idx, h),
                    Bond {
                        order: 1,
                        direction: None,
                    },
                );
                g.adjacency[idx].insert(h);
                g.adjacency[h].insert(idx);
            }
        }
        g
    }

    /// True when `idx` is a plain hydrogen that can be folded into its
    /// neighbor's implicit count.
    pub fn is_foldable_hydrogen(&self, idx: usize) -> bool {
        let atom = &self.atoms[idx];
        if !atom.element.is_hydrogen()
            || atom.charge != 0
            || atom.isotope.is_some()
            || self.degree(idx) != 1
        {
            return false;
        }
        let parent = self.neighbors(idx).next().unwrap();
        self.bond_order(idx, parent) == 1 && !self.atoms[parent].element.is_hydrogen()
    }

    /// Copy where foldable hydrogens become implicit counts, except those for
    /// which `keep` returns true.
    pub fn fold_hydrogens(&self, keep: impl Fn(&Atom) -> bool) -> MolGraph {
        let n = self.atoms.len();
        let mut drop = vec![false; n];
        let mut extra = vec![0u8; n];
        for (idx, d) in drop.iter_mut().enumerate() {
            if self.is_foldable_hydrogen(idx) && !keep(&self.atoms[idx]) {
                *d = true;
                let parent = self.neighbors(idx).next().unwrap();
                extra[parent] += 1;
            }
        }
        let keep_idx: Vec<usize> = (0..n).filter(|&i| !drop[i]).collect();
        let mut g = self.subgraph(&keep_idx);
        for (new, &old) in keep_idx.iter().enumerate() {
            g.atoms[new].implicit_h += extra[old];
        }
        g
    }

    /// Old index of every atom kept by [`MolGraph::fold_hydrogens`] with the
    /// same predicate, in new-index order.
    pub fn fold_survivors(&self, keep: impl Fn(&Atom) -> bool) -> Vec<usize> {
        (0..self.atoms.len())
            .filter(|&i| !(self.is_foldable_hydrogen(i) && !keep(&self.atoms[i])))
            .collect()
    }

    pub fn without_maps(&self) -> MolGraph {
        let mut g = self.clone();
        for atom in &mut g.atoms {
            atom.map = None;
        }
        g
    }

    /// Heavy atoms (non-hydrogen) count.
    pub fn heavy_atom_count(&self) -> usize {
        self.atoms
            .iter()
            .filter(|a| !a.element.is_hydrogen())
            .count()
    }
}

fn remap_direction(bond: &Bond, remap: &HashMap<usize, usize>) -> Bond {
    let mut bond = bond.clone();
    if let Some(dir) = bond.direction.as_mut() {
        dir.from = remap[&dir.from];
    }
    bond
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    #[test]
    fn empty_graph_formula() {
        let g = MolGraph::new();
        let f = g.formula();
        assert!(f.counts.is_empty());
        assert_eq!(f.charge, 0);
    }

    #[test]
    fn borohydride_formula() {
        let g = parse_smiles("[BH4-]").unwrap();
        let f = g.formula();
        assert_eq!(f.counts[&Element::B], 1);
        assert_eq!(f.counts[&Element::H], 4);
        assert_eq!(f.counts.len(), 2);
        assert_eq!(f.charge, -1);
        assert_eq!(f.to_string(), "BH4-");
    }

    #[test]
    fn formula_counts_explicit_and_implicit_h() {
        let g = parse_smiles("[BH3-:2][H:3]").unwrap();
        assert_eq!(g.formula(), parse_smiles("[BH4-]").unwrap().formula());
        let explicit = g.with_explicit_hydrogens();
        assert_eq!(explicit.atom_count(), 5);
        assert_eq!(explicit.formula(), g.formula());
    }

    #[test]
    fn formula_is_additive_over_union() {
        let a = parse_smiles("CC(=O)CCCC=O").unwrap();
        let b = parse_smiles("[OH-]").unwrap();
        let mut sum = a.formula();
        sum.add(&b.formula());
        assert_eq!(a.union(&b).formula(), sum);
    }

    #[test]
    fn fold_round_trip() {
        let g = parse_smiles("CC(=O)O").unwrap();
        let explicit = g.with_explicit_hydrogens();
        assert_eq!(explicit.atom_count(), 8);
        let folded = explicit.fold_hydrogens(|_| false);
        assert_eq!(folded.atom_count(), 4);
        assert_eq!(canonical_form(&folded), canonical_form(&g));
    }

    #[test]
    fn h2_is_not_folded() {
        let g = parse_smiles("[H][H]").unwrap();
        assert_eq!(g.fold_hydrogens(|_| false).atom_count(), 2);
    }

    #[test]
    fn components_partition_atoms() {
        let g = parse_smiles("CC(=O)CCCC=O.O.[BH4-]").unwrap();
        let comps = g.components();
        assert_eq!(comps.len(), 3);
        let total: usize = comps.iter().map(Vec::len).sum();
        assert_eq!(total, g.atom_count());
    }

    #[test]
    fn set_bond_order_zero_deletes() {
        let mut g = parse_smiles("CO").unwrap();
        g.set_bond_order(0, 1, 0).unwrap();
        assert_eq!(g.bond_count(), 0);
        assert_eq!(g.components().len(), 2);
        assert!(matches!(g.add_bond(0, 0, 1), Err(GraphError::SelfBond(0))));
        assert!(matches!(
            g.add_bond(0, 1, 4),
            Err(GraphError::BadBondOrder(4))
        ));
    }
}
