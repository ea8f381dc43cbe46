//! Products of a known mechanism: full atom mapping, species roles and
//! catalyst-aware templates.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, State};
use crate::mechanism::{Mechanism, MechanismError};
use crate::molgraph::canonical_form;
use crate::smiles::{write_smiles, MapMode};

/// Initial-state map number to final-state map number for every atom,
/// hydrogens included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomMap {
    pub pairs: BTreeMap<u32, u32>,
    /// Fully mapped `reactants>>products`.
    pub reaction_smiles: String,
}

impl AtomMap {
    pub fn is_bijection(&self) -> bool {
        let image: BTreeSet<u32> = self.pairs.values().copied().collect();
        image.len() == self.pairs.len()
    }
}

/// Arrows move electrons, never atoms, so each atom keeps its map number
/// through every step. The mechanism is replayed to make sure of that.
pub fn derive_atom_map(engine: &Engine, mech: &Mechanism) -> Result<AtomMap, MechanismError> {
    let replayed = Mechanism::from_arrows(engine, mech.reaction_id.clone(), mech.initial.clone(), &mech.arrow_sets())?;
    let first = replayed.initial.graph();
    let last = replayed.goal();
    let mut pairs = BTreeMap::new();
    for atom in first.atoms() {
        let m = atom.map.expect("state atoms are mapped");
        let j = last.atom_index(m).expect("steps keep every atom");
        debug_assert_eq!(last.graph().atom(j).element, atom.element);
        pairs.insert(m, m);
    }
    let reaction_smiles = format!("{}>>{}", replayed.initial.smiles(&MapMode::All), last.smiles(&MapMode::All));
    Ok(AtomMap { pairs, reaction_smiles })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeciesRole {
    ProductContributor,
    ByproductContributor,
    Catalyst,
    Spectator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Species {
    pub key: String,
    pub role: SpeciesRole,
    pub maps: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub initial: Vec<Species>,
    pub last: Vec<Species>,
}

fn species(state: &State) -> Vec<(String, Vec<u32>)> {
    let g = state.graph();
    g.components()
        .into_iter()
        .map(|atoms| {
            let maps = atoms.iter().map(|&i| g.atom(i).map.expect("state atoms are mapped")).collect();
            (canonical_form(&g.subgraph(&atoms)), maps)
        })
        .collect()
}

fn touched_maps(mech: &Mechanism) -> BTreeSet<u32> {
    mech.arrow_sets().iter().flatten().flat_map(|a| a.maps()).collect()
}

/// Roles of the initial and final species. A touched species counts as a
/// catalyst when more copies of it survive than were left untouched.
pub fn classify_roles(mech: &Mechanism) -> Roles {
    let touched = touched_maps(mech);
    let start = species(&mech.initial);
    let end = species(mech.goal());

    // main product: final components whose keys are the main product keys
    let mut wanted: HashMap<String, usize> = HashMap::new();
    for k in mech.main_product() {
        *wanted.entry(k).or_insert(0) += 1;
    }
    let mut product_maps = BTreeSet::new();
    let mut is_product = vec![false; end.len()];
    for (i, (key, maps)) in end.iter().enumerate() {
        if let Some(n) = wanted.get_mut(key) {
            if *n > 0 && maps.iter().any(|m| touched.contains(m)) {
                *n -= 1;
                is_product[i] = true;
                product_maps.extend(maps.iter().copied());
            }
        }
    }

    let is_touched = |maps: &[u32]| maps.iter().any(|m| touched.contains(m));
    let mut untouched_start: HashMap<&str, usize> = HashMap::new();
    for (key, maps) in &start {
        if !is_touched(maps) {
            *untouched_start.entry(key).or_insert(0) += 1;
        }
    }
    let mut end_count: HashMap<&str, usize> = HashMap::new();
    for (key, _) in &end {
        *end_count.entry(key).or_insert(0) += 1;
    }
    let regenerated = |key: &str| {
        end_count.get(key).copied().unwrap_or(0) > untouched_start.get(key).copied().unwrap_or(0)
    };

    let initial = start
        .iter()
        .map(|(key, maps)| {
            let role = if !is_touched(maps) {
                SpeciesRole::Spectator
            } else if regenerated(key) && !maps.iter().any(|m| product_maps.contains(m)) {
                SpeciesRole::Catalyst
            } else if maps.iter().any(|m| product_maps.contains(m)) {
                SpeciesRole::ProductContributor
            } else {
                SpeciesRole::ByproductContributor
            };
            Species { key: key.clone(), role, maps: maps.clone() }
        })
        .collect();

    let start_keys: BTreeSet<&str> = start.iter().filter(|(_, m)| is_touched(m)).map(|(k, _)| k.as_str()).collect();
    let last = end
        .iter()
        .enumerate()
        .map(|(i, (key, maps))| {
            let role = if is_product[i] {
                SpeciesRole::ProductContributor
            } else if !is_touched(maps) {
                SpeciesRole::Spectator
            } else if start_keys.contains(key.as_str()) && regenerated(key) {
                SpeciesRole::Catalyst
            } else {
                SpeciesRole::ByproductContributor
            };
            Species { key: key.clone(), role, maps: maps.clone() }
        })
        .collect();
    Roles { initial, last }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Radius {
    Finite(usize),
    Infinite,
}

impl std::str::FromStr for Radius {
    type Err = String;

    fn from_str(s: &str) -> Result<Radius, String> {
        match s {
            "inf" | "infinite" | "∞" => Ok(Radius::Infinite),
            _ => s.parse().map(Radius::Finite).map_err(|_| format!("bad radius `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSpecies {
    pub role: SpeciesRole,
    /// Arrow-touched atoms of the species.
    pub anchors: Vec<u32>,
    /// Atoms kept in the pattern.
    pub atoms: Vec<u32>,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechTemplate {
    pub radius: Radius,
    pub species: Vec<TemplateSpecies>,
    /// One `;`-joined arrow list per step, in initial-state map numbers.
    pub steps: Vec<String>,
}

impl MechTemplate {
    /// Role-tagged patterns, e.g. `catalyst:[Pd-2:5]... . product_contributor:...`.
    pub fn text(&self) -> String {
        let parts: Vec<String> = self
            .species
            .iter()
            .map(|s| {
                let tag = serde_json::to_value(s.role).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
                format!("{tag}:{}", s.pattern)
            })
            .collect();
        format!("{}|{}", parts.join(" . "), self.steps.join(" > "))
    }
}

/// Per non-spectator initial species, the atoms within `radius` bonds of an
/// arrow-touched atom (the whole species at infinite radius).
pub fn extract_template(mech: &Mechanism, radius: Radius) -> MechTemplate {
    let roles = classify_roles(mech);
    let touched = touched_maps(mech);
    let state = &mech.initial;
    let g = state.graph();
    let mut out = Vec::new();
    for sp in roles.initial.iter().filter(|s| s.role != SpeciesRole::Spectator) {
        let anchors: Vec<u32> = sp.maps.iter().copied().filter(|m| touched.contains(m)).collect();
        let mut depth: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for m in &anchors {
            let i = state.atom_index(*m).expect("species atoms are in the state");
            depth.insert(i, 0);
            queue.push_back(i);
        }
        while let Some(i) = queue.pop_front() {
            let d = depth[&i];
            if let Radius::Finite(r) = radius {
                if d >= r {
                    continue;
                }
            }
            for n in g.neighbors(i) {
                if let std::collections::hash_map::Entry::Vacant(e) = depth.entry(n) {
                    e.insert(d + 1);
                    queue.push_back(n);
                }
            }
        }
        let mut atoms: Vec<usize> = depth.into_keys().collect();
        atoms.sort_unstable();
        let sub = g.subgraph(&atoms);
        let keep: BTreeSet<u32> = anchors.iter().copied().collect();
        let mut maps: Vec<u32> = atoms.iter().map(|&i| g.atom(i).map.expect("state atoms are mapped")).collect();
        maps.sort_unstable();
        out.push(TemplateSpecies {
            role: sp.role,
            anchors,
            atoms: maps,
            pattern: write_smiles(&sub, &MapMode::Minimal(keep)),
        });
    }
    let steps = mech
        .arrow_sets()
        .iter()
        .map(|set| set.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";"))
        .collect();
    MechTemplate { radius, species: out, steps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::element::Element;

    fn curated(id: &str) -> (Engine, Mechanism) {
        let engine = Engine::default();
        let m = corpus::curated_by_id(&engine, id).unwrap();
        (engine, m)
    }

    fn component_of(state: &State, map: u32) -> String {
        let g = state.components_with(&[map]);
        canonical_form(&g)
    }

    #[test]
    fn hydrogens_are_traced_to_their_donors() {
        let (engine, m) = curated("borohydride-reduction");
        let map = derive_atom_map(&engine, &m).unwrap();
        assert!(map.is_bijection());
        let end = m.goal();
        let g = end.graph();
        let h = Element::from_symbol("H").unwrap();
        let o = Element::from_symbol("O").unwrap();
        let c = Element::from_symbol("C").unwrap();
        let diol = canonical_form(&crate::smiles::parse_smiles("CC(O)CCCCO").unwrap());
        let (mut from_boron, mut from_water) = (0, 0);
        for i in 0..g.atom_count() {
            let a = g.atom(i);
            if a.element != h || component_of(end, a.map.unwrap()) != diol {
                continue;
            }
            let parent = g.neighbors(i).next().unwrap();
            let donor = component_of(&m.initial, map.pairs[&a.map.unwrap()]);
            if g.atom(parent).element == c && donor == "[BH4-]" {
                from_boron += 1;
            }
            if g.atom(parent).element == o && donor == "O" {
                from_water += 1;
            }
        }
        assert_eq!(from_boron, 2);
        assert_eq!(from_water, 2);
    }

    #[test]
    fn water_contributes_and_nothing_is_a_spectator() {
        let (_, m) = curated("borohydride-reduction");
        let roles = classify_roles(&m);
        for s in roles.initial.iter().filter(|s| s.key == "O") {
            assert_eq!(s.role, SpeciesRole::ProductContributor);
        }
        assert!(roles.initial.iter().all(|s| s.role != SpeciesRole::Spectator));
    }

    #[test]
    fn palladium_is_a_catalyst_and_kept_in_the_template() {
        let (_, m) = curated("suzuki-coupling");
        let roles = classify_roles(&m);
        let pd = roles.initial.iter().find(|s| s.key.contains("Pd")).unwrap();
        assert_eq!(pd.role, SpeciesRole::Catalyst);
        let t = extract_template(&m, Radius::Infinite);
        let kept = t.species.iter().find(|s| s.role == SpeciesRole::Catalyst).unwrap();
        assert!(kept.pattern.contains("Pd"));
        assert_eq!(kept.atoms.len(), pd.maps.len());
    }

    #[test]
    fn radius_grows_monotonically() {
        for m in corpus::curated(&Engine::default()) {
            let zero = extract_template(&m, Radius::Finite(0));
            let touched = touched_maps(&m);
            let anchored: BTreeSet<u32> = zero.species.iter().flat_map(|s| s.atoms.iter().copied()).collect();
            assert_eq!(anchored, touched, "{}", m.reaction_id);
            let mut prev = zero;
            for r in 1..4 {
                let next = extract_template(&m, Radius::Finite(r));
                for (a, b) in prev.species.iter().zip(&next.species) {
                    assert!(a.atoms.iter().all(|x| b.atoms.contains(x)));
                }
                prev = next;
            }
        }
    }

    #[test]
    fn spectators_stay_out() {
        let engine = Engine::default();
        let initial = State::from_smiles("[OH-].CBr.C1CCCCC1").unwrap();
        let moves = engine.enumerate(&initial, &crate::engine::EnumOptions { max_arrows: 2, ..Default::default() });
        let sn2 = moves
            .iter()
            .find(|mv| {
                engine.apply(&initial, &mv.arrows).is_ok_and(|s| s.component_keys().contains(&"CO".to_string()))
            })
            .unwrap();
        let m = Mechanism::from_arrows(&engine, "x", initial, std::slice::from_ref(&sn2.arrows)).unwrap();
        let roles = classify_roles(&m);
        let hexane = roles.initial.iter().find(|s| s.key == "C1CCCCC1").unwrap();
        assert_eq!(hexane.role, SpeciesRole::Spectator);
        assert_eq!(extract_template(&m, Radius::Infinite).species.len(), 2);
    }

    #[test]
    fn zero_steps_map_to_themselves() {
        let engine = Engine::default();
        let m = Mechanism::from_arrows(&engine, "z", State::from_smiles("CCO").unwrap(), &[]).unwrap();
        let map = derive_atom_map(&engine, &m).unwrap();
        assert!(map.pairs.iter().all(|(a, b)| a == b));
        assert_eq!(map.pairs.len(), 9);
    }
}
