//! Locating a written MechStep host inside a state.
//!
//! Host components are matched to unused state components with the same
//! canonical key; atoms are paired by an explicit isomorphism that keeps
//! map numbers where the state already uses them. Mapped hydrogens written
//! on the host take distinct hydrogens of the matched parent.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::State;
use crate::mechsmiles::{Arrow, MechStep};
use crate::molgraph::{canonical_form, find_isomorphism, MolGraph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BindError {
    #[error("host species `{species}` is not present in the state")]
    MissingSpecies { species: String },
    #[error("mapped hydrogen {map} has no free hydrogen on its partner atom")]
    NoHydrogen { map: u32 },
    #[error("arrow map {map} is not on the host")]
    UnboundMap { map: u32 },
}

/// Host map number → state map number for every mapped host atom.
pub fn bind_host(state: &State, host: &MolGraph) -> Result<HashMap<u32, u32>, BindError> {
    let sg = state.graph();
    let host_keep = host.fold_survivors(|_| false);
    let host_f = host.fold_hydrogens(|_| false);
    let state_keep = sg.fold_survivors(|_| false);
    let state_f = sg.fold_hydrogens(|_| false);

    let state_comps = state_f.components();
    let state_keys: Vec<String> = state_comps
        .iter()
        .map(|c| canonical_form(&state_f.subgraph(c)))
        .collect();
    let mut used = vec![false; state_comps.len()];
    // folded state atom -> component slot
    let mut comp_of = vec![0usize; state_f.atom_count()];
    for (ci, comp) in state_comps.iter().enumerate() {
        for &a in comp {
            comp_of[a] = ci;
        }
    }
    let state_f_by_map: HashMap<u32, usize> = state_f.map_index();

    let mut binding: HashMap<u32, u32> = HashMap::new();
    // host original atom -> state original atom, heavy part
    let mut atom_pair: HashMap<usize, usize> = HashMap::new();

    for comp in host_f.components() {
        let sub = host_f.subgraph(&comp);
        let key = canonical_form(&sub);
        let candidates: Vec<usize> = (0..state_comps.len())
            .filter(|&i| !used[i] && state_keys[i] == key)
            .collect();
        if candidates.is_empty() {
            return Err(BindError::MissingSpecies { species: key });
        }
        // prefer the component that already carries the host's map numbers
        let preferred = comp
            .iter()
            .filter_map(|&a| host_f.atom(a).map)
            .filter_map(|m| state_f_by_map.get(&m))
            .map(|&s| comp_of[s])
            .find(|c| candidates.contains(c));
        let target = preferred.unwrap_or(candidates[0]);
        used[target] = true;
        let tcomp = &state_comps[target];
        let tsub = state_f.subgraph(tcomp);
        let tsub_by_map = tsub.map_index();
        let prefer = |i: usize| sub.atom(i).map.and_then(|m| tsub_by_map.get(&m).copied());
        let iso =
            find_isomorphism(&sub, &tsub, &prefer).ok_or_else(|| BindError::MissingSpecies {
                species: key.clone(),
            })?;
        for (i, &j) in iso.iter().enumerate() {
            let h_orig = host_keep[comp[i]];
            let s_orig = state_keep[tcomp[j]];
            atom_pair.insert(h_orig, s_orig);
        }
    }

    let mut taken: HashSet<usize> = HashSet::new();
    for (&h, &s) in &atom_pair {
        if let (Some(hm), Some(sm)) = (host.atom(h).map, sg.atom(s).map) {
            binding.insert(hm, sm);
        }
    }
    // folded host hydrogens that carry a map
    let mut folded_h: Vec<usize> = (0..host.atom_count())
        .filter(|&i| host.atom(i).map.is_some() && !atom_pair.contains_key(&i))
        .collect();
    folded_h.sort_by_key(|&i| host.atom(i).map);
    for h in folded_h {
        let hm = host.atom(h).map.expect("filtered on map");
        let parent = host
            .neighbors(h)
            .next()
            .ok_or(BindError::NoHydrogen { map: hm })?;
        let sp = atom_pair[&parent];
        let mut options: Vec<usize> = sg
            .neighbors(sp)
            .filter(|&n| sg.is_foldable_hydrogen(n) && !taken.contains(&n))
            .collect();
        options.sort_by_key(|&n| (sg.atom(n).map != Some(hm), sg.atom(n).map));
        let pick = *options.first().ok_or(BindError::NoHydrogen { map: hm })?;
        taken.insert(pick);
        binding.insert(hm, sg.atom(pick).map.expect("state atoms are mapped"));
    }
    Ok(binding)
}

/// The step's arrows rewritten in state map numbers.
pub fn bind_step(state: &State, step: &MechStep) -> Result<Vec<Arrow>, BindError> {
    let host = step.minimal_host();
    let binding = bind_host(state, &host)?;
    for m in step.referenced_maps() {
        if !binding.contains_key(&m) {
            return Err(BindError::UnboundMap { map: m });
        }
    }
    Ok(step
        .arrows
        .iter()
        .map(|a| a.remap(|m| binding[&m]))
        .collect())
}
