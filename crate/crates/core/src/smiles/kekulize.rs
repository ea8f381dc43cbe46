use super::parser::{ParsedAtom, PendingBond};
use super::SmilesError;
use crate::molgraph::ValenceTable;

/// True when an aromatic atom still lacks one bond order after counting
/// each aromatic bond as single.
fn needs_double(p: &ParsedAtom, single_sum: u32, table: &ValenceTable) -> bool {
    let have = single_sum + p.atom.implicit_h as u32;
    let allowed = match table.allowed(p.atom.element, p.atom.charge) {
        Some(a) => a,
        None => return false,
    };
    match allowed.iter().map(|&v| v as u32).find(|&v| v >= have) {
        Some(v) => v > have,
        None => false,
    }
}

/// Turns aromatic bonds into alternating single/double bonds by perfect
/// matching over the atoms that need a double bond.
pub(super) fn kekulize(atoms: &[ParsedAtom], bonds: &mut [PendingBond]) -> Result<(), SmilesError> {
    if !bonds.iter().any(|b| b.aromatic) {
        return Ok(());
    }
    let n = atoms.len();
    let table = ValenceTable::default();
    let mut sum = vec![0u32; n];
    for b in bonds.iter() {
        sum[b.a] += b.order as u32;
        sum[b.b] += b.order as u32;
    }
    let need: Vec<bool> = (0..n)
        .map(|i| atoms[i].aromatic && needs_double(&atoms[i], sum[i], &table))
        .collect();
    // candidate edges: aromatic bonds between two needy atoms
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, b) in bonds.iter().enumerate() {
        if b.aromatic && need[b.a] && need[b.b] {
            adj[b.a].push((b.b, k));
            adj[b.b].push((b.a, k));
        }
    }
    let mut mate: Vec<Option<usize>> = vec![None; n];
    if !match_from(0, &need, &adj, &mut mate) {
        let atom = (0..n)
            .find(|&i| need[i] && adj[i].is_empty())
            .unwrap_or_else(|| (0..n).find(|&i| need[i]).unwrap_or(0));
        return Err(SmilesError::Kekulization { atom });
    }
    for b in bonds.iter_mut() {
        if b.aromatic {
            b.order = if mate[b.a] == Some(b.b) { 2 } else { 1 };
            b.aromatic = false;
        }
    }
    Ok(())
}

fn match_from(
    start: usize,
    need: &[bool],
    adj: &[Vec<(usize, usize)>],
    mate: &mut [Option<usize>],
) -> bool {
    let Some(v) = (start..need.len()).find(|&i| need[i] && mate[i].is_none()) else {
        return true;
    };
    for &(w, _) in &adj[v] {
        if mate[w].is_none() {
            mate[v] = Some(w);
            mate[w] = Some(v);
            if match_from(v + 1, need, adj, mate) {
                return true;
            }
            mate[v] = None;
            mate[w] = None;
        }
    }
    false
}
