use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::parser::{default_hydrogens, is_organic_subset};
use crate::molgraph::{canonical_labeling, CanonOptions, MolGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteOptions {
    /// Emit map numbers present on the graph.
    pub use_maps: bool,
    /// Emit chirality tags and bond-direction marks.
    pub stereo: bool,
    /// Write every atom in brackets.
    pub force_brackets: bool,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            use_maps: true,
            stereo: true,
            force_brackets: false,
        }
    }
}

/// Writer output: the text and the graph index of each atom in the order it
/// appears in the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Written {
    pub text: String,
    pub order: Vec<usize>,
}

struct Tree {
    children: Vec<Vec<usize>>,
    /// ring partners closed at this atom (partner was visited earlier)
    closes: Vec<Vec<usize>>,
    /// ring partners opened at this atom
    opens: Vec<Vec<usize>>,
}

fn dfs_tree(g: &MolGraph, root: usize, ranks: &[usize], visited: &mut [bool], tree: &mut Tree) {
    let mut stack: Vec<(usize, Option<usize>, Vec<usize>, usize)> = Vec::new();
    let sorted = |v: usize| {
        let mut nb: Vec<usize> = g.neighbors(v).collect();
        nb.sort_by_key(|&w| ranks[w]);
        nb
    };
    visited[root] = true;
    stack.push((root, None, sorted(root), 0));
    let mut done_edges = std::collections::HashSet::new();
    while let Some(top) = stack.last_mut() {
        let (v, parent, ref nbs, ref mut pos) = *top;
        if *pos >= nbs.len() {
            stack.pop();
            continue;
        }
        let w = nbs[*pos];
        *pos += 1;
        if Some(w) == parent {
            continue;
        }
        let edge = (v.min(w), v.max(w));
        if visited[w] {
            if done_edges.insert(edge) {
                tree.opens[w].push(v);
                tree.closes[v].push(w);
            }
            continue;
        }
        done_edges.insert(edge);
        visited[w] = true;
        tree.children[v].push(w);
        let nb = sorted(w);
        stack.push((w, Some(v), nb, 0));
    }
}

fn bond_symbol(g: &MolGraph, from: usize, to: usize, stereo: bool) -> &'static str {
    let bond = g.bond(from, to).expect("bond exists");
    match bond.order {
        2 => "=",
        3 => "#",
        _ => match bond.direction {
            Some(dir) if stereo => {
                let up = if dir.from == from { dir.up } else { !dir.up };
                if up {
                    "/"
                } else {
                    "\\"
                }
            }
            _ => "",
        },
    }
}

fn atom_text(g: &MolGraph, idx: usize, opts: &WriteOptions) -> String {
    let atom = g.atom(idx);
    let el = atom.element;
    let map = if opts.use_maps { atom.map } else { None };
    let chirality = if opts.stereo {
        atom.chirality.as_deref()
    } else {
        None
    };
    let bond_sum: u32 = g.neighbors(idx).map(|n| g.bond_order(idx, n) as u32).sum();
    let plain = !opts.force_brackets
        && map.is_none()
        && atom.isotope.is_none()
        && atom.charge == 0
        && chirality.is_none()
        && is_organic_subset(el)
        && atom.implicit_h as u32 == default_hydrogens(el, bond_sum);
    if plain {
        return el.symbol().to_string();
    }
    let mut s = String::from("[");
    if let Some(iso) = atom.isotope {
        write!(s, "{iso}").unwrap();
    }
    s.push_str(el.symbol());
    if let Some(c) = chirality {
        s.push_str(c);
    }
    match atom.implicit_h {
        0 => {}
        1 => s.push('H'),
        n => write!(s, "H{n}").unwrap(),
    }
    match atom.charge {
        0 => {}
        1 => s.push('+'),
        -1 => s.push('-'),
        c if c > 0 => write!(s, "+{c}").unwrap(),
        c => write!(s, "{c}").unwrap(),
    }
    if let Some(m) = map {
        write!(s, ":{m}").unwrap();
    }
    s.push(']');
    s
}

fn ring_label(d: u32) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{d}")
    }
}

struct Emitter<'a> {
    g: &'a MolGraph,
    opts: &'a WriteOptions,
    tree: &'a Tree,
    ranks: &'a [usize],
    /// digit assigned to an open ring edge keyed (opener, closer)
    open_digits: BTreeMap<(usize, usize), u32>,
    in_use: Vec<bool>,
    out: String,
    order: Vec<usize>,
}

impl Emitter<'_> {
    fn free_digit(&mut self) -> u32 {
        let d = (1..self.in_use.len())
            .find(|&d| !self.in_use[d])
            .expect("fewer than 100 open rings");
        self.in_use[d] = true;
        d as u32
    }

    fn emit(&mut self, root: usize) {
        // iterative pre-order with explicit branch bookkeeping
        enum Item {
            Atom(usize, Option<usize>),
            Text(&'static str),
        }
        let mut stack = vec![Item::Atom(root, None)];
        while let Some(item) = stack.pop() {
            let (v, parent) = match item {
                Item::Text(t) => {
                    self.out.push_str(t);
                    continue;
                }
                Item::Atom(v, parent) => (v, parent),
            };
            if let Some(p) = parent {
                self.out
                    .push_str(bond_symbol(self.g, p, v, self.opts.stereo));
            }
            self.out.push_str(&atom_text(self.g, v, self.opts));
            self.order.push(v);

            let mut closers: Vec<usize> = self.tree.closes[v].clone();
            closers.sort_by_key(|&w| self.ranks[w]);
            let mut released = Vec::new();
            for w in closers {
                let d = self
                    .open_digits
                    .remove(&(w, v))
                    .expect("ring opened earlier");
                self.out.push_str(&ring_label(d));
                released.push(d);
            }
            let mut openers: Vec<usize> = self.tree.opens[v].clone();
            openers.sort_by_key(|&w| self.ranks[w]);
            for w in openers {
                let d = self.free_digit();
                self.out
                    .push_str(bond_symbol(self.g, v, w, self.opts.stereo));
                self.out.push_str(&ring_label(d));
                self.open_digits.insert((v, w), d);
            }
            for d in released {
                self.in_use[d as usize] = false;
            }

            let children = &self.tree.children[v];
            if let Some((&last, rest)) = children.split_last() {
                stack.push(Item::Atom(last, Some(v)));
                for &c in rest.iter().rev() {
                    stack.push(Item::Text(")"));
                    stack.push(Item::Atom(c, Some(v)));
                    stack.push(Item::Text("("));
                }
            }
        }
    }
}

/// Writes `g` as canonical SMILES: atoms ordered by canonical rank,
/// components sorted by their text. Hydrogens are written as they are
/// stored; fold them first for conventional output.
pub fn write_graph(g: &MolGraph, opts: &WriteOptions) -> Written {
    let n = g.atom_count();
    if n == 0 {
        return Written {
            text: String::new(),
            order: Vec::new(),
        };
    }
    let ranks = canonical_labeling(
        g,
        CanonOptions {
            use_maps: opts.use_maps,
        },
    );
    let mut tree = Tree {
        children: vec![Vec::new(); n],
        closes: vec![Vec::new(); n],
        opens: vec![Vec::new(); n],
    };
    let mut visited = vec![false; n];
    let mut pieces: Vec<(String, Vec<usize>)> = Vec::new();
    for comp in g.components() {
        let root = *comp
            .iter()
            .min_by_key(|&&a| ranks[a])
            .expect("non-empty component");
        dfs_tree(g, root, &ranks, &mut visited, &mut tree);
        let mut em = Emitter {
            g,
            opts,
            tree: &tree,
            ranks: &ranks,
            open_digits: BTreeMap::new(),
            in_use: vec![false; 100],
            out: String::new(),
            order: Vec::new(),
        };
        em.emit(root);
        pieces.push((em.out, em.order));
    }
    pieces.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| ranks[a.1[0]].cmp(&ranks[b.1[0]]))
    });
    let mut text = String::new();
    let mut order = Vec::with_capacity(n);
    for (i, (t, o)) in pieces.into_iter().enumerate() {
        if i > 0 {
            text.push('.');
        }
        text.push_str(&t);
        order.extend(o);
    }
    Written { text, order }
}
