//! Deterministic 2D coordinates: rings as regular polygons, chains as
//! zig-zags placed breadth-first, components side by side. Unit bond length.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;

use arrowpush::molgraph::MolGraph;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    fn angle_to(self, o: Point) -> f64 {
        (o.y - self.y).atan2(o.x - self.x)
    }

    fn step(self, angle: f64, len: f64) -> Point {
        Point::new(self.x + len * angle.cos(), self.y + len * angle.sin())
    }
}

/// Smallest cycle through each ring bond, as ordered atom lists, sorted by
/// size then atoms.
pub fn rings(g: &MolGraph) -> Vec<Vec<usize>> {
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut out = Vec::new();
    for ((a, b), _) in g.bonds() {
        let Some(path) = shortest_path_without(g, a, b) else {
            continue;
        };
        let mut key = path.clone();
        key.sort_unstable();
        if seen.insert(key) {
            out.push(path);
        }
    }
    out.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    out
}

/// Path a..b not using the bond a-b directly.
fn shortest_path_without(g: &MolGraph, a: usize, b: usize) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; g.atom_count()];
    prev[a] = a;
    let mut queue = VecDeque::from([a]);
    while let Some(u) = queue.pop_front() {
        for v in g.neighbors(u) {
            if (u == a && v == b) || prev[v] != usize::MAX {
                continue;
            }
            prev[v] = u;
            if v == b {
                let mut path = vec![b];
                let mut cur = b;
                while cur != a {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(v);
        }
    }
    None
}

fn circumradius(n: usize) -> f64 {
    0.5 / (PI / n as f64).sin()
}

struct Placer<'a> {
    g: &'a MolGraph,
    rings: Vec<Vec<usize>>,
    ring_done: Vec<bool>,
    pos: Vec<Option<Point>>,
    flip: Vec<bool>,
    queue: VecDeque<usize>,
}

impl Placer<'_> {
    fn set(&mut self, atom: usize, p: Point) {
        if self.pos[atom].is_none() {
            self.pos[atom] = Some(p);
            self.queue.push_back(atom);
        }
    }

    /// Polygon through `seq` (cyclic order), with vertex 0 at the already
    /// placed `seq[0]` and the center at `center`.
    fn polygon(&mut self, seq: &[usize], center: Point, sign: f64) {
        let n = seq.len();
        let r = circumradius(n);
        let start = center.angle_to(self.pos[seq[0]].expect("anchor placed"));
        for (i, &atom) in seq.iter().enumerate().skip(1) {
            let p = center.step(start + sign * 2.0 * PI * i as f64 / n as f64, r);
            self.set(atom, p);
        }
    }

    fn placed_neighbor_angles(&self, u: usize) -> Vec<f64> {
        let pu = self.pos[u].expect("placed");
        self.g
            .neighbors(u)
            .filter_map(|v| self.pos[v].map(|p| pu.angle_to(p)))
            .collect()
    }

    /// Direction pointing away from the placed neighbors of `u`.
    fn free_direction(&self, u: usize) -> f64 {
        let angles = self.placed_neighbor_angles(u);
        match angles.len() {
            0 => 0.0,
            1 => angles[0] + PI,
            _ => {
                let (sx, sy) = angles
                    .iter()
                    .fold((0.0, 0.0), |(x, y), a| (x + a.cos(), y + a.sin()));
                if sx.hypot(sy) < 1e-9 {
                    angles[0] + PI / 2.0
                } else {
                    sy.atan2(sx) + PI
                }
            }
        }
    }

    fn place_ring(&mut self, ring: usize, anchor: usize) {
        self.ring_done[ring] = true;
        let cycle = self.rings[ring].clone();
        let n = cycle.len();
        let at = cycle.iter().position(|&a| a == anchor).expect("anchor in ring");
        let forward: Vec<usize> = (0..n).map(|i| cycle[(at + i) % n]).collect();
        let backward: Vec<usize> = (0..n).map(|i| cycle[(at + n - i) % n]).collect();
        let pu = self.pos[anchor].expect("anchor placed");
        // fused: share the bond to a placed ring neighbor
        for seq in [&forward, &backward] {
            let Some(pw) = self.pos[seq[1]] else {
                continue;
            };
            let mid = Point::new((pu.x + pw.x) / 2.0, (pu.y + pw.y) / 2.0);
            let normal = pu.angle_to(pw) + PI / 2.0;
            let apothem = 0.5 / (PI / n as f64).tan();
            let others: Vec<Point> = self
                .pos
                .iter()
                .enumerate()
                .filter(|&(i, p)| p.is_some() && i != anchor && i != seq[1] && p.unwrap().dist(mid) < 2.5)
                .map(|(_, p)| p.unwrap())
                .collect();
            let side = |c: Point| -> f64 { others.iter().map(|o| o.dist(c)).sum::<f64>() };
            let c1 = mid.step(normal, apothem);
            let c2 = mid.step(normal + PI, apothem);
            let center = if side(c2) > side(c1) + 1e-9 { c2 } else { c1 };
            // orientation such that vertex 1 lands on the placed neighbor
            let r = circumradius(n);
            let start = center.angle_to(pu);
            let sign = if center.step(start + 2.0 * PI / n as f64, r).dist(pw) < 1e-6 {
                1.0
            } else {
                -1.0
            };
            self.polygon(seq, center, sign);
            return;
        }
        let dir = self.free_direction(anchor);
        let center = pu.step(dir, circumradius(n));
        self.polygon(&forward, center, 1.0);
    }

    /// Start and width of the widest angular gap between the placed
    /// neighbors of `u`; among equally wide gaps, the least crowded one.
    fn best_gap(&self, u: usize, angles: &[f64]) -> (f64, f64) {
        if angles.is_empty() {
            return (0.0, 2.0 * PI);
        }
        let pu = self.pos[u].expect("placed");
        let mut a: Vec<f64> = angles.iter().map(|x| x.rem_euclid(2.0 * PI)).collect();
        a.sort_by(f64::total_cmp);
        let k = a.len();
        let gaps: Vec<(f64, f64)> = (0..k)
            .map(|i| {
                let next = if i + 1 < k { a[i + 1] } else { a[0] + 2.0 * PI };
                (a[i], next - a[i])
            })
            .collect();
        let widest = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
        let clearance = |(start, width): (f64, f64)| {
            let probe = pu.step(start + width / 2.0, 1.0);
            self.pos
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != u)
                .filter_map(|(_, p)| p.map(|p| p.dist(probe)))
                .fold(f64::INFINITY, f64::min)
        };
        gaps.into_iter()
            .filter(|g| g.1 > widest - 1e-6)
            .fold(None, |best: Option<((f64, f64), f64)>, g| {
                let c = clearance(g);
                match best {
                    Some((_, bc)) if bc >= c - 1e-9 => best,
                    _ => Some((g, c)),
                }
            })
            .expect("at least one gap")
            .0
    }

    /// Heavy children continue the zig-zag; hydrogens then share the widest
    /// free gap.
    fn place_chain(&mut self, u: usize, children: &[usize]) {
        let pu = self.pos[u].expect("placed");
        let is_h = |i: usize| self.g.atom(i).element.is_hydrogen();
        let heavy: Vec<usize> = children.iter().copied().filter(|&v| !is_h(v)).collect();
        let hydrogens: Vec<usize> = children.iter().copied().filter(|&v| is_h(v)).collect();
        let placed_heavy: Vec<f64> = self
            .g
            .neighbors(u)
            .filter(|&v| !is_h(v))
            .filter_map(|v| self.pos[v].map(|p| pu.angle_to(p)))
            .collect();
        let m = heavy.len();
        let angles: Vec<f64> = match placed_heavy.len() {
            _ if m == 0 => Vec::new(),
            0 => (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect(),
            1 if m == 1 => {
                let turn = if self.flip[u] { -PI / 3.0 } else { PI / 3.0 };
                vec![placed_heavy[0] + PI + turn]
            }
            1 => (0..m).map(|i| placed_heavy[0] + 2.0 * PI * (i + 1) as f64 / (m + 1) as f64).collect(),
            _ => {
                let (start, gap) = self.best_gap(u, &placed_heavy);
                (0..m).map(|i| start + gap * (i + 1) as f64 / (m + 1) as f64).collect()
            }
        };
        for (&v, a) in heavy.iter().zip(angles) {
            // the next bend goes the other way from this one
            self.flip[v] = match placed_heavy.as_slice() {
                [back] => (a - back - PI).sin() > 0.0,
                _ => !self.flip[u],
            };
            self.set(v, pu.step(a, 1.0));
        }
        let (start, gap) = self.best_gap(u, &self.placed_neighbor_angles(u));
        let k = hydrogens.len();
        for (i, &h) in hydrogens.iter().enumerate() {
            self.set(h, pu.step(start + gap * (i + 1) as f64 / (k + 1) as f64, 1.0));
        }
    }

    /// Swings crowded terminal hydrogens around their parent to the
    /// clearest of 24 directions.
    fn relax_hydrogens(&mut self, comp: &[usize]) {
        for &h in comp {
            if !self.g.atom(h).element.is_hydrogen() || self.g.degree(h) != 1 {
                continue;
            }
            let parent = self.g.neighbors(h).next().expect("degree 1");
            let pp = self.pos[parent].expect("placed");
            let clearance = |p: Point, pos: &[Option<Point>]| {
                comp.iter()
                    .filter(|&&i| i != h)
                    .filter_map(|&i| pos[i].map(|q| q.dist(p)))
                    .fold(f64::INFINITY, f64::min)
            };
            let here = self.pos[h].expect("placed");
            if clearance(here, &self.pos) >= 0.6 {
                continue;
            }
            let best = (0..24)
                .map(|i| pp.step(2.0 * PI * i as f64 / 24.0, 1.0))
                .map(|p| (p, clearance(p, &self.pos)))
                .fold((here, clearance(here, &self.pos)), |b, c| if c.1 > b.1 + 1e-9 { c } else { b });
            self.pos[h] = Some(best.0);
        }
    }

    fn run(&mut self, start: usize) {
        if self.pos[start].is_none() {
            self.pos[start] = Some(Point::new(0.0, 0.0));
            self.queue.push_back(start);
        }
        if let Some(r) = (0..self.rings.len()).find(|&r| !self.ring_done[r] && self.rings[r].contains(&start)) {
            self.place_ring(r, start);
        }
        while let Some(u) = self.queue.pop_front() {
            for r in 0..self.rings.len() {
                if !self.ring_done[r] && self.rings[r].contains(&u) {
                    self.place_ring(r, u);
                }
            }
            let children: Vec<usize> = self.g.neighbors(u).filter(|&v| self.pos[v].is_none()).collect();
            if !children.is_empty() {
                self.place_chain(u, &children);
            }
        }
    }
}

/// One point per atom of `g`.
pub fn layout(g: &MolGraph) -> Vec<Point> {
    let n = g.atom_count();
    let rings = rings(g);
    let mut placer = Placer {
        g,
        ring_done: vec![false; rings.len()],
        rings,
        pos: vec![None; n],
        flip: vec![false; n],
        queue: VecDeque::new(),
    };
    let mut out = vec![Point::new(0.0, 0.0); n];
    let mut offset = 0.0;
    for comp in g.components() {
        let start = comp
            .iter()
            .copied()
            .find(|&a| placer.rings.iter().any(|r| r.contains(&a)))
            .unwrap_or(comp[0]);
        placer.run(start);
        placer.relax_hydrogens(&comp);
        let pts: Vec<Point> = comp.iter().map(|&a| placer.pos[a].expect("component placed")).collect();
        let min_x = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max_x = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let mid_y = (pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min)
            + pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max))
            / 2.0;
        for (&a, p) in comp.iter().zip(&pts) {
            out[a] = Point::new(round(p.x - min_x + offset), round(p.y - mid_y));
        }
        offset += max_x - min_x + 1.5;
    }
    out
}

fn round(v: f64) -> f64 {
    let r = (v * 1e4).round() / 1e4;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use arrowpush::smiles::parse_smiles;

    fn bond_lengths(s: &str) -> (MolGraph, Vec<Point>) {
        let g = parse_smiles(s).unwrap().with_explicit_hydrogens();
        let p = layout(&g);
        (g, p)
    }

    #[test]
    fn unit_bonds_and_no_overlaps() {
        for s in ["CCO", "CC(=O)CCCC=O", "C1CCCCC1", "c1ccccc1CC(=O)O", "C1CCC2CCCCC2C1", "CC(C)(C)O", "C1CC12CC2", "[BH4-].O"] {
            let (g, p) = bond_lengths(s);
            for ((a, b), _) in g.bonds() {
                assert!((p[a].dist(p[b]) - 1.0).abs() < 1e-3, "{s}: bond {a}-{b} is {}", p[a].dist(p[b]));
            }
            for i in 0..p.len() {
                for j in 0..i {
                    assert!(p[i].dist(p[j]) > 0.3, "{s}: atoms {i} and {j} overlap");
                }
            }
        }
    }

    #[test]
    fn rings_found_in_order() {
        let g = parse_smiles("C1CCC2CCCCC2C1").unwrap();
        let r = rings(&g);
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|c| c.len() == 6));
        assert!(rings(&parse_smiles("CCCC").unwrap()).is_empty());
    }

    #[test]
    fn deterministic_and_side_by_side() {
        let g = parse_smiles("CC(=O)CCCC=O.O.O.[BH4-].[BH4-]").unwrap().with_explicit_hydrogens();
        let a = layout(&g);
        assert_eq!(a, layout(&g));
        let comps = g.components();
        let right = |c: &Vec<usize>| c.iter().map(|&i| a[i].x).fold(f64::NEG_INFINITY, f64::max);
        let left = |c: &Vec<usize>| c.iter().map(|&i| a[i].x).fold(f64::INFINITY, f64::min);
        for w in comps.windows(2) {
            assert!(left(&w[1]) > right(&w[0]));
        }
    }
}
