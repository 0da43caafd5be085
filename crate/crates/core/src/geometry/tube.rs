//! Tube lattice: three orthogonal cylinders of radius `rho` through the
//! centres of opposite cell faces. The interface is the zero level set of
//! `phi(y) = min_a dist(y, axis_a) - rho`, extracted by marching tetrahedra
//! on a Kuhn-subdivided background grid. Grid vertices close to the level
//! set are first snapped onto it; cut tetrahedra are then split into
//! sub-tetrahedra conforming to the interface, with quadrilateral faces
//! divided through their lowest-ranked vertex so neighbouring (and
//! periodic twin) elements agree.

use std::collections::HashMap;

use super::mesh::{simplex_volume, Mesh, Phase};
use super::vec::Point;
use crate::error::{BhError, Result};

const SNAP_FRACTION: f64 = 0.2;

fn level_set(rho: f64, x: &Point) -> (f64, Point) {
    let mut best = f64::INFINITY;
    let mut grad = [0.0; 3];
    for axis in 0..3 {
        let mut d2 = 0.0;
        for b in 0..3 {
            if b != axis {
                d2 += (x[b] - 0.5) * (x[b] - 0.5);
            }
        }
        let d = d2.sqrt();
        if d < best {
            best = d;
            grad = [0.0; 3];
            if d > 0.0 {
                for b in 0..3 {
                    if b != axis {
                        grad[b] = (x[b] - 0.5) / d;
                    }
                }
            }
        }
    }
    (best - rho, grad)
}

/// Moves `x` onto the level set along the gradient with boundary-face
/// coordinates held fixed. Returns `None` when the projection would move
/// the vertex too far or stalls.
fn snap(rho: f64, x: &Point, max_move: f64) -> Option<Point> {
    let fixed: Vec<bool> = (0..3).map(|a| x[a] == 0.0 || x[a] == 1.0).collect();
    let mut y = *x;
    for _ in 0..6 {
        let (phi, mut g) = level_set(rho, &y);
        if phi.abs() < 1e-14 {
            break;
        }
        for a in 0..3 {
            if fixed[a] {
                g[a] = 0.0;
            }
        }
        let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        if g2 < 0.1 {
            return None;
        }
        for a in 0..3 {
            y[a] -= phi * g[a] / g2;
        }
    }
    let (phi, _) = level_set(rho, &y);
    let moved = ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2) + (y[2] - x[2]).powi(2)).sqrt();
    (phi.abs() < 1e-12 && moved <= max_move).then_some(y)
}

/// Kuhn subdivision of the unit cube: one tetrahedron per axis permutation.
const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

struct Cutter<'a> {
    rank: &'a [u64],
    phi: &'a [f64],
    cut: &'a HashMap<(usize, usize), usize>,
    out: Vec<([usize; 4], Phase)>,
}

impl Cutter<'_> {
    fn cut_id(&self, a: usize, b: usize) -> usize {
        self.cut[&(a.min(b), a.max(b))]
    }

    fn phase_of(&self, v: usize) -> Phase {
        if self.phi[v] < 0.0 {
            Phase::Int
        } else {
            Phase::Out
        }
    }

    fn tet(&mut self, t: [usize; 4], phase: Phase) {
        self.out.push((t, phase));
    }

    /// Splits the cyclic quad (q0, q1, q2, q3) through its lowest-ranked
    /// vertex.
    fn quad_tris(&self, q: [usize; 4]) -> [[usize; 3]; 2] {
        let m = (0..4).min_by_key(|&i| (self.rank[q[i]], q[i])).unwrap();
        if m % 2 == 0 {
            [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]
        } else {
            [[q[1], q[2], q[3]], [q[1], q[3], q[0]]]
        }
    }

    fn pyramid(&mut self, base: [usize; 4], apex: usize, phase: Phase) {
        for t in self.quad_tris(base) {
            self.tet([apex, t[0], t[1], t[2]], phase);
        }
    }

    /// Prism with bottom (v0, v1, v2) and top (v3, v4, v5), vi paired with
    /// vi+3.
    fn prism(&mut self, v: [usize; 6], phase: Phase) {
        const RELABEL: [[usize; 6]; 6] = [
            [0, 1, 2, 3, 4, 5],
            [1, 2, 0, 4, 5, 3],
            [2, 0, 1, 5, 3, 4],
            [3, 5, 4, 0, 2, 1],
            [4, 3, 5, 1, 0, 2],
            [5, 4, 3, 2, 1, 0],
        ];
        let key = |x: usize| (self.rank[x], x);
        let m = (0..6).min_by_key(|&i| key(v[i])).unwrap();
        let w: Vec<usize> = RELABEL[m].iter().map(|&i| v[i]).collect();
        if key(w[1]).min(key(w[5])) < key(w[2]).min(key(w[4])) {
            self.tet([w[0], w[1], w[2], w[5]], phase);
            self.tet([w[0], w[1], w[5], w[4]], phase);
        } else {
            self.tet([w[0], w[1], w[2], w[4]], phase);
            self.tet([w[0], w[4], w[2], w[5]], phase);
        }
        self.tet([w[0], w[4], w[5], w[3]], phase);
    }

    fn split(&mut self, t: [usize; 4], centroid_phase: Phase) {
        let pos: Vec<usize> = t.iter().copied().filter(|&v| self.phi[v] > 0.0).collect();
        let neg: Vec<usize> = t.iter().copied().filter(|&v| self.phi[v] < 0.0).collect();
        let zer: Vec<usize> = t.iter().copied().filter(|&v| self.phi[v] == 0.0).collect();
        if pos.is_empty() && neg.is_empty() {
            self.tet(t, centroid_phase);
            return;
        }
        if pos.is_empty() {
            self.tet(t, Phase::Int);
            return;
        }
        if neg.is_empty() {
            self.tet(t, Phase::Out);
            return;
        }
        match (pos.len(), neg.len()) {
            (1, 1) => {
                let c = self.cut_id(pos[0], neg[0]);
                self.tet([pos[0], c, zer[0], zer[1]], Phase::Out);
                self.tet([neg[0], c, zer[0], zer[1]], Phase::Int);
            }
            (1, 2) | (2, 1) => {
                let (lone, pair) = if pos.len() == 1 { (pos[0], &neg) } else { (neg[0], &pos) };
                let (a, b) = (pair[0], pair[1]);
                let ca = self.cut_id(lone, a);
                let cb = self.cut_id(lone, b);
                let z = zer[0];
                self.tet([lone, ca, cb, z], self.phase_of(lone));
                self.pyramid([a, b, cb, ca], z, self.phase_of(a));
            }
            (1, 3) | (3, 1) => {
                let (lone, rest) = if pos.len() == 1 { (pos[0], &neg) } else { (neg[0], &pos) };
                let c: Vec<usize> = rest.iter().map(|&r| self.cut_id(lone, r)).collect();
                self.tet([lone, c[0], c[1], c[2]], self.phase_of(lone));
                self.prism([rest[0], rest[1], rest[2], c[0], c[1], c[2]], self.phase_of(rest[0]));
            }
            (2, 2) => {
                let (p1, p2, m1, m2) = (pos[0], pos[1], neg[0], neg[1]);
                let c11 = self.cut_id(p1, m1);
                let c12 = self.cut_id(p1, m2);
                let c21 = self.cut_id(p2, m1);
                let c22 = self.cut_id(p2, m2);
                self.prism([p1, c11, c12, p2, c21, c22], Phase::Out);
                self.prism([m1, c11, c21, m2, c12, c22], Phase::Int);
            }
            _ => unreachable!("four vertices with both signs present"),
        }
    }
}

pub(super) fn build(rho: f64, h: f64) -> Result<Mesh> {
    let n = ((1.0 / h).ceil() as usize).max(4);
    let np = n + 1;
    let hg = 1.0 / n as f64;
    let gid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices: Vec<Point> = Vec::with_capacity(np * np * np);
    let mut rank: Vec<u64> = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
                rank.push(((i % n) + n * ((j % n) + n * (k % n))) as u64);
            }
        }
    }
    let n_grid = vertices.len();

    let mut phi: Vec<f64> = vertices.iter().map(|x| level_set(rho, x).0).collect();
    for v in 0..n_grid {
        if phi[v].abs() < SNAP_FRACTION * hg {
            if let Some(y) = snap(rho, &vertices[v], 0.35 * hg) {
                vertices[v] = y;
                phi[v] = 0.0;
            }
        }
    }

    let mut tets: Vec<[usize; 4]> = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMUTATIONS {
                    let mut c = [i, j, k];
                    let mut t = [gid(i, j, k), 0, 0, 0];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        t[s + 1] = gid(c[0], c[1], c[2]);
                    }
                    tets.push(t);
                }
            }
        }
    }

    // cut vertices, numbered in a periodically invariant order
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for t in &tets {
        for a in 0..4 {
            for b in a + 1..4 {
                let (u, v) = (t[a], t[b]);
                if phi[u] * phi[v] < 0.0 {
                    edges.push((u.min(v), u.max(v)));
                }
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let wrapped_key = |e: &(usize, usize)| {
        let (ra, rb) = (rank[e.0], rank[e.1]);
        (ra.min(rb), ra.max(rb))
    };
    edges.sort_by_key(|e| (wrapped_key(e), *e));
    let mut cut: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.len());
    let base_rank = (n * n * n) as u64;
    let keys: Vec<(u64, u64)> = edges.iter().map(wrapped_key).collect();
    let mut ordinal = 0u64;
    let mut last_key = None;
    for (e, &key) in edges.iter().zip(&keys) {
        if last_key != Some(key) {
            if last_key.is_some() {
                ordinal += 1;
            }
            last_key = Some(key);
        }
        // endpoints ordered by rank so periodic twins interpolate identically
        let (a, b) = if (rank[e.0], e.0) <= (rank[e.1], e.1) {
            (e.0, e.1)
        } else {
            (e.1, e.0)
        };
        let t = phi[a] / (phi[a] - phi[b]);
        let (pa, pb) = (vertices[a], vertices[b]);
        let p = [
            pa[0] + t * (pb[0] - pa[0]),
            pa[1] + t * (pb[1] - pa[1]),
            pa[2] + t * (pb[2] - pa[2]),
        ];
        cut.insert(*e, vertices.len());
        vertices.push(p);
        rank.push(base_rank + ordinal);
        phi.push(0.0);
    }

    let mut cutter = Cutter {
        rank: &rank,
        phi: &phi,
        cut: &cut,
        out: Vec::with_capacity(tets.len() * 2),
    };
    for t in &tets {
        let pts: Vec<Point> = t.iter().map(|&v| vertices[v]).collect();
        let c = super::vec::centroid(&pts);
        let cp = if level_set(rho, &c).0 < 0.0 {
            Phase::Int
        } else {
            Phase::Out
        };
        cutter.split(*t, cp);
    }
    let pieces = cutter.out;

    let min_vol = 1e-10 * hg * hg * hg;
    let mut elements = Vec::with_capacity(pieces.len());
    let mut phases = Vec::with_capacity(pieces.len());
    for (t, ph) in pieces {
        let pts: Vec<Point> = t.iter().map(|&v| vertices[v]).collect();
        let vol = simplex_volume(3, &pts);
        if vol < min_vol {
            return Err(BhError::MeshFailure(format!(
                "sliver tetrahedron {t:?} with volume {vol:e}"
            )));
        }
        elements.push(t);
        phases.push(ph);
    }
    Ok(Mesh::new(3, vertices, elements, phases))
}
