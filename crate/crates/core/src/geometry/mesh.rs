use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::vec::{self, Point};
use crate::error::{BhError, Result};

/// Material phase of an element. The ordering matters: interface normals
/// point from the lower phase into the higher one, so for a two-phase mesh
/// ν points from the inclusion into the outer phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Int,
    Membrane,
    Out,
}

impl Phase {
    pub fn code(self) -> &'static str {
        match self {
            Phase::Int => "int",
            Phase::Membrane => "memb",
            Phase::Out => "out",
        }
    }

    pub fn from_code(s: &str) -> Option<Phase> {
        match s {
            "int" => Some(Phase::Int),
            "memb" => Some(Phase::Membrane),
            "out" => Some(Phase::Out),
            _ => None,
        }
    }
}

/// `q` is the image of `p` under translation by `e_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicPair {
    pub p: usize,
    pub q: usize,
    pub axis: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceFacet {
    /// First `dim` entries are used.
    pub vertices: [usize; 3],
    pub component: usize,
    pub normal: Point,
}

/// Simplicial mesh with phase labels, optional periodic identification and
/// the list of facets separating different phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// First `dim + 1` entries are used.
    pub elements: Vec<[usize; 4]>,
    pub phases: Vec<Phase>,
    pub periodic: Vec<PeriodicPair>,
    pub interface: Vec<InterfaceFacet>,
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Keeps the smaller index as the root so labels are order-stable.
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub(crate) type FaceKey = [usize; 3];

pub(crate) fn face_key(verts: &[usize]) -> FaceKey {
    let mut k = [usize::MAX; 3];
    k[..verts.len()].copy_from_slice(verts);
    k[..verts.len()].sort_unstable();
    k
}

/// Volume of a simplex given by `dim + 1` points.
pub fn simplex_volume(dim: usize, pts: &[Point]) -> f64 {
    match dim {
        1 => (pts[1][0] - pts[0][0]).abs(),
        2 => {
            let a = vec::sub(&pts[1], &pts[0]);
            let b = vec::sub(&pts[2], &pts[0]);
            0.5 * (a[0] * b[1] - a[1] * b[0]).abs()
        }
        3 => {
            let a = vec::sub(&pts[1], &pts[0]);
            let b = vec::sub(&pts[2], &pts[0]);
            let c = vec::sub(&pts[3], &pts[0]);
            vec::dot(&a, &vec::cross(&b, &c)).abs() / 6.0
        }
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Measure of a facet (segment in 2D, triangle in 3D) and its unit normal
/// (unoriented).
pub fn facet_measure_normal(dim: usize, pts: &[Point]) -> (f64, Point) {
    match dim {
        2 => {
            let t = vec::sub(&pts[1], &pts[0]);
            let len = vec::norm(&t);
            (len, [-t[1] / len, t[0] / len, 0.0])
        }
        3 => {
            let n = vec::cross(&vec::sub(&pts[1], &pts[0]), &vec::sub(&pts[2], &pts[0]));
            let area2 = vec::norm(&n);
            (0.5 * area2, vec::scale(&n, 1.0 / area2))
        }
        _ => panic!("unsupported facet dimension {dim}"),
    }
}

impl Mesh {
    pub fn new(dim: usize, vertices: Vec<Point>, elements: Vec<[usize; 4]>, phases: Vec<Phase>) -> Self {
        Mesh {
            dim,
            vertices,
            elements,
            phases,
            periodic: Vec::new(),
            interface: Vec::new(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn element_points(&self, e: usize) -> Vec<Point> {
        self.element(e).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        simplex_volume(self.dim, &self.element_points(e))
    }

    pub fn element_centroid(&self, e: usize) -> Point {
        vec::centroid(&self.element_points(e))
    }

    pub fn phase_volume(&self, phase: Phase) -> f64 {
        (0..self.n_elements())
            .filter(|&e| self.phases[e] == phase)
            .map(|e| self.element_volume(e))
            .sum()
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_volume(e)).sum()
    }

    /// Equivalence classes of vertices under the periodic identification.
    /// Returns the class index of every vertex, numbered in order of first
    /// appearance.
    pub fn vertex_classes(&self) -> (Vec<usize>, usize) {
        let mut uf = UnionFind::new(self.n_vertices());
        for pair in &self.periodic {
            uf.union(pair.p, pair.q);
        }
        let mut label = vec![usize::MAX; self.n_vertices()];
        let mut root_label = HashMap::new();
        let mut next = 0;
        for v in 0..self.n_vertices() {
            let r = uf.find(v);
            let l = *root_label.entry(r).or_insert_with(|| {
                next += 1;
                next - 1
            });
            label[v] = l;
        }
        (label, next)
    }

    /// Pairs vertices on opposite faces of the unit cell. The partner on the
    /// far face has its tangential coordinates copied from the near face, so
    /// paired vertices differ by exactly one unit coordinate.
    pub fn detect_periodic_pairs(&mut self) -> Result<()> {
        const TOL: f64 = 1e-9;
        let quant = |x: f64| (x * 1e8).round() as i64;
        let mut pairs = Vec::new();
        for axis in 0..self.dim {
            let mut far: HashMap<[i64; 3], usize> = HashMap::new();
            for (v, p) in self.vertices.iter().enumerate() {
                if (p[axis] - 1.0).abs() < TOL {
                    let mut key = [0i64; 3];
                    for d in 0..self.dim {
                        key[d] = if d == axis { 0 } else { quant(p[d]) };
                    }
                    far.insert(key, v);
                }
            }
            let mut near_count = 0;
            for v in 0..self.n_vertices() {
                let p = self.vertices[v];
                if p[axis].abs() >= TOL {
                    continue;
                }
                near_count += 1;
                let mut key = [0i64; 3];
                for d in 0..self.dim {
                    key[d] = if d == axis { 0 } else { quant(p[d]) };
                }
                let q = *far.get(&key).ok_or_else(|| {
                    BhError::MeshFailure(format!("vertex {v} at {p:?} has no periodic partner along axis {axis}"))
                })?;
                let mut image = p;
                image[axis] = 1.0;
                for d in 0..self.dim {
                    if (self.vertices[q][d] - image[d]).abs() > TOL {
                        return Err(BhError::MeshFailure(format!(
                            "periodic partner of {v} deviates along axis {d}"
                        )));
                    }
                }
                self.vertices[v][axis] = 0.0;
                self.vertices[q] = image;
                pairs.push(PeriodicPair { p: v, q, axis });
            }
            if near_count != far.len() {
                return Err(BhError::MeshFailure(format!(
                    "axis {axis}: {near_count} near-face vertices but {} far-face vertices",
                    far.len()
                )));
            }
        }
        self.periodic = pairs;
        Ok(())
    }

    /// Map from sorted face vertex keys to the (up to two) elements sharing
    /// the face.
    pub(crate) fn face_map(&self) -> HashMap<FaceKey, Vec<usize>> {
        let mut map: HashMap<FaceKey, Vec<usize>> = HashMap::with_capacity(self.n_elements() * 2);
        for e in 0..self.n_elements() {
            let el = self.element(e);
            for skip in 0..=self.dim {
                let face: Vec<usize> = (0..=self.dim).filter(|&i| i != skip).map(|i| el[i]).collect();
                map.entry(face_key(&face)).or_default().push(e);
            }
        }
        map
    }

    /// Recomputes `interface` from the phase labels: every facet shared by
    /// two elements of different phases, normal oriented from the lower into
    /// the higher phase, components labelled under facet adjacency modulo
    /// the periodic identification.
    pub fn extract_interface(&mut self) -> Result<()> {
        let faces = self.face_map();
        let mut facets = Vec::new();
        for e in 0..self.n_elements() {
            let el = self.element(e).to_vec();
            for skip in 0..=self.dim {
                let face: Vec<usize> = (0..=self.dim).filter(|&i| i != skip).map(|i| el[i]).collect();
                let owners = &faces[&face_key(&face)];
                if owners.len() > 2 {
                    return Err(BhError::MeshFailure(format!(
                        "face {face:?} shared by {} elements",
                        owners.len()
                    )));
                }
                if owners.len() < 2 {
                    continue;
                }
                let other = if owners[0] == e { owners[1] } else { owners[0] };
                if other < e || self.phases[other] == self.phases[e] {
                    continue;
                }
                let (lo, hi) = if self.phases[e] < self.phases[other] {
                    (e, other)
                } else {
                    (other, e)
                };
                let pts: Vec<Point> = face.iter().map(|&v| self.vertices[v]).collect();
                let (measure, mut normal) = facet_measure_normal(self.dim, &pts);
                if !(measure > 0.0) {
                    return Err(BhError::MeshFailure(format!("zero-measure interface face {face:?}")));
                }
                let d = vec::sub(&self.element_centroid(hi), &self.element_centroid(lo));
                if vec::dot(&normal, &d) < 0.0 {
                    normal = vec::scale(&normal, -1.0);
                }
                let mut verts = [usize::MAX; 3];
                verts[..self.dim].copy_from_slice(&face);
                facets.push(InterfaceFacet {
                    vertices: verts,
                    component: 0,
                    normal,
                });
            }
        }
        let (class, _) = self.vertex_classes();
        let mut uf = UnionFind::new(facets.len());
        let mut first_facet: HashMap<usize, usize> = HashMap::new();
        for (f, facet) in facets.iter().enumerate() {
            for &v in &facet.vertices[..self.dim] {
                match first_facet.get(&class[v]) {
                    Some(&g) => uf.union(f, g),
                    None => {
                        first_facet.insert(class[v], f);
                    }
                }
            }
        }
        let mut labels = HashMap::new();
        for f in 0..facets.len() {
            let r = uf.find(f);
            let next = labels.len();
            facets[f].component = *labels.entry(r).or_insert(next);
        }
        self.interface = facets;
        Ok(())
    }

    pub fn n_components(&self) -> usize {
        self.interface.iter().map(|f| f.component + 1).max().unwrap_or(0)
    }
}
