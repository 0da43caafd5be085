//! The interface Γ as a facet triangulation embedded in a bulk mesh.

use super::mesh::{face_key, facet_measure_normal, Mesh, Phase};
use super::vec::{self, Point};
use crate::error::{BhError, Result};

/// Facets below this measure are rejected as degenerate.
pub const MIN_FACET_MEASURE: f64 = 1e-14;

/// Interface facets with unit normals, measures, component labels and the
/// two bulk elements each facet separates.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub dim: usize,
    /// Bulk vertex indices, first `dim` entries used.
    pub facets: Vec<[usize; 3]>,
    /// Unit normal pointing from the lower phase (`int`) into the higher.
    pub normals: Vec<Point>,
    pub measures: Vec<f64>,
    pub components: Vec<usize>,
    pub n_components: usize,
    /// (element on the low-phase side, element on the high-phase side)
    pub adjacent: Vec<(usize, usize)>,
}

impl SurfaceMesh {
    pub fn from_mesh(mesh: &Mesh) -> Result<Self> {
        let faces = mesh.face_map();
        let n = mesh.interface.len();
        let mut out = SurfaceMesh {
            dim: mesh.dim,
            facets: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            measures: Vec::with_capacity(n),
            components: Vec::with_capacity(n),
            n_components: mesh.n_components(),
            adjacent: Vec::with_capacity(n),
        };
        for (f, facet) in mesh.interface.iter().enumerate() {
            let verts = &facet.vertices[..mesh.dim];
            let pts: Vec<Point> = verts.iter().map(|&v| mesh.vertices[v]).collect();
            let (measure, _) = facet_measure_normal(mesh.dim, &pts);
            if !(measure >= MIN_FACET_MEASURE) {
                return Err(BhError::DegenerateFacet { facet: f, measure });
            }
            let owners = faces.get(&face_key(verts)).ok_or(BhError::MissingAdjacency(f))?;
            if owners.len() != 2 {
                return Err(BhError::MissingAdjacency(f));
            }
            let (a, b) = (owners[0], owners[1]);
            let (lo, hi) = if mesh.phases[a] < mesh.phases[b] {
                (a, b)
            } else {
                (b, a)
            };
            out.facets.push(facet.vertices);
            out.normals.push(facet.normal);
            out.measures.push(measure);
            out.components.push(facet.component);
            out.adjacent.push((lo, hi));
        }
        Ok(out)
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f][..self.dim]
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// |Γ_i| for every component.
    pub fn component_measures(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_components];
        for f in 0..self.n_facets() {
            m[self.components[f]] += self.measures[f];
        }
        m
    }

    pub fn facet_centroid(&self, mesh: &Mesh, f: usize) -> Point {
        let pts: Vec<Point> = self.facet(f).iter().map(|&v| mesh.vertices[v]).collect();
        vec::centroid(&pts)
    }

    /// Checks ν·(centroid_high − centroid_low) > 0 on every facet.
    pub fn normals_consistent(&self, mesh: &Mesh) -> bool {
        (0..self.n_facets()).all(|f| {
            let (lo, hi) = self.adjacent[f];
            let d = vec::sub(&mesh.element_centroid(hi), &mesh.element_centroid(lo));
            (vec::norm(&self.normals[f]) - 1.0).abs() < 1e-12 && vec::dot(&self.normals[f], &d) > 0.0
        })
    }

    /// Phases on the two sides of a facet.
    pub fn sides(&self, mesh: &Mesh, f: usize) -> (Phase, Phase) {
        let (lo, hi) = self.adjacent[f];
        (mesh.phases[lo], mesh.phases[hi])
    }

    /// Keeps only facets for which `keep` holds; component labels are
    /// compacted in order of first appearance.
    pub fn retain<F: Fn(usize) -> bool>(&self, keep: F) -> SurfaceMesh {
        let mut out = SurfaceMesh {
            dim: self.dim,
            facets: vec![],
            normals: vec![],
            measures: vec![],
            components: vec![],
            n_components: 0,
            adjacent: vec![],
        };
        let mut relabel = vec![usize::MAX; self.n_components];
        for f in 0..self.n_facets() {
            if !keep(f) {
                continue;
            }
            let c = self.components[f];
            if relabel[c] == usize::MAX {
                relabel[c] = out.n_components;
                out.n_components += 1;
            }
            out.facets.push(self.facets[f]);
            out.normals.push(self.normals[f]);
            out.measures.push(self.measures[f]);
            out.components.push(relabel[c]);
            out.adjacent.push(self.adjacent[f]);
        }
        out
    }
}
