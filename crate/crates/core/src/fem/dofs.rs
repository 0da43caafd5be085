//! Vertex → dof numbering with periodic identification.

use crate::geometry::Mesh;

/// Maps mesh vertices to global dofs. Periodic partners share a dof.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub vertex_dof: Vec<usize>,
    pub n_dofs: usize,
}

impl DofMap {
    /// One dof per class of periodically identified vertices.
    pub fn periodic(mesh: &Mesh) -> Self {
        let (vertex_dof, n_dofs) = mesh.vertex_classes();
        DofMap { vertex_dof, n_dofs }
    }

    /// One dof per vertex.
    pub fn identity(n: usize) -> Self {
        DofMap {
            vertex_dof: (0..n).collect(),
            n_dofs: n,
        }
    }

    pub fn dof(&self, v: usize) -> usize {
        self.vertex_dof[v]
    }

    /// Nodal values per vertex from dof values.
    pub fn to_vertices(&self, x: &[f64]) -> Vec<f64> {
        self.vertex_dof.iter().map(|&d| x[d]).collect()
    }

    /// Dof values from a function of the vertex index (last writer wins;
    /// callers pass periodic-compatible functions).
    pub fn from_vertex_fn<F: Fn(usize) -> f64>(&self, f: F) -> Vec<f64> {
        let mut x = vec![0.0; self.n_dofs];
        for (v, &d) in self.vertex_dof.iter().enumerate() {
            x[d] = f(v);
        }
        x
    }
}
