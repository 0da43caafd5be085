//! ε-scaled tilings of Ω = (0,1)^N by copies of a cell mesh.

use std::collections::HashMap;

use super::mesh::{Mesh, Phase};
use super::surface::SurfaceMesh;
use super::vec::Point;
use super::{CellMesh, GeometryKind};
use crate::error::{BhError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileOptions {
    /// Relabel inclusion (and membrane) elements as `out` in every cell that
    /// touches ∂Ω.
    pub strip_boundary_inclusions: bool,
    /// Drop interface facets with a vertex on ∂Ω.
    pub clip_boundary_interface: bool,
}

impl TileOptions {
    /// Defaults per geometry class: isolated inclusions are removed from
    /// boundary cells, connected interfaces are clipped at ∂Ω.
    pub fn for_kind(kind: GeometryKind) -> Self {
        TileOptions {
            strip_boundary_inclusions: kind == GeometryKind::Disk2D,
            clip_boundary_interface: kind == GeometryKind::TubeLattice3D,
        }
    }
}

/// Tiled mesh of Ω with its interface Γ^ε.
#[derive(Debug, Clone)]
pub struct MicroMesh {
    pub eps: f64,
    /// Cells per axis, `1/eps`.
    pub n: usize,
    pub mesh: Mesh,
    pub surf: SurfaceMesh,
    /// Vertex lies on ∂Ω.
    pub boundary: Vec<bool>,
    /// Flat cell index `c0 + n*(c1 + n*c2)` of every element.
    pub element_cell: Vec<usize>,
    /// Whether each cell still contains inclusion elements.
    pub cell_has_inclusion: Vec<bool>,
}

impl MicroMesh {
    pub fn n_cells(&self) -> usize {
        self.n.pow(self.mesh.dim as u32)
    }

    pub fn n_inclusion_cells(&self) -> usize {
        self.cell_has_inclusion.iter().filter(|&&b| b).count()
    }

    /// Centre of cell `c` in Ω coordinates.
    pub fn cell_center(&self, c: usize) -> Point {
        let mut p = [0.0; 3];
        let mut r = c;
        for d in 0..self.mesh.dim {
            p[d] = ((r % self.n) as f64 + 0.5) / self.n as f64;
            r /= self.n;
        }
        p
    }
}

/// Returns `1/eps` when it is a positive integer.
pub fn cells_per_axis(eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(BhError::NonIntegerTiling(eps));
    }
    let n = (1.0 / eps).round();
    if (n * eps - 1.0).abs() > 1e-9 {
        return Err(BhError::NonIntegerTiling(eps));
    }
    Ok(n as usize)
}

/// Tiles Ω with the geometry's default options.
pub fn tile_micro_domain(cell: &CellMesh, eps: f64) -> Result<MicroMesh> {
    tile_micro_domain_with(&cell.mesh, eps, TileOptions::for_kind(cell.spec.kind))
}

/// Tiles Ω with `(1/eps)^N` translated copies of `cell`, merging shared
/// vertices on cell faces.
pub fn tile_micro_domain_with(cell: &Mesh, eps: f64, opts: TileOptions) -> Result<MicroMesh> {
    let n = cells_per_axis(eps)?;
    let dim = cell.dim;
    if cell.periodic.is_empty() {
        return Err(BhError::MeshFailure(
            "tiling needs a periodically identified cell mesh".into(),
        ));
    }
    let n_cells = n.pow(dim as u32);
    let mut vertices: Vec<Point> = Vec::with_capacity(n_cells * cell.n_vertices());
    let mut boundary = Vec::with_capacity(vertices.capacity());
    let mut index: HashMap<[u64; 3], usize> = HashMap::with_capacity(vertices.capacity());
    let mut elements = Vec::with_capacity(n_cells * cell.n_elements());
    let mut phases = Vec::with_capacity(elements.capacity());
    let mut element_cell = Vec::with_capacity(elements.capacity());
    let mut cell_has_inclusion = vec![false; n_cells];
    let nf = n as f64;

    for c in 0..n_cells {
        let mut ci = [0usize; 3];
        let mut r = c;
        for d in 0..dim {
            ci[d] = r % n;
            r /= n;
        }
        let on_boundary_cell = (0..dim).any(|d| ci[d] == 0 || ci[d] == n - 1);
        let local: Vec<usize> = cell
            .vertices
            .iter()
            .map(|y| {
                let mut x = [0.0; 3];
                let mut on_bd = false;
                for d in 0..dim {
                    x[d] = (ci[d] as f64 + y[d]) / nf;
                    on_bd |= (ci[d] == 0 && y[d] == 0.0) || (ci[d] == n - 1 && y[d] == 1.0);
                }
                let key = [x[0].to_bits(), x[1].to_bits(), x[2].to_bits()];
                *index.entry(key).or_insert_with(|| {
                    vertices.push(x);
                    boundary.push(on_bd);
                    vertices.len() - 1
                })
            })
            .collect();
        for (e, el) in cell.elements.iter().enumerate() {
            let mut t = [usize::MAX; 4];
            for i in 0..=dim {
                t[i] = local[el[i]];
            }
            let mut ph = cell.phases[e];
            if ph != Phase::Out {
                if opts.strip_boundary_inclusions && on_boundary_cell {
                    ph = Phase::Out;
                } else {
                    cell_has_inclusion[c] = true;
                }
            }
            elements.push(t);
            phases.push(ph);
            element_cell.push(c);
        }
    }

    let mut mesh = Mesh::new(dim, vertices, elements, phases);
    mesh.extract_interface()?;
    let mut surf = SurfaceMesh::from_mesh(&mesh)?;
    if opts.clip_boundary_interface {
        surf = surf.retain(|f| !surf.facet(f).iter().any(|&v| boundary[v]));
    }
    Ok(MicroMesh {
        eps,
        n,
        mesh,
        surf,
        boundary,
        element_cell,
        cell_has_inclusion,
    })
}
