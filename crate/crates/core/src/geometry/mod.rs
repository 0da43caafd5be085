//! Interface-fitted periodic cell meshes, ε-tilings and membrane variants.

mod disk;
mod layered;
pub mod mesh;
pub mod surface;
mod tile;
mod tube;
pub mod vec;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use mesh::{InterfaceFacet, Mesh, PeriodicPair, Phase};
pub use surface::SurfaceMesh;
pub use tile::{cells_per_axis, tile_micro_domain, tile_micro_domain_with, MicroMesh, TileOptions};

use crate::error::{BhError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeometryKind {
    Disk2D,
    Layered2D,
    TubeLattice3D,
}

impl GeometryKind {
    pub fn dim(self) -> usize {
        match self {
            GeometryKind::Disk2D | GeometryKind::Layered2D => 2,
            GeometryKind::TubeLattice3D => 3,
        }
    }

    /// Whether the inclusion phase is connected (connected/connected case).
    pub fn inclusions_connected(self) -> bool {
        !matches!(self, GeometryKind::Disk2D)
    }

    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::Disk2D => "disk2d",
            GeometryKind::Layered2D => "layered2d",
            GeometryKind::TubeLattice3D => "tube3d",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "disk2d" => Some(GeometryKind::Disk2D),
            "layered2d" => Some(GeometryKind::Layered2D),
            "tube3d" => Some(GeometryKind::TubeLattice3D),
            _ => None,
        }
    }
}

/// Geometry class, named parameters and target mesh size (cell units).
///
/// Parameters: `r0` for [`GeometryKind::Disk2D`], `a` and `b` for
/// [`GeometryKind::Layered2D`], `rho` for [`GeometryKind::TubeLattice3D`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    pub params: BTreeMap<String, f64>,
    pub resolution: f64,
}

impl GeometrySpec {
    pub fn disk(r0: f64, h: f64) -> Self {
        Self::with(GeometryKind::Disk2D, &[("r0", r0)], h)
    }

    pub fn layered(a: f64, b: f64, h: f64) -> Self {
        Self::with(GeometryKind::Layered2D, &[("a", a), ("b", b)], h)
    }

    pub fn tube(rho: f64, h: f64) -> Self {
        Self::with(GeometryKind::TubeLattice3D, &[("rho", rho)], h)
    }

    fn with(kind: GeometryKind, params: &[(&str, f64)], h: f64) -> Self {
        GeometrySpec {
            kind,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            resolution: h,
        }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| BhError::InvalidGeometry(format!("missing parameter `{name}` for {:?}", self.kind)))
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.resolution;
        if !(h > 0.0 && h <= 0.5) {
            return Err(BhError::InvalidGeometry(format!("resolution h = {h} outside (0, 0.5]")));
        }
        match self.kind {
            GeometryKind::Disk2D => {
                let r0 = self.param("r0")?;
                if !(r0 > 0.0 && r0 < 0.5) {
                    return Err(BhError::InvalidGeometry(format!(
                        "disk radius r0 = {r0} outside (0, 0.5)"
                    )));
                }
            }
            GeometryKind::Layered2D => {
                let (a, b) = (self.param("a")?, self.param("b")?);
                if !(0.0 < a && a < b && b < 1.0) {
                    return Err(BhError::InvalidGeometry(format!(
                        "layer bounds need 0 < a < b < 1, got a = {a}, b = {b}"
                    )));
                }
            }
            GeometryKind::TubeLattice3D => {
                let rho = self.param("rho")?;
                if !(rho > 0.0 && rho < 0.5) {
                    return Err(BhError::InvalidGeometry(format!(
                        "tube radius rho = {rho} outside (0, 0.5)"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Stable textual description used for hashing and report headers.
    pub fn describe(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v:.17e}")).collect();
        format!("{} {} h={:.17e}", self.kind.name(), params.join(" "), self.resolution)
    }
}

/// Interface-fitted periodic mesh of the unit cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMesh {
    pub spec: GeometrySpec,
    pub mesh: Mesh,
}

impl CellMesh {
    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    /// |E_int|
    pub fn inclusion_volume(&self) -> f64 {
        self.mesh.phase_volume(Phase::Int)
    }
}

/// Cell mesh whose interface is thickened into a membrane band of relative
/// thickness `eta`, meshed as a third phase.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneMesh {
    pub spec: GeometrySpec,
    pub eta: f64,
    pub mesh: Mesh,
}

/// Builds the interface-fitted cell mesh and its interface triangulation.
pub fn build_unit_cell(spec: &GeometrySpec) -> Result<(CellMesh, SurfaceMesh)> {
    spec.validate()?;
    let mut mesh = match spec.kind {
        GeometryKind::Disk2D => disk::build(spec.param("r0")?, None, spec.resolution),
        GeometryKind::Layered2D => layered::build(spec.param("a")?, spec.param("b")?, spec.resolution),
        GeometryKind::TubeLattice3D => tube::build(spec.param("rho")?, spec.resolution)?,
    };
    mesh.detect_periodic_pairs()?;
    mesh.extract_interface()?;
    check_interface_resolution(&mesh)?;
    let surf = SurfaceMesh::from_mesh(&mesh)?;
    Ok((
        CellMesh {
            spec: spec.clone(),
            mesh,
        },
        surf,
    ))
}

/// Disk geometry with the interface circle replaced by an annulus
/// `r0 - eta/2 < |y - c| < r0 + eta/2`.
pub fn build_membrane_cell(spec: &GeometrySpec, eta: f64) -> Result<MembraneMesh> {
    spec.validate()?;
    if spec.kind != GeometryKind::Disk2D {
        return Err(BhError::InvalidGeometry(
            "membrane cells are only built for Disk2D".into(),
        ));
    }
    let r0 = spec.param("r0")?;
    if !(eta > 0.0 && eta <= 0.2) {
        return Err(BhError::InvalidGeometry(format!(
            "membrane thickness eta = {eta} outside (0, 0.2]"
        )));
    }
    if r0 - 0.5 * eta <= 0.0 || r0 + 0.5 * eta >= 0.5 {
        return Err(BhError::InvalidGeometry(format!(
            "membrane band for eta = {eta} leaves the cell"
        )));
    }
    let mut mesh = disk::build(r0, Some(eta), spec.resolution);
    mesh.detect_periodic_pairs()?;
    mesh.extract_interface()?;
    Ok(MembraneMesh {
        spec: spec.clone(),
        eta,
        mesh,
    })
}

fn check_interface_resolution(mesh: &Mesh) -> Result<()> {
    let m = mesh.n_components();
    if m == 0 {
        return Err(BhError::MeshFailure("no interface facets found".into()));
    }
    let mut counts = vec![0usize; m];
    for f in &mesh.interface {
        counts[f.component] += 1;
    }
    if let Some(i) = counts.iter().position(|&c| c < 8) {
        return Err(BhError::MeshFailure(format!(
            "interface component {i} resolved by only {} facets; refine h",
            counts[i]
        )));
    }
    Ok(())
}

/// Uniform simplicial mesh of (0,1)^dim with `n` cells per axis (right
/// triangles in 2D, Kuhn tetrahedra in 3D), single phase `out`. Returns the
/// mesh and the ∂Ω flag of every vertex.
pub fn unit_box_mesh(dim: usize, n: usize) -> (Mesh, Vec<bool>) {
    let np = n + 1;
    let mut vertices = Vec::new();
    let mut boundary = Vec::new();
    let count = np.pow(dim as u32);
    for idx in 0..count {
        let mut p = [0.0; 3];
        let mut r = idx;
        let mut bd = false;
        for d in 0..dim {
            let i = r % np;
            r /= np;
            p[d] = i as f64 / n as f64;
            bd |= i == 0 || i == n;
        }
        vertices.push(p);
        boundary.push(bd);
    }
    let id = |c: &[usize; 3]| -> usize {
        let mut k = 0;
        for d in (0..dim).rev() {
            k = k * np + c[d];
        }
        k
    };
    let mut elements = Vec::new();
    let cells = n.pow(dim as u32);
    for cidx in 0..cells {
        let mut base = [0usize; 3];
        let mut r = cidx;
        for b in base.iter_mut().take(dim) {
            *b = r % n;
            r /= n;
        }
        let perms: &[&[usize]] = if dim == 2 {
            &[&[0, 1], &[1, 0]]
        } else {
            &[&[0, 1, 2], &[0, 2, 1], &[1, 0, 2], &[1, 2, 0], &[2, 0, 1], &[2, 1, 0]]
        };
        for perm in perms {
            let mut c = base;
            let mut t = [usize::MAX; 4];
            t[0] = id(&c);
            for (s, &axis) in perm.iter().enumerate() {
                c[axis] += 1;
                t[s + 1] = id(&c);
            }
            elements.push(t);
        }
    }
    let phases = vec![Phase::Out; elements.len()];
    (Mesh::new(dim, vertices, elements, phases), boundary)
}
