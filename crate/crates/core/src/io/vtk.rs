//! Legacy-VTK ASCII export for external viewers.

use std::fmt::Write as _;

use crate::geometry::Mesh;

/// Unstructured grid with the phase as cell data and optional named point
/// scalars.
pub fn write_vtk(mesh: &Mesh, title: &str, point_data: &[(&str, &[f64])]) -> String {
    let d = mesh.dim;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID"
    );
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
    }
    let ne = mesh.n_elements();
    let _ = writeln!(s, "CELLS {ne} {}", ne * (d + 2));
    for e in &mesh.elements {
        let _ = write!(s, "{}", d + 1);
        for v in &e[..=d] {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    let cell_type = if d == 2 { 5 } else { 10 };
    for _ in 0..ne {
        let _ = writeln!(s, "{cell_type}");
    }
    let _ = writeln!(s, "CELL_DATA {ne}\nSCALARS phase int 1\nLOOKUP_TABLE default");
    for ph in &mesh.phases {
        let _ = writeln!(s, "{}", *ph as u8);
    }
    if !point_data.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_vertices());
        for (name, v) in point_data {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for x in *v {
                let _ = writeln!(s, "{x:e}");
            }
        }
    }
    s
}
