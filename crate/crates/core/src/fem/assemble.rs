//! P1 assembly on simplices: bulk stiffness, tangential (Laplace-Beltrami)
//! stiffness on Γ, mass matrices, directional loads and gradient integrals.

use super::dofs::DofMap;
use super::sparse::Csr;
use super::Coeffs;
use crate::error::{BhError, Result};
use crate::geometry::surface::MIN_FACET_MEASURE;
use crate::geometry::vec::{self, Point};
use crate::geometry::{Mesh, Phase, SurfaceMesh};
use crate::par::{self, Exec};

/// Volume and barycentric-coordinate gradients of a `dim`-simplex.
pub fn p1_gradients(dim: usize, pts: &[Point]) -> (f64, [Point; 4]) {
    let mut g = [[0.0; 3]; 4];
    let vol;
    match dim {
        2 => {
            let a = vec::sub(&pts[1], &pts[0]);
            let b = vec::sub(&pts[2], &pts[0]);
            let det = a[0] * b[1] - a[1] * b[0];
            g[1] = [b[1] / det, -b[0] / det, 0.0];
            g[2] = [-a[1] / det, a[0] / det, 0.0];
            vol = 0.5 * det.abs();
        }
        3 => {
            let a = vec::sub(&pts[1], &pts[0]);
            let b = vec::sub(&pts[2], &pts[0]);
            let c = vec::sub(&pts[3], &pts[0]);
            let det = vec::dot(&a, &vec::cross(&b, &c));
            g[1] = vec::scale(&vec::cross(&b, &c), 1.0 / det);
            g[2] = vec::scale(&vec::cross(&c, &a), 1.0 / det);
            g[3] = vec::scale(&vec::cross(&a, &b), 1.0 / det);
            vol = det.abs() / 6.0;
        }
        _ => panic!("unsupported dimension {dim}"),
    }
    let mut s = [0.0; 3];
    for i in 1..=dim {
        s = vec::add(&s, &g[i]);
    }
    g[0] = vec::scale(&s, -1.0);
    (vol, g)
}

/// Intrinsic gradients of the barycentric coordinates of a facet (segment
/// in 2D, triangle in 3D), computed in the facet's own tangent space.
pub fn facet_tangential_gradients(dim: usize, pts: &[Point]) -> (f64, [Point; 3]) {
    let mut g = [[0.0; 3]; 3];
    let measure;
    match dim {
        2 => {
            let t = vec::sub(&pts[1], &pts[0]);
            let l2 = vec::dot(&t, &t);
            g[1] = vec::scale(&t, 1.0 / l2);
            g[0] = vec::scale(&g[1], -1.0);
            measure = l2.sqrt();
        }
        3 => {
            let a = vec::sub(&pts[1], &pts[0]);
            let b = vec::sub(&pts[2], &pts[0]);
            let (aa, ab, bb) = (vec::dot(&a, &a), vec::dot(&a, &b), vec::dot(&b, &b));
            let det = aa * bb - ab * ab;
            let (i00, i01, i11) = (bb / det, -ab / det, aa / det);
            g[1] = vec::add(&vec::scale(&a, i00), &vec::scale(&b, i01));
            g[2] = vec::add(&vec::scale(&a, i01), &vec::scale(&b, i11));
            g[0] = vec::scale(&vec::add(&g[1], &g[2]), -1.0);
            measure = 0.5 * det.sqrt();
        }
        _ => panic!("unsupported dimension {dim}"),
    }
    (measure, g)
}

/// The same gradients obtained by projecting the bulk gradients of the
/// low-phase neighbour element with I − ν⊗ν. Used as an independent check
/// of [`facet_tangential_gradients`].
pub fn facet_projected_gradients(mesh: &Mesh, surf: &SurfaceMesh, f: usize) -> [Point; 3] {
    let (lo, _) = surf.adjacent[f];
    let el = mesh.element(lo);
    let (_, g) = p1_gradients(mesh.dim, &mesh.element_points(lo));
    let nu = surf.normals[f];
    let mut out = [[0.0; 3]; 3];
    for (k, &v) in surf.facet(f).iter().enumerate() {
        let i = el
            .iter()
            .position(|&w| w == v)
            .expect("facet vertex in adjacent element");
        out[k] = vec::sub(&g[i], &vec::scale(&nu, vec::dot(&nu, &g[i])));
    }
    out
}

fn collect(n: usize, parts: Vec<Vec<(usize, usize, f64)>>) -> Csr {
    Csr::from_triplets(n, parts.into_iter().flatten().collect())
}

/// Stiffness with per-phase scalar coefficients; zero coefficients are
/// allowed and drop the element.
pub fn bulk_stiffness(mesh: &Mesh, dofs: &DofMap, coeff: &Coeffs, exec: Exec) -> Csr {
    let d = mesh.dim;
    let parts = par::map_range(exec, mesh.n_elements(), |e| {
        let lam = coeff.get(mesh.phases[e]);
        if lam == 0.0 {
            return vec![];
        }
        let (vol, g) = p1_gradients(d, &mesh.element_points(e));
        let el = mesh.element(e);
        let mut t = Vec::with_capacity((d + 1) * (d + 1));
        for a in 0..=d {
            for b in 0..=d {
                t.push((dofs.dof(el[a]), dofs.dof(el[b]), lam * vol * vec::dot(&g[a], &g[b])));
            }
        }
        t
    });
    collect(dofs.n_dofs, parts)
}

/// Bulk stiffness K_pq = Σ_e λ_e ∫ ∇φ_p·∇φ_q with strictly positive
/// coefficients on every phase present in the mesh.
pub fn assemble_bulk_stiffness(mesh: &Mesh, dofs: &DofMap, coeff: &Coeffs, exec: Exec) -> Result<Csr> {
    for (phase, name) in [
        (Phase::Int, "lambda_int"),
        (Phase::Membrane, "lambda_membrane"),
        (Phase::Out, "lambda_out"),
    ] {
        let value = coeff.get(phase);
        if mesh.phases.contains(&phase) && !(value > 0.0) {
            return Err(BhError::NonpositiveCoefficient { name, value });
        }
    }
    Ok(bulk_stiffness(mesh, dofs, coeff, exec))
}

/// Stiffness for a constant matrix coefficient, ∫ ∇φ_p·M∇φ_q, using the
/// symmetric part of `m`.
pub fn matrix_stiffness(mesh: &Mesh, dofs: &DofMap, m: &[[f64; 3]; 3], exec: Exec) -> Csr {
    let d = mesh.dim;
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = 0.5 * (m[i][j] + m[j][i]);
        }
    }
    let parts = par::map_range(exec, mesh.n_elements(), |e| {
        let (vol, g) = p1_gradients(d, &mesh.element_points(e));
        let el = mesh.element(e);
        let mut t = Vec::with_capacity((d + 1) * (d + 1));
        for a in 0..=d {
            let mg = [vec::dot(&s[0], &g[a]), vec::dot(&s[1], &g[a]), vec::dot(&s[2], &g[a])];
            for b in 0..=d {
                t.push((dofs.dof(el[a]), dofs.dof(el[b]), vol * vec::dot(&mg, &g[b])));
            }
        }
        t
    });
    collect(dofs.n_dofs, parts)
}

/// Consistent P1 mass matrix.
pub fn mass_matrix(mesh: &Mesh, dofs: &DofMap, exec: Exec) -> Csr {
    let d = mesh.dim;
    let parts = par::map_range(exec, mesh.n_elements(), |e| {
        let vol = mesh.element_volume(e);
        let el = mesh.element(e);
        let diag = 2.0 * vol / ((d + 1) * (d + 2)) as f64;
        let off = vol / ((d + 1) * (d + 2)) as f64;
        let mut t = Vec::with_capacity((d + 1) * (d + 1));
        for a in 0..=d {
            for b in 0..=d {
                t.push((dofs.dof(el[a]), dofs.dof(el[b]), if a == b { diag } else { off }));
            }
        }
        t
    });
    collect(dofs.n_dofs, parts)
}

/// Tangential stiffness S_pq = Σ_f ∫_f ∇^Bφ_p·∇^Bφ_q dσ on the facets of Γ.
pub fn assemble_surface_stiffness(mesh: &Mesh, surf: &SurfaceMesh, dofs: &DofMap, exec: Exec) -> Result<Csr> {
    let d = mesh.dim;
    let k = d; // vertices per facet
    if let Some(f) = (0..surf.n_facets()).find(|&f| !(surf.measures[f] >= MIN_FACET_MEASURE)) {
        return Err(BhError::DegenerateFacet {
            facet: f,
            measure: surf.measures[f],
        });
    }
    let parts = par::map_range(exec, surf.n_facets(), |f| {
        let verts = surf.facet(f);
        let pts: Vec<Point> = verts.iter().map(|&v| mesh.vertices[v]).collect();
        let (meas, g) = facet_tangential_gradients(d, &pts);
        let mut t = Vec::with_capacity(k * k);
        for a in 0..k {
            for b in 0..k {
                t.push((dofs.dof(verts[a]), dofs.dof(verts[b]), meas * vec::dot(&g[a], &g[b])));
            }
        }
        t
    });
    Ok(collect(dofs.n_dofs, parts))
}

/// Lumped volume weights w_p = ∫ φ_p dy (so Σ w_p x_p = ∫ x for P1 x).
pub fn volume_weights(mesh: &Mesh, dofs: &DofMap) -> Vec<f64> {
    let mut w = vec![0.0; dofs.n_dofs];
    let share = 1.0 / (mesh.dim + 1) as f64;
    for e in 0..mesh.n_elements() {
        let v = mesh.element_volume(e) * share;
        for &p in mesh.element(e) {
            w[dofs.dof(p)] += v;
        }
    }
    w
}

/// Surface weights w_p = ∫_Γ φ_p dσ.
pub fn surface_weights(surf: &SurfaceMesh, dofs: &DofMap) -> Vec<f64> {
    let mut w = vec![0.0; dofs.n_dofs];
    let share = 1.0 / surf.dim as f64;
    for f in 0..surf.n_facets() {
        for &p in surf.facet(f) {
            w[dofs.dof(p)] += surf.measures[f] * share;
        }
    }
    w
}

/// Load k_{j,p} = ∫ λ e_j·∇φ_p dy (the weak form of −Div(λ e_j)).
pub fn bulk_direction_load(mesh: &Mesh, dofs: &DofMap, coeff: &Coeffs, j: usize) -> Vec<f64> {
    let mut b = vec![0.0; dofs.n_dofs];
    for e in 0..mesh.n_elements() {
        let lam = coeff.get(mesh.phases[e]);
        if lam == 0.0 {
            continue;
        }
        let (vol, g) = p1_gradients(mesh.dim, &mesh.element_points(e));
        for (a, &p) in mesh.element(e).iter().enumerate() {
            b[dofs.dof(p)] += lam * vol * g[a][j];
        }
    }
    b
}

/// Load s_{j,p} = ∫_Γ ∇^B y_j·∇^Bφ_p dσ with ∇^B y_j = (I − ν⊗ν)e_j
/// evaluated per facet.
pub fn surface_direction_load(mesh: &Mesh, surf: &SurfaceMesh, dofs: &DofMap, j: usize) -> Vec<f64> {
    let mut b = vec![0.0; dofs.n_dofs];
    for f in 0..surf.n_facets() {
        let verts = surf.facet(f);
        let pts: Vec<Point> = verts.iter().map(|&v| mesh.vertices[v]).collect();
        let (meas, g) = facet_tangential_gradients(mesh.dim, &pts);
        let nu = surf.normals[f];
        let mut pe = [0.0; 3];
        pe[j] = 1.0;
        let pe = vec::sub(&pe, &vec::scale(&nu, nu[j]));
        for (a, &p) in verts.iter().enumerate() {
            b[dofs.dof(p)] += meas * vec::dot(&pe, &g[a]);
        }
    }
    b
}

/// Constant gradient of the P1 field `x` (dof values) on element `e`.
pub fn element_gradient(mesh: &Mesh, dofs: &DofMap, e: usize, x: &[f64]) -> Point {
    let (_, g) = p1_gradients(mesh.dim, &mesh.element_points(e));
    let mut out = [0.0; 3];
    for (a, &p) in mesh.element(e).iter().enumerate() {
        out = vec::add(&out, &vec::scale(&g[a], x[dofs.dof(p)]));
    }
    out
}

/// Constant tangential gradient of `x` on facet `f`.
pub fn facet_gradient(mesh: &Mesh, surf: &SurfaceMesh, dofs: &DofMap, f: usize, x: &[f64]) -> Point {
    let verts = surf.facet(f);
    let pts: Vec<Point> = verts.iter().map(|&v| mesh.vertices[v]).collect();
    let (_, g) = facet_tangential_gradients(mesh.dim, &pts);
    let mut out = [0.0; 3];
    for (a, &p) in verts.iter().enumerate() {
        out = vec::add(&out, &vec::scale(&g[a], x[dofs.dof(p)]));
    }
    out
}

/// ∫ λ ∇x dy
pub fn bulk_gradient_integral(mesh: &Mesh, dofs: &DofMap, coeff: &Coeffs, x: &[f64]) -> Point {
    let mut out = [0.0; 3];
    for e in 0..mesh.n_elements() {
        let lam = coeff.get(mesh.phases[e]);
        if lam == 0.0 {
            continue;
        }
        let g = element_gradient(mesh, dofs, e, x);
        out = vec::add(&out, &vec::scale(&g, lam * mesh.element_volume(e)));
    }
    out
}

/// ∫_Γ ∇^B x dσ
pub fn surface_gradient_integral(mesh: &Mesh, surf: &SurfaceMesh, dofs: &DofMap, x: &[f64]) -> Point {
    let mut out = [0.0; 3];
    for f in 0..surf.n_facets() {
        let g = facet_gradient(mesh, surf, dofs, f, x);
        out = vec::add(&out, &vec::scale(&g, surf.measures[f]));
    }
    out
}

/// Per-facet flux jump λ_out ∇x|_out·ν − λ_int ∇x|_int·ν from the constant
/// gradients of the two adjacent elements.
pub fn surface_flux_jump(
    mesh: &Mesh,
    surf: &SurfaceMesh,
    dofs: &DofMap,
    x: &[f64],
    coeff: &Coeffs,
) -> Result<Vec<f64>> {
    (0..surf.n_facets())
        .map(|f| {
            let (lo, hi) = surf.adjacent[f];
            if lo >= mesh.n_elements() || hi >= mesh.n_elements() {
                return Err(BhError::MissingAdjacency(f));
            }
            let nu = surf.normals[f];
            let g_lo = element_gradient(mesh, dofs, lo, x);
            let g_hi = element_gradient(mesh, dofs, hi, x);
            Ok(coeff.get(mesh.phases[hi]) * vec::dot(&g_hi, &nu) - coeff.get(mesh.phases[lo]) * vec::dot(&g_lo, &nu))
        })
        .collect()
}

/// L² norm of a P1 field (exact for P1 via the consistent mass matrix).
pub fn l2_norm(mass: &Csr, x: &[f64]) -> f64 {
    mass.form(x, x).max(0.0).sqrt()
}
