//! Structured mesh of a laminate: the inclusion phase is the band
//! `a < y2 < b`, so both interface components are horizontal lines.

use super::mesh::{Mesh, Phase};

fn breakpoints(cuts: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![cuts[0]];
    for w in cuts.windows(2) {
        let n = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
        for l in 1..n {
            out.push(w[0] + (w[1] - w[0]) * l as f64 / n as f64);
        }
        out.push(w[1]);
    }
    out
}

pub(super) fn build(a: f64, b: f64, h: f64) -> Mesh {
    let xs = breakpoints(&[0.0, 1.0], h);
    let ys = breakpoints(&[0.0, a, b, 1.0], h);
    let (nx, ny) = (xs.len(), ys.len());
    let mut vertices = Vec::with_capacity(nx * ny);
    for &y in &ys {
        for &x in &xs {
            vertices.push([x, y, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * nx + i;
    let mut elements = Vec::new();
    let mut phases = Vec::new();
    for j in 0..ny - 1 {
        let mid = 0.5 * (ys[j] + ys[j + 1]);
        let phase = if mid > a && mid < b { Phase::Int } else { Phase::Out };
        for i in 0..nx - 1 {
            let (p, q, r, s) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push([p, q, r, usize::MAX]);
            elements.push([p, r, s, usize::MAX]);
            phases.push(phase);
            phases.push(phase);
        }
    }
    Mesh::new(2, vertices, elements, phases)
}
