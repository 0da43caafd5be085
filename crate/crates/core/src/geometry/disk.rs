//! O-grid mesher for a centred disk inclusion.
//!
//! Rays at uniform angles run from a small core square through the
//! interface circle(s) to the cell boundary. The angular count is a multiple
//! of eight and quad diagonals alternate per octant, so the mesh is
//! invariant under the symmetries of the square. The interface is an exact
//! polygonal chain of ring edges.

use std::f64::consts::PI;

use super::mesh::{Mesh, Phase};
use super::vec::Point;

const CENTER: [f64; 2] = [0.5, 0.5];

enum Curve {
    Square(f64),
    Circle(f64),
}

/// `tan` table on one face: `t[i + q] = 0.5 * tan(pi/4 * i/q)`, exactly
/// antisymmetric with `t[±q] = ±0.5`.
fn half_tan_table(q: usize) -> Vec<f64> {
    let qi = q as i64;
    let mut t = vec![0.0; 2 * q + 1];
    for i in 1..qi {
        let v = 0.5 * (PI / 4.0 * i as f64 / q as f64).tan();
        t[(qi + i) as usize] = v;
        t[(qi - i) as usize] = -v;
    }
    t[2 * q] = 0.5;
    t[0] = -0.5;
    t
}

pub(super) fn build(r0: f64, eta: Option<f64>, h: f64) -> Mesh {
    let radii: Vec<f64> = match eta {
        None => vec![r0],
        Some(eta) => vec![r0 - 0.5 * eta, r0 + 0.5 * eta],
    };
    let q = ((2.0 * PI * r0 / (8.0 * h)).ceil() as usize).max(2);
    let n_theta = 8 * q;
    let table = half_tan_table(q);
    let tab = |i: i64| table[(i + q as i64) as usize];

    let square_point = |w: f64, k: usize| -> Point {
        let f = ((k + q) / (2 * q)) % 4;
        let i = ((k + q) % (2 * q)) as i64 - q as i64;
        let t = 2.0 * w * tab(i);
        let (dx, dy) = match f {
            0 => (w, t),
            1 => (-t, w),
            2 => (-w, -t),
            _ => (t, -w),
        };
        [CENTER[0] + dx, CENTER[1] + dy, 0.0]
    };
    let circle_point = |r: f64, k: usize| -> Point {
        let theta = 2.0 * PI * k as f64 / n_theta as f64;
        [CENTER[0] + r * theta.cos(), CENTER[1] + r * theta.sin(), 0.0]
    };

    let core = 0.5 * radii[0];
    let mut curves = vec![Curve::Square(core)];
    let mut layers = vec![((radii[0] - core) / h).ceil().max(2.0) as usize];
    let mut seg_phase = vec![Phase::Int];
    for (idx, &r) in radii.iter().enumerate() {
        curves.push(Curve::Circle(r));
        if idx + 1 < radii.len() {
            let band = radii[idx + 1] - r;
            layers.push((2.0 * band / h).ceil().max(2.0) as usize);
            seg_phase.push(Phase::Membrane);
        }
    }
    let r_last = *radii.last().unwrap();
    curves.push(Curve::Square(0.5));
    layers.push(((0.6 - r_last) / h).ceil().max(2.0) as usize);
    seg_phase.push(Phase::Out);

    let curve_point = |c: &Curve, k: usize| match *c {
        Curve::Square(w) => square_point(w, k),
        Curve::Circle(r) => circle_point(r, k),
    };

    let mut vertices: Vec<Point> = Vec::new();
    let mut elements = Vec::new();
    let mut phases = Vec::new();

    // core tensor grid
    let side = 2 * q + 1;
    for i in 0..side {
        for j in 0..side {
            let x = CENTER[0] + 2.0 * core * table[i];
            let y = CENTER[1] + 2.0 * core * table[j];
            vertices.push([x, y, 0.0]);
        }
    }
    let core_id = |i: i64, j: i64| ((i + q as i64) as usize) * side + (j + q as i64) as usize;
    for i in -(q as i64)..(q as i64) {
        for j in -(q as i64)..(q as i64) {
            let a = core_id(i, j);
            let b = core_id(i + 1, j);
            let c = core_id(i + 1, j + 1);
            let d = core_id(i, j + 1);
            let same_sign = (2 * i + 1) * (2 * j + 1) > 0;
            let tris = if same_sign {
                [[a, b, c], [a, c, d]]
            } else {
                [[a, b, d], [b, c, d]]
            };
            for t in tris {
                elements.push([t[0], t[1], t[2], usize::MAX]);
                phases.push(Phase::Int);
            }
        }
    }

    // ray level 0 sits on the core boundary
    let ray0: Vec<usize> = (0..n_theta)
        .map(|k| {
            let f = ((k + q) / (2 * q)) % 4;
            let i = ((k + q) % (2 * q)) as i64 - q as i64;
            let qi = q as i64;
            match f {
                0 => core_id(qi, i),
                1 => core_id(-i, qi),
                2 => core_id(-qi, -i),
                _ => core_id(i, -qi),
            }
        })
        .collect();

    let mut rings: Vec<Vec<usize>> = vec![ray0];
    let mut ring_phase: Vec<Phase> = Vec::new();
    for (s, &n) in layers.iter().enumerate() {
        for l in 1..=n {
            let t = l as f64 / n as f64;
            let ids: Vec<usize> = (0..n_theta)
                .map(|k| {
                    let p = if l == n {
                        curve_point(&curves[s + 1], k)
                    } else {
                        let a = curve_point(&curves[s], k);
                        let b = curve_point(&curves[s + 1], k);
                        super::vec::lerp(&a, &b, t)
                    };
                    vertices.push(p);
                    vertices.len() - 1
                })
                .collect();
            rings.push(ids);
            ring_phase.push(seg_phase[s]);
        }
    }

    for (level, phase) in ring_phase.iter().enumerate() {
        let (inner, outer) = (&rings[level], &rings[level + 1]);
        for k in 0..n_theta {
            let k1 = (k + 1) % n_theta;
            let (a, b, c, d) = (inner[k], inner[k1], outer[k1], outer[k]);
            let tris = if (k / q).is_multiple_of(2) {
                [[a, b, c], [a, c, d]]
            } else {
                [[a, b, d], [b, c, d]]
            };
            for t in tris {
                elements.push([t[0], t[1], t[2], usize::MAX]);
                phases.push(*phase);
            }
        }
    }

    Mesh::new(2, vertices, elements, phases)
}
