//! Point location in simplicial meshes through a uniform bucket grid.

use crate::error::{BhError, Result};
use crate::geometry::vec::Point;
use crate::geometry::Mesh;

/// Barycentric coordinates of `q` in element `e`.
pub fn barycentric(mesh: &Mesh, e: usize, q: &Point) -> [f64; 4] {
    let d = mesh.dim;
    let pts = mesh.element_points(e);
    let mut a = nalgebra::DMatrix::<f64>::zeros(d, d);
    let mut r = nalgebra::DVector::<f64>::zeros(d);
    for i in 0..d {
        for j in 0..d {
            a[(i, j)] = pts[j + 1][i] - pts[0][i];
        }
        r[i] = q[i] - pts[0][i];
    }
    let mut out = [0.0; 4];
    if let Some(x) = a.lu().solve(&r) {
        let mut s = 0.0;
        for j in 0..d {
            out[j + 1] = x[j];
            s += x[j];
        }
        out[0] = 1.0 - s;
    }
    out
}

pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    n: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    /// Buckets over the unit box, roughly one element per bucket.
    pub fn new(mesh: &'a Mesh) -> Self {
        let d = mesh.dim;
        let n = ((mesh.n_elements() as f64).powf(1.0 / d as f64).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); n.pow(d as u32)];
        for e in 0..mesh.n_elements() {
            let pts = mesh.element_points(e);
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            for k in 0..d {
                let mn = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
                let mx = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
                lo[k] = Self::slot(n, mn - 1e-12);
                hi[k] = Self::slot(n, mx + 1e-12);
            }
            let (zlo, zhi) = if d == 3 { (lo[2], hi[2]) } else { (0, 0) };
            for z in zlo..=zhi {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        buckets[x + n * (y + n * z)].push(e);
                    }
                }
            }
        }
        PointLocator { mesh, n, buckets }
    }

    fn slot(n: usize, x: f64) -> usize {
        ((x * n as f64).floor().max(0.0) as usize).min(n - 1)
    }

    /// Element containing `q` and the barycentric coordinates there.
    pub fn locate(&self, q: &Point) -> Result<(usize, [f64; 4])> {
        let d = self.mesh.dim;
        let mut idx = 0;
        for k in (0..d).rev() {
            idx = idx * self.n + Self::slot(self.n, q[k]);
        }
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for &e in &self.buckets[idx] {
            let b = barycentric(self.mesh, e, q);
            let m = b[..=d].iter().cloned().fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|x| m > x.2) {
                best = Some((e, b, m));
            }
        }
        match best {
            Some((e, b, m)) if m >= -1e-9 => Ok((e, b)),
            _ => Err(BhError::SolverFailure(format!("point {q:?} lies outside the mesh"))),
        }
    }

    /// P1 value of nodal field `u` at `q`.
    pub fn eval(&self, u: &[f64], q: &Point) -> Result<f64> {
        let (e, b) = self.locate(q)?;
        Ok(self.mesh.element(e).iter().zip(&b).map(|(&p, w)| w * u[p]).sum())
    }
}
