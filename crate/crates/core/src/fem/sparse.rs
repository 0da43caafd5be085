//! Compressed sparse row storage for the assembled operators.

use crate::par::{self, Exec};

/// Square sparse matrix in CSR layout with sorted, unique column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn zeros(n: usize) -> Self {
        Csr {
            n,
            row_ptr: vec![0; n + 1],
            col: vec![],
            val: vec![],
        }
    }

    /// Sums duplicate entries. Triplets are sorted first, so the result
    /// does not depend on the order in which they were produced.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(trip.len() / 2);
        let mut val: Vec<f64> = Vec::with_capacity(trip.len() / 2);
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { n, row_ptr, col, val }
    }

    pub fn nnz(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col[r.clone()], &self.val[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for k in 0..c.len() {
                t.push((i, c[k], v[k]));
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec_exec(Exec::Serial, x)
    }

    pub fn mul_vec_exec(&self, exec: Exec, x: &[f64]) -> Vec<f64> {
        par::map_range(exec, self.n, |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
        })
    }

    /// xᵀ A y
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `a·self + b·other`, pattern is the union of both.
    pub fn lin_comb(&self, a: f64, other: &Csr, b: f64) -> Csr {
        assert_eq!(self.n, other.n);
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut val = Vec::with_capacity(col.capacity());
        for i in 0..self.n {
            let (c1, v1) = self.row(i);
            let (c2, v2) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < c1.len() || q < c2.len() {
                let j1 = c1.get(p).copied().unwrap_or(usize::MAX);
                let j2 = c2.get(q).copied().unwrap_or(usize::MAX);
                if j1 < j2 {
                    col.push(j1);
                    val.push(a * v1[p]);
                    p += 1;
                } else if j2 < j1 {
                    col.push(j2);
                    val.push(b * v2[q]);
                    q += 1;
                } else {
                    col.push(j1);
                    val.push(a * v1[p] + b * v2[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_ptr[i + 1] = col.len();
        }
        Csr {
            n: self.n,
            row_ptr,
            col,
            val,
        }
    }

    pub fn scaled(&self, a: f64) -> Csr {
        let mut m = self.clone();
        m.val.iter_mut().for_each(|v| *v *= a);
        m
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> Csr {
        let mut local = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            local[i] = k;
        }
        let mut trip = Vec::new();
        for (k, &i) in idx.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                if local[j] != usize::MAX {
                    trip.push((k, local[j], a));
                }
            }
        }
        Csr::from_triplets(idx.len(), trip)
    }

    /// `A[rows, cols] · x[cols]` where `cols` is given as a mask.
    pub fn block_mul(&self, rows: &[usize], col_mask: &[bool], x: &[f64]) -> Vec<f64> {
        rows.iter()
            .map(|&i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .filter(|(j, _)| col_mask[**j])
                    .map(|(&j, &a)| a * x[j])
                    .sum()
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.val.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// max |A_ij − A_ji|
    pub fn max_asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                m = m.max((a - self.get(j, i)).abs());
            }
        }
        m
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += a * x);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_merge_and_combine() {
        let a = Csr::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, 2.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.max_asymmetry(), 0.0);
        let b = Csr::from_triplets(2, vec![(1, 1, 5.0)]);
        let c = a.lin_comb(1.0, &b, 2.0);
        assert_eq!(c.get(1, 1), 10.0);
        assert_eq!(c.mul_vec(&[1.0, 1.0]), vec![6.0, 12.0]);
        assert_eq!(c.submatrix(&[1]).get(0, 0), 10.0);
    }
}
