//! Sparse solves: direct Cholesky, Jacobi-preconditioned CG, mean-zero and
//! homogeneous-Dirichlet constrained systems.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::sparse::{axpy, dot, norm, Csr};
use crate::error::{BhError, Result};

/// Relative residual target of the iterative solver.
pub const CG_TOL: f64 = 1e-10;

/// Sparse LLᵀ factorization of a symmetric positive definite matrix.
pub struct Cholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Cholesky {{ n: {} }}", self.n)
    }
}

impl Cholesky {
    pub fn factor(a: &Csr) -> Result<Self> {
        let trip: Vec<Triplet<usize, usize, f64>> = a
            .triplets()
            .into_iter()
            .filter(|t| t.1 <= t.0)
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &trip)
            .map_err(|e| BhError::SingularSystem(format!("matrix construction failed: {e:?}")))?;
        let llt = m
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| BhError::SingularSystem(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Cholesky { n: a.n, llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        if self.n == 0 {
            return vec![];
        }
        let rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Conjugate gradients with a diagonal (Jacobi) preconditioner.
pub fn pcg(a: &Csr, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let bn = norm(b);
    if bn == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let dinv: Vec<f64> = a.diag().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = x0.map(|x| x.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let ax = a.mul_vec(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    if norm(&r) <= tol * bn {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(BhError::SingularSystem(format!("CG breakdown, pᵀAp = {pap:e}")));
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        if norm(&r) <= tol * bn {
            return Ok(x);
        }
        z.iter_mut().zip(r.iter().zip(&dinv)).for_each(|(z, (r, d))| *z = r * d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(BhError::SingularSystem(format!(
        "CG stagnated after {max_iter} iterations (residual {:e})",
        norm(&r) / bn
    )))
}

/// Solve method for SPD systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    Cg,
}

enum Backend {
    Direct(Cholesky),
    Cg(Csr),
}

impl Backend {
    fn new(a: Csr, method: Method) -> Result<Self> {
        Ok(match method {
            Method::Direct => Backend::Direct(Cholesky::factor(&a)?),
            Method::Cg => Backend::Cg(a),
        })
    }

    fn solve(&self, b: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        match self {
            Backend::Direct(c) => Ok(c.solve(b)),
            Backend::Cg(a) => pcg(a, b, guess, CG_TOL, 20 * a.n.max(100)),
        }
    }
}

/// Solver for K x = b where K is symmetric positive semidefinite with a
/// kernel spanned by the indicator vectors of `groups`, under the
/// constraints Σ_{p∈g} w_p x_p = 0 for every group g.
///
/// Equivalent to the bordered system with one Lagrange multiplier per
/// group: the multiplier is μ_g = Σ_{g} b / Σ_{g} w in closed form, the
/// compatible system K x = b − μw is solved with one dof per group pinned,
/// and x is shifted per group onto the constraint.
pub struct MeanZeroSolver {
    groups: Vec<usize>,
    n_groups: usize,
    weights: Vec<f64>,
    group_weight: Vec<f64>,
    local: Vec<usize>,
    n_free: usize,
    backend: Backend,
}

impl MeanZeroSolver {
    pub fn new(k: &Csr, groups: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        Self::with_method(k, groups, weights, Method::Direct)
    }

    pub fn with_method(k: &Csr, groups: Vec<usize>, weights: Vec<f64>, method: Method) -> Result<Self> {
        let n = k.n;
        let n_groups = groups.iter().map(|&g| g + 1).max().unwrap_or(0);
        let mut group_weight = vec![0.0; n_groups];
        let mut pinned = vec![usize::MAX; n_groups];
        for p in 0..n {
            group_weight[groups[p]] += weights[p];
            if pinned[groups[p]] == usize::MAX {
                pinned[groups[p]] = p;
            }
        }
        if let Some(g) = group_weight.iter().position(|&w| !(w > 0.0)) {
            return Err(BhError::SingularSystem(format!("constraint group {g} has zero weight")));
        }
        let mut local = vec![usize::MAX; n];
        let mut free = Vec::with_capacity(n);
        for p in 0..n {
            if pinned[groups[p]] != p {
                local[p] = free.len();
                free.push(p);
            }
        }
        let backend = Backend::new(k.submatrix(&free), method)?;
        Ok(MeanZeroSolver {
            groups,
            n_groups,
            weights,
            group_weight,
            local,
            n_free: free.len(),
            backend,
        })
    }

    /// Returns the constrained solution and the per-group multipliers
    /// μ_g (zero when b is compatible).
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = b.len();
        let mut mu = vec![0.0; self.n_groups];
        for p in 0..n {
            mu[self.groups[p]] += b[p];
        }
        for g in 0..self.n_groups {
            mu[g] /= self.group_weight[g];
        }
        let mut rhs = vec![0.0; self.n_free];
        for p in 0..n {
            if self.local[p] != usize::MAX {
                rhs[self.local[p]] = b[p] - mu[self.groups[p]] * self.weights[p];
            }
        }
        let y = self.backend.solve(&rhs, None)?;
        let mut x = vec![0.0; n];
        for p in 0..n {
            if self.local[p] != usize::MAX {
                x[p] = y[self.local[p]];
            }
        }
        let mut shift = vec![0.0; self.n_groups];
        for p in 0..n {
            shift[self.groups[p]] += self.weights[p] * x[p];
        }
        for p in 0..n {
            x[p] -= shift[self.groups[p]] / self.group_weight[self.groups[p]];
        }
        Ok((x, mu))
    }
}

/// Solver for A x = b with x = 0 on the `fixed` dofs.
pub struct DirichletSolver {
    local: Vec<usize>,
    free: Vec<usize>,
    backend: Backend,
}

impl DirichletSolver {
    pub fn new(a: &Csr, fixed: &[bool], method: Method) -> Result<Self> {
        let free: Vec<usize> = (0..a.n).filter(|&p| !fixed[p]).collect();
        let mut local = vec![usize::MAX; a.n];
        for (k, &p) in free.iter().enumerate() {
            local[p] = k;
        }
        let backend = Backend::new(a.submatrix(&free), method)?;
        Ok(DirichletSolver { local, free, backend })
    }

    /// `guess` (full-length) warm-starts the iterative backend.
    pub fn solve(&self, b: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.free.iter().map(|&p| b[p]).collect();
        let g: Option<Vec<f64>> = guess.map(|g| self.free.iter().map(|&p| g[p]).collect());
        let y = self.backend.solve(&rhs, g.as_deref())?;
        let mut x = vec![0.0; self.local.len()];
        for (k, &p) in self.free.iter().enumerate() {
            x[p] = y[k];
        }
        Ok(x)
    }
}
