//! Homogenized problems on Ω = (0,1)^N: the pseudo-parabolic equation with
//! memory (k = 1) and the elliptic limits (k ≠ 1).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{BhError, Result};
use crate::fem::{mass_matrix, matrix_stiffness, Csr, DirichletSolver, DofMap, Method};
use crate::geometry::vec::Point;
use crate::geometry::{unit_box_mesh, GeometryKind, Mesh};
use crate::par::{self, Exec};
use crate::presets::Preset;
use crate::tensors::{EffectiveTensors, Mat3};

/// Which homogenized problem applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    K1ConnectedConnected,
    K1ConnectedDisconnected,
    Klt1,
    Kgt1,
}

impl Regime {
    /// Regime for scaling exponent `k` on geometry `kind`.
    pub fn for_scaling(k: f64, kind: GeometryKind) -> Self {
        if k < 1.0 {
            Regime::Klt1
        } else if k > 1.0 {
            Regime::Kgt1
        } else if kind.inclusions_connected() {
            Regime::K1ConnectedConnected
        } else {
            Regime::K1ConnectedDisconnected
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::K1ConnectedConnected => "k1_connected_connected",
            Regime::K1ConnectedDisconnected => "k1_connected_disconnected",
            Regime::Klt1 => "klt1",
            Regime::Kgt1 => "kgt1",
        }
    }

    pub fn has_memory(self) -> bool {
        matches!(self, Regime::K1ConnectedConnected | Regime::K1ConnectedDisconnected)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type FieldFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;

/// Space-time data: a named preset (constant in time) or a closure.
#[derive(Clone)]
pub enum Data {
    Preset(Preset),
    Custom(FieldFn),
}

impl Data {
    pub fn eval(&self, dim: usize, x: &Point, t: f64) -> f64 {
        match self {
            Data::Preset(p) => p.eval(dim, x),
            Data::Custom(f) => f(x, t),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Data::Preset(Preset::Zero))
    }

    fn is_time_independent(&self) -> bool {
        matches!(self, Data::Preset(_))
    }
}

impl fmt::Debug for Data {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Data::Preset(p) => write!(f, "Preset({p})"),
            Data::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl From<Preset> for Data {
    fn from(p: Preset) -> Self {
        Data::Preset(p)
    }
}

/// Nodal values per time level on a fixed mesh.
#[derive(Debug, Clone)]
pub struct TransientField {
    pub mesh: Arc<Mesh>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl TransientField {
    pub fn n_levels(&self) -> usize {
        self.times.len()
    }

    /// ‖u‖_{L²(Ω_T)} with the consistent mass matrix in space and the
    /// trapezoidal rule in time.
    pub fn l2_space_time(&self, mass: &Csr) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|u| mass.form(u, u)).collect();
        trapezoid(&self.times, &sq).max(0.0).sqrt()
    }
}

/// ∫ g dt over the sample times by the trapezoidal rule.
pub fn trapezoid(times: &[f64], g: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(g.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Constant coefficients of the homogenized operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroCoefficients {
    pub c0: Mat3,
    /// λ₀I + A⁰
    pub m: Mat3,
    /// B⁰ sampled every `kernel_dt` from t = 0.
    pub kernel: Vec<Mat3>,
    /// Source coefficients Φ at the kernel samples, F = Div(Φ∇ū₀).
    pub phi: Vec<Mat3>,
    pub kernel_dt: f64,
    /// Elliptic matrix for k ≠ 1; `None` when the limit is zero.
    pub a_hom: Option<Mat3>,
}

impl MacroCoefficients {
    pub fn from_tensors(t: &EffectiveTensors, regime: Regime) -> Self {
        let kernel_dt = if t.times.len() > 1 {
            t.times[1] - t.times[0]
        } else {
            1.0
        };
        let c0 = if regime == Regime::K1ConnectedDisconnected {
            [[0.0; 3]; 3]
        } else {
            t.c0.primary
        };
        MacroCoefficients {
            c0,
            m: t.a_total(),
            kernel: t.b0.iter().map(|b| b.primary).collect(),
            phi: t.phi.iter().map(|b| b.primary).collect(),
            kernel_dt,
            a_hom: match regime {
                Regime::Kgt1 => Some(t.a_hom_kgt1.primary),
                _ => t.a_hom_klt1.as_ref().map(|a| a.primary),
            },
        }
    }

    fn kernel_horizon(&self) -> f64 {
        self.kernel_dt * (self.kernel.len().saturating_sub(1)) as f64
    }
}

/// Linear interpolation of matrix samples; exact sample hits use the sample
/// itself so later samples are never read.
fn sample(samples: &[Mat3], step: f64, t: f64) -> Mat3 {
    let s = t / step;
    let r = s.round();
    if (s - r).abs() <= 1e-9 * r.max(1.0) {
        return samples[(r as usize).min(samples.len() - 1)];
    }
    let i = (s.floor() as usize).min(samples.len() - 1);
    if i + 1 >= samples.len() {
        return samples[samples.len() - 1];
    }
    let w = s - i as f64;
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            out[a][b] = (1.0 - w) * samples[i][a][b] + w * samples[i + 1][a][b];
        }
    }
    out
}

/// One homogenized problem on a uniform simplicial mesh of Ω.
#[derive(Debug, Clone)]
pub struct MacroProblem {
    pub dim: usize,
    pub mesh: Arc<Mesh>,
    pub boundary: Vec<bool>,
    pub regime: Regime,
    pub coeffs: MacroCoefficients,
    pub u0_bar: Vec<f64>,
    pub source: Data,
    pub t_final: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub exec: Exec,
}

impl MacroProblem {
    /// `n` cells per axis; `u0_bar` is interpolated at the vertices.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        n: usize,
        regime: Regime,
        coeffs: MacroCoefficients,
        u0_bar: &Data,
        source: Data,
        t_final: f64,
        dt: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(BhError::ConfigInvalid(
                "macro mesh needs at least one cell per axis".into(),
            ));
        }
        if !(dt > 0.0 && t_final > 0.0) {
            return Err(BhError::ConfigInvalid(format!(
                "macro time grid T = {t_final}, dt = {dt}"
            )));
        }
        let steps = (t_final / dt).round();
        if (steps * dt - t_final).abs() > 1e-9 * t_final {
            return Err(BhError::ConfigInvalid(format!(
                "T = {t_final} is not a multiple of dt = {dt}"
            )));
        }
        if regime.has_memory() && t_final > coeffs.kernel_horizon() * (1.0 + 1e-12) {
            return Err(BhError::ConfigInvalid(format!(
                "macro horizon {t_final} exceeds the kernel horizon {}",
                coeffs.kernel_horizon()
            )));
        }
        let (mesh, boundary) = unit_box_mesh(dim, n);
        let u0: Vec<f64> = mesh
            .vertices
            .iter()
            .zip(&boundary)
            .map(|(x, &b)| if b { 0.0 } else { u0_bar.eval(dim, x, 0.0) })
            .collect();
        Ok(MacroProblem {
            dim,
            mesh: Arc::new(mesh),
            boundary,
            regime,
            coeffs,
            u0_bar: u0,
            source,
            t_final,
            dt,
            n_steps: steps as usize,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|n| n as f64 * self.dt).collect()
    }

    pub fn dofs(&self) -> DofMap {
        DofMap::identity(self.mesh.n_vertices())
    }

    pub fn mass(&self) -> Csr {
        mass_matrix(&self.mesh, &self.dofs(), self.exec)
    }

    pub fn stiffness(&self, m: &Mat3) -> Csr {
        matrix_stiffness(&self.mesh, &self.dofs(), m, self.exec)
    }

    fn source_load(&self, mass: &Csr, t: f64) -> Vec<f64> {
        if self.source.is_zero() {
            return vec![0.0; self.mesh.n_vertices()];
        }
        let f: Vec<f64> = self
            .mesh
            .vertices
            .iter()
            .map(|x| self.source.eval(self.dim, x, t))
            .collect();
        mass.mul_vec(&f)
    }
}

/// Output of a macroscopic solve.
#[derive(Debug, Clone)]
pub struct MacroSolution {
    pub regime: Regime,
    pub field: TransientField,
    pub boundary: Vec<bool>,
    /// Set when the limit is known to vanish and no system was solved.
    pub flag: Option<String>,
    /// Per level: ‖uⁿ‖_{L²(Ω)} and uⁿᵀK uⁿ for the principal stiffness K.
    pub l2: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Symmetric basis pairs (h ≤ j) and the stiffness matrix of each.
struct PairBasis {
    pairs: Vec<(usize, usize)>,
    mats: Vec<Csr>,
}

impl PairBasis {
    fn new(p: &MacroProblem) -> Self {
        let mut pairs = vec![];
        let mut mats = vec![];
        for h in 0..p.dim {
            for j in h..p.dim {
                let mut m = [[0.0; 3]; 3];
                m[h][j] = 1.0;
                m[j][h] = 1.0;
                pairs.push((h, j));
                mats.push(p.stiffness(&m));
            }
        }
        PairBasis { pairs, mats }
    }

    /// Coefficients c with Σ c_k K_k = K_{sym(b)}.
    fn coeffs(&self, b: &Mat3) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|&(h, j)| if h == j { b[h][h] } else { 0.5 * (b[h][j] + b[j][h]) })
            .collect()
    }

    fn apply_all(&self, exec: Exec, u: &[f64]) -> Vec<Vec<f64>> {
        self.mats.iter().map(|k| k.mul_vec_exec(exec, u)).collect()
    }
}

fn zero_boundary(u: &mut [f64], boundary: &[bool]) {
    for (x, &b) in u.iter_mut().zip(boundary) {
        if b {
            *x = 0.0;
        }
    }
}

fn finish(p: &MacroProblem, values: Vec<Vec<f64>>, principal: &Csr, flag: Option<String>) -> MacroSolution {
    let mass = p.mass();
    let l2 = values.iter().map(|u| mass.form(u, u).max(0.0).sqrt()).collect();
    let energy = values.iter().map(|u| principal.form(u, u)).collect();
    MacroSolution {
        regime: p.regime,
        field: TransientField {
            mesh: p.mesh.clone(),
            times: p.times(),
            values,
        },
        boundary: p.boundary.clone(),
        flag,
        l2,
        energy,
    }
}

/// Time-steps −Div(C⁰∇u_t + (λ₀I+A⁰)∇u + ∫₀ᵗB⁰(t−τ)∇u(τ)dτ) = F (+ f)
/// with implicit Euler for the C⁰ term and trapezoidal convolution weights.
///
/// Connected/connected: u⁰ = ū₀. Connected/disconnected (C⁰ = 0): u⁰
/// solves the equation at t = 0, where the memory integral is empty.
pub fn solve_homogenized_memory(p: &MacroProblem) -> Result<MacroSolution> {
    if !p.regime.has_memory() {
        return Err(BhError::WrongGeometryClass(format!(
            "regime {} has no memory equation",
            p.regime
        )));
    }
    let nv = p.mesh.n_vertices();
    let dt = p.dt;
    let exec = p.exec;
    let basis = PairBasis::new(p);
    let mass = p.mass();
    let k_m = p.stiffness(&p.coeffs.m);
    let k_c = p.stiffness(&p.coeffs.c0);
    let k_b0 = p.stiffness(&p.coeffs.kernel[0]);
    let step = k_c
        .scaled(1.0 / dt)
        .lin_comb(1.0, &k_m, 1.0)
        .lin_comb(1.0, &k_b0, 0.5 * dt);
    let solver = DirichletSolver::new(&step, &p.boundary, Method::Direct).map_err(|_| BhError::SingularStep(1))?;

    // Per-lag coefficients of B⁰ and per-level coefficients of Φ.
    let kdt = p.coeffs.kernel_dt;
    let lag: Vec<Vec<f64>> = (0..=p.n_steps)
        .map(|l| basis.coeffs(&sample(&p.coeffs.kernel, kdt, l as f64 * dt)))
        .collect();
    let ubar_terms = basis.apply_all(exec, &p.u0_bar);
    let weak_f = |n: usize| -> Vec<f64> {
        let c = basis.coeffs(&sample(&p.coeffs.phi, kdt, n as f64 * dt));
        let mut out = p.source_load(&mass, n as f64 * dt);
        for (ck, g) in c.iter().zip(&ubar_terms) {
            for (o, gi) in out.iter_mut().zip(g) {
                *o -= ck * gi;
            }
        }
        out
    };

    let u0 = match p.regime {
        Regime::K1ConnectedConnected => p.u0_bar.clone(),
        _ => {
            let s = DirichletSolver::new(&k_m, &p.boundary, Method::Direct).map_err(|_| BhError::SingularStep(0))?;
            s.solve(&weak_f(0), None)?
        }
    };
    let mut values = vec![u0];
    let mut history: Vec<Vec<Vec<f64>>> = vec![basis.apply_all(exec, &values[0])];

    for n in 1..=p.n_steps {
        let prev = &values[n - 1];
        let mut rhs = weak_f(n);
        let kc_prev = k_c.mul_vec_exec(exec, prev);
        // Memory: Σ_{m<n} w_{nm} K_{B⁰(t_n − t_m)} u^m.
        let weights: Vec<(f64, &Vec<f64>)> = (0..n)
            .map(|m| (if m == 0 { 0.5 * dt } else { dt }, &lag[n - m]))
            .collect();
        let hist = &history;
        par::for_each_mut(exec, &mut rhs, |i, r| {
            let mut mem = 0.0;
            for (m, (w, c)) in weights.iter().enumerate() {
                let mut s = 0.0;
                for (ck, g) in c.iter().zip(&hist[m]) {
                    s += ck * g[i];
                }
                mem += w * s;
            }
            *r += kc_prev[i] / dt - mem;
        });
        let mut u = solver.solve(&rhs, Some(prev))?;
        zero_boundary(&mut u, &p.boundary);
        debug_assert_eq!(u.len(), nv);
        history.push(basis.apply_all(exec, &u));
        values.push(u);
    }
    Ok(finish(p, values, &k_m, None))
}

/// Solves −Div(A_hom∇u) = f(·, t) at every time level with homogeneous
/// Dirichlet data. With no A_hom (k < 1, connected/connected) the limit is
/// zero; the zero field is returned with a flag.
pub fn solve_homogenized_elliptic(p: &MacroProblem) -> Result<MacroSolution> {
    if p.regime.has_memory() {
        return Err(BhError::WrongGeometryClass(format!(
            "regime {} needs the memory solver",
            p.regime
        )));
    }
    let nv = p.mesh.n_vertices();
    let Some(a) = p.coeffs.a_hom else {
        let zero = vec![vec![0.0; nv]; p.n_steps + 1];
        let flag = "connected/connected k<1: homogenized limit is identically zero".to_string();
        return Ok(finish(p, zero, &Csr::zeros(nv), Some(flag)));
    };
    let k = p.stiffness(&a);
    let solver = DirichletSolver::new(&k, &p.boundary, Method::Direct).map_err(|_| BhError::SingularStep(0))?;
    let mass = p.mass();
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(p.n_steps + 1);
    for n in 0..=p.n_steps {
        if n > 0 && p.source.is_time_independent() {
            values.push(values[0].clone());
            continue;
        }
        let mut u = solver.solve(&p.source_load(&mass, n as f64 * p.dt), None)?;
        zero_boundary(&mut u, &p.boundary);
        values.push(u);
    }
    Ok(finish(p, values, &k, None))
}

/// Dispatches on the regime.
pub fn solve(p: &MacroProblem) -> Result<MacroSolution> {
    if p.regime.has_memory() {
        solve_homogenized_memory(p)
    } else {
        solve_homogenized_elliptic(p)
    }
}
