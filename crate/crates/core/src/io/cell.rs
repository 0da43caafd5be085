use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{join, parse_floats, parse_usize, write_header, Cursor, Header};
use crate::cell::{CellFunctionSet, CellProblem, Chi0, Evolution, TimeGrid};
use crate::error::Result;

const FORMAT: &str = "BHCELL";

/// Cell functions as nodal (per-vertex) values.
#[derive(Debug, Clone, PartialEq)]
pub struct CellArchive {
    pub dim: usize,
    pub n_vertices: usize,
    pub grid: TimeGrid,
    pub chi0: Vec<Vec<f64>>,
    pub chi0_constants: Vec<Vec<f64>>,
    pub chi0_out_flux: Vec<Vec<f64>>,
    pub chi0_tilde: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub v_defect: Vec<Vec<f64>>,
    /// `[j][n]` snapshots of χ₁^j.
    pub chi1: Vec<Vec<Vec<f64>>>,
    pub chi1_rate0: Vec<Vec<f64>>,
    pub omega: Vec<Vec<Vec<f64>>>,
    pub omega_rate0: Vec<Vec<f64>>,
}

impl CellArchive {
    pub fn from_functions(problem: &CellProblem, set: &CellFunctionSet, chi0_tilde: &[Vec<f64>]) -> Self {
        let nodal = |x: &Vec<f64>| problem.dofs.to_vertices(x);
        let all = |xs: &[Vec<f64>]| xs.iter().map(nodal).collect::<Vec<_>>();
        CellArchive {
            dim: problem.dim(),
            n_vertices: problem.cell.mesh.n_vertices(),
            grid: set.grid,
            chi0: all(&set.chi0.fields),
            chi0_constants: set.chi0.constants.clone(),
            chi0_out_flux: set.chi0.out_flux.clone(),
            chi0_tilde: all(chi0_tilde),
            v: all(&set.v),
            v_defect: set.v_defect.clone(),
            chi1: set.chi1.iter().map(|e| all(&e.snapshots)).collect(),
            chi1_rate0: set.chi1.iter().map(|e| nodal(&e.rate0)).collect(),
            omega: set.omega.iter().map(|e| all(&e.snapshots)).collect(),
            omega_rate0: set.omega.iter().map(|e| nodal(&e.rate0)).collect(),
        }
    }

    /// Rebuilds the dof-level cell functions on `problem`'s mesh; energies
    /// are re-evaluated from the snapshots.
    pub fn to_functions(&self, problem: &CellProblem) -> (CellFunctionSet, Vec<Vec<f64>>) {
        let dofs = |x: &Vec<f64>| problem.dofs.from_vertex_fn(|v| x[v]);
        let all = |xs: &[Vec<f64>]| xs.iter().map(dofs).collect::<Vec<_>>();
        let evolution = |snaps: &[Vec<f64>], rate0: &Vec<f64>| {
            let snapshots = all(snaps);
            Evolution {
                energy: snapshots.iter().map(|x| problem.s.form(x, x)).collect(),
                snapshots,
                rate0: dofs(rate0),
                dt: self.grid.dt,
            }
        };
        let set = CellFunctionSet {
            chi0: Chi0 {
                fields: all(&self.chi0),
                constants: self.chi0_constants.clone(),
                out_flux: self.chi0_out_flux.clone(),
            },
            v: all(&self.v),
            v_defect: self.v_defect.clone(),
            chi1: self
                .chi1
                .iter()
                .zip(&self.chi1_rate0)
                .map(|(s, r)| evolution(s, r))
                .collect(),
            omega: self
                .omega
                .iter()
                .zip(&self.omega_rate0)
                .map(|(s, r)| evolution(s, r))
                .collect(),
            grid: self.grid,
        };
        (set, all(&self.chi0_tilde))
    }
}

pub fn write_cell_archive(a: &CellArchive, header: &Header) -> String {
    let mut s = String::new();
    write_header(&mut s, "BHCELL 1", header);
    let _ = writeln!(s, "dim {}", a.dim);
    let _ = writeln!(s, "vertices {}", a.n_vertices);
    let _ = writeln!(s, "grid {} {}", super::f(a.grid.dt), a.grid.n_steps);
    let mut field = |name: &str, j: usize, level: &str, x: &[f64]| {
        let _ = writeln!(s, "field {name} {j} {level}\n{}", join(x));
    };
    for j in 0..a.dim {
        field("chi0", j, "-", &a.chi0[j]);
        field("chi0_tilde", j, "-", &a.chi0_tilde[j]);
        field("v", j, "-", &a.v[j]);
        for (n, x) in a.chi1[j].iter().enumerate() {
            field("chi1", j, &n.to_string(), x);
        }
        field("chi1", j, "rate0", &a.chi1_rate0[j]);
        for (n, x) in a.omega[j].iter().enumerate() {
            field("omega", j, &n.to_string(), x);
        }
        field("omega", j, "rate0", &a.omega_rate0[j]);
    }
    for j in 0..a.dim {
        for (name, x) in [
            ("chi0_constants", &a.chi0_constants[j]),
            ("chi0_out_flux", &a.chi0_out_flux[j]),
            ("v_defect", &a.v_defect[j]),
        ] {
            let _ = writeln!(s, "vector {name} {j} {} {}", x.len(), join(x));
        }
    }
    s.push_str("end\n");
    s
}

pub fn read_cell_archive(text: &str) -> Result<(CellArchive, Header)> {
    let (mut c, header) = Cursor::open(FORMAT, text)?;
    let dim = parse_usize(FORMAT, c.keyed("dim")?.first().copied())?;
    let nv = parse_usize(FORMAT, c.keyed("vertices")?.first().copied())?;
    let g = c.keyed("grid")?;
    let dt = g
        .first()
        .and_then(|w| w.parse::<f64>().ok())
        .ok_or_else(|| c.err("bad grid step".into()))?;
    let n_steps = parse_usize(FORMAT, g.get(1).copied())?;
    let grid = TimeGrid { dt, n_steps };

    let mut fields: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
    let mut vectors: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    loop {
        let (n, l) = c.line()?;
        let w: Vec<&str> = l.split_whitespace().collect();
        match w.first().copied() {
            Some("end") => break,
            Some("field") if w.len() == 4 => {
                let j = parse_usize(FORMAT, Some(w[2]))?;
                let x = c.floats(nv)?;
                fields.insert((w[1].to_string(), j, w[3].to_string()), x);
            }
            Some("vector") if w.len() >= 4 => {
                let j = parse_usize(FORMAT, Some(w[2]))?;
                let len = parse_usize(FORMAT, Some(w[3]))?;
                let x = parse_floats(FORMAT, n, w[4..].iter().copied())?;
                if x.len() != len {
                    return Err(c.err(format!("line {n}: vector length {} != {len}", x.len())));
                }
                vectors.insert((w[1].to_string(), j), x);
            }
            _ => return Err(c.err(format!("line {n}: unexpected `{l}`"))),
        }
    }

    let mut take = |name: &str, j: usize, level: &str| {
        fields
            .remove(&(name.to_string(), j, level.to_string()))
            .ok_or_else(|| c.err(format!("missing field {name} {j} {level}")))
    };
    let mut a = CellArchive {
        dim,
        n_vertices: nv,
        grid,
        chi0: vec![],
        chi0_constants: vec![],
        chi0_out_flux: vec![],
        chi0_tilde: vec![],
        v: vec![],
        v_defect: vec![],
        chi1: vec![],
        chi1_rate0: vec![],
        omega: vec![],
        omega_rate0: vec![],
    };
    for j in 0..dim {
        a.chi0.push(take("chi0", j, "-")?);
        a.chi0_tilde.push(take("chi0_tilde", j, "-")?);
        a.v.push(take("v", j, "-")?);
        a.chi1.push(
            (0..=n_steps)
                .map(|n| take("chi1", j, &n.to_string()))
                .collect::<Result<_>>()?,
        );
        a.chi1_rate0.push(take("chi1", j, "rate0")?);
        a.omega.push(
            (0..=n_steps)
                .map(|n| take("omega", j, &n.to_string()))
                .collect::<Result<_>>()?,
        );
        a.omega_rate0.push(take("omega", j, "rate0")?);
    }
    let mut vec_of = |name: &str, j: usize| {
        vectors
            .remove(&(name.to_string(), j))
            .ok_or_else(|| c.err(format!("missing vector {name} {j}")))
    };
    for j in 0..dim {
        a.chi0_constants.push(vec_of("chi0_constants", j)?);
        a.chi0_out_flux.push(vec_of("chi0_out_flux", j)?);
        a.v_defect.push(vec_of("v_defect", j)?);
    }
    Ok((a, header))
}
