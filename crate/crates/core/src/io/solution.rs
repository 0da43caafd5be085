use std::fmt::Write as _;

use super::{f, join, parse_floats, parse_usize, write_header, Cursor, Header};
use crate::error::Result;

const FORMAT: &str = "BHSOL";

/// Time levels of a nodal field. `mesh` describes the mesh the values live
/// on (`unit_box <dim> <n>` for macro grids, `micro eps=<eps>` for tilings).
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionArchive {
    pub dim: usize,
    pub mesh: String,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn write_solution(a: &SolutionArchive, header: &Header) -> String {
    let nv = a.values.first().map_or(0, Vec::len);
    let mut s = String::new();
    write_header(&mut s, "BHSOL 1", header);
    let _ = writeln!(s, "mesh {}", a.mesh);
    let _ = writeln!(s, "dim {}", a.dim);
    let _ = writeln!(s, "vertices {nv}");
    let _ = writeln!(s, "levels {}", a.times.len());
    for (n, (t, u)) in a.times.iter().zip(&a.values).enumerate() {
        let _ = writeln!(s, "level {n} {}\n{}", f(*t), join(u));
    }
    s.push_str("end\n");
    s
}

pub fn read_solution(text: &str) -> Result<(SolutionArchive, Header)> {
    let (mut c, header) = Cursor::open(FORMAT, text)?;
    let mesh = c.keyed("mesh")?.join(" ");
    let dim = parse_usize(FORMAT, c.keyed("dim")?.first().copied())?;
    let nv = parse_usize(FORMAT, c.keyed("vertices")?.first().copied())?;
    let levels = parse_usize(FORMAT, c.keyed("levels")?.first().copied())?;
    let mut times = Vec::with_capacity(levels);
    let mut values = Vec::with_capacity(levels);
    for n in 0..levels {
        let w = c.keyed("level")?;
        if w.len() != 2 || w[0].parse::<usize>().ok() != Some(n) {
            return Err(c.err(format!("expected level {n}, found {w:?}")));
        }
        times.push(parse_floats(FORMAT, 0, w[1..].iter().copied())?[0]);
        values.push(c.floats(nv)?);
    }
    c.end()?;
    Ok((
        SolutionArchive {
            dim,
            mesh,
            times,
            values,
        },
        header,
    ))
}

/// `t, L2_norm, energy_norm` per time level.
pub fn solution_summary_csv(times: &[f64], l2: &[f64], energy_norm: &[f64], header: &Header) -> String {
    let mut s = String::new();
    for (k, v) in header {
        let _ = writeln!(s, "# {k} {v}");
    }
    s.push_str("t,L2_norm,energy_norm\n");
    for ((t, a), b) in times.iter().zip(l2).zip(energy_norm) {
        let _ = writeln!(s, "{},{},{}", f(*t), f(*a), f(*b));
    }
    s
}
