use std::fmt::Write as _;

use super::{join, parse_floats, parse_usize, write_header, Cursor, Header};
use crate::error::Result;
use crate::geometry::{InterfaceFacet, Mesh, PeriodicPair, Phase};

const FORMAT: &str = "BHMESH";

pub fn write_mesh(mesh: &Mesh, header: &Header) -> String {
    let d = mesh.dim;
    let mut s = String::new();
    write_header(&mut s, "BHMESH 1", header);
    let _ = writeln!(s, "vertices {} {d}", mesh.n_vertices());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{}", join(&p[..d]));
    }
    let _ = writeln!(s, "elements {}", mesh.n_elements());
    for (e, ph) in mesh.elements.iter().zip(&mesh.phases) {
        for v in &e[..=d] {
            let _ = write!(s, "{v} ");
        }
        let _ = writeln!(s, "{}", ph.code());
    }
    let _ = writeln!(s, "facets {}", mesh.interface.len());
    for f in &mesh.interface {
        for v in &f.vertices[..d] {
            let _ = write!(s, "{v} ");
        }
        let _ = writeln!(s, "{} {}", f.component, join(&f.normal[..d]));
    }
    let _ = writeln!(s, "periodic {}", mesh.periodic.len());
    for p in &mesh.periodic {
        let _ = writeln!(s, "{} {} {}", p.p, p.q, p.axis);
    }
    s.push_str("end\n");
    s
}

pub fn read_mesh(text: &str) -> Result<(Mesh, Header)> {
    let (mut c, header) = Cursor::open(FORMAT, text)?;
    let w = c.keyed("vertices")?;
    let nv = parse_usize(FORMAT, w.first().copied())?;
    let dim = parse_usize(FORMAT, w.get(1).copied())?;
    if !(2..=3).contains(&dim) {
        return Err(c.err(format!("dimension {dim} not supported")));
    }
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = c.floats(dim)?;
        let mut p = [0.0; 3];
        p[..dim].copy_from_slice(&x);
        vertices.push(p);
    }

    let ne = parse_usize(FORMAT, c.keyed("elements")?.first().copied())?;
    let mut elements = Vec::with_capacity(ne);
    let mut phases = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (n, l) = c.line()?;
        let w: Vec<&str> = l.split_whitespace().collect();
        if w.len() != dim + 2 {
            return Err(c.err(format!("line {n}: malformed element `{l}`")));
        }
        let mut e = [usize::MAX; 4];
        for (k, v) in w[..=dim].iter().enumerate() {
            e[k] = index(&c, n, v, nv)?;
        }
        let ph =
            Phase::from_code(w[dim + 1]).ok_or_else(|| c.err(format!("line {n}: unknown phase `{}`", w[dim + 1])))?;
        elements.push(e);
        phases.push(ph);
    }

    let nf = parse_usize(FORMAT, c.keyed("facets")?.first().copied())?;
    let mut interface = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = c.line()?;
        let w: Vec<&str> = l.split_whitespace().collect();
        if w.len() != 2 * dim + 1 {
            return Err(c.err(format!("line {n}: malformed facet `{l}`")));
        }
        let mut verts = [usize::MAX; 3];
        for (k, v) in w[..dim].iter().enumerate() {
            verts[k] = index(&c, n, v, nv)?;
        }
        let component = w[dim]
            .parse()
            .map_err(|_| c.err(format!("line {n}: bad component `{}`", w[dim])))?;
        let nu = parse_floats(FORMAT, n, w[dim + 1..].iter().copied())?;
        let mut normal = [0.0; 3];
        normal[..dim].copy_from_slice(&nu);
        interface.push(InterfaceFacet {
            vertices: verts,
            component,
            normal,
        });
    }

    let np = parse_usize(FORMAT, c.keyed("periodic")?.first().copied())?;
    let mut periodic = Vec::with_capacity(np);
    for _ in 0..np {
        let (n, l) = c.line()?;
        let w: Vec<&str> = l.split_whitespace().collect();
        if w.len() != 3 {
            return Err(c.err(format!("line {n}: malformed periodic pair `{l}`")));
        }
        let axis = index(&c, n, w[2], dim)?;
        periodic.push(PeriodicPair {
            p: index(&c, n, w[0], nv)?,
            q: index(&c, n, w[1], nv)?,
            axis,
        });
    }
    c.end()?;
    Ok((
        Mesh {
            dim,
            vertices,
            elements,
            phases,
            periodic,
            interface,
        },
        header,
    ))
}

fn index(c: &Cursor, line: usize, w: &str, bound: usize) -> Result<usize> {
    match w.parse::<usize>() {
        Ok(i) if i < bound => Ok(i),
        _ => Err(c.err(format!("line {line}: index `{w}` out of range 0..{bound}"))),
    }
}
