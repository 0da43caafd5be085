use std::fmt::Write as _;

use super::{f, join, parse_floats, parse_usize, write_header, Cursor, Header};
use crate::error::Result;
use crate::geometry::GeometryKind;
use crate::tensors::{add_scaled_identity, sym_eigenvalues, DualForm, EffectiveTensors, Mat3};

const FORMAT: &str = "BHTENS";

fn entries(dim: usize, m: &Mat3) -> Vec<f64> {
    (0..dim).flat_map(|i| (0..dim).map(move |j| m[i][j])).collect()
}

fn from_entries(dim: usize, v: &[f64]) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            m[i][j] = v[i * dim + j];
        }
    }
    m
}

fn write_dual(s: &mut String, dim: usize, name: &str, d: &DualForm) {
    let _ = writeln!(s, "{name}.primary {}", join(&entries(dim, &d.primary)));
    let _ = writeln!(s, "{name}.alternate {}", join(&entries(dim, &d.alternate)));
    let _ = writeln!(s, "{name}.discrepancy {}", f(d.discrepancy));
}

fn write_series(s: &mut String, dim: usize, name: &str, prefix: &str, times: &[f64], series: &[DualForm]) {
    let cols: Vec<String> = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| format!("{}{}", i + 1, j + 1)))
        .collect();
    let head: Vec<String> = cols.iter().map(|c| format!("{prefix}{c}")).collect();
    for (block, alt) in [(name.to_string(), false), (format!("{name}_alternate"), true)] {
        let _ = writeln!(s, "{block} {}", series.len());
        if alt {
            let _ = writeln!(s, "t,{}", head.join(","));
        } else {
            let _ = writeln!(s, "t,{},discrepancy", head.join(","));
        }
        for (t, d) in times.iter().zip(series) {
            let m = if alt { &d.alternate } else { &d.primary };
            let row: Vec<String> = entries(dim, m).into_iter().map(f).collect();
            if alt {
                let _ = writeln!(s, "{},{}", f(*t), row.join(","));
            } else {
                let _ = writeln!(s, "{},{},{}", f(*t), row.join(","), f(d.discrepancy));
            }
        }
    }
}

/// Tensor report. The header carries geometry and coefficient provenance;
/// the body lists every tensor in both evaluations, the kernels as CSV
/// blocks and the eigenvalues of the symmetric tensors.
pub fn write_tensors(t: &EffectiveTensors, header: &Header) -> String {
    let dim = t.dim;
    let mut s = String::new();
    write_header(&mut s, "BHTENS 1", header);
    let _ = writeln!(s, "kind {}", t.kind.name());
    let _ = writeln!(s, "dim {dim}");
    let _ = writeln!(s, "lambda0 {}", f(t.lambda0));
    let _ = writeln!(s, "alpha {}", f(t.alpha));
    let _ = writeln!(s, "gamma_measure {}", f(t.gamma_measure));
    write_dual(&mut s, dim, "A0", &t.a0);
    write_dual(&mut s, dim, "lambda0I+A0", &t.a0_gram);
    write_dual(&mut s, dim, "C0", &t.c0);
    match &t.a_hom_klt1 {
        Some(a) => write_dual(&mut s, dim, "Ahom_klt1", a),
        None => s.push_str("Ahom_klt1 none\n"),
    }
    write_dual(&mut s, dim, "Ahom_kgt1", &t.a_hom_kgt1);
    let mut eig = |name: &str, m: &Mat3| {
        let _ = writeln!(s, "eigenvalues {name} {}", join(&sym_eigenvalues(dim, m)));
    };
    eig("lambda0I+A0", &add_scaled_identity(dim, &t.a0.primary, t.lambda0));
    eig("C0", &t.c0.primary);
    if let Some(a) = &t.a_hom_klt1 {
        eig("Ahom_klt1", &a.primary);
    }
    eig("Ahom_kgt1", &t.a_hom_kgt1.primary);
    for (name, d) in t.discrepancies() {
        let _ = writeln!(s, "relative_discrepancy {} {}", name.replace(' ', "_"), f(d));
    }
    write_series(&mut s, dim, "B0", "B", &t.times, &t.b0);
    write_series(&mut s, dim, "Phi", "F", &t.times, &t.phi);
    s.push_str("end\n");
    s
}

pub fn read_tensors(text: &str) -> Result<(EffectiveTensors, Header)> {
    let (mut c, header) = Cursor::open(FORMAT, text)?;
    let kind_word = c.keyed("kind")?;
    let kind = kind_word
        .first()
        .and_then(|k| GeometryKind::from_name(k))
        .ok_or_else(|| c.err(format!("unknown geometry kind {kind_word:?}")))?;
    let dim = parse_usize(FORMAT, c.keyed("dim")?.first().copied())?;
    if dim != kind.dim() {
        return Err(c.err(format!("dimension {dim} does not match {}", kind.name())));
    }
    let scalar = |c: &mut Cursor, key: &str| -> Result<f64> {
        let w = c.keyed(key)?;
        let v = parse_floats(FORMAT, 0, w.into_iter())?;
        v.first()
            .copied()
            .filter(|_| v.len() == 1)
            .ok_or_else(|| c.err(format!("`{key}` needs one value")))
    };
    let lambda0 = scalar(&mut c, "lambda0")?;
    let alpha = scalar(&mut c, "alpha")?;
    let gamma_measure = scalar(&mut c, "gamma_measure")?;
    let read_dual = |c: &mut Cursor, name: &str| -> Result<DualForm> {
        let p = parse_floats(FORMAT, 0, c.keyed(&format!("{name}.primary"))?.into_iter())?;
        let a = parse_floats(FORMAT, 0, c.keyed(&format!("{name}.alternate"))?.into_iter())?;
        let d = parse_floats(FORMAT, 0, c.keyed(&format!("{name}.discrepancy"))?.into_iter())?;
        if p.len() != dim * dim || a.len() != dim * dim || d.len() != 1 {
            return Err(c.err(format!("`{name}` has the wrong number of entries")));
        }
        Ok(DualForm {
            primary: from_entries(dim, &p),
            alternate: from_entries(dim, &a),
            discrepancy: d[0],
        })
    };
    let a0 = read_dual(&mut c, "A0")?;
    let a0_gram = read_dual(&mut c, "lambda0I+A0")?;
    let c0 = read_dual(&mut c, "C0")?;
    let a_hom_klt1 = {
        let (n, l) = c.line()?;
        if l.trim() == "Ahom_klt1 none" {
            None
        } else {
            let p = l
                .strip_prefix("Ahom_klt1.primary ")
                .ok_or_else(|| c.err(format!("line {n}: expected Ahom_klt1")))?;
            let p = parse_floats(FORMAT, n, p.split_whitespace())?;
            let a = parse_floats(FORMAT, 0, c.keyed("Ahom_klt1.alternate")?.into_iter())?;
            let d = parse_floats(FORMAT, 0, c.keyed("Ahom_klt1.discrepancy")?.into_iter())?;
            if p.len() != dim * dim || a.len() != dim * dim || d.len() != 1 {
                return Err(c.err("`Ahom_klt1` has the wrong number of entries".into()));
            }
            Some(DualForm {
                primary: from_entries(dim, &p),
                alternate: from_entries(dim, &a),
                discrepancy: d[0],
            })
        }
    };
    let a_hom_kgt1 = read_dual(&mut c, "Ahom_kgt1")?;

    // Skip the derived report lines up to the first kernel block.
    let (times, b0) = loop {
        let (n, l) = c.line()?;
        if l.starts_with("eigenvalues ") || l.starts_with("relative_discrepancy ") {
            continue;
        }
        if let Some(rest) = l.strip_prefix("B0 ") {
            let len = parse_usize(FORMAT, Some(rest.trim()))?;
            break read_series(&mut c, dim, len)?;
        }
        return Err(c.err(format!("line {n}: expected the B0 block, found `{l}`")));
    };
    let b0 = merge_alternate(&mut c, dim, "B0_alternate", b0)?;
    let len = parse_usize(FORMAT, c.keyed("Phi")?.first().copied())?;
    let (phi_times, phi) = read_series(&mut c, dim, len)?;
    if phi_times != times {
        return Err(c.err("B0 and Phi blocks use different time samples".into()));
    }
    let phi = merge_alternate(&mut c, dim, "Phi_alternate", phi)?;
    c.end()?;
    Ok((
        EffectiveTensors {
            dim,
            kind,
            lambda0,
            alpha,
            gamma_measure,
            a0,
            a0_gram,
            c0,
            times,
            b0,
            phi,
            a_hom_klt1,
            a_hom_kgt1,
        },
        header,
    ))
}

fn csv_row(c: &mut Cursor, width: usize) -> Result<Vec<f64>> {
    let (n, l) = c.line()?;
    let v = parse_floats(FORMAT, n, l.split(','))?;
    if v.len() != width {
        return Err(c.err(format!("line {n}: expected {width} columns, found {}", v.len())));
    }
    Ok(v)
}

fn read_series(c: &mut Cursor, dim: usize, len: usize) -> Result<(Vec<f64>, Vec<DualForm>)> {
    c.line()?;
    let mut times = Vec::with_capacity(len);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let v = csv_row(c, dim * dim + 2)?;
        times.push(v[0]);
        out.push(DualForm {
            primary: from_entries(dim, &v[1..]),
            alternate: [[0.0; 3]; 3],
            discrepancy: v[dim * dim + 1],
        });
    }
    Ok((times, out))
}

fn merge_alternate(c: &mut Cursor, dim: usize, key: &str, mut series: Vec<DualForm>) -> Result<Vec<DualForm>> {
    let len = parse_usize(FORMAT, c.keyed(key)?.first().copied())?;
    if len != series.len() {
        return Err(c.err(format!("`{key}` has {len} rows, expected {}", series.len())));
    }
    c.line()?;
    for d in series.iter_mut() {
        let v = csv_row(c, dim * dim + 1)?;
        d.alternate = from_entries(dim, &v[1..]);
    }
    Ok(series)
}
