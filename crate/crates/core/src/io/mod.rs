//! Versioned ASCII archives, CSV reports, run manifests and legacy-VTK
//! export.
//!
//! Every archive starts with a magic line (`BHMESH 1`, `BHCELL 1`, ...)
//! followed by `# key value` provenance lines. Floats are written in the
//! shortest form that parses back to the same bits, so a write/read cycle is
//! lossless.

mod cell;
mod manifest;
mod mesh;
mod solution;
mod study;
mod tensors;
pub mod vtk;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use cell::{read_cell_archive, write_cell_archive, CellArchive};
pub use manifest::Manifest;
pub use mesh::{read_mesh, write_mesh};
pub use solution::{read_solution, solution_summary_csv, write_solution, SolutionArchive};
pub use study::write_study_csv;
pub use tensors::{read_tensors, write_tensors};

use crate::error::{BhError, Result};

/// Ordered `# key value` lines written after the magic line.
pub type Header = BTreeMap<String, String>;

/// Round-trip float formatting.
pub fn f(x: f64) -> String {
    format!("{x:e}")
}

pub(crate) fn join(xs: &[f64]) -> String {
    let mut s = String::with_capacity(xs.len() * 24);
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:e}");
    }
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| BhError::MissingArtifact(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

pub(crate) fn write_header(out: &mut String, magic: &str, header: &Header) {
    out.push_str(magic);
    out.push('\n');
    for (k, v) in header {
        let _ = writeln!(out, "# {k} {v}");
    }
}

/// Line cursor over an archive body that skips blank lines and reports
/// positions in errors.
pub(crate) struct Cursor<'a> {
    format: &'static str,
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Cursor<'a> {
    /// Checks the magic line and collects the header.
    pub(crate) fn open(format: &'static str, text: &'a str) -> Result<(Self, Header)> {
        let mut c = Cursor {
            format,
            lines: text.lines().enumerate().peekable(),
        };
        let magic = format!("{format} 1");
        match c.lines.next() {
            Some((_, l)) if l.trim_end() == magic => {}
            Some((_, l)) => return Err(c.err(format!("expected `{magic}`, found `{l}`"))),
            None => return Err(c.err("empty file".into())),
        }
        let mut header = Header::new();
        while let Some((_, l)) = c.lines.peek() {
            let Some(rest) = l.strip_prefix("# ") else { break };
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            header.insert(k.to_string(), v.to_string());
            c.lines.next();
        }
        Ok((c, header))
    }

    pub(crate) fn err(&self, reason: String) -> BhError {
        BhError::Parse {
            format: self.format,
            reason,
        }
    }

    pub(crate) fn line(&mut self) -> Result<(usize, &'a str)> {
        for (i, l) in self.lines.by_ref() {
            if !l.trim().is_empty() {
                return Ok((i + 1, l));
            }
        }
        Err(BhError::Parse {
            format: self.format,
            reason: "unexpected end of file".into(),
        })
    }

    /// Next line split into words, first word required to be `key`.
    pub(crate) fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let (n, l) = self.line()?;
        let mut w = l.split_whitespace();
        match w.next() {
            Some(k) if k == key => Ok(w.collect()),
            _ => Err(self.err(format!("line {n}: expected `{key}`, found `{l}`"))),
        }
    }

    pub(crate) fn floats(&mut self, expected: usize) -> Result<Vec<f64>> {
        let (n, l) = self.line()?;
        let v = parse_floats(self.format, n, l.split_whitespace())?;
        if v.len() != expected {
            return Err(self.err(format!("line {n}: expected {expected} values, found {}", v.len())));
        }
        Ok(v)
    }

    pub(crate) fn end(&mut self) -> Result<()> {
        self.keyed("end").map(|_| ())
    }
}

pub(crate) fn parse_floats<'b>(
    format: &'static str,
    line: usize,
    words: impl Iterator<Item = &'b str>,
) -> Result<Vec<f64>> {
    words
        .map(|w| {
            w.parse::<f64>().map_err(|_| BhError::Parse {
                format,
                reason: format!("line {line}: `{w}` is not a number"),
            })
        })
        .collect()
}

pub(crate) fn parse_usize(format: &'static str, w: Option<&str>) -> Result<usize> {
    w.and_then(|w| w.parse().ok()).ok_or_else(|| BhError::Parse {
        format,
        reason: format!("expected a count, found {w:?}"),
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| BhError::MissingArtifact(format!("{}: {e}", path.display())))
}
