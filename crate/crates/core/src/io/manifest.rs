use std::fmt::Write as _;
use std::path::Path;

use super::{f, sha256_file, Cursor};
use crate::error::{BhError, Result};

/// Run manifest: the only place timestamps and wall times are recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub started_unix: u64,
    pub wall_time_s: f64,
    /// `(file name, sha256)` of artifacts read.
    pub inputs: Vec<(String, String)>,
    /// `(file name, sha256)` of artifacts written.
    pub outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::from("BHRUN 1\n");
        let _ = writeln!(s, "command {}", self.command);
        let _ = writeln!(s, "tool {}", self.tool_version);
        let _ = writeln!(s, "config_hash {}", self.config_hash);
        let _ = writeln!(s, "started_unix {}", self.started_unix);
        let _ = writeln!(s, "wall_time_s {}", f(self.wall_time_s));
        for (name, h) in &self.inputs {
            let _ = writeln!(s, "input {name} {h}");
        }
        for (name, h) in &self.outputs {
            let _ = writeln!(s, "output {name} {h}");
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut c, _) = Cursor::open("BHRUN", text)?;
        let one = |c: &mut Cursor, key: &str| -> Result<String> { Ok(c.keyed(key)?.join(" ")) };
        let command = one(&mut c, "command")?;
        let tool_version = one(&mut c, "tool")?;
        let config_hash = one(&mut c, "config_hash")?;
        let started_unix = one(&mut c, "started_unix")?
            .parse()
            .map_err(|_| c.err("bad started_unix".into()))?;
        let wall_time_s = one(&mut c, "wall_time_s")?
            .parse()
            .map_err(|_| c.err("bad wall_time_s".into()))?;
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        loop {
            let (n, l) = c.line()?;
            let w: Vec<&str> = l.split_whitespace().collect();
            match w.as_slice() {
                ["end"] => break,
                ["input", name, h] => inputs.push((name.to_string(), h.to_string())),
                ["output", name, h] => outputs.push((name.to_string(), h.to_string())),
                _ => return Err(c.err(format!("line {n}: unexpected `{l}`"))),
            }
        }
        Ok(Manifest {
            command,
            tool_version,
            config_hash,
            started_unix,
            wall_time_s,
            inputs,
            outputs,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = super::read_text(path)?;
        Self::parse(&text).map_err(|e| BhError::MissingArtifact(format!("{}: {e}", path.display())))
    }

    /// Checks that every listed output in `dir` still has its recorded hash.
    pub fn verify_outputs(&self, dir: &Path) -> Result<()> {
        for (name, h) in &self.outputs {
            let actual = sha256_file(&dir.join(name))?;
            if &actual != h {
                return Err(BhError::MissingArtifact(format!(
                    "{name} does not match its manifest (sha256 {actual}, recorded {h}); rerun `bh {}`",
                    self.command
                )));
            }
        }
        Ok(())
    }
}
