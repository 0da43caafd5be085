//! Run configuration (TOML).
//!
//! ```toml
//! [geometry]
//! kind = "disk2d"        # disk2d | layered2d | tube3d
//! r0 = 0.25              # disk2d; layered2d uses a, b; tube3d uses rho
//! h = 0.04
//!
//! [material]
//! lambda_int = 1.0
//! lambda_out = 3.0
//! alpha = 1.0
//!
//! [scaling]
//! k = 1.0
//!
//! [kernel]               # cell-evolution grid for B⁰ and Φ
//! t_final = 1.0
//! dt = 0.025
//!
//! [macro]                # homogenized and micro time grid, macro mesh
//! t_final = 1.0
//! dt = 0.05
//! n = 32
//!
//! [data]
//! u0 = "sin-product"     # zero | sin-product | gaussian-bump
//! f = "zero"
//!
//! [sweep]
//! eps = [0.5, 0.25, 0.125]
//! eta = [0.2, 0.1, 0.05]
//!
//! [output]
//! dir = "bh-out"
//! ```
//!
//! Every section and key is optional; omitted values take the defaults
//! shown. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cell::{Compatibility, Material, TimeGrid};
use crate::error::{BhError, Result};
use crate::geometry::{cells_per_axis, GeometryKind, GeometrySpec};
use crate::io::sha256_hex;
use crate::macroscale::Regime;
use crate::presets::Preset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub h: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            kind: "disk2d".into(),
            r0: None,
            a: None,
            b: None,
            rho: None,
            h: 0.04,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    pub lambda_int: f64,
    pub lambda_out: f64,
    pub alpha: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        MaterialSection {
            lambda_int: 1.0,
            lambda_out: 3.0,
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    pub k: f64,
}

impl Default for ScalingSection {
    fn default() -> Self {
        ScalingSection { k: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub t_final: f64,
    pub dt: f64,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            t_final: 1.0,
            dt: 0.025,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacroSection {
    pub t_final: f64,
    pub dt: f64,
    pub n: usize,
}

impl Default for MacroSection {
    fn default() -> Self {
        MacroSection {
            t_final: 1.0,
            dt: 0.05,
            n: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub u0: Preset,
    pub f: Preset,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            u0: Preset::SinProduct,
            f: Preset::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            eps: vec![0.5, 0.25, 0.125],
            eta: vec![0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "bh-out".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySection,
    pub material: MaterialSection,
    pub scaling: ScalingSection,
    pub kernel: KernelSection,
    #[serde(rename = "macro")]
    pub macro_: MacroSection,
    pub data: DataSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| BhError::ConfigInvalid(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BhError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            BhError::ConfigInvalid(m) => BhError::ConfigInvalid(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn kind(&self) -> Result<GeometryKind> {
        GeometryKind::from_name(&self.geometry.kind).ok_or_else(|| {
            BhError::ConfigInvalid(format!(
                "geometry.kind = `{}`; expected disk2d, layered2d or tube3d",
                self.geometry.kind
            ))
        })
    }

    /// Geometry spec with the documented parameter defaults filled in.
    pub fn geometry_spec(&self) -> Result<GeometrySpec> {
        let g = &self.geometry;
        let misplaced = |name: &str, set: bool| {
            if set {
                Err(BhError::ConfigInvalid(format!(
                    "geometry.{name} does not apply to {}",
                    g.kind
                )))
            } else {
                Ok(())
            }
        };
        Ok(match self.kind()? {
            GeometryKind::Disk2D => {
                misplaced("a", g.a.is_some())?;
                misplaced("b", g.b.is_some())?;
                misplaced("rho", g.rho.is_some())?;
                GeometrySpec::disk(g.r0.unwrap_or(0.25), g.h)
            }
            GeometryKind::Layered2D => {
                misplaced("r0", g.r0.is_some())?;
                misplaced("rho", g.rho.is_some())?;
                GeometrySpec::layered(g.a.unwrap_or(0.25), g.b.unwrap_or(0.75), g.h)
            }
            GeometryKind::TubeLattice3D => {
                misplaced("r0", g.r0.is_some())?;
                misplaced("a", g.a.is_some())?;
                misplaced("b", g.b.is_some())?;
                GeometrySpec::tube(g.rho.unwrap_or(0.25), g.h)
            }
        })
    }

    pub fn material(&self) -> Material {
        let m = &self.material;
        Material::new(m.lambda_int, m.lambda_out, m.alpha)
    }

    pub fn kernel_grid(&self) -> TimeGrid {
        TimeGrid::new(self.kernel.t_final, self.kernel.dt)
    }

    pub fn regime(&self) -> Result<Regime> {
        Ok(Regime::for_scaling(self.scaling.k, self.kind()?))
    }

    /// Layered cells carry a per-layer defect in the v_j data that is
    /// projected out; every other geometry must be compatible as is.
    pub fn compatibility(&self) -> Result<Compatibility> {
        Ok(match self.kind()? {
            GeometryKind::Layered2D => Compatibility::Project,
            _ => Compatibility::Strict,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BhError::ConfigInvalid(m));
        self.geometry_spec()?
            .validate()
            .map_err(|e| BhError::ConfigInvalid(e.to_string()))?;
        let m = &self.material;
        for (name, v) in [
            ("lambda_int", m.lambda_int),
            ("lambda_out", m.lambda_out),
            ("alpha", m.alpha),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("material.{name} = {v} must be positive"));
            }
        }
        if !self.scaling.k.is_finite() {
            return bad("scaling.k must be finite".into());
        }
        for (name, v) in [
            ("kernel.t_final", self.kernel.t_final),
            ("kernel.dt", self.kernel.dt),
            ("macro.t_final", self.macro_.t_final),
            ("macro.dt", self.macro_.dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.kernel.dt > self.kernel.t_final || self.macro_.dt > self.macro_.t_final {
            return bad("time steps must not exceed their horizons".into());
        }
        for (name, t, dt) in [
            ("kernel", self.kernel.t_final, self.kernel.dt),
            ("macro", self.macro_.t_final, self.macro_.dt),
        ] {
            let steps = (t / dt).round();
            if (steps * dt - t).abs() > 1e-9 * t {
                return bad(format!("{name}.t_final = {t} is not a multiple of {name}.dt = {dt}"));
            }
        }
        if self.regime()?.has_memory() && self.macro_.t_final > self.kernel_grid().horizon() * (1.0 + 1e-12) {
            return bad(format!(
                "macro.t_final = {} exceeds the kernel horizon {}",
                self.macro_.t_final,
                self.kernel_grid().horizon()
            ));
        }
        if self.macro_.n < 2 {
            return bad(format!("macro.n = {} must be at least 2", self.macro_.n));
        }
        for &eps in &self.sweep.eps {
            if !(eps > 0.0 && eps <= 1.0) {
                return bad(format!("sweep.eps entry {eps} outside (0, 1]"));
            }
            let n = cells_per_axis(eps).map_err(|e| BhError::ConfigInvalid(format!("sweep.eps: {e}")))?;
            if !self.macro_.n.is_multiple_of(n) {
                return bad(format!("macro.n = {} is not a multiple of 1/eps = {n}", self.macro_.n));
            }
        }
        for &eta in &self.sweep.eta {
            if !(eta > 0.0 && eta <= 0.2) {
                return bad(format!("sweep.eta entry {eta} outside (0, 0.2]"));
            }
        }
        if !self.sweep.eta.is_empty() && self.kind()? != GeometryKind::Disk2D {
            return bad("sweep.eta requires geometry.kind = disk2d".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form, output location excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        sha256_hex(c.to_toml().as_bytes())
    }

    /// Identifies the cell mesh: geometry spec only.
    pub fn geometry_hash(&self) -> Result<String> {
        Ok(sha256_hex(self.geometry_spec()?.describe().as_bytes()))
    }

    /// Identifies the cell functions and tensors: geometry, material and
    /// kernel grid.
    pub fn cell_hash(&self) -> Result<String> {
        let g = self.kernel_grid();
        let m = &self.material;
        let text = format!(
            "{}\nlambda_int={:e} lambda_out={:e} alpha={:e}\ndt={:e} steps={}",
            self.geometry_spec()?.describe(),
            m.lambda_int,
            m.lambda_out,
            m.alpha,
            g.dt,
            g.n_steps
        );
        Ok(sha256_hex(text.as_bytes()))
    }
}
