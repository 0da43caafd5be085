//! Named analytic data for ū₀ and f. Every preset vanishes on ∂Ω.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::BhError;
use crate::geometry::vec::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Zero,
    /// Π sin(πx_i).
    SinProduct,
    /// exp(−|x−c|²/(2·0.15²)) Π sin(πx_i), c the centre of Ω.
    GaussianBump,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Zero, Preset::SinProduct, Preset::GaussianBump];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Zero => "zero",
            Preset::SinProduct => "sin-product",
            Preset::GaussianBump => "gaussian-bump",
        }
    }

    pub fn eval(self, dim: usize, x: &Point) -> f64 {
        let sines = || x[..dim].iter().map(|&xi| (PI * xi).sin()).product::<f64>();
        match self {
            Preset::Zero => 0.0,
            Preset::SinProduct => sines(),
            Preset::GaussianBump => {
                let r2: f64 = x[..dim].iter().map(|&xi| (xi - 0.5) * (xi - 0.5)).sum();
                (-r2 / (2.0 * 0.15 * 0.15)).exp() * sines()
            }
        }
    }

    pub fn is_zero(self) -> bool {
        self == Preset::Zero
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = BhError;

    fn from_str(s: &str) -> Result<Self, BhError> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            BhError::ConfigInvalid(format!(
                "unknown preset `{s}` (expected zero, sin-product or gaussian-bump)"
            ))
        })
    }
}
