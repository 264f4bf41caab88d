//! Capture manifests: the sphere presses and marker observations a
//! calibration run reads, with paths relative to the manifest.
//!
//! ```toml
//! radius = 2.0
//! background = "background.png"
//!
//! [[press]]
//! image = "press_000.png"
//! center = [6.1, 7.4]
//! depth = 0.8
//!
//! [[motion]]
//! table = "motion_000_shear.txt"
//! load = "shear"
//! center = [6.1, 7.4]
//! depth = 0.8
//! shear = [0.3, -0.1]
//! ```
//!
//! Motion tables hold `index x0 y0 dx dy` rows. Shear and twist tables carry
//! only the displacement of that load, with the press itself subtracted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tacsim::marker::LoadKind;
use tacsim::{ContactPose, Error};

use crate::common::{base_dir, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadName {
    Dilate,
    Shear,
    Twist,
}

impl From<LoadName> for LoadKind {
    fn from(l: LoadName) -> Self {
        match l {
            LoadName::Dilate => LoadKind::Dilate,
            LoadName::Shear => LoadKind::Shear,
            LoadName::Twist => LoadKind::Twist,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Press {
    pub image: PathBuf,
    pub center: [f64; 2],
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Motion {
    pub table: PathBuf,
    pub load: LoadName,
    pub center: [f64; 2],
    pub depth: f64,
    #[serde(default)]
    pub shear: [f64; 2],
    #[serde(default)]
    pub twist_deg: f64,
}

impl Motion {
    pub fn pose(&self) -> ContactPose {
        ContactPose {
            center: (self.center[0], self.center[1]),
            depth: self.depth,
            shear: (self.shear[0], self.shear[1]),
            twist_deg: self.twist_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Calibration sphere radius, mm.
    pub radius: f64,
    pub background: PathBuf,
    #[serde(default)]
    pub press: Vec<Press>,
    #[serde(default)]
    pub motion: Vec<Motion>,
}

impl Manifest {
    /// Reads a manifest and returns it with its base directory.
    pub fn load(path: &Path) -> CliResult<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::MissingFile { path: path.to_path_buf(), what: "capture manifest".into() }
            }
            _ => Error::Io(e),
        })?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
        if !(m.radius.is_finite() && m.radius > 0.0) {
            return Err(
                Error::Validation { path: "radius".into(), message: format!("must be > 0, got {}", m.radius) }.into()
            );
        }
        for (i, p) in m.press.iter().enumerate() {
            if !(p.depth.is_finite() && p.depth > 0.0 && p.depth < 2.0 * m.radius) {
                return Err(Error::Validation {
                    path: format!("press[{i}].depth"),
                    message: format!("must lie in (0, {}) mm, got {}", 2.0 * m.radius, p.depth),
                }
                .into());
            }
        }
        Ok((m, base_dir(path)))
    }

    pub fn save(&self, path: &Path) -> CliResult {
        let text = toml::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

impl Press {
    pub fn pose(&self) -> ContactPose {
        ContactPose::pressed((self.center[0], self.center[1]), self.depth)
    }
}
