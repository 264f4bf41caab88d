use std::fmt;
use std::path::{Path, PathBuf};

use tacsim::config::{load_config, SensorConfig};
use tacsim::{Error, ErrorClass};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations.
    Usage(String),
    /// A numerical gate set on the command line was not met.
    Numerical(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 3,
            CliError::Core(e) => match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Numerical => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// `x,y` as two floats.
pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let x: f64 = a.trim().parse().map_err(|_| format!("`{a}` is not a number"))?;
    let y: f64 = b.trim().parse().map_err(|_| format!("`{b}` is not a number"))?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(format!("`{s}` is not finite"));
    }
    Ok((x, y))
}

pub struct Context {
    pub config_path: Option<PathBuf>,
    pub seed: u64,
}

impl Context {
    pub fn new(config_path: Option<&Path>, seed: u64) -> CliResult<Self> {
        Ok(Self { config_path: config_path.map(Path::to_path_buf), seed })
    }

    /// The selected config and the directory its relative paths resolve against.
    pub fn config(&self) -> CliResult<(SensorConfig, PathBuf)> {
        match &self.config_path {
            Some(p) => Ok((load_config(p)?, base_dir(p))),
            None => Ok((SensorConfig::bundled("digit")?, PathBuf::from("."))),
        }
    }
}

pub fn base_dir(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// `target` as written into a file stored in `dir`: relative when it lies
/// inside `dir`, absolute otherwise.
pub fn path_for(dir: &Path, target: &Path) -> PathBuf {
    let abs = |p: &Path| std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let (d, t) = (abs(dir), abs(target));
    t.strip_prefix(&d).map(Path::to_path_buf).unwrap_or(t)
}

pub fn write_report(path: Option<&Path>, text: &str) -> CliResult {
    print!("{text}");
    if let Some(p) = path {
        std::fs::write(p, text)?;
    }
    Ok(())
}

pub fn ensure_parent(path: &Path) -> CliResult {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

/// Rewrites the file references of `cfg` (relative to `from`) so they stay
/// valid when the config is saved into `to`.
pub fn rebase_config(cfg: &mut SensorConfig, from: &Path, to: &Path) {
    for p in [&mut cfg.optics.model, &mut cfg.optics.background, &mut cfg.optics.background_depth].into_iter().flatten()
    {
        *p = path_for(to, &from.join(&*p));
    }
}

/// Saves `cfg` to `out`, rebasing its file references from `from`.
pub fn save_config_to(mut cfg: SensorConfig, from: &Path, out: &Path) -> CliResult {
    ensure_parent(out)?;
    rebase_config(&mut cfg, from, &base_dir(out));
    tacsim::config::save_config(&cfg, out)?;
    Ok(())
}
