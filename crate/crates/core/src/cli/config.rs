use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minimize::MinimizeOptions;
use crate::params::ProblemParams;
use crate::shoot::{GroundStateOptions, ShootConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Problem parameters as read from a file or flags; any may be missing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamSection {
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "m", skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
}

impl ParamSection {
    /// Values set in `other` win.
    pub fn overlay(&mut self, other: &ParamSection) {
        self.dim = other.dim.or(self.dim);
        self.q = other.q.or(self.q);
        self.p = other.p.or(self.p);
        self.alpha = other.alpha.or(self.alpha);
        self.mass = other.mass.or(self.mass);
    }

    /// Builds validated parameters. `alpha` and `m` fall back to the given
    /// defaults when `Some`, and are required otherwise.
    pub fn resolve(&self, alpha: Option<f64>, mass: Option<f64>) -> Result<ProblemParams> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::InvalidParams(format!("missing --{name}")))
        };
        let dim = self.dim.ok_or_else(|| Error::InvalidParams("missing --N".into()))?;
        ProblemParams::new(
            dim,
            need(self.q, "q")?,
            need(self.p, "p")?,
            need(self.alpha.or(alpha), "alpha")?,
            need(self.mass.or(mass), "m")?,
        )
    }
}

/// Everything a run needs. Defaults, then the config file, then flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub format: Format,
    pub params: ParamSection,
    pub minimize: MinimizeOptions,
    pub shoot: ShootConfig,
    pub ground_state: GroundStateOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("qlap-out"),
            format: Format::Json,
            params: ParamSection::default(),
            minimize: MinimizeOptions::default(),
            shoot: ShootConfig::default(),
            ground_state: GroundStateOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.minimize.validate()?;
        self.shoot.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Writes `config.toml` into the output directory.
    pub fn write_echo(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir)?;
        let path = self.output_dir.join("config.toml");
        std::fs::write(&path, self.to_toml()?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::Spacing;

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig {
            params: ParamSection { dim: Some(3), q: Some(3.0), p: Some(4.0), alpha: Some(2.5), mass: None },
            format: Format::Csv,
            ..Default::default()
        };
        cfg.minimize.grid.spacing = Spacing::Geometric(1.001);
        cfg.minimize.grid.r_max = Some(12.5);
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = RunConfig::parse("[params]\nN = 1\nq = 3.0\n[minimize]\nrestarts = 2\n").unwrap();
        assert_eq!(cfg.minimize.restarts, 2);
        assert_eq!(cfg.minimize.max_iter, MinimizeOptions::default().max_iter);
        assert_eq!(cfg.params.dim, Some(1));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::parse("bogus = 1\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn overlay_and_resolve() {
        let mut base = ParamSection { dim: Some(1), q: Some(3.0), p: Some(4.5), alpha: Some(1.0), mass: Some(1.0) };
        base.overlay(&ParamSection { alpha: Some(50.0), ..Default::default() });
        let p = base.resolve(None, None).unwrap();
        assert_eq!((p.alpha, p.mass), (50.0, 1.0));
        let missing = ParamSection { mass: None, ..base };
        let err = missing.resolve(None, None).unwrap_err();
        assert!(err.to_string().contains("--m"));
    }
}
