use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result, Stage};
use crate::demand::DEFAULT_GRAMS_PER_MILE;
use crate::gtfs::Weekday;
use crate::skim::SkimSettings;

pub const CONFIG_VERSION: u32 = 1;

/// Input locations. Relative paths are resolved against the directory of the
/// config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    /// Directory holding the existing network's GTFS tables.
    pub base_gtfs: PathBuf,
    /// Line description (route + service plan). Without it the alternative
    /// network equals the base network.
    #[serde(default)]
    pub line: Option<PathBuf>,
    pub zones: PathBuf,
    pub params: PathBuf,
    /// Groups CSV or a trip-level agenda.
    pub groups: PathBuf,
}

/// Scenario definition, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_weekday")]
    pub weekday: String,
    /// Worker threads; the environment cap applies when unset.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Notional base time for ODs first connected by the new line, minutes.
    #[serde(default = "default_ceiling")]
    pub ceiling_min: f64,
    #[serde(default = "default_grams")]
    pub grams_per_mile: f64,
    /// Sufficiency thresholds as fractions of the pre-scenario mean surplus.
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    /// Prefix for new-line ids that collide with base ids.
    #[serde(default = "default_prefix")]
    pub line_prefix: String,
    /// Reuse skim matrices from the binary cache.
    #[serde(default = "default_true")]
    pub cache: bool,
    pub inputs: InputPaths,
    #[serde(default)]
    pub skim: SkimSettings,
}

fn default_weekday() -> String {
    "monday".into()
}
fn default_ceiling() -> f64 {
    120.0
}
fn default_grams() -> f64 {
    DEFAULT_GRAMS_PER_MILE
}
fn default_thresholds() -> Vec<f64> {
    vec![0.1, 0.5]
}
fn default_prefix() -> String {
    "new_".into()
}
fn default_true() -> bool {
    true
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<ScenarioConfig> {
        let mut cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| PipelineError::input(Stage::Config, e.to_string()))?;
        cfg.resolve(base_dir);
        Ok(cfg)
    }

    /// Loads and validates a config file, resolving relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::input(Stage::Config, format!("{}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.output_dir);
        join(&mut self.inputs.base_gtfs);
        if let Some(l) = self.inputs.line.as_mut() {
            join(l);
        }
        join(&mut self.inputs.zones);
        join(&mut self.inputs.params);
        join(&mut self.inputs.groups);
    }

    pub fn weekday(&self) -> Result<Weekday> {
        Weekday::parse(&self.weekday)
            .ok_or_else(|| PipelineError::input(Stage::Config, format!("unknown weekday `{}`", self.weekday)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::input(Stage::Config, m));
        self.weekday()?;
        if !(self.ceiling_min > 0.0) {
            return bad(format!("ceiling_min must be positive, got {}", self.ceiling_min));
        }
        if !(self.grams_per_mile > 0.0) {
            return bad(format!("grams_per_mile must be positive, got {}", self.grams_per_mile));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|&f| !(f > 0.0)) {
            return bad("thresholds must be a non-empty list of positive fractions".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        self.skim.validate().map_err(|e| PipelineError::input(Stage::Config, e))?;
        let i = &self.inputs;
        for p in [&i.base_gtfs, &i.zones, &i.params, &i.groups].into_iter().chain(i.line.as_ref()) {
            if !p.exists() {
                return Err(PipelineError::missing(Stage::Config, p));
            }
        }
        Ok(())
    }
}
