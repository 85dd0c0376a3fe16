//! Transit skims: walk access to stops, round-based journey planning over a
//! timetable, and per-period OD matrices of access, egress and in-vehicle time.

mod access;
mod cache;
mod matrix;
mod router;
mod timetable;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use access::{access_candidates, haversine_m, load_zones, AccessLink, WalkSettings, Zone};
pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};
pub use matrix::{
    compute_skim, delta_skim, read_deltas_csv, read_skims_csv, write_deltas_csv, write_skims_csv,
    Connectivity, DeltaCell, DeltaMatrix, SkimCell, SkimMatrix,
};
pub use router::{plan_journey, Journey, Leg, Router, RouterLabels};
pub use timetable::{Pattern, Timetable};

#[derive(Debug, Error)]
pub enum SkimError {
    #[error("zone set is empty")]
    EmptyZones,
    #[error("zone sets differ between matrices")]
    ZoneMismatch,
    #[error("periods differ between matrices: `{0}` vs `{1}`")]
    PeriodMismatch(String, String),
    #[error("invalid setting: {0}")]
    InvalidSetting(String),
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: u64, message: String },
    #[error("cache {}: {message}", path.display())]
    Cache { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SkimError>;

/// Router and sampling settings shared by every skim of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkimSettings {
    pub walk: WalkSettings,
    /// Departure sampling grid within a period.
    pub sampling_step_min: f64,
    pub max_transfers: usize,
}

impl Default for SkimSettings {
    fn default() -> Self {
        SkimSettings { walk: WalkSettings::default(), sampling_step_min: 10.0, max_transfers: 4 }
    }
}

impl SkimSettings {
    pub fn validate(&self) -> Result<()> {
        self.walk.validate()?;
        if !(self.sampling_step_min > 0.0) || (self.sampling_step_min * 60.0).round() < 1.0 {
            return Err(SkimError::InvalidSetting(format!(
                "sampling step must be at least one second, got {} min",
                self.sampling_step_min
            )));
        }
        Ok(())
    }

    pub fn step_secs(&self) -> u32 {
        (self.sampling_step_min * 60.0).round() as u32
    }
}
