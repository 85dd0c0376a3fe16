use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, SkimError};
use crate::gtfs::Stop;

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// A demand zone represented by its centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    /// Zone lies inside the new line's corridor buffer.
    #[serde(default)]
    pub in_corridor: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessLink {
    pub zone_id: String,
    pub stop_id: String,
    pub walk_s: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkSettings {
    pub speed_mps: f64,
    /// Ratio of network walking distance to straight-line distance.
    pub detour: f64,
    pub max_radius_m: f64,
}

impl Default for WalkSettings {
    fn default() -> Self {
        WalkSettings { speed_mps: 1.34, detour: 1.3, max_radius_m: 1200.0 }
    }
}

impl WalkSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_mps > 0.0) {
            return Err(SkimError::InvalidSetting("walk speed must be positive".into()));
        }
        if !(self.max_radius_m > 0.0) {
            return Err(SkimError::InvalidSetting("access radius must be positive".into()));
        }
        if !(self.detour >= 1.0) {
            return Err(SkimError::InvalidSetting("detour factor must be at least 1".into()));
        }
        Ok(())
    }
}

/// Great-circle distance in metres.
pub fn haversine_m(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().asin()
}

/// Walk links from a zone centroid to every stop within the access radius.
pub fn access_candidates(zone: &Zone, stops: &[Stop], walk: &WalkSettings) -> Vec<AccessLink> {
    stops
        .iter()
        .filter_map(|stop| {
            let walked = haversine_m(zone.lat, zone.lon, stop.lat, stop.lon) * walk.detour;
            (walked <= walk.max_radius_m).then(|| AccessLink {
                zone_id: zone.id.clone(),
                stop_id: stop.id.clone(),
                walk_s: (walked / walk.speed_mps).round() as u32,
            })
        })
        .collect()
}

/// Reads `zone_id,lat,lon[,in_corridor]`.
pub fn load_zones(path: impl AsRef<Path>) -> Result<Vec<Zone>> {
    let path = path.as_ref();
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id), Some(lat), Some(lon)) = (col("zone_id"), col("lat"), col("lon")) else {
        return Err(SkimError::Malformed {
            file,
            line: 1,
            message: "expected columns zone_id, lat, lon".into(),
        });
    };
    let corridor = col("in_corridor");
    let mut zones = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| SkimError::Malformed { file: file.clone(), line, message };
        let num = |i: usize, what: &str| -> Result<f64> {
            record
                .get(i)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| bad(format!("bad {what}")))
        };
        let zone = Zone {
            id: record.get(id).unwrap_or_default().to_string(),
            lat: num(lat, "lat")?,
            lon: num(lon, "lon")?,
            in_corridor: match corridor.and_then(|c| record.get(c)) {
                None | Some("") | Some("0") | Some("false") => false,
                Some("1") | Some("true") => true,
                Some(other) => return Err(bad(format!("bad in_corridor `{other}`"))),
            },
        };
        if zone.id.is_empty() {
            return Err(bad("empty zone_id".into()));
        }
        if !(-90.0..=90.0).contains(&zone.lat) || !(-180.0..=180.0).contains(&zone.lon) {
            return Err(bad(format!("coordinates of `{}` out of range", zone.id)));
        }
        if !seen.insert(zone.id.clone()) {
            return Err(bad(format!("duplicate zone `{}`", zone.id)));
        }
        zones.push(zone);
    }
    Ok(zones)
}
