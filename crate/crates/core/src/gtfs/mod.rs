//! Static GTFS feeds: the in-memory model, CSV reader and writer, synthetic
//! schedule construction for a proposed line, and feed merging.

mod io;
mod merge;
mod synth;
pub mod time;

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{parse_feed, write_feed, REQUIRED_FILES};
pub use merge::merge_feeds;
pub use synth::{
    build_synthetic_schedule, interstop_times, load_line_config, LineConfig, LineStop, RouteSpec,
    ServiceInterval, ServicePlan,
};

#[derive(Debug, Error)]
pub enum GtfsError {
    #[error("missing required GTFS file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{file}:{line}: column `{column}`: {message}")]
    Malformed {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file}:{line}: {message}")]
    DanglingReference {
        file: String,
        line: u64,
        message: String,
    },
    #[error("duplicate id `{id}` in {table}")]
    DuplicateId { table: &'static str, id: String },
    #[error("invalid feed: {0}")]
    InvalidFeed(String),
    #[error("id `{id}` in {table} collides with the base feed even after prefixing")]
    IdCollision { table: &'static str, id: String },
    #[error("invalid route spec: {0}")]
    InvalidRouteSpec(String),
    #[error("invalid service plan: {0}")]
    InvalidPlan(String),
    #[error("segment {index} has zero length")]
    ZeroLengthSegment { index: usize },
    #[error("invalid line config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GtfsError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub id: String,
    pub short_name: String,
    /// GTFS `route_type` (0 tram/light rail, 1 subway, 3 bus, ...).
    pub route_type: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trip {
    pub id: String,
    pub route_id: String,
    pub service_id: String,
    pub direction_id: u8,
}

/// One row of `stop_times.txt`; times are seconds since service-day midnight.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopTime {
    pub trip_id: String,
    pub stop_sequence: u32,
    pub stop_id: String,
    pub arrival: u32,
    pub departure: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Weekday {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl Weekday {
    pub const ALL: [Weekday; 7] = [
        Weekday::Monday,
        Weekday::Tuesday,
        Weekday::Wednesday,
        Weekday::Thursday,
        Weekday::Friday,
        Weekday::Saturday,
        Weekday::Sunday,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn column(self) -> &'static str {
        match self {
            Weekday::Monday => "monday",
            Weekday::Tuesday => "tuesday",
            Weekday::Wednesday => "wednesday",
            Weekday::Thursday => "thursday",
            Weekday::Friday => "friday",
            Weekday::Saturday => "saturday",
            Weekday::Sunday => "sunday",
        }
    }

    pub fn parse(s: &str) -> Option<Weekday> {
        let s = s.trim().to_ascii_lowercase();
        Weekday::ALL
            .into_iter()
            .find(|d| d.column() == s || d.column()[..3] == s)
    }
}

/// A `calendar.txt` row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Service {
    pub id: String,
    /// Monday first.
    pub days: [bool; 7],
    pub start_date: String,
    pub end_date: String,
}

impl Service {
    pub fn weekdays(id: impl Into<String>) -> Self {
        Service {
            id: id.into(),
            days: [true, true, true, true, true, false, false],
            start_date: "20240101".into(),
            end_date: "20291231".into(),
        }
    }

    pub fn runs_on(&self, day: Weekday) -> bool {
        self.days[day.index()]
    }
}

/// An in-memory GTFS timetable.
///
/// A feed is kept in canonical order (every table sorted by id, stop times by
/// trip then sequence) so that equality is structural.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Feed {
    pub stops: Vec<Stop>,
    pub routes: Vec<Route>,
    pub trips: Vec<Trip>,
    pub stop_times: Vec<StopTime>,
    pub services: Vec<Service>,
}

impl Feed {
    pub fn canonicalize(&mut self) {
        self.stops.sort_by(|a, b| a.id.cmp(&b.id));
        self.routes.sort_by(|a, b| a.id.cmp(&b.id));
        self.trips.sort_by(|a, b| a.id.cmp(&b.id));
        self.services.sort_by(|a, b| a.id.cmp(&b.id));
        self.stop_times.sort_by(|a, b| {
            a.trip_id
                .cmp(&b.trip_id)
                .then(a.stop_sequence.cmp(&b.stop_sequence))
        });
    }

    pub fn canonical(mut self) -> Self {
        self.canonicalize();
        self
    }

    pub fn is_empty(&self) -> bool {
        self.stops.is_empty()
            && self.routes.is_empty()
            && self.trips.is_empty()
            && self.stop_times.is_empty()
            && self.services.is_empty()
    }

    /// Stop times of one trip, assuming canonical order.
    pub fn trip_stop_times(&self, trip_id: &str) -> &[StopTime] {
        let start = self.stop_times.partition_point(|st| st.trip_id.as_str() < trip_id);
        let end = self.stop_times.partition_point(|st| st.trip_id.as_str() <= trip_id);
        &self.stop_times[start..end]
    }

    pub fn stop(&self, id: &str) -> Option<&Stop> {
        self.stops
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.stops[i])
    }

    /// Checks uniqueness, references and stop-time ordering.
    pub fn validate(&self) -> Result<()> {
        let stops = unique_ids("stops", self.stops.iter().map(|s| s.id.as_str()))?;
        let routes = unique_ids("routes", self.routes.iter().map(|r| r.id.as_str()))?;
        let services = unique_ids("calendar", self.services.iter().map(|s| s.id.as_str()))?;
        let trips = unique_ids("trips", self.trips.iter().map(|t| t.id.as_str()))?;

        for trip in &self.trips {
            if !routes.contains(trip.route_id.as_str()) {
                return Err(GtfsError::InvalidFeed(format!(
                    "trip `{}` references unknown route `{}`",
                    trip.id, trip.route_id
                )));
            }
            if !services.contains(trip.service_id.as_str()) {
                return Err(GtfsError::InvalidFeed(format!(
                    "trip `{}` references unknown service `{}`",
                    trip.id, trip.service_id
                )));
            }
        }

        let mut by_trip: HashMap<&str, Vec<&StopTime>> = HashMap::new();
        for st in &self.stop_times {
            if !trips.contains(st.trip_id.as_str()) {
                return Err(GtfsError::InvalidFeed(format!(
                    "stop time references unknown trip `{}`",
                    st.trip_id
                )));
            }
            if !stops.contains(st.stop_id.as_str()) {
                return Err(GtfsError::InvalidFeed(format!(
                    "stop time of trip `{}` references unknown stop `{}`",
                    st.trip_id, st.stop_id
                )));
            }
            by_trip.entry(st.trip_id.as_str()).or_default().push(st);
        }
        for (trip, mut times) in by_trip {
            times.sort_by_key(|st| st.stop_sequence);
            for st in &times {
                if st.departure < st.arrival {
                    return Err(GtfsError::InvalidFeed(format!(
                        "trip `{trip}` departs stop sequence {} before arriving",
                        st.stop_sequence
                    )));
                }
            }
            for pair in times.windows(2) {
                if pair[0].stop_sequence == pair[1].stop_sequence {
                    return Err(GtfsError::InvalidFeed(format!(
                        "trip `{trip}` repeats stop sequence {}",
                        pair[0].stop_sequence
                    )));
                }
                if pair[1].arrival < pair[0].departure {
                    return Err(GtfsError::InvalidFeed(format!(
                        "trip `{trip}` goes back in time at stop sequence {}",
                        pair[1].stop_sequence
                    )));
                }
            }
        }
        Ok(())
    }
}

fn unique_ids<'a>(
    table: &'static str,
    ids: impl Iterator<Item = &'a str>,
) -> Result<HashSet<&'a str>> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(GtfsError::DuplicateId {
                table,
                id: id.to_string(),
            });
        }
    }
    Ok(seen)
}
