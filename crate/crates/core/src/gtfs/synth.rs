use std::path::Path;

use serde::{Deserialize, Serialize};

use super::time::{format_time, parse_time};
use super::{Feed, GtfsError, Result, Route, Service, Stop, StopTime, Trip};

const DAY: u32 = 24 * 3600;
const MILES_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineStop {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    /// Cumulative distance from the first stop.
    pub miles: f64,
}

/// Alignment and run time of a proposed line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub route_id: String,
    #[serde(default)]
    pub short_name: String,
    #[serde(default)]
    pub route_type: u16,
    pub stops: Vec<LineStop>,
    /// End-to-end one-way run time.
    pub run_time_min: f64,
    pub length_miles: f64,
}

impl RouteSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GtfsError::InvalidRouteSpec(m));
        if self.stops.len() < 2 {
            return bad(format!("need at least 2 stops, got {}", self.stops.len()));
        }
        if !(self.run_time_min > 0.0) || !self.run_time_min.is_finite() {
            return bad(format!("run time must be positive, got {}", self.run_time_min));
        }
        if !(self.length_miles > 0.0) || !self.length_miles.is_finite() {
            return bad(format!("length must be positive, got {}", self.length_miles));
        }
        if self.stops[0].miles.abs() > MILES_EPS {
            return bad(format!("first stop must be at 0 miles, got {}", self.stops[0].miles));
        }
        let last = self.stops[self.stops.len() - 1].miles;
        if (last - self.length_miles).abs() > MILES_EPS {
            return bad(format!(
                "last stop at {last} miles does not match line length {}",
                self.length_miles
            ));
        }
        for (i, pair) in self.stops.windows(2).enumerate() {
            if pair[1].miles <= pair[0].miles {
                return Err(GtfsError::ZeroLengthSegment { index: i });
            }
        }
        Ok(())
    }

    /// Average operating speed in miles per hour.
    pub fn average_speed_mph(&self) -> f64 {
        self.length_miles / (self.run_time_min / 60.0)
    }
}

/// Per-segment run times in seconds, identical in both directions.
///
/// Every segment but the last is rounded to whole seconds at the line's
/// average speed; the last segment absorbs the rounding residual so the
/// end-to-end time equals the configured run time.
pub fn interstop_times(spec: &RouteSpec) -> Result<Vec<u32>> {
    spec.validate()?;
    let total = (spec.run_time_min * 60.0).round() as i64;
    let miles_per_sec = spec.length_miles / (spec.run_time_min * 60.0);
    let n = spec.stops.len() - 1;
    let mut out = Vec::with_capacity(n);
    let mut used = 0i64;
    for (i, pair) in spec.stops.windows(2).enumerate() {
        let secs = if i + 1 == n {
            total - used
        } else {
            ((pair[1].miles - pair[0].miles) / miles_per_sec).round() as i64
        };
        if secs <= 0 {
            return Err(GtfsError::ZeroLengthSegment { index: i });
        }
        used += secs;
        out.push(secs as u32);
    }
    Ok(out)
}

/// One service period with a fixed headway. Times are seconds since
/// service-day midnight; an interval may run past 24:00.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceInterval {
    pub label: String,
    pub start: u32,
    pub end: u32,
    pub headway_min: f64,
}

impl ServiceInterval {
    pub fn new(label: impl Into<String>, start: u32, end: u32, headway_min: f64) -> Self {
        ServiceInterval { label: label.into(), start, end, headway_min }
    }

    pub fn headway_secs(&self) -> u32 {
        (self.headway_min * 60.0).round() as u32
    }

    pub fn duration_secs(&self) -> u32 {
        self.end - self.start
    }

    /// Identifier-safe form of the label, e.g. `morning_peak`.
    pub fn slug(&self) -> String {
        slugify(&self.label)
    }

    /// Departures from the first stop: the interval start stepped by the
    /// headway, strictly before the interval end.
    pub fn departures(&self) -> impl Iterator<Item = u32> + '_ {
        let step = self.headway_secs().max(1);
        (self.start..self.end).step_by(step as usize)
    }
}

pub fn slugify(label: &str) -> String {
    let mut out = String::new();
    for c in label.trim().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    while out.ends_with('_') {
        out.pop();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServicePlan {
    pub intervals: Vec<ServiceInterval>,
}

impl ServicePlan {
    /// The five-period weekday plan: 5-minute peaks, 10-minute midday and
    /// evening, 20-minute overnight.
    pub fn weekday_default() -> Self {
        let h = 3600;
        ServicePlan {
            intervals: vec![
                ServiceInterval::new("Morning peak", 6 * h, 9 * h, 5.0),
                ServiceInterval::new("Mid-day", 9 * h, 16 * h, 10.0),
                ServiceInterval::new("Evening peak", 16 * h, 20 * h, 5.0),
                ServiceInterval::new("Evening", 20 * h, 23 * h, 10.0),
                ServiceInterval::new("Early morning", 23 * h, 30 * h, 20.0),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GtfsError::InvalidPlan(m));
        if self.intervals.is_empty() {
            return bad("no intervals".into());
        }
        let mut sorted: Vec<&ServiceInterval> = self.intervals.iter().collect();
        sorted.sort_by_key(|i| i.start);
        for i in &sorted {
            if i.end <= i.start {
                return bad(format!("interval `{}` is empty", i.label));
            }
            if !(i.headway_min > 0.0) || i.headway_secs() == 0 {
                return bad(format!("interval `{}` needs a positive headway", i.label));
            }
        }
        for pair in sorted.windows(2) {
            if pair[1].start < pair[0].end {
                return bad(format!(
                    "intervals `{}` and `{}` overlap",
                    pair[0].label, pair[1].label
                ));
            }
        }
        let span = sorted.iter().map(|i| i.end).max().unwrap_or(0) - sorted[0].start;
        if span > DAY {
            return bad(format!("plan spans {} s, more than one day", span));
        }
        let mut slugs: Vec<String> = self.intervals.iter().map(|i| i.slug()).collect();
        slugs.sort();
        slugs.dedup();
        if slugs.len() != self.intervals.len() {
            return bad("interval labels must be distinct".into());
        }
        Ok(())
    }

    /// Index of the interval containing a service-day time, looking one day
    /// ahead for intervals that wrap past midnight.
    pub fn interval_of(&self, secs: u32) -> Option<usize> {
        let t = secs % DAY;
        self.intervals.iter().position(|i| {
            (i.start..i.end).contains(&t) || (i.start..i.end).contains(&(t + DAY))
        })
    }
}

/// Builds a full-day, two-direction schedule for the proposed line.
///
/// Stops dwell zero seconds; the service runs Monday to Friday.
pub fn build_synthetic_schedule(spec: &RouteSpec, plan: &ServicePlan) -> Result<Feed> {
    plan.validate()?;
    let segments = interstop_times(spec)?;
    let service_id = format!("{}_wkdy", spec.route_id);

    let mut feed = Feed {
        stops: spec
            .stops
            .iter()
            .map(|s| Stop { id: s.id.clone(), name: s.name.clone(), lat: s.lat, lon: s.lon })
            .collect(),
        routes: vec![Route {
            id: spec.route_id.clone(),
            short_name: spec.short_name.clone(),
            route_type: spec.route_type,
        }],
        services: vec![Service::weekdays(service_id.clone())],
        ..Feed::default()
    };

    let mut departures: Vec<u32> = plan.intervals.iter().flat_map(|i| i.departures()).collect();
    departures.sort_unstable();

    for direction in 0u8..2 {
        let (stops, segs): (Vec<&LineStop>, Vec<u32>) = if direction == 0 {
            (spec.stops.iter().collect(), segments.clone())
        } else {
            (spec.stops.iter().rev().collect(), segments.iter().rev().copied().collect())
        };
        for (n, &dep) in departures.iter().enumerate() {
            let trip_id = format!("{}_{}_{:04}", spec.route_id, direction, n + 1);
            let mut t = dep;
            for (k, stop) in stops.iter().enumerate() {
                if k > 0 {
                    t += segs[k - 1];
                }
                feed.stop_times.push(StopTime {
                    trip_id: trip_id.clone(),
                    stop_sequence: k as u32 + 1,
                    stop_id: stop.id.clone(),
                    arrival: t,
                    departure: t,
                });
            }
            feed.trips.push(Trip {
                id: trip_id,
                route_id: spec.route_id.clone(),
                service_id: service_id.clone(),
                direction_id: direction,
            });
        }
    }
    feed.canonicalize();
    feed.validate()?;
    Ok(feed)
}

/// Line definition file: the route alignment plus its service plan.
///
/// ```toml
/// [route]
/// route_id = "NL"
/// run_time_min = 39.0
/// length_miles = 14.0
/// [[route.stops]]
/// id = "nl01"
/// lat = 40.70
/// lon = -73.90
/// miles = 0.0
/// # ...
/// [[plan]]
/// label = "Morning peak"
/// start = "06:00"
/// end = "09:00"
/// headway_min = 5
/// ```
///
/// An interval whose `end` is not after its `start` wraps past midnight.
#[derive(Debug, Clone, PartialEq)]
pub struct LineConfig {
    pub route: RouteSpec,
    pub plan: ServicePlan,
}

#[derive(Deserialize, Serialize)]
struct RawInterval {
    label: String,
    start: String,
    end: String,
    headway_min: f64,
}

#[derive(Deserialize, Serialize)]
struct RawLineConfig {
    route: RouteSpec,
    plan: Vec<RawInterval>,
}

impl LineConfig {
    pub fn from_toml(text: &str) -> Result<LineConfig> {
        let raw: RawLineConfig =
            toml::from_str(text).map_err(|e| GtfsError::Config(e.to_string()))?;
        let mut intervals = Vec::new();
        for r in raw.plan {
            let clock = |s: &str| {
                parse_time(s).ok_or_else(|| {
                    GtfsError::Config(format!("interval `{}`: bad clock time `{s}`", r.label))
                })
            };
            let start = clock(&r.start)?;
            let mut end = clock(&r.end)?;
            if end <= start {
                end += DAY;
            }
            intervals.push(ServiceInterval::new(r.label.clone(), start, end, r.headway_min));
        }
        let cfg = LineConfig { route: raw.route, plan: ServicePlan { intervals } };
        cfg.route.validate()?;
        cfg.plan.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        let raw = RawLineConfig {
            route: self.route.clone(),
            plan: self
                .plan
                .intervals
                .iter()
                .map(|i| RawInterval {
                    label: i.label.clone(),
                    start: format_time(i.start % DAY)[..5].to_string(),
                    end: format_time(i.end % DAY)[..5].to_string(),
                    headway_min: i.headway_min,
                })
                .collect(),
        };
        toml::to_string(&raw).expect("line config serializes")
    }
}

pub fn load_line_config(path: impl AsRef<Path>) -> Result<LineConfig> {
    LineConfig::from_toml(&std::fs::read_to_string(path)?)
}
