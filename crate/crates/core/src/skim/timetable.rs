use std::collections::{BTreeMap, HashMap};

use crate::gtfs::{Feed, Weekday};

/// Trips sharing one stop sequence, sorted so that no trip overtakes another:
/// at every position both arrival and departure are nondecreasing in trip
/// order.
#[derive(Debug, Clone)]
pub struct Pattern {
    pub stops: Vec<usize>,
    /// Trip index into [`Timetable::trip_ids`].
    pub trips: Vec<usize>,
    /// `arrivals[t][pos]`, parallel to `trips`.
    pub arrivals: Vec<Vec<u32>>,
    pub departures: Vec<Vec<u32>>,
}

impl Pattern {
    /// First trip (in pattern order) departing `pos` at or after `time`.
    pub fn earliest_trip(&self, pos: usize, time: u32) -> Option<usize> {
        let i = self.departures.partition_point(|d| d[pos] < time);
        (i < self.trips.len()).then_some(i)
    }

    fn accepts(&self, arr: &[u32], dep: &[u32]) -> bool {
        let (Some(last_arr), Some(last_dep)) = (self.arrivals.last(), self.departures.last()) else {
            return true;
        };
        arr.iter().zip(last_arr).all(|(a, b)| a >= b) && dep.iter().zip(last_dep).all(|(a, b)| a >= b)
    }
}

/// Route-pattern view of a feed for one service day, immutable once built.
#[derive(Debug, Clone)]
pub struct Timetable {
    pub stop_ids: Vec<String>,
    pub trip_ids: Vec<String>,
    pub patterns: Vec<Pattern>,
    /// For each stop, the `(pattern, position)` pairs serving it.
    pub stop_patterns: Vec<Vec<(usize, usize)>>,
    stop_index: HashMap<String, usize>,
}

impl Timetable {
    /// Keeps the trips whose service runs on `day`.
    pub fn build(feed: &Feed, day: Weekday) -> Timetable {
        let stop_ids: Vec<String> = feed.stops.iter().map(|s| s.id.clone()).collect();
        let stop_index: HashMap<String, usize> =
            stop_ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let active: HashMap<&str, bool> =
            feed.services.iter().map(|s| (s.id.as_str(), s.runs_on(day))).collect();

        let mut by_trip: BTreeMap<&str, Vec<&crate::gtfs::StopTime>> = BTreeMap::new();
        for st in &feed.stop_times {
            by_trip.entry(st.trip_id.as_str()).or_default().push(st);
        }

        let mut trip_ids = Vec::new();
        // stop sequence -> [(arrivals, departures, trip index)]
        type Run = (Vec<u32>, Vec<u32>, usize);
        let mut groups: BTreeMap<Vec<usize>, Vec<Run>> = BTreeMap::new();
        for trip in &feed.trips {
            if !active.get(trip.service_id.as_str()).copied().unwrap_or(false) {
                continue;
            }
            let Some(times) = by_trip.get(trip.id.as_str()) else { continue };
            if times.len() < 2 {
                continue;
            }
            let mut times = times.clone();
            times.sort_by_key(|st| st.stop_sequence);
            let stops: Vec<usize> = times.iter().map(|st| stop_index[&st.stop_id]).collect();
            let arr = times.iter().map(|st| st.arrival).collect();
            let dep = times.iter().map(|st| st.departure).collect();
            trip_ids.push(trip.id.clone());
            groups.entry(stops).or_default().push((arr, dep, trip_ids.len() - 1));
        }

        let mut patterns = Vec::new();
        for (stops, mut trips) in groups {
            trips.sort_by(|a, b| a.1[0].cmp(&b.1[0]).then(a.0.cmp(&b.0)).then(a.2.cmp(&b.2)));
            let mut split: Vec<Pattern> = Vec::new();
            for (arr, dep, trip) in trips {
                let slot = match split.iter().position(|p| p.accepts(&arr, &dep)) {
                    Some(i) => i,
                    None => {
                        split.push(Pattern {
                            stops: stops.clone(),
                            trips: Vec::new(),
                            arrivals: Vec::new(),
                            departures: Vec::new(),
                        });
                        split.len() - 1
                    }
                };
                let p = &mut split[slot];
                p.trips.push(trip);
                p.arrivals.push(arr);
                p.departures.push(dep);
            }
            patterns.extend(split);
        }

        let mut stop_patterns = vec![Vec::new(); stop_ids.len()];
        for (pi, p) in patterns.iter().enumerate() {
            for (pos, &s) in p.stops.iter().enumerate() {
                stop_patterns[s].push((pi, pos));
            }
        }

        Timetable { stop_ids, trip_ids, patterns, stop_patterns, stop_index }
    }

    pub fn stop_index(&self, id: &str) -> Option<usize> {
        self.stop_index.get(id).copied()
    }

    pub fn num_stops(&self) -> usize {
        self.stop_ids.len()
    }

    pub fn num_trips(&self) -> usize {
        self.trip_ids.len()
    }
}
