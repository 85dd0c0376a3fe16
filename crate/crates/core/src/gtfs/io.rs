use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::path::Path;

use super::time::{format_time, parse_time};
use super::{Feed, GtfsError, Result, Route, Service, Stop, StopTime, Trip, Weekday};

pub const REQUIRED_FILES: [&str; 5] = [
    "stops.txt",
    "routes.txt",
    "trips.txt",
    "stop_times.txt",
    "calendar.txt",
];

/// A CSV table with header lookup and position-aware field errors.
struct Table {
    file: String,
    columns: HashMap<String, usize>,
    reader: csv::Reader<File>,
}

struct Row<'a> {
    table: &'a Table,
    line: u64,
    record: csv::StringRecord,
}

impl Table {
    fn open(dir: &Path, name: &str) -> Result<Table> {
        let path = dir.join(name);
        if !path.is_file() {
            return Err(GtfsError::MissingFile(path));
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(&path)?;
        let columns = reader
            .headers()?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim_start_matches('\u{feff}').to_string(), i))
            .collect();
        Ok(Table { file: name.to_string(), columns, reader })
    }

    fn require(&self, column: &str) -> Result<()> {
        if self.columns.contains_key(column) {
            Ok(())
        } else {
            Err(GtfsError::Malformed {
                file: self.file.clone(),
                line: 1,
                column: column.to_string(),
                message: "missing column".into(),
            })
        }
    }

    fn rows(&mut self) -> Result<Vec<(u64, csv::StringRecord)>> {
        let mut out = Vec::new();
        for record in self.reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            out.push((line, record));
        }
        Ok(out)
    }
}

impl Row<'_> {
    fn get(&self, column: &str) -> Option<&str> {
        self.table
            .columns
            .get(column)
            .and_then(|&i| self.record.get(i))
            .filter(|s| !s.is_empty())
    }

    fn error(&self, column: &str, message: impl Into<String>) -> GtfsError {
        GtfsError::Malformed {
            file: self.table.file.clone(),
            line: self.line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn text(&self, column: &str) -> Result<String> {
        self.get(column)
            .map(str::to_string)
            .ok_or_else(|| self.error(column, "required value is empty"))
    }

    fn parse<T: std::str::FromStr>(&self, column: &str) -> Result<T> {
        let raw = self.get(column).ok_or_else(|| self.error(column, "required value is empty"))?;
        raw.parse()
            .map_err(|_| self.error(column, format!("cannot parse `{raw}`")))
    }

    fn parse_or<T: std::str::FromStr>(&self, column: &str, default: T) -> Result<T> {
        match self.get(column) {
            None => Ok(default),
            Some(_) => self.parse(column),
        }
    }

    fn time(&self, column: &str) -> Result<u32> {
        let raw = self.get(column).ok_or_else(|| self.error(column, "required value is empty"))?;
        parse_time(raw).ok_or_else(|| self.error(column, format!("bad time `{raw}`")))
    }

    fn dangling(&self, message: String) -> GtfsError {
        GtfsError::DanglingReference {
            file: self.table.file.clone(),
            line: self.line,
            message,
        }
    }
}

fn for_each_row(
    table: &mut Table,
    mut f: impl FnMut(&Row<'_>) -> Result<()>,
) -> Result<()> {
    for (line, record) in table.rows()? {
        let row = Row { table, line, record };
        f(&row)?;
    }
    Ok(())
}

/// Reads a GTFS directory into a canonical, validated [`Feed`].
pub fn parse_feed(dir: impl AsRef<Path>) -> Result<Feed> {
    let dir = dir.as_ref();
    for name in REQUIRED_FILES {
        if !dir.join(name).is_file() {
            return Err(GtfsError::MissingFile(dir.join(name)));
        }
    }
    let mut feed = Feed::default();

    let mut t = Table::open(dir, "stops.txt")?;
    for c in ["stop_id", "stop_lat", "stop_lon"] {
        t.require(c)?;
    }
    for_each_row(&mut t, |row| {
        let lat: f64 = row.parse("stop_lat")?;
        let lon: f64 = row.parse("stop_lon")?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err(row.error("stop_lat", "latitude out of range"));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(row.error("stop_lon", "longitude out of range"));
        }
        feed.stops.push(Stop {
            id: row.text("stop_id")?,
            name: row.get("stop_name").unwrap_or_default().to_string(),
            lat,
            lon,
        });
        Ok(())
    })?;

    let mut t = Table::open(dir, "routes.txt")?;
    for c in ["route_id", "route_type"] {
        t.require(c)?;
    }
    for_each_row(&mut t, |row| {
        feed.routes.push(Route {
            id: row.text("route_id")?,
            short_name: row
                .get("route_short_name")
                .or_else(|| row.get("route_long_name"))
                .unwrap_or_default()
                .to_string(),
            route_type: row.parse("route_type")?,
        });
        Ok(())
    })?;

    let mut t = Table::open(dir, "calendar.txt")?;
    t.require("service_id")?;
    for day in Weekday::ALL {
        t.require(day.column())?;
    }
    for_each_row(&mut t, |row| {
        let mut days = [false; 7];
        for day in Weekday::ALL {
            days[day.index()] = match row.get(day.column()) {
                Some("1") => true,
                Some("0") => false,
                other => {
                    return Err(row.error(
                        day.column(),
                        format!("expected 0 or 1, got `{}`", other.unwrap_or("")),
                    ))
                }
            };
        }
        feed.services.push(Service {
            id: row.text("service_id")?,
            days,
            start_date: row.get("start_date").unwrap_or_default().to_string(),
            end_date: row.get("end_date").unwrap_or_default().to_string(),
        });
        Ok(())
    })?;

    let route_ids: HashSet<String> = feed.routes.iter().map(|r| r.id.clone()).collect();
    let service_ids: HashSet<String> = feed.services.iter().map(|s| s.id.clone()).collect();
    let mut t = Table::open(dir, "trips.txt")?;
    for c in ["route_id", "service_id", "trip_id"] {
        t.require(c)?;
    }
    for_each_row(&mut t, |row| {
        let trip = Trip {
            id: row.text("trip_id")?,
            route_id: row.text("route_id")?,
            service_id: row.text("service_id")?,
            direction_id: row.parse_or("direction_id", 0u8)?,
        };
        if !route_ids.contains(&trip.route_id) {
            return Err(row.dangling(format!("unknown route `{}`", trip.route_id)));
        }
        if !service_ids.contains(&trip.service_id) {
            return Err(row.dangling(format!("unknown service `{}`", trip.service_id)));
        }
        feed.trips.push(trip);
        Ok(())
    })?;

    let trip_ids: HashSet<String> = feed.trips.iter().map(|t| t.id.clone()).collect();
    let stop_ids: HashSet<String> = feed.stops.iter().map(|s| s.id.clone()).collect();
    let mut t = Table::open(dir, "stop_times.txt")?;
    for c in ["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"] {
        t.require(c)?;
    }
    for_each_row(&mut t, |row| {
        let st = StopTime {
            trip_id: row.text("trip_id")?,
            stop_sequence: row.parse("stop_sequence")?,
            stop_id: row.text("stop_id")?,
            arrival: row.time("arrival_time")?,
            departure: row.time("departure_time")?,
        };
        if !trip_ids.contains(&st.trip_id) {
            return Err(row.dangling(format!("unknown trip `{}`", st.trip_id)));
        }
        if !stop_ids.contains(&st.stop_id) {
            return Err(row.dangling(format!("unknown stop `{}`", st.stop_id)));
        }
        feed.stop_times.push(st);
        Ok(())
    })?;

    feed.canonicalize();
    feed.validate()?;
    Ok(feed)
}

/// Writes the five GTFS tables in canonical order.
pub fn write_feed(feed: &Feed, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut feed = feed.clone();
    feed.canonicalize();

    let mut w = csv::Writer::from_path(dir.join("stops.txt"))?;
    w.write_record(["stop_id", "stop_name", "stop_lat", "stop_lon"])?;
    for s in &feed.stops {
        w.write_record([s.id.as_str(), &s.name, &s.lat.to_string(), &s.lon.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("routes.txt"))?;
    w.write_record(["route_id", "route_short_name", "route_type"])?;
    for r in &feed.routes {
        w.write_record([r.id.as_str(), &r.short_name, &r.route_type.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("trips.txt"))?;
    w.write_record(["route_id", "service_id", "trip_id", "direction_id"])?;
    for t in &feed.trips {
        w.write_record([
            t.route_id.as_str(),
            &t.service_id,
            &t.id,
            &t.direction_id.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("stop_times.txt"))?;
    w.write_record(["trip_id", "arrival_time", "departure_time", "stop_id", "stop_sequence"])?;
    for st in &feed.stop_times {
        w.write_record([
            st.trip_id.as_str(),
            &format_time(st.arrival),
            &format_time(st.departure),
            &st.stop_id,
            &st.stop_sequence.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("calendar.txt"))?;
    let mut header = vec!["service_id"];
    header.extend(Weekday::ALL.iter().map(|d| d.column()));
    header.extend(["start_date", "end_date"]);
    w.write_record(&header)?;
    for s in &feed.services {
        let mut rec = vec![s.id.clone()];
        rec.extend(s.days.iter().map(|&d| if d { "1" } else { "0" }.to_string()));
        rec.push(s.start_date.clone());
        rec.push(s.end_date.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
