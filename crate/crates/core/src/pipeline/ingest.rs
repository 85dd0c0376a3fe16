use std::collections::BTreeMap;
use std::path::Path;

use csv::StringRecord;
use log::warn;

use super::{PipelineError, Result, Stage};
use crate::demand::{aggregate_params, ChoiceParams, Mode, ModeShares, Segment, TransitTimes, TripGroup};
use crate::gtfs::time::parse_time;
use crate::gtfs::ServicePlan;

type GroupKey = (String, String, Segment);

/// A trip group as read from input. Baseline transit times may be absent,
/// in which case the pipeline fills them from the base skims.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupInput {
    pub group: TripGroup<f64>,
    pub baseline_known: bool,
}

struct Columns {
    file: String,
    headers: StringRecord,
}

impl Columns {
    fn find(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.find(name).ok_or_else(|| self.err(1, format!("missing column `{name}`")))
    }

    fn err(&self, line: u64, message: String) -> PipelineError {
        PipelineError::input(Stage::Ingest, format!("{}:{line}: {message}", self.file))
    }

    fn num(&self, rec: &StringRecord, i: usize, line: u64) -> Result<f64> {
        let raw = rec.get(i).unwrap_or("");
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(line, format!("column `{}`: bad number `{raw}`", &self.headers[i])))
    }

    fn opt_num(&self, rec: &StringRecord, i: Option<usize>, line: u64) -> Result<Option<f64>> {
        match i {
            Some(i) if !rec.get(i).unwrap_or("").is_empty() => self.num(rec, i, line).map(Some),
            _ => Ok(None),
        }
    }

    fn segment(&self, rec: &StringRecord, i: usize, line: u64) -> Result<Segment> {
        let raw = rec.get(i).unwrap_or("");
        Segment::parse(raw).ok_or_else(|| self.err(line, format!("unknown segment `{raw}`")))
    }
}

fn open(path: &Path) -> Result<(csv::Reader<std::fs::File>, Columns)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| PipelineError::input(Stage::Ingest, format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| PipelineError::input(Stage::Ingest, format!("{}: {e}", path.display())))?
        .clone();
    Ok((rdr, Columns { file: path.display().to_string(), headers }))
}

fn records(rdr: &mut csv::Reader<std::fs::File>, cols: &Columns) -> Result<Vec<(u64, StringRecord)>> {
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| cols.err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            Ok((r.position().map_or(0, |p| p.line()), r))
        })
        .collect()
}

/// Column name of the period weight for a plan interval.
pub fn weight_column(slug: &str) -> String {
    format!("w_{slug}")
}

/// Reads trip groups from either the groups CSV schema or a trip-level
/// agenda (one row per trip with `mode` and `departure_time` columns).
///
/// Groups come back sorted by (origin, destination, segment).
pub fn ingest_groups(path: &Path, plan: &ServicePlan) -> Result<Vec<GroupInput>> {
    if std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(false) {
        warn!("{} is empty; no trip groups", path.display());
        return Ok(Vec::new());
    }
    let (mut rdr, cols) = open(path)?;
    let rows = records(&mut rdr, &cols)?;
    let mut out = if cols.find("mode").is_some() && cols.find("departure_time").is_some() {
        tally_agenda(&cols, &rows, plan)?
    } else {
        read_groups(&cols, &rows, plan)?
    };
    if out.is_empty() {
        warn!("{} has no rows; no trip groups", path.display());
    }
    out.sort_by_key(|g| g.group.key());
    for w in out.windows(2) {
        if w[0].group.key() == w[1].group.key() {
            let (o, d, s) = w[0].group.key();
            return Err(cols.err(0, format!("duplicate group {o}->{d} {}", s.as_str())));
        }
    }
    Ok(out)
}

fn read_groups(cols: &Columns, rows: &[(u64, StringRecord)], plan: &ServicePlan) -> Result<Vec<GroupInput>> {
    let origin = cols.require("origin_id")?;
    let dest = cols.require("destination_id")?;
    let segment = cols.require("segment")?;
    let trips = cols.require("trips")?;
    let shares: Vec<usize> =
        Mode::ALL.iter().map(|m| cols.require(&format!("share_{}", m.key()))).collect::<Result<_>>()?;
    let miles = cols.find("avg_auto_miles");
    let fare = cols.require("fare_usd")?;
    let cost = cols.require("auto_cost_usd")?;
    let base: Vec<Option<usize>> = ["t_at", "t_et", "t_ivt", "n_t"].iter().map(|c| cols.find(c)).collect();
    let weight_cols: Vec<Option<usize>> =
        plan.intervals.iter().map(|i| cols.find(&weight_column(&i.slug()))).collect();
    let uniform = weight_cols.iter().all(Option::is_none);
    if uniform {
        warn!("{}: no period weight columns; using equal weights", cols.file);
    } else if let Some(k) = weight_cols.iter().position(Option::is_none) {
        return Err(cols.err(1, format!("missing column `{}`", weight_column(&plan.intervals[k].slug()))));
    }

    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        let line = *line;
        let mut s = [0.0; 6];
        for (v, &i) in s.iter_mut().zip(&shares) {
            *v = cols.num(rec, i, line)?;
        }
        let times: Vec<Option<f64>> =
            base.iter().map(|&i| cols.opt_num(rec, i, line)).collect::<Result<_>>()?;
        let baseline_known = times[..3].iter().all(Option::is_some);
        let period_weights = if uniform {
            vec![1.0 / plan.intervals.len() as f64; plan.intervals.len()]
        } else {
            weight_cols.iter().map(|&i| cols.num(rec, i.unwrap(), line)).collect::<Result<_>>()?
        };
        let group = TripGroup {
            origin: rec.get(origin).unwrap_or("").to_string(),
            destination: rec.get(dest).unwrap_or("").to_string(),
            segment: cols.segment(rec, segment, line)?,
            trips: cols.num(rec, trips, line)?,
            shares: ModeShares(s),
            period_weights,
            avg_auto_miles: cols.opt_num(rec, miles, line)?,
            fare_usd: cols.num(rec, fare, line)?,
            auto_cost_usd: cols.num(rec, cost, line)?,
            baseline: TransitTimes {
                access: times[0].unwrap_or(0.0),
                egress: times[1].unwrap_or(0.0),
                ivt: times[2].unwrap_or(0.0),
                transfers: times[3].unwrap_or(0.0),
            },
        };
        group.validate().map_err(|e| cols.err(line, e.to_string()))?;
        out.push(GroupInput { group, baseline_known });
    }
    Ok(out)
}

#[derive(Default)]
struct Tally {
    modes: [f64; 6],
    periods: Vec<f64>,
    miles: (f64, f64),
    fare: (f64, f64),
    cost: (f64, f64),
}

fn mean((sum, n): (f64, f64)) -> Option<f64> {
    (n > 0.0).then(|| sum / n)
}

fn tally_agenda(cols: &Columns, rows: &[(u64, StringRecord)], plan: &ServicePlan) -> Result<Vec<GroupInput>> {
    let origin = cols.require("origin_id")?;
    let dest = cols.require("destination_id")?;
    let segment = cols.require("segment")?;
    let mode = cols.require("mode")?;
    let dep = cols.require("departure_time")?;
    let miles = cols.find("miles");
    let fare = cols.find("fare_usd");
    let cost = cols.find("auto_cost_usd");

    let mut groups: BTreeMap<(String, String, Segment), Tally> = BTreeMap::new();
    let mut outside = 0usize;
    for (line, rec) in rows {
        let line = *line;
        let key = (
            rec.get(origin).unwrap_or("").to_string(),
            rec.get(dest).unwrap_or("").to_string(),
            cols.segment(rec, segment, line)?,
        );
        let raw_mode = rec.get(mode).unwrap_or("");
        let m = Mode::parse(raw_mode).ok_or_else(|| cols.err(line, format!("unknown mode `{raw_mode}`")))?;
        let raw_dep = rec.get(dep).unwrap_or("");
        let t = parse_time(raw_dep).ok_or_else(|| cols.err(line, format!("bad departure_time `{raw_dep}`")))?;
        let tally = groups.entry(key).or_insert_with(|| Tally { periods: vec![0.0; plan.intervals.len()], ..Default::default() });
        tally.modes[m.index()] += 1.0;
        match plan.interval_of(t) {
            Some(k) => tally.periods[k] += 1.0,
            None => outside += 1,
        }
        if let Some(v) = cols.opt_num(rec, miles, line)? {
            if m == Mode::PrivateVehicle {
                tally.miles.0 += v;
                tally.miles.1 += 1.0;
            }
        }
        if let Some(v) = cols.opt_num(rec, fare, line)? {
            tally.fare.0 += v;
            tally.fare.1 += 1.0;
        }
        if let Some(v) = cols.opt_num(rec, cost, line)? {
            tally.cost.0 += v;
            tally.cost.1 += 1.0;
        }
    }
    if outside > 0 {
        warn!("{}: {outside} trips depart outside every service period; excluded from period weights", cols.file);
    }

    let mut out = Vec::with_capacity(groups.len());
    for ((o, d, s), t) in groups {
        let trips: f64 = t.modes.iter().sum();
        let shares = ModeShares::from_counts(t.modes).expect("every tallied group has a trip");
        assert!(shares.validate().is_ok(), "tallied shares close by construction");
        let in_plan: f64 = t.periods.iter().sum();
        let period_weights = if in_plan > 0.0 {
            t.periods.iter().map(|c| c / in_plan).collect()
        } else {
            vec![1.0 / plan.intervals.len() as f64; plan.intervals.len()]
        };
        let group = TripGroup {
            origin: o,
            destination: d,
            segment: s,
            trips,
            shares,
            period_weights,
            avg_auto_miles: mean(t.miles),
            fare_usd: mean(t.fare).unwrap_or(0.0),
            auto_cost_usd: mean(t.cost).unwrap_or(0.0),
            baseline: TransitTimes::default(),
        };
        out.push(GroupInput { group, baseline_known: false });
    }
    Ok(out)
}

/// Choice parameters keyed by analysis-zone OD and segment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamTable {
    pub entries: BTreeMap<(String, String, Segment), ChoiceParams<f64>>,
}

impl ParamTable {
    pub fn get(&self, origin: &str, destination: &str, segment: Segment) -> Option<&ChoiceParams<f64>> {
        self.entries.get(&(origin.to_string(), destination.to_string(), segment))
    }
}

/// Maps a parameter-file zone id onto an analysis zone: exact match, else the
/// longest analysis zone id that prefixes it (finer zones nest by id prefix).
fn zone_of<'a>(id: &str, zones: &'a [String]) -> Option<&'a str> {
    zones
        .iter()
        .filter(|z| id.starts_with(z.as_str()))
        .max_by_key(|z| z.len())
        .map(String::as_str)
}

/// Reads the parameters CSV and rolls rows up to analysis zones with a
/// trip-weighted mean (weights from an optional `trips` column).
pub fn load_params(path: &Path, zone_ids: &[String]) -> Result<ParamTable> {
    let (mut rdr, cols) = open(path)?;
    let origin = cols.require("origin_id")?;
    let dest = cols.require("destination_id")?;
    let segment = cols.require("segment")?;
    let fields: Vec<usize> = ChoiceParams::<f64>::FIELDS.iter().map(|f| cols.require(f)).collect::<Result<_>>()?;
    let weight = cols.find("trips");

    let mut buckets: BTreeMap<GroupKey, Vec<(ChoiceParams<f64>, f64)>> = BTreeMap::new();
    let mut unmapped = 0usize;
    for (line, rec) in records(&mut rdr, &cols)? {
        let mut v = [0.0; 13];
        for (x, &i) in v.iter_mut().zip(&fields) {
            *x = cols.num(&rec, i, line)?;
        }
        let w = cols.opt_num(&rec, weight, line)?.unwrap_or(1.0);
        if !(w > 0.0) {
            return Err(cols.err(line, format!("trip weight must be positive, got {w}")));
        }
        let seg = cols.segment(&rec, segment, line)?;
        let (Some(o), Some(d)) = (zone_of(rec.get(origin).unwrap_or(""), zone_ids), zone_of(rec.get(dest).unwrap_or(""), zone_ids))
        else {
            unmapped += 1;
            continue;
        };
        buckets.entry((o.to_string(), d.to_string(), seg)).or_default().push((ChoiceParams::from_array(v), w));
    }
    if unmapped > 0 {
        warn!("{}: {unmapped} parameter rows match no zone and were skipped", cols.file);
    }

    let mut entries = BTreeMap::new();
    for (key, inputs) in buckets {
        let p = aggregate_params(&inputs).map_err(|e| PipelineError::input(Stage::Ingest, e))?;
        if let Ok(bad) = p.validate() {
            if !bad.is_empty() {
                warn!("parameters for {}->{} {}: positive {}", key.0, key.1, key.2.as_str(), bad.join(", "));
            }
        }
        if p.theta_cost == 0.0 {
            return Err(PipelineError::input(
                Stage::Ingest,
                format!("parameters for {}->{} {}: theta_cost is zero", key.0, key.1, key.2.as_str()),
            ));
        }
        entries.insert(key, p);
    }
    Ok(ParamTable { entries })
}
