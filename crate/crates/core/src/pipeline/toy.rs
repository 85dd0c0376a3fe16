//! A small seeded city for demos and end-to-end tests: nine zones on a 3x3
//! grid, two existing lines meeting in the north-west corner, and a new
//! L-shaped line along the south and east edges.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ingest::weight_column;
use super::{PipelineError, Result, Stage};
use crate::demand::{ChoiceParams, Segment};
use crate::gtfs::{build_synthetic_schedule, merge_feeds, write_feed, LineConfig, LineStop, RouteSpec, ServiceInterval, ServicePlan};
use crate::skim::haversine_m;

const LAT0: f64 = 40.65;
const LON0: f64 = -73.95;
const DLAT: f64 = 0.009;
const DLON: f64 = 0.012;
const METERS_PER_MILE: f64 = 1609.344;
pub const TOY_GROUPS: usize = 30;

/// Zone `k` (1-based, row-major from the north-west) centroid.
fn zone_xy(k: usize) -> (f64, f64) {
    let (r, c) = ((k - 1) / 3, (k - 1) % 3);
    (LAT0 - r as f64 * DLAT, LON0 + c as f64 * DLON)
}

fn stop(k: usize) -> LineStop {
    let (lat, lon) = zone_xy(k);
    LineStop { id: format!("S{k}"), name: format!("Stop {k}"), lat: lat + 0.001, lon, miles: 0.0 }
}

fn route(id: &str, zones: &[usize], mph: f64) -> RouteSpec {
    let mut stops: Vec<LineStop> = zones.iter().map(|&k| stop(k)).collect();
    let mut miles = 0.0;
    for i in 1..stops.len() {
        let (a, b) = (&stops[i - 1], &stops[i]);
        miles += (haversine_m(a.lat, a.lon, b.lat, b.lon) / METERS_PER_MILE * 1000.0).round() / 1000.0;
        stops[i].miles = miles;
    }
    RouteSpec {
        route_id: id.into(),
        short_name: id.into(),
        route_type: 3,
        stops,
        run_time_min: (miles / mph * 60.0 * 10.0).round() / 10.0,
        length_miles: miles,
    }
}

/// Existing service: the default periods at twice the default headways.
fn base_plan() -> ServicePlan {
    let mut plan = ServicePlan::weekday_default();
    for i in &mut plan.intervals {
        *i = ServiceInterval::new(i.label.clone(), i.start, i.end, i.headway_min * 2.0);
    }
    plan
}

/// Paths of a written toy city.
#[derive(Debug, Clone)]
pub struct ToyCity {
    pub dir: PathBuf,
    pub config: PathBuf,
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::failed(Stage::Config, format!("{}: {e}", path.display()))
}

/// Writes the base GTFS, line, zones, parameters, groups and a scenario
/// config into `dir`. Identical seeds give identical files.
pub fn write_toy_city(dir: &Path, seed: u64) -> Result<ToyCity> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let gtfs_err = |e| PipelineError::failed(Stage::Synth, e);

    let plan = base_plan();
    let a = build_synthetic_schedule(&route("A", &[1, 2, 3], 12.0), &plan).map_err(gtfs_err)?;
    let b = build_synthetic_schedule(&route("B", &[1, 4, 7], 12.0), &plan).map_err(gtfs_err)?;
    let base = merge_feeds(&a, &b, "b_").map_err(gtfs_err)?;
    write_feed(&base, dir.join("base_gtfs")).map_err(gtfs_err)?;

    let line = LineConfig { route: route("X", &[7, 8, 9, 6, 3], 15.0), plan: ServicePlan::weekday_default() };
    let line_path = dir.join("line.toml");
    fs::write(&line_path, line.to_toml()).map_err(io(&line_path))?;

    let corridor = [3, 6, 7, 8, 9];
    let mut zones = String::from("zone_id,lat,lon,in_corridor\n");
    for k in 1..=9 {
        let (lat, lon) = zone_xy(k);
        writeln!(zones, "Z{k},{lat},{lon},{}", u8::from(corridor.contains(&k))).unwrap();
    }
    let zones_path = dir.join("zones.csv");
    fs::write(&zones_path, zones).map_err(io(&zones_path))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = (1..=9).flat_map(|o| (1..=9).map(move |d| (o, d))).filter(|(o, d)| o != d).collect();
    pairs.shuffle(&mut rng);
    let keys: BTreeSet<(usize, usize, Segment)> =
        pairs.iter().take(TOY_GROUPS).enumerate().map(|(i, &(o, d))| (o, d, Segment::ALL[i % 4])).collect();

    let periods: Vec<String> = line.plan.intervals.iter().map(|i| weight_column(&i.slug())).collect();
    let mut groups = format!(
        "origin_id,destination_id,segment,trips,share_auto,share_transit,share_on_demand,share_biking,share_walking,share_carpool,avg_auto_miles,fare_usd,auto_cost_usd,t_at,t_et,t_ivt,n_t,{}\n",
        periods.join(",")
    );
    let mut params = format!("origin_id,destination_id,segment,trips,{}\n", ChoiceParams::<f64>::FIELDS.join(","));
    for &(o, d, seg) in &keys {
        let trips = rng.gen_range(50..500) as f64;
        let raw: Vec<f64> = (0..6).map(|m| rng.gen_range(0.05..1.0) * if m == 1 { 1.5 } else { 1.0 }).collect();
        let total: f64 = raw.iter().sum();
        let shares: Vec<String> = raw.iter().map(|v| (v / total).to_string()).collect();
        let w: Vec<f64> = (0..periods.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
        let wt: f64 = w.iter().sum();
        let weights: Vec<String> = w.iter().map(|v| (v / wt).to_string()).collect();
        let ((la, lo), (lb, lob)) = (zone_xy(o), zone_xy(d));
        let miles = (haversine_m(la, lo, lb, lob) / METERS_PER_MILE * 1.25 * 100.0).round() / 100.0;
        writeln!(
            groups,
            "Z{o},Z{d},{},{trips},{},{miles},2.9,{},,,,,{}",
            seg.as_str(),
            shares.join(","),
            (miles * 0.3 * 100.0).round() / 100.0,
            weights.join(",")
        )
        .unwrap();
        // two finer origin zones per group, rolled up by trip weight
        for sub in ["01", "02"] {
            let p = ChoiceParams::<f64> {
                theta_auto_tt: -rng.gen_range(0.02..0.05),
                theta_cost: -rng.gen_range(0.1..0.3),
                theta_transit_at: -rng.gen_range(0.03..0.08),
                theta_transit_et: -rng.gen_range(0.03..0.08),
                theta_transit_ivt: -rng.gen_range(0.02..0.05),
                theta_transit_nt: -rng.gen_range(0.1..0.3),
                theta_nonvehicle_tt: -rng.gen_range(0.04..0.1),
                asc_driving: rng.gen_range(-1.0..1.0),
                asc_transit: rng.gen_range(5.0..8.0),
                asc_on_demand: rng.gen_range(-1.0..1.0),
                asc_biking: rng.gen_range(-1.0..1.0),
                asc_walking: rng.gen_range(-1.0..1.0),
                asc_carpool: rng.gen_range(-1.0..1.0),
            };
            let vals: Vec<String> = p.to_array().iter().map(f64::to_string).collect();
            let bg_trips = rng.gen_range(10..100);
            writeln!(params, "Z{o}{sub},Z{d}01,{},{bg_trips},{}", seg.as_str(), vals.join(",")).unwrap();
        }
    }
    let groups_path = dir.join("groups.csv");
    fs::write(&groups_path, groups).map_err(io(&groups_path))?;
    let params_path = dir.join("params.csv");
    fs::write(&params_path, params).map_err(io(&params_path))?;

    let config = dir.join("scenario.toml");
    let text = format!(
        "output_dir = \"out\"\nseed = {seed}\n\n[inputs]\nbase_gtfs = \"base_gtfs\"\nline = \"line.toml\"\nzones = \"zones.csv\"\nparams = \"params.csv\"\ngroups = \"groups.csv\"\n"
    );
    fs::write(&config, text).map_err(io(&config))?;
    Ok(ToyCity { dir: dir.to_path_buf(), config })
}
