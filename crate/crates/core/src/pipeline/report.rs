use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::run::{write_json, Layout, ScenarioResult, ScopeAggregate};
use super::{PipelineError, Result, ScenarioConfig, Stage, CONFIG_VERSION};
use crate::gtfs::REQUIRED_FILES;
use crate::skim::Zone;

/// Files written by [`export_report`], relative to its directory.
pub const REPORT_FILES: [&str; 7] = [
    "time_savings.csv",
    "ridership.csv",
    "mode_shift.csv",
    "cs_per_trip.csv",
    "equity.csv",
    "origins.geojson",
    "destinations.geojson",
];

fn fail(path: &Path) -> impl Fn(csv::Error) -> PipelineError + '_ {
    move |e| PipelineError::failed(Stage::Report, format!("{}: {e}", path.display()))
}

fn table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(fail(path))?;
    w.write_record(header).map_err(fail(path))?;
    for r in rows {
        w.write_record(&r).map_err(fail(path))?;
    }
    w.flush().map_err(|e| PipelineError::failed(Stage::Report, format!("{}: {e}", path.display())))
}

fn scope_rows(result: &ScenarioResult, f: impl Fn(&ScopeAggregate) -> Vec<String>) -> Vec<Vec<String>> {
    if result.records.is_empty() {
        return Vec::new();
    }
    result.aggregates.scopes.iter().map(|s| {
        let mut row = vec![s.scope.as_str().to_string()];
        row.extend(f(s));
        row
    }).collect()
}

fn n(v: f64) -> String {
    v.to_string()
}

/// Writes the summary tables and the origin/destination GeoJSON layers into
/// `dir`. Returns the written paths in [`REPORT_FILES`] order.
pub fn export_report(result: &ScenarioResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::failed(Stage::Report, format!("{}: {e}", dir.display())))?;
    let paths: Vec<PathBuf> = REPORT_FILES.iter().map(|f| dir.join(f)).collect();

    table(
        &paths[0],
        &[
            "scope", "groups", "trips", "benefiting_trips", "time_saved_trip_min", "mean_saving_min_all",
            "mean_saving_min_benefiting", "mean_access_saving_min_benefiting", "mean_egress_saving_min_benefiting",
            "mean_ivt_saving_min_benefiting",
        ],
        scope_rows(result, |s| {
            vec![
                s.groups.to_string(),
                n(s.trips),
                n(s.benefiting_trips),
                n(s.time_saved_trip_min),
                n(s.mean_saving_min_all),
                n(s.mean_saving_min_benefiting),
                n(s.mean_access_saving_min_benefiting),
                n(s.mean_egress_saving_min_benefiting),
                n(s.mean_ivt_saving_min_benefiting),
            ]
        }),
    )?;

    table(
        &paths[1],
        &["scope", "trips", "benefiting_trips", "ridership", "transit_increase", "switched_auto", "ghg_grams", "ghg_metric_tons"],
        scope_rows(result, |s| {
            vec![
                n(s.trips),
                n(s.benefiting_trips),
                n(s.ridership),
                n(s.transit_increase),
                n(s.switched_auto),
                n(s.ghg_grams),
                n(s.ghg_grams / 1e6),
            ]
        }),
    )?;

    let agg = &result.aggregates;
    let shift_rows = if result.records.is_empty() {
        Vec::new()
    } else {
        agg.switched_from
            .iter()
            .map(|s| {
                let share = if agg.transit_increase > 0.0 { s.trips / agg.transit_increase } else { 0.0 };
                vec![s.mode.clone(), n(s.trips), n(share)]
            })
            .collect()
    };
    table(&paths[2], &["from_mode", "switched_trips", "share_of_transit_increase"], shift_rows)?;

    table(
        &paths[3],
        &[
            "scope", "cs_trips", "delta_cs_total", "delta_cs_per_trip_all", "delta_cs_per_trip_benefiting",
            "mean_cs_pre", "mean_cs_post",
        ],
        scope_rows(result, |s| {
            vec![
                n(s.cs_trips),
                n(s.delta_cs_total),
                n(s.delta_cs_per_trip_all),
                n(s.delta_cs_per_trip_benefiting),
                n(s.mean_cs_pre),
                n(s.mean_cs_post),
            ]
        }),
    )?;

    let mut eq_rows = Vec::new();
    if let Some(e) = &result.equity {
        let row = |metric: &str, scope: &str, fraction: Option<f64>, z: Option<f64>, pre: f64, post: f64| {
            let opt = |v: Option<f64>| v.map(n).unwrap_or_default();
            vec![metric.into(), scope.into(), opt(fraction), opt(z), n(pre), n(post), n(post - pre)]
        };
        eq_rows.push(row("mean_cs", "all", None, None, e.mean_cs_pre, e.mean_cs_post));
        eq_rows.push(row("mean_cs", "low_income", None, None, e.mean_cs_low_income_pre, e.mean_cs_low_income_post));
        eq_rows.push(row("csdi", "low_income", None, None, e.csdi_pre, e.csdi_post));
        for c in &e.csii {
            eq_rows.push(row("csii", c.scope.as_str(), Some(c.fraction), Some(c.z), c.pre, c.post));
            eq_rows.push(row("insufficiency_rate", c.scope.as_str(), Some(c.fraction), Some(c.z), c.rate_pre, c.rate_post));
        }
    }
    table(&paths[4], &["metric", "scope", "fraction", "z", "pre", "post", "delta"], eq_rows)?;

    for (path, by_origin) in [(&paths[5], true), (&paths[6], false)] {
        let layer = zone_layer(result, by_origin);
        let mut text = serde_json::to_string_pretty(&layer).map_err(|e| PipelineError::failed(Stage::Report, e))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| PipelineError::failed(Stage::Report, format!("{}: {e}", path.display())))?;
    }
    Ok(paths)
}

/// Point layer with one feature per zone, summarising the groups that start
/// (or end) there.
fn zone_layer(result: &ScenarioResult, by_origin: bool) -> Value {
    let features: Vec<Value> = result
        .zones
        .iter()
        .map(|z: &Zone| {
            let (mut trips, mut ridership, mut saved, mut cs_trips, mut dcs) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in &result.records {
                let key = if by_origin { &r.origin } else { &r.destination };
                if *key != z.id {
                    continue;
                }
                trips += r.trips;
                ridership += r.ridership;
                saved += -r.trips * r.d_total_min;
                if r.cs_included {
                    cs_trips += r.trips;
                    dcs += r.trips * r.delta_cs;
                }
            }
            let mean = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [z.lon, z.lat] },
                "properties": {
                    "zone_id": z.id,
                    "in_corridor": z.in_corridor,
                    "trips": trips,
                    "ridership": ridership,
                    "mean_time_saving_min": mean(saved, trips),
                    "delta_cs_per_trip": mean(dcs, cs_trips),
                }
            })
        })
        .collect();
    json!({
        "type": "FeatureCollection",
        "name": if by_origin { "origins" } else { "destinations" },
        "features": features,
    })
}

fn sha_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| PipelineError::failed(Stage::Report, format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn list_files(dir: &Path, skip: &[PathBuf], out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| PipelineError::failed(Stage::Report, format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if skip.contains(&p) || p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')) {
            continue;
        }
        if p.is_dir() {
            list_files(&p, skip, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Run manifest: settings, input and output digests and row counts. Holds
/// nothing that varies between identical runs (no timings, no absolute paths).
pub(crate) fn write_manifest(cfg: &ScenarioConfig, layout: &Layout, result: &ScenarioResult) -> Result<()> {
    let i = &cfg.inputs;
    let mut inputs = serde_json::Map::new();
    for f in REQUIRED_FILES {
        inputs.insert(format!("base_gtfs/{f}"), sha_file(&i.base_gtfs.join(f))?.into());
    }
    if let Some(l) = &i.line {
        inputs.insert("line".into(), sha_file(l)?.into());
    }
    inputs.insert("zones".into(), sha_file(&i.zones)?.into());
    inputs.insert("params".into(), sha_file(&i.params)?.into());
    inputs.insert("groups".into(), sha_file(&i.groups)?.into());

    let mut files = Vec::new();
    list_files(&layout.root, &[layout.cache(), layout.manifest()], &mut files)?;
    let outputs: Vec<Value> = files
        .iter()
        .map(|p| {
            let rel = p.strip_prefix(&layout.root).unwrap_or(p);
            Ok(json!({ "path": rel.to_string_lossy().replace('\\', "/"), "sha256": sha_file(p)? }))
        })
        .collect::<Result<_>>()?;

    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config_version": CONFIG_VERSION,
        "settings": {
            "seed": cfg.seed,
            "weekday": cfg.weekday,
            "ceiling_min": cfg.ceiling_min,
            "grams_per_mile": cfg.grams_per_mile,
            "thresholds": cfg.thresholds,
            "line_prefix": cfg.line_prefix,
            "skim": cfg.skim,
        },
        "inputs": inputs,
        "counts": {
            "zones": result.zones.len(),
            "groups": result.records.len(),
            "welfare_groups": result.welfare.len(),
        },
        "outputs": outputs,
    });
    write_json(&manifest, &layout.manifest(), Stage::Report)
}
