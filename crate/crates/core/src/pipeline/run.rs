use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::ingest::GroupInput;
use super::lock::OutputLock;
use super::records::{read_group_records, write_group_records, GroupRecord};
use super::report::{export_report, write_manifest};
use super::{ingest_groups, load_params, workers_from_env, ParamTable, PipelineError, Result, ScenarioConfig, Stage};
use crate::demand::{
    evaluate_group, ghg_savings, group_daily_delta, DemandError, Ghg, Mode, Segment, TimeDelta, TransitTimes,
};
use crate::gtfs::{
    build_synthetic_schedule, load_line_config, merge_feeds, parse_feed, write_feed, Feed, GtfsError, ServicePlan,
    Weekday,
};
use crate::skim::{
    compute_skim, delta_skim, load_zones, read_cache, read_deltas_csv, read_skims_csv, write_cache, write_deltas_csv, write_skims_csv, Connectivity,
    DeltaMatrix, SkimMatrix, SkimSettings, Timetable, Zone, CACHE_VERSION,
};
use crate::welfare::{
    delta_cs, equity_report, expected_cs, transit_utility, write_welfare_csv, EquityReport, WelfareError,
    WelfareRecord,
};

/// The base network, the synthesised line and their merge.
#[derive(Debug, Clone)]
pub struct Networks {
    pub base: Feed,
    pub new_line: Option<Feed>,
    pub alt: Feed,
    pub plan: ServicePlan,
}

fn gtfs_error(stage: Stage, e: GtfsError) -> PipelineError {
    match e {
        GtfsError::Io(_) => PipelineError::failed(stage, e),
        _ => PipelineError::input(stage, e),
    }
}

/// Reads the base feed, synthesises the new line and merges it in. Without a
/// line the alternative network is the base network.
pub fn prepare_networks(cfg: &ScenarioConfig) -> Result<Networks> {
    let base = parse_feed(&cfg.inputs.base_gtfs).map_err(|e| gtfs_error(Stage::Ingest, e))?;
    let Some(line_path) = &cfg.inputs.line else {
        return Ok(Networks { alt: base.clone(), base, new_line: None, plan: ServicePlan::weekday_default() });
    };
    let line = load_line_config(line_path).map_err(|e| gtfs_error(Stage::Synth, e))?;
    let new_line = build_synthetic_schedule(&line.route, &line.plan).map_err(|e| gtfs_error(Stage::Synth, e))?;
    let alt = merge_feeds(&base, &new_line, &cfg.line_prefix).map_err(|e| gtfs_error(Stage::Merge, e))?;
    Ok(Networks { base, new_line: Some(new_line), alt, plan: line.plan })
}

fn sha_json<T: Serialize + ?Sized>(h: &mut Sha256, value: &T) {
    h.update(serde_json::to_vec(value).expect("serializable"));
    h.update([0u8]);
}

/// One skim matrix per plan period. With `cache_dir`, matrices are looked up
/// by a hash of everything they depend on and stored after computation.
pub fn compute_skims(
    feed: &Feed,
    zones: &[Zone],
    plan: &ServicePlan,
    settings: &SkimSettings,
    weekday: Weekday,
    cache_dir: Option<&Path>,
) -> Result<Vec<SkimMatrix>> {
    let timetable = Timetable::build(feed, weekday);
    let mut base = Sha256::new();
    base.update(b"skim");
    base.update(CACHE_VERSION.to_le_bytes());
    sha_json(&mut base, feed);
    sha_json(&mut base, zones);
    sha_json(&mut base, settings);
    sha_json(&mut base, weekday.column());

    let mut out = Vec::with_capacity(plan.intervals.len());
    for period in &plan.intervals {
        let path = cache_dir.map(|dir| {
            let mut h = base.clone();
            sha_json(&mut h, period);
            dir.join(format!("{}.tskm", hex::encode(h.finalize())))
        });
        if let Some(p) = path.as_ref().filter(|p| p.exists()) {
            match read_cache(p) {
                Ok(m) if m.period == period.label && m.zone_ids.len() == zones.len() => {
                    info!("skim `{}`: cache hit {}", period.label, p.display());
                    out.push(m);
                    continue;
                }
                Ok(_) => warn!("cache {} does not match; recomputing", p.display()),
                Err(e) => warn!("{e}; recomputing"),
            }
        }
        let m = compute_skim(&timetable, &feed.stops, zones, period, settings)
            .map_err(|e| PipelineError::failed(Stage::Skim, e))?;
        if let Some(p) = &path {
            fs::create_dir_all(p.parent().unwrap()).map_err(|e| PipelineError::failed(Stage::Skim, e))?;
            write_cache(&m, p).map_err(|e| PipelineError::failed(Stage::Skim, e))?;
        }
        out.push(m);
    }
    Ok(out)
}

pub fn compute_deltas(base: &[SkimMatrix], alt: &[SkimMatrix], ceiling_min: f64) -> Result<Vec<DeltaMatrix>> {
    if base.len() != alt.len() {
        return Err(PipelineError::failed(Stage::Delta, "base and alt skims have different period counts"));
    }
    base.iter()
        .zip(alt)
        .map(|(b, a)| delta_skim(b, a, ceiling_min).map_err(|e| PipelineError::failed(Stage::Delta, e)))
        .collect()
}

/// Base-network times of an OD for one period, in minutes. Newly connected
/// ODs use the notional base journey implied by the delta.
fn base_equivalent(base: &SkimMatrix, alt: &SkimMatrix, delta: &DeltaMatrix, o: usize, d: usize) -> Option<TransitTimes<f64>> {
    let b = base.get(o, d);
    if b.reachable {
        return Some(TransitTimes {
            access: b.access_s / 60.0,
            egress: b.egress_s / 60.0,
            ivt: b.ivt_s / 60.0,
            transfers: b.transfers,
        });
    }
    let dc = delta.get(o, d);
    (dc.status == Connectivity::NewlyConnected).then(|| {
        let a = alt.get(o, d);
        TransitTimes {
            access: a.access_s / 60.0 - dc.access_min,
            egress: a.egress_s / 60.0 - dc.egress_min,
            ivt: a.ivt_s / 60.0 - dc.ivt_min,
            transfers: a.transfers,
        }
    })
}

fn fill_baseline(
    weights: &[f64],
    base: &[SkimMatrix],
    alt: &[SkimMatrix],
    deltas: &[DeltaMatrix],
    o: usize,
    d: usize,
    ceiling_min: f64,
) -> TransitTimes<f64> {
    let mut acc = TransitTimes::<f64>::default();
    let mut total = 0.0;
    for k in 0..weights.len() {
        if let Some(t) = base_equivalent(&base[k], &alt[k], &deltas[k], o, d) {
            let w = weights[k];
            acc.access += w * t.access;
            acc.egress += w * t.egress;
            acc.ivt += w * t.ivt;
            acc.transfers += w * t.transfers;
            total += w;
        }
    }
    if total > 0.0 {
        TransitTimes {
            access: acc.access / total,
            egress: acc.egress / total,
            ivt: acc.ivt / total,
            transfers: acc.transfers / total,
        }
    } else {
        TransitTimes { ivt: ceiling_min, ..TransitTimes::default() }
    }
}

/// Inputs of the per-group stage beyond the groups themselves.
pub struct EvalContext<'a> {
    pub params: &'a ParamTable,
    pub zones: &'a [Zone],
    pub base: &'a [SkimMatrix],
    pub alt: &'a [SkimMatrix],
    pub deltas: &'a [DeltaMatrix],
    pub ceiling_min: f64,
    pub grams_per_mile: f64,
}

/// Share update, attribution, emissions and surplus for every group, in
/// input order.
pub fn evaluate_groups(groups: &[GroupInput], ctx: &EvalContext<'_>) -> Result<Vec<GroupRecord>> {
    let periods = ctx.deltas.len();
    if ctx.base.len() != periods || ctx.alt.len() != periods {
        return Err(PipelineError::failed(Stage::Demand, "skim and delta period counts differ"));
    }
    let index: HashMap<&str, usize> = ctx.zones.iter().enumerate().map(|(i, z)| (z.id.as_str(), i)).collect();
    let ids: Vec<&String> = ctx.zones.iter().map(|z| &z.id).collect();
    let same = |z: &[String]| z.iter().eq(ids.iter().copied());
    if !ctx.deltas.iter().all(|m| same(&m.zone_ids)) || !ctx.base.iter().chain(ctx.alt).all(|m| same(&m.zone_ids)) {
        return Err(PipelineError::failed(Stage::Demand, "matrix zones differ from the zone table"));
    }
    groups.par_iter().map(|g| evaluate_one(g, ctx, &index)).collect()
}

fn evaluate_one(input: &GroupInput, ctx: &EvalContext<'_>, index: &HashMap<&str, usize>) -> Result<GroupRecord> {
    let g = &input.group;
    let label = || format!("{}->{} {}", g.origin, g.destination, g.segment.as_str());
    let zone = |id: &str| {
        index.get(id).copied().ok_or_else(|| PipelineError::input(Stage::Demand, format!("group {}: unknown zone `{id}`", label())))
    };
    let (o, d) = (zone(&g.origin)?, zone(&g.destination)?);
    if g.period_weights.len() != ctx.deltas.len() {
        return Err(PipelineError::input(
            Stage::Demand,
            format!("group {}: {} period weights for {} periods", label(), g.period_weights.len(), ctx.deltas.len()),
        ));
    }
    let params = ctx
        .params
        .get(&g.origin, &g.destination, g.segment)
        .ok_or_else(|| PipelineError::input(Stage::Demand, format!("no parameters for group {}", label())))?;

    let per_period: Vec<Option<TimeDelta<f64>>> = ctx
        .deltas
        .iter()
        .map(|m| {
            let c = m.get(o, d);
            c.status.has_delta().then(|| TimeDelta::new(c.access_min, c.egress_min, c.ivt_min))
        })
        .collect();
    let newly = ctx
        .deltas
        .iter()
        .zip(&g.period_weights)
        .any(|(m, &w)| w > 0.0 && m.get(o, d).status == Connectivity::NewlyConnected);
    let (daily, connectivity) = match group_daily_delta(&per_period, &g.period_weights) {
        Ok(t) => (t, if newly { "newly_connected" } else { "both" }),
        Err(DemandError::Unreachable) => (TimeDelta::zero(), "none"),
        Err(e) => return Err(PipelineError::failed(Stage::Demand, e)),
    };

    let outcome = evaluate_group(params, g.trips, &g.shares, &daily);
    let mut switched = [0.0; 6];
    for m in Mode::ALL {
        switched[m.index()] = outcome.switched_from(g.trips, m);
    }
    let auto = switched[Mode::PrivateVehicle.index()];
    let ghg = ghg_savings(&[(auto, g.avg_auto_miles)], ctx.grams_per_mile)
        .map_err(|_| PipelineError::input(Stage::Demand, format!("group {}: auto trips switch but avg_auto_miles is missing", label())))?;

    let baseline = if input.baseline_known {
        g.baseline
    } else {
        fill_baseline(&g.period_weights, ctx.base, ctx.alt, ctx.deltas, o, d, ctx.ceiling_min)
    };
    let p = outcome.shares_before.transit();
    let p_new = outcome.shares_after.transit();
    let (cs_included, cs_pre, dcs) = if p > 0.0 && p_new > 0.0 {
        let v = transit_utility(params, &baseline, g.fare_usd);
        let pre = expected_cs(params, v, p).map_err(|e| PipelineError::failed(Stage::Welfare, e))?;
        let dcs = if outcome.benefiting {
            delta_cs(params, p, p_new, &daily).map_err(|e| PipelineError::failed(Stage::Welfare, e))?
        } else {
            0.0
        };
        (true, pre, dcs)
    } else {
        (false, 0.0, 0.0)
    };

    let mut rec = GroupRecord {
        origin: g.origin.clone(),
        destination: g.destination.clone(),
        segment: g.segment,
        trips: g.trips,
        in_corridor: ctx.zones[o].in_corridor || ctx.zones[d].in_corridor,
        connectivity: connectivity.into(),
        d_access_min: daily.access,
        d_egress_min: daily.egress,
        d_ivt_min: daily.ivt,
        d_total_min: daily.total(),
        benefiting: outcome.benefiting,
        share_before_auto: 0.0,
        share_before_transit: 0.0,
        share_before_on_demand: 0.0,
        share_before_biking: 0.0,
        share_before_walking: 0.0,
        share_before_carpool: 0.0,
        share_after_auto: 0.0,
        share_after_transit: 0.0,
        share_after_on_demand: 0.0,
        share_after_biking: 0.0,
        share_after_walking: 0.0,
        share_after_carpool: 0.0,
        ridership: outcome.ridership,
        transit_increase: outcome.transit_increase(g.trips),
        switched_auto: 0.0,
        switched_on_demand: 0.0,
        switched_biking: 0.0,
        switched_walking: 0.0,
        switched_carpool: 0.0,
        avg_auto_miles: g.avg_auto_miles,
        ghg_grams: ghg.grams,
        cs_included,
        cs_pre,
        delta_cs: dcs,
        cs_post: cs_pre + dcs,
    };
    rec.set_shares(&outcome.shares_before, &outcome.shares_after);
    rec.set_switched(switched);
    Ok(rec)
}

/// Reporting scope over trip groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportScope {
    All,
    Segment(Segment),
    /// Origin or destination zone lies in the corridor.
    Corridor,
    NonCorridor,
}

impl ReportScope {
    pub const ALL: [ReportScope; 7] = [
        ReportScope::All,
        ReportScope::Segment(Segment::LowIncome),
        ReportScope::Segment(Segment::NotLowIncome),
        ReportScope::Segment(Segment::Senior),
        ReportScope::Segment(Segment::Student),
        ReportScope::Corridor,
        ReportScope::NonCorridor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportScope::All => "all",
            ReportScope::Segment(s) => s.as_str(),
            ReportScope::Corridor => "corridor",
            ReportScope::NonCorridor => "non_corridor",
        }
    }

    pub fn contains(self, r: &GroupRecord) -> bool {
        match self {
            ReportScope::All => true,
            ReportScope::Segment(s) => r.segment == s,
            ReportScope::Corridor => r.in_corridor,
            ReportScope::NonCorridor => !r.in_corridor,
        }
    }
}

impl Serialize for ReportScope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Totals and per-trip means over one scope. Means with an empty denominator
/// are reported as zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeAggregate {
    pub scope: ReportScope,
    pub groups: usize,
    pub trips: f64,
    pub benefiting_groups: usize,
    pub benefiting_trips: f64,
    pub ridership: f64,
    pub transit_increase: f64,
    pub switched_auto: f64,
    pub ghg_grams: f64,
    /// Trip-minutes saved per day, `sum d * -dT`.
    pub time_saved_trip_min: f64,
    pub mean_saving_min_all: f64,
    pub mean_saving_min_benefiting: f64,
    pub mean_access_saving_min_benefiting: f64,
    pub mean_egress_saving_min_benefiting: f64,
    pub mean_ivt_saving_min_benefiting: f64,
    /// Trips of groups with a defined surplus.
    pub cs_trips: f64,
    pub delta_cs_total: f64,
    pub delta_cs_per_trip_all: f64,
    pub delta_cs_per_trip_benefiting: f64,
    pub mean_cs_pre: f64,
    pub mean_cs_post: f64,
}

fn scope_aggregate(scope: ReportScope, records: &[GroupRecord]) -> ScopeAggregate {
    let mut a = ScopeAggregate {
        scope,
        groups: 0,
        trips: 0.0,
        benefiting_groups: 0,
        benefiting_trips: 0.0,
        ridership: 0.0,
        transit_increase: 0.0,
        switched_auto: 0.0,
        ghg_grams: 0.0,
        time_saved_trip_min: 0.0,
        mean_saving_min_all: 0.0,
        mean_saving_min_benefiting: 0.0,
        mean_access_saving_min_benefiting: 0.0,
        mean_egress_saving_min_benefiting: 0.0,
        mean_ivt_saving_min_benefiting: 0.0,
        cs_trips: 0.0,
        delta_cs_total: 0.0,
        delta_cs_per_trip_all: 0.0,
        delta_cs_per_trip_benefiting: 0.0,
        mean_cs_pre: 0.0,
        mean_cs_post: 0.0,
    };
    let (mut saved_b, mut acc_b, mut egr_b, mut ivt_b) = (0.0, 0.0, 0.0, 0.0);
    let (mut cs_pre, mut cs_post, mut cs_trips_b, mut dcs_b) = (0.0, 0.0, 0.0, 0.0);
    for r in records.iter().filter(|r| scope.contains(r)) {
        a.groups += 1;
        a.trips += r.trips;
        a.ridership += r.ridership;
        a.transit_increase += r.transit_increase;
        a.switched_auto += r.switched_auto;
        a.ghg_grams += r.ghg_grams;
        a.time_saved_trip_min += -r.trips * r.d_total_min;
        if r.benefiting {
            a.benefiting_groups += 1;
            a.benefiting_trips += r.trips;
            saved_b += -r.trips * r.d_total_min;
            acc_b += -r.trips * r.d_access_min;
            egr_b += -r.trips * r.d_egress_min;
            ivt_b += -r.trips * r.d_ivt_min;
        }
        if r.cs_included {
            a.cs_trips += r.trips;
            a.delta_cs_total += r.trips * r.delta_cs;
            cs_pre += r.trips * r.cs_pre;
            cs_post += r.trips * r.cs_post;
            if r.benefiting {
                cs_trips_b += r.trips;
                dcs_b += r.trips * r.delta_cs;
            }
        }
    }
    a.mean_saving_min_all = ratio(a.time_saved_trip_min, a.trips);
    a.mean_saving_min_benefiting = ratio(saved_b, a.benefiting_trips);
    a.mean_access_saving_min_benefiting = ratio(acc_b, a.benefiting_trips);
    a.mean_egress_saving_min_benefiting = ratio(egr_b, a.benefiting_trips);
    a.mean_ivt_saving_min_benefiting = ratio(ivt_b, a.benefiting_trips);
    a.delta_cs_per_trip_all = ratio(a.delta_cs_total, a.cs_trips);
    a.delta_cs_per_trip_benefiting = ratio(dcs_b, cs_trips_b);
    a.mean_cs_pre = ratio(cs_pre, a.cs_trips);
    a.mean_cs_post = ratio(cs_post, a.cs_trips);
    a
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSwitch {
    pub mode: String,
    pub trips: f64,
}

/// Scenario-wide totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub scopes: Vec<ScopeAggregate>,
    pub transit_increase: f64,
    /// Trips leaving each non-transit mode.
    pub switched_from: Vec<ModeSwitch>,
    pub ghg: Ghg<f64>,
}

impl Aggregates {
    pub fn scope(&self, scope: ReportScope) -> &ScopeAggregate {
        self.scopes.iter().find(|s| s.scope == scope).expect("every scope is aggregated")
    }
}

/// Sums per-group records in their given order.
pub fn aggregate(records: &[GroupRecord], grams_per_mile: f64) -> Result<Aggregates> {
    let scopes = ReportScope::ALL.iter().map(|&s| scope_aggregate(s, records)).collect();
    let mut switched = [0.0; 6];
    let mut increase = 0.0;
    for r in records {
        increase += r.transit_increase;
        for (acc, v) in switched.iter_mut().zip(r.switched()) {
            *acc += v;
        }
    }
    let items: Vec<(f64, Option<f64>)> = records.iter().map(|r| (r.switched_auto, r.avg_auto_miles)).collect();
    let ghg = ghg_savings(&items, grams_per_mile).map_err(|e| PipelineError::failed(Stage::Demand, e))?;
    Ok(Aggregates {
        scopes,
        transit_increase: increase,
        switched_from: Mode::ALL
            .iter()
            .filter(|&&m| m != Mode::Transit)
            .map(|m| ModeSwitch { mode: m.key().to_string(), trips: switched[m.index()] })
            .collect(),
        ghg,
    })
}

/// Surplus records of the groups with a defined surplus.
pub fn welfare_records(records: &[GroupRecord]) -> Vec<WelfareRecord<f64>> {
    records
        .iter()
        .filter(|r| r.cs_included)
        .map(|r| WelfareRecord {
            origin: r.origin.clone(),
            destination: r.destination.clone(),
            segment: r.segment,
            trips: r.trips,
            cs_pre: r.cs_pre,
            delta_cs: r.delta_cs,
            cs_post: r.cs_post,
        })
        .collect()
}

/// Equity summary, or `None` when a required scope is empty.
pub fn equity_for(welfare: &[WelfareRecord<f64>], fractions: &[f64]) -> Result<Option<EquityReport<f64>>> {
    let pre: Vec<_> = welfare.iter().map(WelfareRecord::pre).collect();
    let post: Vec<_> = welfare.iter().map(WelfareRecord::post).collect();
    match equity_report(&pre, &post, fractions) {
        Ok(r) => Ok(Some(r)),
        Err(e @ (WelfareError::EmptyScope(_) | WelfareError::ZeroAverage | WelfareError::NonPositiveThreshold(_))) => {
            warn!("equity indices not computed: {e}");
            Ok(None)
        }
        Err(e) => Err(PipelineError::failed(Stage::Equity, e)),
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub zones: Vec<Zone>,
    pub records: Vec<GroupRecord>,
    pub aggregates: Aggregates,
    pub welfare: Vec<WelfareRecord<f64>>,
    pub equity: Option<EquityReport<f64>>,
}

struct Timer {
    stage: Stage,
    start: Instant,
}

impl Timer {
    fn start(stage: Stage) -> Self {
        Timer { stage, start: Instant::now() }
    }

    fn done(self, rows: usize) {
        info!("{}: {} rows in {:.3?}", self.stage, rows, self.start.elapsed());
    }
}

fn io_err(stage: Stage, path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::failed(stage, format!("{}: {e}", path.display()))
}

/// Paths of the persisted intermediates under an output directory.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }
    pub fn new_line_gtfs(&self) -> PathBuf {
        self.root.join("gtfs").join("new_line")
    }
    pub fn alt_gtfs(&self) -> PathBuf {
        self.root.join("gtfs").join("alt")
    }
    pub fn skims_base(&self) -> PathBuf {
        self.root.join("skims_base.csv")
    }
    pub fn skims_alt(&self) -> PathBuf {
        self.root.join("skims_alt.csv")
    }
    pub fn deltas(&self) -> PathBuf {
        self.root.join("deltas.csv")
    }
    pub fn group_records(&self) -> PathBuf {
        self.root.join("group_records.csv")
    }
    pub fn welfare(&self) -> PathBuf {
        self.root.join("welfare.csv")
    }
    pub fn equity(&self) -> PathBuf {
        self.root.join("equity.json")
    }
    pub fn aggregates(&self) -> PathBuf {
        self.root.join("aggregates.json")
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn cache(&self) -> PathBuf {
        self.root.join("cache")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

pub(crate) fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path, stage: Stage) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::failed(stage, e))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(stage, path))
}

/// Runs every stage, persisting intermediates under `cfg.output_dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    cfg.validate()?;
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    with_workers(cfg.workers, || run_stages(cfg))
}

/// Runs `f` on a pool of `workers` threads (or the environment cap, or the
/// default pool).
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    match workers.or_else(workers_from_env) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| PipelineError::failed(Stage::Config, e))?
            .install(f),
        None => f(),
    }
}

fn need(path: PathBuf, stage: Stage) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(PipelineError::input(stage, format!("{} not found; run the earlier stages first", path.display())))
    }
}

/// Reloads networks, zones, skims and deltas persisted by an earlier run.
pub fn load_skim_outputs(cfg: &ScenarioConfig) -> Result<SkimOutputs> {
    let layout = Layout::new(&cfg.output_dir);
    let networks = prepare_networks(cfg)?;
    let zones = load_zones(&cfg.inputs.zones).map_err(|e| PipelineError::input(Stage::Ingest, e))?;
    let input = |e| PipelineError::input(Stage::Delta, e);
    let base = read_skims_csv(need(layout.skims_base(), Stage::Delta)?).map_err(input)?;
    let alt = read_skims_csv(need(layout.skims_alt(), Stage::Delta)?).map_err(input)?;
    let deltas = read_deltas_csv(need(layout.deltas(), Stage::Delta)?).map_err(input)?;
    Ok(SkimOutputs { networks, zones, base, alt, deltas })
}

/// Rebuilds the result from a persisted `group_records.csv` and exports the
/// reports and manifest.
pub fn report_from_records(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let layout = Layout::new(&cfg.output_dir);
    let zones = load_zones(&cfg.inputs.zones).map_err(|e| PipelineError::input(Stage::Report, e))?;
    let records = read_group_records(&need(layout.group_records(), Stage::Report)?)?;
    let aggregates = aggregate(&records, cfg.grams_per_mile)?;
    let welfare = welfare_records(&records);
    let equity = equity_for(&welfare, &cfg.thresholds)?;
    let result = ScenarioResult { zones, records, aggregates, welfare, equity };
    export_report(&result, &layout.reports())?;
    write_manifest(cfg, &layout, &result)?;
    Ok(result)
}

/// Stages shared by `run` and the `skim` subcommand: networks, zones, skims
/// and deltas, all persisted.
pub struct SkimOutputs {
    pub networks: Networks,
    pub zones: Vec<Zone>,
    pub base: Vec<SkimMatrix>,
    pub alt: Vec<SkimMatrix>,
    pub deltas: Vec<DeltaMatrix>,
}

pub fn run_skim_stages(cfg: &ScenarioConfig) -> Result<SkimOutputs> {
    let layout = Layout::new(&cfg.output_dir);
    let weekday = cfg.weekday()?;

    let t = Timer::start(Stage::Synth);
    let networks = prepare_networks(cfg)?;
    if let Some(line) = &networks.new_line {
        write_feed(line, layout.new_line_gtfs()).map_err(|e| PipelineError::failed(Stage::Synth, e))?;
    }
    write_feed(&networks.alt, layout.alt_gtfs()).map_err(|e| PipelineError::failed(Stage::Merge, e))?;
    t.done(networks.alt.trips.len());

    let t = Timer::start(Stage::Ingest);
    let zones = load_zones(&cfg.inputs.zones).map_err(|e| PipelineError::input(Stage::Ingest, e))?;
    if zones.is_empty() {
        return Err(PipelineError::input(Stage::Ingest, "zone table is empty"));
    }
    t.done(zones.len());

    let t = Timer::start(Stage::Skim);
    let cache = cfg.cache.then(|| layout.cache());
    let base = compute_skims(&networks.base, &zones, &networks.plan, &cfg.skim, weekday, cache.as_deref())?;
    let alt = compute_skims(&networks.alt, &zones, &networks.plan, &cfg.skim, weekday, cache.as_deref())?;
    let fail = |e| PipelineError::failed(Stage::Skim, e);
    write_skims_csv(&base, layout.skims_base()).map_err(fail)?;
    write_skims_csv(&alt, layout.skims_alt()).map_err(fail)?;
    t.done(base.len() + alt.len());

    let t = Timer::start(Stage::Delta);
    let deltas = compute_deltas(&base, &alt, cfg.ceiling_min)?;
    write_deltas_csv(&deltas, layout.deltas()).map_err(|e| PipelineError::failed(Stage::Delta, e))?;
    t.done(deltas.iter().map(|m| m.cells.len()).sum());

    Ok(SkimOutputs { networks, zones, base, alt, deltas })
}

/// Per-group evaluation, welfare and aggregates from skim outputs; persists
/// the group records, welfare table, equity and aggregate JSON.
pub fn run_evaluation(cfg: &ScenarioConfig, skims: &SkimOutputs) -> Result<ScenarioResult> {
    let layout = Layout::new(&cfg.output_dir);
    let t = Timer::start(Stage::Ingest);
    let groups = ingest_groups(&cfg.inputs.groups, &skims.networks.plan)?;
    let zone_ids: Vec<String> = skims.zones.iter().map(|z| z.id.clone()).collect();
    let params = load_params(&cfg.inputs.params, &zone_ids)?;
    t.done(groups.len());

    let t = Timer::start(Stage::Demand);
    let ctx = EvalContext {
        params: &params,
        zones: &skims.zones,
        base: &skims.base,
        alt: &skims.alt,
        deltas: &skims.deltas,
        ceiling_min: cfg.ceiling_min,
        grams_per_mile: cfg.grams_per_mile,
    };
    let records = evaluate_groups(&groups, &ctx)?;
    write_group_records(&records, &layout.group_records())?;
    let aggregates = aggregate(&records, cfg.grams_per_mile)?;
    write_json(&aggregates, &layout.aggregates(), Stage::Demand)?;
    t.done(records.len());

    let t = Timer::start(Stage::Welfare);
    let welfare = welfare_records(&records);
    let excluded = records.len() - welfare.len();
    if excluded > 0 {
        warn!("{excluded} groups without transit share excluded from surplus accounting");
    }
    write_welfare_csv(&welfare, &layout.welfare()).map_err(|e| PipelineError::failed(Stage::Welfare, e))?;
    t.done(welfare.len());

    let t = Timer::start(Stage::Equity);
    let equity = equity_for(&welfare, &cfg.thresholds)?;
    write_json(&equity, &layout.equity(), Stage::Equity)?;
    t.done(equity.as_ref().map_or(0, |e| e.csii.len()));

    Ok(ScenarioResult { zones: skims.zones.clone(), records, aggregates, welfare, equity })
}

fn run_stages(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let layout = Layout::new(&cfg.output_dir);
    let skims = run_skim_stages(cfg)?;
    let result = run_evaluation(cfg, &skims)?;
    let t = Timer::start(Stage::Report);
    let files = export_report(&result, &layout.reports())?;
    write_manifest(cfg, &layout, &result)?;
    t.done(files.len());
    Ok(result)
}
