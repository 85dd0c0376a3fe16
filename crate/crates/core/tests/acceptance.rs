//! Acceptance suite. Runs as a plain binary so every criterion prints a
//! PASS/FAIL line regardless of output capture; exits non-zero on any failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transit_impact::demand::{
    elasticity_share, evaluate_group, ghg_savings, point_elasticity, transit_share_update, ChoiceParams, Mode,
    ModeShares, Segment, TimeDelta,
};
use transit_impact::gtfs::{build_synthetic_schedule, parse_feed, write_feed, Weekday};
use transit_impact::pipeline::toy::write_toy_city;
use transit_impact::pipeline::{run_scenario, ScenarioConfig, ScenarioResult};
use transit_impact::skim::{plan_journey, Timetable};
use transit_impact::welfare::{csdi, csii, delta_cs, expected_cs, logsum_cs, CsObservation, Scope};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ivt_only(theta: f64) -> ChoiceParams<f64> {
    ChoiceParams { theta_transit_ivt: theta, theta_cost: -0.1, ..Default::default() }
}

fn random_params(r: &mut impl Rng, scale: f64) -> ChoiceParams<f64> {
    ChoiceParams {
        theta_transit_at: -r.gen_range(0.0..scale),
        theta_transit_et: -r.gen_range(0.0..scale),
        theta_transit_ivt: -r.gen_range(0.0..scale),
        theta_cost: -r.gen_range(0.02..1.0),
        ..Default::default()
    }
}

fn random_shares(r: &mut impl Rng) -> ModeShares<f64> {
    let mut counts = [0.0; 6];
    for c in &mut counts {
        if r.gen_bool(0.7) {
            *c = r.gen_range(0.0..100.0);
        }
    }
    match r.gen_range(0..10) {
        0 => counts = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        1 => counts[Mode::Transit.index()] = 0.0,
        _ => {}
    }
    if counts.iter().sum::<f64>() == 0.0 {
        counts[0] = 1.0;
    }
    ModeShares::from_counts(counts).expect("positive total")
}

fn elasticity_example() -> Outcome {
    let t = Instant::now();
    let p = elasticity_share(-2.0f64, 0.20, 0.10);
    let elapsed = t.elapsed();
    ensure!(close(p, 0.16, 1e-12), "got {p}");
    ensure!(elapsed < Duration::from_millis(1), "took {elapsed:?}");
    Ok(())
}

fn elasticity_chain_matches_update() -> Outcome {
    let mut r = rng(1);
    for case in 0..1000 {
        let theta = -r.gen_range(0.0..0.2);
        let p = r.gen_range(0.01..0.99);
        let t = r.gen_range(5.0..120.0);
        let dt = r.gen_range(-t..t);
        let e = point_elasticity(theta, p, t).map_err(|e| e.to_string())?;
        let chained = elasticity_share(e, p, dt / t);
        // spread the change over one component at a time
        let (params, delta) = match case % 3 {
            0 => (ChoiceParams { theta_transit_at: theta, theta_cost: -0.1, ..Default::default() }, TimeDelta::new(dt, 0.0, 0.0)),
            1 => (ChoiceParams { theta_transit_et: theta, theta_cost: -0.1, ..Default::default() }, TimeDelta::new(0.0, dt, 0.0)),
            _ => (ivt_only(theta), TimeDelta::new(0.0, 0.0, dt)),
        };
        let direct = transit_share_update(&params, p, &delta);
        ensure!(close(chained, direct, 1e-12), "case {case}: {chained} vs {direct}");
    }
    Ok(())
}

fn share_closure() -> Outcome {
    let mut r = rng(2);
    let (mut clamped_high, mut clamped_low) = (0, 0);
    for case in 0..10_000 {
        let extreme = case % 5 == 0;
        let params = random_params(&mut r, if extreme { 2.0 } else { 0.1 });
        let span = if extreme { 120.0 } else { 20.0 };
        let delta = TimeDelta::new(r.gen_range(-span..span), r.gen_range(-span..span), r.gen_range(-span..span));
        let shares = random_shares(&mut r);
        let out = evaluate_group(&params, 100.0, &shares, &delta);
        let s = out.shares_after;
        ensure!(close(s.sum(), 1.0, 1e-9), "case {case}: sum {}", s.sum());
        ensure!(s.0.iter().all(|&x| (0.0..=1.0).contains(&x)), "case {case}: {:?}", s.0);
        let raw = shares.transit() * (1.0 + (1.0 - shares.transit()) * params.transit_time_utility(&delta));
        clamped_high += (raw > 1.0) as usize;
        clamped_low += (raw < 0.0) as usize;
    }
    ensure!(clamped_high > 0 && clamped_low > 0, "clamps not exercised: {clamped_high} high, {clamped_low} low");
    Ok(())
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn logsum_identity() -> Outcome {
    let mut r = rng(3);
    let ti = Mode::Transit.index();
    for case in 0..1000 {
        let params = random_params(&mut r, 0.15);
        let utils: Vec<f64> = (0..6).map(|_| r.gen_range(-5.0..5.0)).collect();
        let p = softmax(&utils)[ti];
        let shortcut = expected_cs(&params, utils[ti], p).map_err(|e| e.to_string())?;
        let direct = logsum_cs(params.theta_cost, &utils).map_err(|e| e.to_string())?;
        ensure!(close(shortcut, direct, 1e-10), "case {case}: {shortcut} vs {direct}");

        let delta = TimeDelta::new(r.gen_range(-15.0..5.0), r.gen_range(-15.0..5.0), r.gen_range(-30.0..10.0));
        let mut after = utils.clone();
        after[ti] += params.transit_time_utility(&delta);
        let p_new = softmax(&after)[ti];
        let d = delta_cs(&params, p, p_new, &delta).map_err(|e| e.to_string())?;
        let diff = logsum_cs(params.theta_cost, &after).unwrap() - direct;
        ensure!(close(d, diff, 1e-10), "case {case}: {d} vs {diff}");
    }
    Ok(())
}

fn surplus_nonnegative() -> Outcome {
    let mut r = rng(4);
    for case in 0..10_000 {
        let strict = case % 2 == 0;
        let mut params = random_params(&mut r, 0.3);
        let component = |r: &mut ChaCha8Rng| if strict { -r.gen_range(0.5..60.0) } else if r.gen_bool(0.3) { 0.0 } else { -r.gen_range(0.0..60.0) };
        let delta = TimeDelta::new(component(&mut r), component(&mut r), component(&mut r));
        if strict {
            params.theta_transit_ivt = -r.gen_range(0.005..0.3);
        }
        let p = r.gen_range(0.001..0.999);
        let p_new = transit_share_update(&params, p, &delta);
        let d = delta_cs(&params, p, p_new, &delta).map_err(|e| e.to_string())?;
        ensure!(d >= 0.0, "case {case}: {d}");
        if strict {
            ensure!(d > 0.0, "case {case}: not strictly positive");
        }
    }
    Ok(())
}

fn as_refs(links: &[(String, u32)]) -> Vec<(&str, u32)> {
    links.iter().map(|(s, w)| (s.as_str(), *w)).collect()
}

fn router_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(5);
    let mut networks = 0;
    for case in 0..250 {
        let feed = common::random_feed(&mut r, 10, 3, 40, "");
        ensure!(feed.stops.len() <= 10 && feed.routes.len() <= 3 && feed.trips.len() <= 40, "case {case}: oversized network");
        let tt = Timetable::build(&feed, Weekday::Monday);
        for _ in 0..5 {
            let o = common::random_links(&mut r, feed.stops.len());
            let d = common::random_links(&mut r, feed.stops.len());
            let t = r.gen_range(0..7200);
            let got = plan_journey(&tt, &as_refs(&o), &as_refs(&d), t, 64).map(|j| j.total_s);
            let want = common::oracle_total(&feed, &o, &d, t);
            ensure!(got == want, "case {case}: router {got:?}, oracle {want:?}");
        }
        networks += 1;
    }
    ensure!(networks >= 200, "only {networks} networks");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(())
}

fn service_monotonicity() -> Outcome {
    let mut r = rng(6);
    for case in 0..50 {
        let (base, merged) = common::overlay_pair(&mut r);
        let (tb, tm) = (Timetable::build(&base, Weekday::Monday), Timetable::build(&merged, Weekday::Monday));
        for _ in 0..20 {
            let o = common::random_links(&mut r, base.stops.len());
            let d = common::random_links(&mut r, base.stops.len());
            let t = r.gen_range(0..7200);
            if let Some(b) = plan_journey(&tb, &as_refs(&o), &as_refs(&d), t, 4) {
                let m = plan_journey(&tm, &as_refs(&o), &as_refs(&d), t, 4);
                ensure!(m.as_ref().is_some_and(|m| m.total_s <= b.total_s), "case {case}: base {} merged {:?}", b.total_s, m.map(|m| m.total_s));
            }
        }
    }
    Ok(())
}

fn gtfs_round_trip() -> Outcome {
    let line = common::crosstown_line();
    let feed = build_synthetic_schedule(&line.route, &line.plan).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_feed(&feed, dir.path()).map_err(|e| e.to_string())?;
    ensure!(parse_feed(dir.path()).map_err(|e| e.to_string())? == feed, "parsed feed differs");
    for direction in [0u8, 1] {
        let mut per = [0usize; 5];
        let mut run = None;
        for trip in feed.trips.iter().filter(|t| t.direction_id == direction) {
            let st = feed.trip_stop_times(&trip.id);
            per[line.plan.interval_of(st[0].departure).ok_or("departure outside plan")?] += 1;
            let r = st.last().unwrap().arrival - st[0].departure;
            ensure!(*run.get_or_insert(r) == r, "run times differ");
        }
        ensure!(per == [36, 42, 48, 18, 21], "direction {direction}: {per:?}");
        ensure!(per.iter().sum::<usize>() == 165, "direction {direction}");
        ensure!(run == Some(39 * 60), "direction {direction}: run {run:?} s");
    }
    Ok(())
}

fn obs(key: &str, segment: Segment, trips: f64, cs: f64) -> CsObservation<f64> {
    CsObservation { key: key.into(), segment, trips, cs }
}

fn equity_indices() -> Outcome {
    let mut r = rng(7);
    for case in 0..200 {
        let same: Vec<_> =
            (0..r.gen_range(1..20)).map(|i| obs(&i.to_string(), Segment::LowIncome, r.gen_range(1.0..50.0), r.gen_range(0.1..40.0))).collect();
        let d = csdi(&same).map_err(|e| e.to_string())?;
        ensure!(close(d, 1.0, 1e-12), "case {case}: CSDI {d}");
        let mixed: Vec<_> = (0..r.gen_range(1..20))
            .map(|i| obs(&i.to_string(), Segment::ALL[i % 4], r.gen_range(1.0..50.0), r.gen_range(-5.0..40.0)))
            .collect();
        let c = csii(&mixed, Scope::All, r.gen_range(0.5..20.0)).map_err(|e| e.to_string())?;
        ensure!((0.0..=1.0).contains(&c.index) && (0.0..=1.0).contains(&c.rate), "case {case}: {c:?}");
    }
    let hand = [obs("a", Segment::LowIncome, 50.0, 0.5), obs("b", Segment::Senior, 50.0, 2.0)];
    let c = csii(&hand, Scope::All, 1.0).map_err(|e| e.to_string())?;
    ensure!(c.index == 0.125, "index {}", c.index);
    ensure!(c.rate == 0.5, "rate {}", c.rate);
    Ok(())
}

fn toy_config(root: &Path, out: &str) -> Result<ScenarioConfig, String> {
    let city = write_toy_city(root, 3).map_err(|e| e.to_string())?;
    let mut cfg = ScenarioConfig::load(&city.config).map_err(|e| e.to_string())?;
    cfg.workers = Some(1);
    cfg.output_dir = root.join(out);
    Ok(cfg)
}

fn run(cfg: &ScenarioConfig) -> Result<ScenarioResult, String> {
    run_scenario(cfg).map_err(|e| e.to_string())
}

fn ghg_arithmetic() -> Outcome {
    let one = ghg_savings(&[(1.0f64, Some(2.5))], 400.0).map_err(|e| e.to_string())?;
    ensure!(one.grams == 1000.0, "{} g", one.grams);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = toy_config(dir.path(), "out")?;
    let res = run(&cfg)?;
    let per_group: f64 = res
        .records
        .iter()
        .map(|g| g.trips * (g.share_before_auto - g.share_after_auto) * g.avg_auto_miles.unwrap_or(0.0) * cfg.grams_per_mile)
        .sum();
    let total = res.aggregates.ghg.grams;
    ensure!(res.records.iter().any(|g| g.ghg_grams > 0.0), "no emission savings in the toy scenario");
    ensure!(rel_close(total, per_group, 1e-6), "{total} vs {per_group}");
    Ok(())
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap().flatten() {
            let path = entry.path();
            let rel = path.strip_prefix(root).unwrap().to_path_buf();
            if rel.starts_with("cache") {
                continue;
            }
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn csv_rows(path: &Path) -> Result<Vec<HashMap<String, String>>, String> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    reader.deserialize().map(|r| r.map_err(|e| e.to_string())).collect()
}

fn num(row: &HashMap<String, String>, col: &str) -> f64 {
    row.get(col).and_then(|v| v.parse().ok()).unwrap_or(0.0)
}

/// Recomputes scope totals from the group CSV and compares them with the
/// aggregates JSON.
fn check_aggregates(out: &Path, gpm: f64) -> Outcome {
    let rows = csv_rows(&out.join("group_records.csv"))?;
    let agg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("aggregates.json")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let scopes = agg["scopes"].as_array().ok_or("no scopes")?;
    let in_scope = |scope: &str, row: &HashMap<String, String>| match scope {
        "all" => true,
        "corridor" => row["in_corridor"] == "true",
        "non_corridor" => row["in_corridor"] == "false",
        seg => row["segment"] == seg,
    };
    ensure!(scopes.len() == 7, "{} scopes", scopes.len());
    for s in scopes {
        let name = s["scope"].as_str().ok_or("unnamed scope")?;
        let mut want: BTreeMap<&str, f64> = BTreeMap::new();
        for row in rows.iter().filter(|r| in_scope(name, r)) {
            let trips = num(row, "trips");
            let benefiting = row["benefiting"] == "true";
            let t_before = num(row, "share_before_transit");
            let t_after = num(row, "share_after_transit");
            let auto_switch = trips * (num(row, "share_before_auto") - num(row, "share_after_auto"));
            *want.entry("trips").or_default() += trips;
            *want.entry("ridership").or_default() += if benefiting { trips * t_after } else { 0.0 };
            *want.entry("transit_increase").or_default() += trips * (t_after - t_before);
            *want.entry("switched_auto").or_default() += auto_switch;
            *want.entry("ghg_grams").or_default() += auto_switch * num(row, "avg_auto_miles") * gpm;
            *want.entry("time_saved_trip_min").or_default() -= trips * num(row, "d_total_min");
            if row["cs_included"] == "true" {
                *want.entry("cs_trips").or_default() += trips;
                *want.entry("delta_cs_total").or_default() += trips * num(row, "delta_cs");
            }
        }
        for (field, w) in want {
            let got = s[field].as_f64().ok_or(format!("{name}.{field} missing"))?;
            ensure!(rel_close(got, w, 1e-6), "{name}.{field}: {got} vs {w}");
        }
    }
    Ok(())
}

fn toy_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = toy_config(dir.path(), "run_a")?;
    let t = Instant::now();
    let a = run(&cfg)?;
    let elapsed = t.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    ensure!(a.records.len() == 30 && a.zones.len() == 9, "{} groups, {} zones", a.records.len(), a.zones.len());
    ensure!(a.records.iter().any(|r| r.benefiting), "nobody benefits");

    check_aggregates(&cfg.output_dir, cfg.grams_per_mile)?;

    let cfg_b = ScenarioConfig { output_dir: dir.path().join("run_b"), ..cfg.clone() };
    run(&cfg_b)?;
    let (fa, fb) = (files_under(&cfg.output_dir), files_under(&cfg_b.output_dir));
    ensure!(fa.len() > 10, "only {} output files", fa.len());
    ensure!(fa.keys().eq(fb.keys()), "file sets differ");
    for (path, bytes) in &fa {
        ensure!(fb[path] == *bytes, "{} differs between runs", path.display());
    }
    let manifest = String::from_utf8_lossy(&fa[Path::new("manifest.json")]).into_owned();
    ensure!(!manifest.contains(&*dir.path().to_string_lossy()), "manifest holds an absolute path");

    let null = ScenarioConfig {
        output_dir: dir.path().join("null"),
        inputs: transit_impact::pipeline::InputPaths { line: None, ..cfg.inputs.clone() },
        ..cfg.clone()
    };
    let n = run(&null)?;
    for row in csv_rows(&null.output_dir.join("deltas.csv"))? {
        for col in ["d_access_min", "d_egress_min", "d_ivt_min", "d_total_min"] {
            if let Some(v) = row.get(col) {
                ensure!(v.is_empty() || v.parse::<f64>() == Ok(0.0), "null scenario {col} = {v}");
            }
        }
    }
    ensure!(
        n.records.iter().all(|r| r.d_total_min == 0.0 && !r.benefiting && r.delta_cs == 0.0 && r.ridership == 0.0),
        "null scenario changed a group"
    );
    let eq = n.equity.ok_or("null scenario has no equity report")?;
    ensure!(eq.csdi_pre == eq.csdi_post, "CSDI {} -> {}", eq.csdi_pre, eq.csdi_post);
    for c in &eq.csii {
        ensure!(c.pre == c.post && c.rate_pre == c.rate_post, "CSII changed: {c:?}");
    }
    check_aggregates(&null.output_dir, null.grams_per_mile)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("elasticity worked example", elasticity_example),
        ("elasticity chain equals share update", elasticity_chain_matches_update),
        ("share closure under update and rescale", share_closure),
        ("logsum identity and surplus change", logsum_identity),
        ("surplus change nonnegative", surplus_nonnegative),
        ("router equals time-expanded oracle", router_oracle),
        ("added service never slower", service_monotonicity),
        ("synthetic GTFS round trip", gtfs_round_trip),
        ("equity indices", equity_indices),
        ("emission arithmetic", ghg_arithmetic),
        ("toy scenario end to end", toy_end_to_end),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(()) => println!("PASS {:>2} {name} ({:.2?})", i + 1, t.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
