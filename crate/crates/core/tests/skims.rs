use transit_impact::gtfs::{build_synthetic_schedule, LineStop, RouteSpec, ServiceInterval, ServicePlan, Weekday};
use transit_impact::pipeline::compute_skims;
use transit_impact::skim::{
    access_candidates, compute_skim, delta_skim, plan_journey, read_cache, write_cache, Connectivity, SkimCell,
    SkimMatrix, SkimSettings, Timetable, WalkSettings, Zone,
};

const H: u32 = 3600;

fn line(n: usize, run_min: f64) -> RouteSpec {
    let stops = (0..n)
        .map(|i| LineStop { id: format!("L{i}"), name: String::new(), lat: 40.70 + 0.02 * i as f64, lon: -73.9, miles: i as f64 })
        .collect();
    RouteSpec { route_id: "L".into(), short_name: "L".into(), route_type: 3, stops, run_time_min: run_min, length_miles: (n - 1) as f64 }
}

fn zones_at_stops(spec: &RouteSpec) -> Vec<Zone> {
    spec.stops.iter().map(|s| Zone { id: format!("z{}", &s.id[1..]), lat: s.lat, lon: s.lon, in_corridor: false }).collect()
}

fn plan(start: u32, end: u32, headway: f64) -> ServicePlan {
    ServicePlan { intervals: vec![ServiceInterval::new("p", start, end, headway)] }
}

#[test]
fn single_zone_matrix() {
    let spec = line(2, 10.0);
    let feed = build_synthetic_schedule(&spec, &plan(6 * H, 7 * H, 10.0)).unwrap();
    let tt = Timetable::build(&feed, Weekday::Monday);
    let zones = &zones_at_stops(&spec)[..1];
    let m = compute_skim(&tt, &feed.stops, zones, &plan(6 * H, 7 * H, 10.0).intervals[0], &SkimSettings::default()).unwrap();
    assert_eq!(m.cells.len(), 1);
    assert!(m.get(0, 0).reachable);
    assert_eq!(m.get(0, 0).ivt_s, 0.0);
}

#[test]
fn mean_wait_is_half_headway_on_a_one_minute_grid() {
    let spec = line(2, 12.0);
    let feed = build_synthetic_schedule(&spec, &plan(5 * H, 9 * H, 10.0)).unwrap();
    let tt = Timetable::build(&feed, Weekday::Monday);
    let zones = zones_at_stops(&spec);
    let settings = SkimSettings { sampling_step_min: 1.0, ..SkimSettings::default() };
    let m = compute_skim(&tt, &feed.stops, &zones, &ServiceInterval::new("am", 6 * H, 7 * H, 10.0), &settings).unwrap();

    // oracle: enumerate the 60 sampled departures against the :00/:10/... timetable
    let waits: Vec<u32> = (0..60u32).map(|k| (10 - k % 10) % 10 * 60).collect();
    let mean_wait = waits.iter().sum::<u32>() as f64 / 60.0;
    assert_eq!(mean_wait, 270.0);
    let c = m.get(0, 1);
    assert!(c.reachable);
    assert_eq!(c.access_s, mean_wait);
    assert_eq!(c.ivt_s, 12.0 * 60.0);
    assert_eq!(c.egress_s, 0.0);
    assert_eq!(c.transfers, 0.0);
}

#[test]
fn initial_wait_folds_into_access() {
    let spec = line(2, 10.0);
    let feed = build_synthetic_schedule(&spec, &plan(6 * H, 12 * H, 60.0)).unwrap();
    let tt = Timetable::build(&feed, Weekday::Monday);
    let j = plan_journey(&tt, &[("L0", 120)], &[("L1", 0)], 8 * H, 4).unwrap();
    assert_eq!(j.access_s, 3600);
    assert_eq!(j.ivt_s, 600);
    assert_eq!(j.total_s, j.access_s + j.ivt_s + j.egress_s);
    assert_eq!(j.legs[0].departure, 9 * H);
}

#[test]
fn access_walk_time() {
    let deg = 1000.0 / (6_371_008.8 * std::f64::consts::PI / 180.0);
    let zone = Zone { id: "z".into(), lat: 40.0, lon: -73.0, in_corridor: false };
    let stops = vec![
        transit_impact::gtfs::Stop { id: "near".into(), name: String::new(), lat: 40.0 + deg, lon: -73.0 },
        transit_impact::gtfs::Stop { id: "here".into(), name: String::new(), lat: 40.0, lon: -73.0 },
        transit_impact::gtfs::Stop { id: "far".into(), name: String::new(), lat: 41.0, lon: -73.0 },
    ];
    let walk = WalkSettings { max_radius_m: 2000.0, ..WalkSettings::default() };
    let links = access_candidates(&zone, &stops, &walk);
    let walk: Vec<(&str, u32)> = links.iter().map(|l| (l.stop_id.as_str(), l.walk_s)).collect();
    // 1000 m x 1.3 / 1.34 m/s = 970.1 s
    assert!(walk.contains(&("near", 970)));
    assert!(walk.contains(&("here", 0)));
    assert_eq!(walk.len(), 2);
}

#[test]
fn bidirectional_line_is_symmetric() {
    let spec = line(4, 20.0);
    let p = ServicePlan::weekday_default();
    let feed = build_synthetic_schedule(&spec, &p).unwrap();
    let tt = Timetable::build(&feed, Weekday::Monday);
    let zones = zones_at_stops(&spec);
    let settings = SkimSettings::default();
    for period in &p.intervals {
        let m = compute_skim(&tt, &feed.stops, &zones, period, &settings).unwrap();
        for o in 0..zones.len() {
            for d in 0..zones.len() {
                let (a, b) = (m.get(o, d), m.get(d, o));
                assert!(a.reachable && b.reachable);
                assert!((a.ivt_s - b.ivt_s).abs() <= settings.sampling_step_min * 60.0, "{} {o}->{d}", period.label);
            }
        }
    }
}

#[test]
fn two_networks_give_ten_matrices_and_deterministic_skims() {
    let dir = tempfile::tempdir().unwrap();
    let city = transit_impact::pipeline::toy::write_toy_city(dir.path(), 1).unwrap();
    let cfg = transit_impact::pipeline::ScenarioConfig::load(&city.config).unwrap();
    let nets = transit_impact::pipeline::prepare_networks(&cfg).unwrap();
    let zones = transit_impact::skim::load_zones(&cfg.inputs.zones).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let mut all = compute_skims(&nets.base, &zones, &nets.plan, &cfg.skim, Weekday::Monday, None).unwrap();
            all.extend(compute_skims(&nets.alt, &zones, &nets.plan, &cfg.skim, Weekday::Monday, None).unwrap());
            all
        })
    };
    let one = run(1);
    assert_eq!(one.len(), 10);
    assert_eq!(one, run(4));
    for m in &one {
        for i in 0..zones.len() {
            assert_eq!(m.get(i, i).ivt_s, 0.0);
        }
    }
}

#[test]
fn delta_components_and_flags() {
    let cell = |a: f64, e: f64, i: f64| SkimCell { access_s: a * 60.0, egress_s: e * 60.0, ivt_s: i * 60.0, transfers: 0.0, reachable: true };
    let none = SkimCell::default();
    let base = SkimMatrix { period: "p".into(), zone_ids: vec!["a".into(), "b".into()], cells: vec![cell(0.0, 0.0, 0.0), cell(10.0, 5.0, 40.0), none, none] };
    let alt = SkimMatrix { cells: vec![cell(0.0, 0.0, 0.0), cell(8.0, 5.0, 32.0), cell(6.0, 6.0, 18.0), none], ..base.clone() };
    let d = delta_skim(&base, &alt, 120.0).unwrap();
    let c = d.get(0, 1);
    assert_eq!((c.access_min, c.egress_min, c.ivt_min, c.total_min), (-2.0, 0.0, -8.0, -10.0));
    let n = d.get(1, 0);
    assert_eq!(n.status, Connectivity::NewlyConnected);
    assert!((n.total_min - (30.0 - 120.0)).abs() < 1e-12);
    assert_eq!(d.get(1, 1).status, Connectivity::Neither);
    assert!(delta_skim(&base, &base, 120.0).unwrap().cells.iter().all(|c| c.total_min == 0.0));
}

#[test]
fn binary_cache_is_bit_exact() {
    let spec = line(3, 9.0);
    let feed = build_synthetic_schedule(&spec, &plan(6 * H, 8 * H, 7.0)).unwrap();
    let tt = Timetable::build(&feed, Weekday::Monday);
    let zones = zones_at_stops(&spec);
    let m = compute_skim(&tt, &feed.stops, &zones, &ServiceInterval::new("am", 6 * H, 8 * H, 7.0), &SkimSettings::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.tskm");
    write_cache(&m, &p).unwrap();
    assert_eq!(read_cache(&p).unwrap(), m);
}
