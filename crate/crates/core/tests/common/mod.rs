//! Test-only fixtures and oracles shared by the integration suites.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::seq::SliceRandom;
use rand::Rng;
use transit_impact::gtfs::{merge_feeds, Feed, LineConfig, LineStop, Route, RouteSpec, Service, ServicePlan, Stop, StopTime, Trip, Weekday};

/// A 14-mile, 17-stop crosstown line with a 39-minute run time on the
/// default weekday plan. Stop spacing is uneven, as on a real alignment.
pub fn crosstown_line() -> LineConfig {
    let gaps = [0.9, 0.7, 1.1, 0.8, 0.95, 0.6, 1.0, 0.85, 0.75, 1.05, 0.9, 0.8, 0.7, 1.0, 0.95, 0.95];
    let total: f64 = gaps.iter().sum();
    let mut miles = 0.0;
    let mut stops = vec![LineStop { id: "X00".into(), name: "Stop 0".into(), lat: 40.66, lon: -74.03, miles: 0.0 }];
    for (i, g) in gaps.iter().enumerate() {
        miles += g * 14.0 / total;
        let f = miles / 14.0;
        stops.push(LineStop {
            id: format!("X{:02}", i + 1),
            name: format!("Stop {}", i + 1),
            lat: 40.66 + 0.1 * f,
            lon: -74.03 + 0.18 * f,
            miles: if i + 1 == gaps.len() { 14.0 } else { miles },
        });
    }
    LineConfig {
        route: RouteSpec {
            route_id: "X".into(),
            short_name: "X".into(),
            route_type: 0,
            stops,
            run_time_min: 39.0,
            length_miles: 14.0,
        },
        plan: ServicePlan::weekday_default(),
    }
}

pub fn stop_id(i: usize) -> String {
    format!("s{i:02}")
}

/// Random feed with at most `max_stops` stops, `max_routes` routes and
/// `max_trips` trips. Trips on one route get independent running times, so
/// overtaking happens; a route occasionally revisits a stop.
pub fn random_feed(rng: &mut impl Rng, max_stops: usize, max_routes: usize, max_trips: usize, tag: &str) -> Feed {
    let n_stops = rng.gen_range(2..=max_stops);
    let mut feed = Feed {
        stops: (0..n_stops)
            .map(|i| Stop { id: stop_id(i), name: String::new(), lat: 40.0 + i as f64 * 1e-3, lon: -73.9 })
            .collect(),
        services: vec![Service::weekdays("wk")],
        ..Feed::default()
    };
    let n_routes = rng.gen_range(1..=max_routes);
    let mut trips_left = rng.gen_range(n_routes..=max_trips);
    for r in 0..n_routes {
        let route_id = format!("{tag}r{r}");
        feed.routes.push(Route { id: route_id.clone(), short_name: String::new(), route_type: 3 });
        let mut ids: Vec<usize> = (0..n_stops).collect();
        ids.shuffle(rng);
        let len = rng.gen_range(2..=n_stops.min(6));
        let mut seq: Vec<usize> = ids[..len].to_vec();
        if rng.gen_bool(0.15) && len >= 3 {
            let again = seq[0];
            seq.push(again);
        }
        let n_trips = if r + 1 == n_routes { trips_left } else { rng.gen_range(1..=trips_left - (n_routes - r - 1)) };
        trips_left -= n_trips;
        for k in 0..n_trips {
            let trip_id = format!("{tag}t{r}_{k:02}");
            feed.trips.push(Trip {
                id: trip_id.clone(),
                route_id: route_id.clone(),
                service_id: "wk".into(),
                direction_id: 0,
            });
            let mut t: u32 = rng.gen_range(0..7200);
            for (i, &s) in seq.iter().enumerate() {
                if i > 0 {
                    t += rng.gen_range(30..600);
                }
                let arr = t;
                if rng.gen_bool(0.3) {
                    t += rng.gen_range(0..90);
                }
                feed.stop_times.push(StopTime {
                    trip_id: trip_id.clone(),
                    stop_sequence: i as u32 + 1,
                    stop_id: stop_id(s),
                    arrival: arr,
                    departure: t,
                });
            }
        }
    }
    feed.canonical()
}

/// Random access links `(stop id, walk seconds)`.
pub fn random_links(rng: &mut impl Rng, n_stops: usize) -> Vec<(String, u32)> {
    let k = rng.gen_range(1..=n_stops.min(3));
    let mut ids: Vec<usize> = (0..n_stops).collect();
    ids.shuffle(rng);
    ids[..k].iter().map(|&s| (stop_id(s), rng.gen_range(0..600))).collect()
}

/// Earliest door-to-door time by Dijkstra over the time-expanded graph of
/// `feed` (trips active on Monday), with unlimited transfers.
///
/// Nodes are stop events `(stop, time)`, on-board arrival nodes and on-board
/// departure nodes for every trip call. Edges: waiting between consecutive
/// events of a stop, boarding from a stop event to a departure node at the
/// same time, dwelling, riding, and alighting.
pub fn oracle_total(feed: &Feed, origin: &[(String, u32)], destination: &[(String, u32)], depart: u32) -> Option<u32> {
    let active: Vec<&Trip> = feed
        .trips
        .iter()
        .filter(|t| feed.services.iter().any(|s| s.id == t.service_id && s.runs_on(Weekday::Monday)))
        .collect();

    let mut events: BTreeMap<(String, u32), usize> = BTreeMap::new();
    let mut times: Vec<u32> = Vec::new();
    let mut edges: Vec<Vec<(usize, u32)>> = Vec::new();
    let node = |times: &mut Vec<u32>, edges: &mut Vec<Vec<(usize, u32)>>, t: u32| {
        times.push(t);
        edges.push(Vec::new());
        times.len() - 1
    };

    let mut calls: Vec<(String, u32, usize, usize, u32, u32)> = Vec::new(); // stop, seq, arr node, dep node, arr, dep
    for trip in &active {
        let mut sts: Vec<&StopTime> = feed.stop_times.iter().filter(|s| s.trip_id == trip.id).collect();
        sts.sort_by_key(|s| s.stop_sequence);
        let mut prev_dep: Option<usize> = None;
        for st in sts {
            let a = node(&mut times, &mut edges, st.arrival);
            let d = node(&mut times, &mut edges, st.departure);
            edges[a].push((d, st.departure - st.arrival));
            if let Some(p) = prev_dep {
                let w = st.arrival - times[p];
                edges[p].push((a, w));
            }
            prev_dep = Some(d);
            calls.push((st.stop_id.clone(), st.stop_sequence, a, d, st.arrival, st.departure));
        }
    }
    for (stop, _, _, _, arr, dep) in &calls {
        for t in [*arr, *dep] {
            events.entry((stop.clone(), t)).or_insert_with(|| node(&mut times, &mut edges, t));
        }
    }
    for (stop, w) in origin {
        let t = depart + w;
        events.entry((stop.clone(), t)).or_insert_with(|| node(&mut times, &mut edges, t));
    }
    for (stop, _, a, d, arr, dep) in &calls {
        let ev_arr = events[&(stop.clone(), *arr)];
        let ev_dep = events[&(stop.clone(), *dep)];
        edges[*a].push((ev_arr, 0));
        edges[ev_dep].push((*d, 0));
    }
    let keys: Vec<((String, u32), usize)> = events.iter().map(|(k, v)| (k.clone(), *v)).collect();
    for pair in keys.windows(2) {
        if pair[0].0 .0 == pair[1].0 .0 {
            edges[pair[0].1].push((pair[1].1, pair[1].0 .1 - pair[0].0 .1));
        }
    }

    let source = node(&mut times, &mut edges, depart);
    for (stop, w) in origin {
        edges[source].push((events[&(stop.clone(), depart + w)], *w));
    }

    let mut dist = vec![u32::MAX; times.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0;
    heap.push(Reverse((0u32, source)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &edges[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((nd, v)));
            }
        }
    }

    let mut best: Option<u32> = None;
    for ((stop, _), n) in &events {
        if dist[*n] == u32::MAX {
            continue;
        }
        for (ds, egress) in destination {
            if ds == stop {
                let total = dist[*n] + egress;
                best = Some(best.map_or(total, |b| b.min(total)));
            }
        }
    }
    best
}

/// A random base feed and the base merged with a random overlay that only
/// uses base stops.
pub fn overlay_pair(rng: &mut impl Rng) -> (Feed, Feed) {
    let base = random_feed(rng, 10, 3, 30, "b");
    let mut overlay = random_feed(rng, 10, 2, 10, "o");
    overlay.stops.retain(|s| base.stop(&s.id).is_some());
    let keep: Vec<String> = overlay.stops.iter().map(|s| s.id.clone()).collect();
    let dropped: Vec<String> =
        overlay.stop_times.iter().filter(|st| !keep.contains(&st.stop_id)).map(|st| st.trip_id.clone()).collect();
    overlay.trips.retain(|t| !dropped.contains(&t.id));
    overlay.stop_times.retain(|st| !dropped.contains(&st.trip_id));
    // shared stops must be identical to be shared
    for s in &mut overlay.stops {
        *s = base.stop(&s.id).unwrap().clone();
    }
    let merged = merge_feeds(&base, &overlay, "x_").unwrap();
    (base, merged)
}
