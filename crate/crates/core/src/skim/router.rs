use std::cmp::Ordering;

use super::Timetable;

const UNREACHED: u32 = u32::MAX;

/// One ride on a trip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leg {
    pub trip_id: String,
    pub board_stop: String,
    pub alight_stop: String,
    pub departure: u32,
    pub arrival: u32,
}

/// A door-to-door transit journey.
///
/// The initial wait is part of `access_s` and transfer waits are part of
/// `ivt_s`, so `total_s == access_s + ivt_s + egress_s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Journey {
    pub departure: u32,
    pub access_s: u32,
    pub ivt_s: u32,
    pub egress_s: u32,
    pub transfers: u32,
    pub total_s: u32,
    pub legs: Vec<Leg>,
}

#[derive(Debug, Clone, Copy)]
struct Ride {
    pattern: u32,
    trip: u32,
    board_pos: u32,
    alight_pos: u32,
}

/// Round-based earliest-arrival search: round `k` holds the best arrival at
/// every stop using at most `k` trips.
#[derive(Debug, Clone, Copy)]
pub struct Router<'a> {
    pub timetable: &'a Timetable,
    pub max_transfers: usize,
}

/// Result of one search from a set of origin stops at a fixed departure time.
#[derive(Debug, Clone)]
pub struct RouterLabels<'a> {
    timetable: &'a Timetable,
    departure: u32,
    /// Best arrival over all rounds.
    best: Vec<u32>,
    /// Round in which `best` was first reached.
    best_round: Vec<usize>,
    /// `rides[k][stop]` is set when round `k` improved `stop`.
    rides: Vec<Vec<Option<Ride>>>,
}

impl<'a> Router<'a> {
    pub fn new(timetable: &'a Timetable, max_transfers: usize) -> Self {
        Router { timetable, max_transfers }
    }

    /// Runs the search from `origin` links `(stop index, walk seconds)`.
    pub fn search(&self, origin: &[(usize, u32)], departure: u32) -> RouterLabels<'a> {
        let tt = self.timetable;
        let n = tt.num_stops();
        let mut best = vec![UNREACHED; n];
        let mut best_round = vec![0usize; n];
        let mut marked = vec![false; n];
        for &(stop, walk) in origin {
            let t = departure.saturating_add(walk);
            if t < best[stop] {
                best[stop] = t;
                marked[stop] = true;
            }
        }
        let mut prev = best.clone();
        let mut rides = vec![vec![None; n]];
        let mut queue: Vec<Option<usize>> = vec![None; tt.patterns.len()];

        for round in 1..=self.max_transfers + 1 {
            queue.iter_mut().for_each(|q| *q = None);
            let mut any = false;
            for (stop, mark) in marked.iter_mut().enumerate() {
                if !std::mem::take(mark) {
                    continue;
                }
                for &(p, pos) in &tt.stop_patterns[stop] {
                    let q = &mut queue[p];
                    *q = Some(q.map_or(pos, |cur| cur.min(pos)));
                    any = true;
                }
            }
            if !any {
                break;
            }

            let mut improved = vec![None; n];
            for (pi, start) in queue.iter().enumerate() {
                let Some(start) = *start else { continue };
                let pattern = &tt.patterns[pi];
                let mut current: Option<(usize, usize)> = None; // (trip, board_pos)
                for pos in start..pattern.stops.len() {
                    let stop = pattern.stops[pos];
                    if let Some((trip, board_pos)) = current {
                        let arr = pattern.arrivals[trip][pos];
                        if arr < best[stop] {
                            best[stop] = arr;
                            best_round[stop] = round;
                            marked[stop] = true;
                            improved[stop] = Some(Ride {
                                pattern: pi as u32,
                                trip: trip as u32,
                                board_pos: board_pos as u32,
                                alight_pos: pos as u32,
                            });
                        }
                    }
                    let ready = prev[stop];
                    if ready == UNREACHED {
                        continue;
                    }
                    if let Some(trip) = pattern.earliest_trip(pos, ready) {
                        if current.is_none_or(|(cur, _)| trip < cur) {
                            current = Some((trip, pos));
                        }
                    }
                }
            }
            rides.push(improved);
            prev.copy_from_slice(&best);
        }

        RouterLabels { timetable: tt, departure, best, best_round, rides }
    }
}

impl RouterLabels<'_> {
    pub fn arrival_at(&self, stop: usize) -> Option<u32> {
        (self.best[stop] != UNREACHED).then_some(self.best[stop])
    }

    fn legs_to(&self, stop: usize) -> Vec<Leg> {
        let tt = self.timetable;
        let mut legs = Vec::new();
        let mut at = stop;
        let mut round = self.best_round[stop];
        while round > 0 {
            let Some(r) = (1..=round).rev().find_map(|k| self.rides[k][at].map(|r| (k, r))) else {
                break;
            };
            let (k, ride) = r;
            let p = &tt.patterns[ride.pattern as usize];
            let (b, a) = (ride.board_pos as usize, ride.alight_pos as usize);
            let trip = ride.trip as usize;
            legs.push(Leg {
                trip_id: tt.trip_ids[p.trips[trip]].clone(),
                board_stop: tt.stop_ids[p.stops[b]].clone(),
                alight_stop: tt.stop_ids[p.stops[a]].clone(),
                departure: p.departures[trip][b],
                arrival: p.arrivals[trip][a],
            });
            at = p.stops[b];
            round = k - 1;
        }
        legs.reverse();
        legs
    }

    /// Best journey to a destination reached through `egress` links.
    ///
    /// Minimises door-to-door time, then transfers, then arrival at the final
    /// stop, then the trip id sequence.
    pub fn journey_to(&self, egress: &[(usize, u32)]) -> Option<Journey> {
        let mut best: Option<(u32, usize, u32, Vec<Leg>, u32)> = None;
        for &(stop, walk) in egress {
            let Some(arr) = self.arrival_at(stop) else { continue };
            let total = arr.saturating_add(walk) - self.departure;
            let trips = self.best_round[stop];
            let better = match &best {
                None => true,
                Some((bt, bk, ba, blegs, _)) => match (total, trips, arr).cmp(&(*bt, *bk, *ba)) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        let legs = self.legs_to(stop);
                        trip_seq(&legs) < trip_seq(blegs)
                    }
                },
            };
            if better {
                best = Some((total, trips, arr, self.legs_to(stop), walk));
            }
        }
        let (total, _, arr, legs, walk) = best?;
        let (access, ivt) = match (legs.first(), legs.last()) {
            (Some(first), Some(last)) => (first.departure - self.departure, last.arrival - first.departure),
            _ => (arr - self.departure, 0),
        };
        Some(Journey {
            departure: self.departure,
            access_s: access,
            ivt_s: ivt,
            egress_s: walk,
            transfers: legs.len().saturating_sub(1) as u32,
            total_s: total,
            legs,
        })
    }
}

fn trip_seq(legs: &[Leg]) -> Vec<&str> {
    legs.iter().map(|l| l.trip_id.as_str()).collect()
}

/// Plans one journey; links are `(stop id, walk seconds)`.
pub fn plan_journey(
    timetable: &Timetable,
    origin: &[(&str, u32)],
    destination: &[(&str, u32)],
    departure: u32,
    max_transfers: usize,
) -> Option<Journey> {
    let resolve = |links: &[(&str, u32)]| -> Vec<(usize, u32)> {
        links
            .iter()
            .filter_map(|&(id, w)| timetable.stop_index(id).map(|s| (s, w)))
            .collect()
    };
    let origin = resolve(origin);
    let destination = resolve(destination);
    Router::new(timetable, max_transfers)
        .search(&origin, departure)
        .journey_to(&destination)
}
