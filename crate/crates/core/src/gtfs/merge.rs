use std::collections::{HashMap, HashSet};

use super::{Feed, GtfsError, Result};

/// Merges an overlay feed (e.g. a proposed line) into a base feed.
///
/// Base entities are kept untouched. Overlay stops, routes and services that
/// are identical to a base entity with the same id are shared, which is how a
/// new line connects to existing stations. Any other id collision is resolved
/// by prefixing the overlay id with `prefix`; if the prefixed id is also taken
/// the merge fails.
pub fn merge_feeds(base: &Feed, overlay: &Feed, prefix: &str) -> Result<Feed> {
    let mut out = base.clone();

    let stop_map = merge_table(
        "stops",
        prefix,
        &mut out.stops,
        &overlay.stops,
        |s| &s.id,
        |s, id| s.id = id,
        true,
    )?;
    let route_map = merge_table(
        "routes",
        prefix,
        &mut out.routes,
        &overlay.routes,
        |r| &r.id,
        |r, id| r.id = id,
        true,
    )?;
    let service_map = merge_table(
        "calendar",
        prefix,
        &mut out.services,
        &overlay.services,
        |s| &s.id,
        |s, id| s.id = id,
        true,
    )?;

    let mut trips = overlay.trips.clone();
    for t in &mut trips {
        t.route_id = route_map.get(&t.route_id).cloned().unwrap_or(t.route_id.clone());
        t.service_id = service_map.get(&t.service_id).cloned().unwrap_or(t.service_id.clone());
    }
    let trip_map = merge_table(
        "trips",
        prefix,
        &mut out.trips,
        &trips,
        |t| &t.id,
        |t, id| t.id = id,
        false,
    )?;

    for st in &overlay.stop_times {
        let mut st = st.clone();
        if let Some(id) = trip_map.get(&st.trip_id) {
            st.trip_id = id.clone();
        }
        if let Some(id) = stop_map.get(&st.stop_id) {
            st.stop_id = id.clone();
        }
        out.stop_times.push(st);
    }

    out.canonicalize();
    out.validate()?;
    Ok(out)
}

/// Appends overlay rows to `base`, returning the id renames applied.
fn merge_table<T: Clone + PartialEq>(
    table: &'static str,
    prefix: &str,
    base: &mut Vec<T>,
    overlay: &[T],
    id: impl Fn(&T) -> &String,
    set_id: impl Fn(&mut T, String),
    share_identical: bool,
) -> Result<HashMap<String, String>> {
    let existing: HashMap<String, usize> =
        base.iter().enumerate().map(|(i, r)| (id(r).clone(), i)).collect();
    let overlay_ids: HashSet<&String> = overlay.iter().map(&id).collect();
    let mut taken: HashSet<String> = existing.keys().cloned().collect();
    let mut renames = HashMap::new();
    let mut appended = Vec::new();

    for row in overlay {
        let key = id(row);
        match existing.get(key) {
            None => {
                taken.insert(key.clone());
                appended.push(row.clone());
            }
            Some(&i) if share_identical && base[i] == *row => {}
            Some(_) => {
                let renamed = format!("{prefix}{key}");
                if taken.contains(&renamed) || overlay_ids.contains(&renamed) {
                    return Err(GtfsError::IdCollision { table, id: key.clone() });
                }
                taken.insert(renamed.clone());
                let mut row = row.clone();
                set_id(&mut row, renamed.clone());
                renames.insert(key.clone(), renamed);
                appended.push(row);
            }
        }
    }
    base.extend(appended);
    Ok(renames)
}
