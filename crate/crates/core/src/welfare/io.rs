use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Result, WelfareError, WelfareRecord};
use crate::demand::Segment;

#[derive(Serialize, Deserialize)]
struct Row {
    origin: String,
    destination: String,
    segment: String,
    trips: f64,
    cs_pre: f64,
    delta_cs: f64,
    cs_post: f64,
}

pub fn write_welfare_csv(records: &[WelfareRecord<f64>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(Row {
            origin: r.origin.clone(),
            destination: r.destination.clone(),
            segment: r.segment.as_str().to_string(),
            trips: r.trips,
            cs_pre: r.cs_pre,
            delta_cs: r.delta_cs,
            cs_post: r.cs_post,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_welfare_csv(path: &Path) -> Result<Vec<WelfareRecord<f64>>> {
    let file = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| WelfareError::Malformed {
            file: file.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = out.len() as u64 + 2;
        let segment = Segment::parse(&row.segment).ok_or_else(|| WelfareError::Malformed {
            file: file.clone(),
            line,
            message: format!("unknown segment `{}`", row.segment),
        })?;
        if (row.cs_pre + row.delta_cs - row.cs_post).abs() > 1e-6 * row.cs_post.abs().max(1.0) {
            return Err(WelfareError::Malformed { file, line, message: "cs_post != cs_pre + delta_cs".into() });
        }
        out.push(WelfareRecord {
            origin: row.origin,
            destination: row.destination,
            segment,
            trips: row.trips,
            cs_pre: row.cs_pre,
            delta_cs: row.delta_cs,
            cs_post: row.cs_post,
        });
    }
    Ok(out)
}
