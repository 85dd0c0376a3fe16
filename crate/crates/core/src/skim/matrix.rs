use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{access_candidates, Result, Router, SkimError, SkimSettings, Timetable, Zone};
use crate::gtfs::{Stop, ServiceInterval};

/// Period-mean journey components for one OD pair, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SkimCell {
    pub access_s: f64,
    pub egress_s: f64,
    pub ivt_s: f64,
    pub transfers: f64,
    pub reachable: bool,
}

impl SkimCell {
    pub fn total_s(&self) -> f64 {
        self.access_s + self.ivt_s + self.egress_s
    }
}

/// Dense OD skim for one service period, row-major over `zone_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkimMatrix {
    pub period: String,
    pub zone_ids: Vec<String>,
    pub cells: Vec<SkimCell>,
}

impl SkimMatrix {
    pub fn len(&self) -> usize {
        self.zone_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zone_ids.is_empty()
    }

    pub fn get(&self, origin: usize, destination: usize) -> &SkimCell {
        &self.cells[origin * self.zone_ids.len() + destination]
    }
}

/// Builds the skim for `period` by averaging journeys planned at departures
/// `period.start + k * step` (strictly before the period end) over the
/// samples that find a journey. Intra-zonal cells are zero.
pub fn compute_skim(
    timetable: &Timetable,
    stops: &[Stop],
    zones: &[Zone],
    period: &ServiceInterval,
    settings: &SkimSettings,
) -> Result<SkimMatrix> {
    if zones.is_empty() {
        return Err(SkimError::EmptyZones);
    }
    settings.validate()?;
    let links: Vec<Vec<(usize, u32)>> = zones
        .iter()
        .map(|z| {
            access_candidates(z, stops, &settings.walk)
                .into_iter()
                .filter_map(|l| timetable.stop_index(&l.stop_id).map(|s| (s, l.walk_s)))
                .collect()
        })
        .collect();
    let samples: Vec<u32> = (period.start..period.end)
        .step_by(settings.step_secs() as usize)
        .collect();
    let router = Router::new(timetable, settings.max_transfers);
    let n = zones.len();

    let rows: Vec<Vec<SkimCell>> = (0..n)
        .into_par_iter()
        .map(|o| {
            let mut sums = vec![[0.0f64; 4]; n];
            let mut counts = vec![0u32; n];
            if !links[o].is_empty() {
                for &t in &samples {
                    let labels = router.search(&links[o], t);
                    for d in 0..n {
                        if d == o {
                            continue;
                        }
                        if let Some(j) = labels.journey_to(&links[d]) {
                            let s = &mut sums[d];
                            s[0] += j.access_s as f64;
                            s[1] += j.egress_s as f64;
                            s[2] += j.ivt_s as f64;
                            s[3] += j.transfers as f64;
                            counts[d] += 1;
                        }
                    }
                }
            }
            (0..n)
                .map(|d| {
                    if d == o {
                        return SkimCell { reachable: true, ..SkimCell::default() };
                    }
                    match counts[d] {
                        0 => SkimCell::default(),
                        c => {
                            let c = c as f64;
                            SkimCell {
                                access_s: sums[d][0] / c,
                                egress_s: sums[d][1] / c,
                                ivt_s: sums[d][2] / c,
                                transfers: sums[d][3] / c,
                                reachable: true,
                            }
                        }
                    }
                })
                .collect()
        })
        .collect();

    Ok(SkimMatrix {
        period: period.label.clone(),
        zone_ids: zones.iter().map(|z| z.id.clone()).collect(),
        cells: rows.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    /// Reachable with and without the new service.
    Both,
    /// Reachable only with the new service.
    NewlyConnected,
    /// Reachable only without the new service.
    Lost,
    Neither,
}

impl Connectivity {
    pub fn has_delta(self) -> bool {
        matches!(self, Connectivity::Both | Connectivity::NewlyConnected)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Connectivity::Both => "both",
            Connectivity::NewlyConnected => "newly_connected",
            Connectivity::Lost => "lost",
            Connectivity::Neither => "neither",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Connectivity::Both, Connectivity::NewlyConnected, Connectivity::Lost, Connectivity::Neither]
            .into_iter()
            .find(|c| c.as_str() == s)
    }
}

/// Alternative minus base time components, in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaCell {
    pub access_min: f64,
    pub egress_min: f64,
    pub ivt_min: f64,
    pub total_min: f64,
    pub status: Connectivity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMatrix {
    pub period: String,
    pub zone_ids: Vec<String>,
    pub cells: Vec<DeltaCell>,
}

impl DeltaMatrix {
    pub fn get(&self, origin: usize, destination: usize) -> &DeltaCell {
        &self.cells[origin * self.zone_ids.len() + destination]
    }
}

/// Per-component differences `alt - base`.
///
/// An OD reachable only in `alt` is compared against a notional base journey
/// of `ceiling_min` minutes split across components in the proportions of
/// the alt journey. ODs unreachable in `alt` carry no delta.
pub fn delta_skim(base: &SkimMatrix, alt: &SkimMatrix, ceiling_min: f64) -> Result<DeltaMatrix> {
    if base.zone_ids != alt.zone_ids {
        return Err(SkimError::ZoneMismatch);
    }
    if base.period != alt.period {
        return Err(SkimError::PeriodMismatch(base.period.clone(), alt.period.clone()));
    }
    let cells = base
        .cells
        .iter()
        .zip(&alt.cells)
        .map(|(b, a)| {
            let at = a.access_s / 60.0;
            let et = a.egress_s / 60.0;
            let ivt = a.ivt_s / 60.0;
            match (b.reachable, a.reachable) {
                (true, true) => {
                    let d = [at - b.access_s / 60.0, et - b.egress_s / 60.0, ivt - b.ivt_s / 60.0];
                    DeltaCell {
                        access_min: d[0],
                        egress_min: d[1],
                        ivt_min: d[2],
                        total_min: d[0] + d[1] + d[2],
                        status: Connectivity::Both,
                    }
                }
                (false, true) => {
                    let alt_total = at + et + ivt;
                    let scale = if alt_total > 0.0 { ceiling_min / alt_total } else { 0.0 };
                    let d = [at * (1.0 - scale), et * (1.0 - scale), ivt * (1.0 - scale)];
                    DeltaCell {
                        access_min: d[0],
                        egress_min: d[1],
                        ivt_min: d[2],
                        total_min: d[0] + d[1] + d[2],
                        status: Connectivity::NewlyConnected,
                    }
                }
                (reached, false) => DeltaCell {
                    access_min: 0.0,
                    egress_min: 0.0,
                    ivt_min: 0.0,
                    total_min: 0.0,
                    status: if reached { Connectivity::Lost } else { Connectivity::Neither },
                },
            }
        })
        .collect();
    Ok(DeltaMatrix { period: base.period.clone(), zone_ids: base.zone_ids.clone(), cells })
}

/// Writes `period,origin,destination,access_s,egress_s,ivt_s,transfers,reachable`.
pub fn write_skims_csv(matrices: &[SkimMatrix], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["period", "origin", "destination", "access_s", "egress_s", "ivt_s", "transfers", "reachable"])?;
    for m in matrices {
        for (o, oid) in m.zone_ids.iter().enumerate() {
            for (d, did) in m.zone_ids.iter().enumerate() {
                let c = m.get(o, d);
                w.write_record([
                    m.period.as_str(),
                    oid,
                    did,
                    &c.access_s.to_string(),
                    &c.egress_s.to_string(),
                    &c.ivt_s.to_string(),
                    &c.transfers.to_string(),
                    if c.reachable { "1" } else { "0" },
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a skim CSV back into one matrix per period, in first-seen order.
pub fn read_skims_csv(path: impl AsRef<Path>) -> Result<Vec<SkimMatrix>> {
    let rows = read_od_rows(path.as_ref(), 8)?;
    group_rows(rows, |line, f| {
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| line.clone());
        Ok(SkimCell {
            access_s: num(3)?,
            egress_s: num(4)?,
            ivt_s: num(5)?,
            transfers: num(6)?,
            reachable: match f[7].as_str() {
                "1" => true,
                "0" => false,
                _ => return Err(line.clone()),
            },
        })
    })
    .map(|groups| {
        groups
            .into_iter()
            .map(|(period, zone_ids, cells)| SkimMatrix { period, zone_ids, cells })
            .collect()
    })
}

pub fn write_deltas_csv(matrices: &[DeltaMatrix], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "period", "origin", "destination", "d_access_min", "d_egress_min", "d_ivt_min", "d_total_min", "status",
    ])?;
    for m in matrices {
        for (o, oid) in m.zone_ids.iter().enumerate() {
            for (d, did) in m.zone_ids.iter().enumerate() {
                let c = m.get(o, d);
                w.write_record([
                    m.period.as_str(),
                    oid,
                    did,
                    &c.access_min.to_string(),
                    &c.egress_min.to_string(),
                    &c.ivt_min.to_string(),
                    &c.total_min.to_string(),
                    c.status.as_str(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_deltas_csv(path: impl AsRef<Path>) -> Result<Vec<DeltaMatrix>> {
    let rows = read_od_rows(path.as_ref(), 8)?;
    group_rows(rows, |line, f| {
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| line.clone());
        Ok(DeltaCell {
            access_min: num(3)?,
            egress_min: num(4)?,
            ivt_min: num(5)?,
            total_min: num(6)?,
            status: Connectivity::parse(&f[7]).ok_or_else(|| line.clone())?,
        })
    })
    .map(|groups| {
        groups
            .into_iter()
            .map(|(period, zone_ids, cells)| DeltaMatrix { period, zone_ids, cells })
            .collect()
    })
}

type Line = (String, u64);

fn read_od_rows(path: &Path, width: usize) -> Result<Vec<(Line, Vec<String>)>> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(SkimError::Malformed { file, line, message: format!("expected {width} fields") });
        }
        out.push(((file.clone(), line), record.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

/// `(period, zone ids, row-major cells)`.
type PeriodTable<C> = (String, Vec<String>, Vec<C>);

/// Regroups long-format OD rows into dense per-period tables.
fn group_rows<C>(
    rows: Vec<(Line, Vec<String>)>,
    cell: impl Fn(&Line, &[String]) -> std::result::Result<C, Line>,
) -> Result<Vec<PeriodTable<C>>> {
    let malformed = |(file, line): Line, message: &str| SkimError::Malformed {
        file,
        line,
        message: message.to_string(),
    };
    let mut out: Vec<(String, Vec<String>, Vec<C>)> = Vec::new();
    let mut iter = rows.into_iter().peekable();
    while let Some((line, first)) = iter.peek().cloned() {
        let period = first[0].clone();
        let mut block = Vec::new();
        while let Some((_, f)) = iter.peek() {
            if f[0] != period {
                break;
            }
            block.push(iter.next().expect("peeked"));
        }
        let n = (block.len() as f64).sqrt().round() as usize;
        if n * n != block.len() {
            return Err(malformed(line, "period block is not a square OD table"));
        }
        let zone_ids: Vec<String> = block[..n].iter().map(|(_, f)| f[2].clone()).collect();
        let mut cells = Vec::with_capacity(block.len());
        for (i, (l, f)) in block.iter().enumerate() {
            if f[1] != zone_ids[i / n] || f[2] != zone_ids[i % n] {
                return Err(malformed(l.clone(), "OD rows out of order"));
            }
            cells.push(cell(l, f).map_err(|l| malformed(l, "bad value"))?);
        }
        out.push((period, zone_ids, cells));
    }
    Ok(out)
}
