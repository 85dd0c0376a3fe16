use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result, Stage};
use crate::demand::{Mode, ModeShares, Segment};

/// Everything the scenario computed for one trip group; one row of
/// `group_records.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub origin: String,
    pub destination: String,
    pub segment: Segment,
    pub trips: f64,
    pub in_corridor: bool,
    /// `both`, `newly_connected` or `none` (no period with a delta).
    pub connectivity: String,
    pub d_access_min: f64,
    pub d_egress_min: f64,
    pub d_ivt_min: f64,
    pub d_total_min: f64,
    pub benefiting: bool,
    pub share_before_auto: f64,
    pub share_before_transit: f64,
    pub share_before_on_demand: f64,
    pub share_before_biking: f64,
    pub share_before_walking: f64,
    pub share_before_carpool: f64,
    pub share_after_auto: f64,
    pub share_after_transit: f64,
    pub share_after_on_demand: f64,
    pub share_after_biking: f64,
    pub share_after_walking: f64,
    pub share_after_carpool: f64,
    pub ridership: f64,
    pub transit_increase: f64,
    pub switched_auto: f64,
    pub switched_on_demand: f64,
    pub switched_biking: f64,
    pub switched_walking: f64,
    pub switched_carpool: f64,
    pub avg_auto_miles: Option<f64>,
    pub ghg_grams: f64,
    /// False when the baseline transit share is zero (surplus undefined).
    pub cs_included: bool,
    pub cs_pre: f64,
    pub delta_cs: f64,
    pub cs_post: f64,
}

impl GroupRecord {
    pub fn shares_before(&self) -> ModeShares<f64> {
        ModeShares([
            self.share_before_auto,
            self.share_before_transit,
            self.share_before_on_demand,
            self.share_before_biking,
            self.share_before_walking,
            self.share_before_carpool,
        ])
    }

    pub fn shares_after(&self) -> ModeShares<f64> {
        ModeShares([
            self.share_after_auto,
            self.share_after_transit,
            self.share_after_on_demand,
            self.share_after_biking,
            self.share_after_walking,
            self.share_after_carpool,
        ])
    }

    pub fn set_shares(&mut self, before: &ModeShares<f64>, after: &ModeShares<f64>) {
        let b = before.0;
        let a = after.0;
        (
            self.share_before_auto,
            self.share_before_transit,
            self.share_before_on_demand,
            self.share_before_biking,
            self.share_before_walking,
            self.share_before_carpool,
        ) = (b[0], b[1], b[2], b[3], b[4], b[5]);
        (
            self.share_after_auto,
            self.share_after_transit,
            self.share_after_on_demand,
            self.share_after_biking,
            self.share_after_walking,
            self.share_after_carpool,
        ) = (a[0], a[1], a[2], a[3], a[4], a[5]);
    }

    pub fn switched(&self) -> [f64; 6] {
        [
            self.switched_auto,
            0.0,
            self.switched_on_demand,
            self.switched_biking,
            self.switched_walking,
            self.switched_carpool,
        ]
    }

    pub fn set_switched(&mut self, s: [f64; 6]) {
        debug_assert_eq!(Mode::Transit.index(), 1);
        self.switched_auto = s[0];
        self.switched_on_demand = s[2];
        self.switched_biking = s[3];
        self.switched_walking = s[4];
        self.switched_carpool = s[5];
    }
}

pub fn write_group_records(records: &[GroupRecord], path: &Path) -> Result<()> {
    let err = |e: csv::Error| PipelineError::failed(Stage::Report, format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    if records.is_empty() {
        // serde writes headers lazily; emit them for the empty table
        w.write_record(header()).map_err(err)?;
    }
    for r in records {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| PipelineError::failed(Stage::Report, e))?;
    Ok(())
}

fn header() -> Vec<&'static str> {
    vec![
        "origin", "destination", "segment", "trips", "in_corridor", "connectivity", "d_access_min", "d_egress_min",
        "d_ivt_min", "d_total_min", "benefiting", "share_before_auto", "share_before_transit",
        "share_before_on_demand", "share_before_biking", "share_before_walking", "share_before_carpool",
        "share_after_auto", "share_after_transit", "share_after_on_demand", "share_after_biking",
        "share_after_walking", "share_after_carpool", "ridership", "transit_increase", "switched_auto",
        "switched_on_demand", "switched_biking", "switched_walking", "switched_carpool", "avg_auto_miles",
        "ghg_grams", "cs_included", "cs_pre", "delta_cs", "cs_post",
    ]
}

pub fn read_group_records(path: &Path) -> Result<Vec<GroupRecord>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| PipelineError::input(Stage::Report, format!("{}: {e}", path.display())))?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| PipelineError::input(Stage::Report, format!("{}: {e}", path.display()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> GroupRecord {
        let mut r = GroupRecord {
            origin: "Z1".into(),
            destination: "Z2".into(),
            segment: Segment::LowIncome,
            trips: 1000.0,
            in_corridor: true,
            connectivity: "both".into(),
            d_access_min: -5.0,
            d_egress_min: -5.0,
            d_ivt_min: -10.0,
            d_total_min: -20.0,
            benefiting: true,
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
            ridership: 362.5,
            transit_increase: 112.5,
            switched_auto: 0.0,
            switched_on_demand: 0.0,
            switched_biking: 0.0,
            switched_walking: 0.0,
            switched_carpool: 0.0,
            avg_auto_miles: None,
            ghg_grams: 0.0,
            cs_included: true,
            cs_pre: 10.1,
            delta_cs: 2.284,
            cs_post: 12.384,
        };
        r.set_shares(&ModeShares([0.5, 0.25, 0.0, 0.0, 0.25, 0.0]), &ModeShares([0.425, 0.3625, 0.0, 0.0, 0.2125, 0.0]));
        r.set_switched([75.0, 0.0, 0.0, 0.0, 37.5, 0.0]);
        r
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let mut b = sample();
        b.avg_auto_miles = Some(1.0 / 3.0);
        b.segment = Segment::NotLowIncome;
        let recs = vec![sample(), b];
        write_group_records(&recs, &p).unwrap();
        assert_eq!(read_group_records(&p).unwrap(), recs);
    }

    #[test]
    fn empty_table_has_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        write_group_records(&[], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(read_group_records(&p).unwrap().is_empty());
        // header matches the serde field order
        let dir2 = tempfile::tempdir().unwrap();
        let q = dir2.path().join("g.csv");
        write_group_records(&[sample()], &q).unwrap();
        let full = std::fs::read_to_string(&q).unwrap();
        assert_eq!(full.lines().next(), text.lines().next());
    }
}
