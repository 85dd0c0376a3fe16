//! Trip groups, choice parameters and the elasticity-based mode share update.
//!
//! Everything here is generic over [`Scalar`]; time coefficients are per
//! minute and cost coefficients per dollar.

mod elasticity;
mod impacts;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use elasticity::{
    aggregate_params, elasticity_share, point_elasticity, rescale_other_modes, transit_share_update,
    value_of_time,
};
pub use impacts::{
    attribute_ridership, evaluate_group, ghg_savings, group_daily_delta, mode_shift_summary, Ghg,
    GroupOutcome, ModeShift, DEFAULT_GRAMS_PER_MILE,
};

#[derive(Debug, Error, PartialEq)]
pub enum DemandError {
    #[error("no inputs to aggregate")]
    EmptyInput,
    #[error("aggregation weights must be positive")]
    NonPositiveWeight,
    #[error("share {0} outside (0, 1)")]
    ShareOutOfRange(f64),
    #[error("invalid mode shares: {0}")]
    InvalidShares(String),
    #[error("invalid trip group: {0}")]
    InvalidGroup(String),
    #[error("cost coefficient is zero")]
    ZeroCostCoefficient,
    #[error("OD is unreachable in every period with positive weight")]
    Unreachable,
    #[error("group {0} switches auto trips but has no trip distance")]
    MissingDistance(usize),
}

pub type Result<T> = std::result::Result<T, DemandError>;

/// Population segment of a trip group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    LowIncome,
    NotLowIncome,
    Senior,
    Student,
}

impl Segment {
    pub const ALL: [Segment; 4] =
        [Segment::LowIncome, Segment::NotLowIncome, Segment::Senior, Segment::Student];

    pub fn as_str(self) -> &'static str {
        match self {
            Segment::LowIncome => "low_income",
            Segment::NotLowIncome => "not_low_income",
            Segment::Senior => "senior",
            Segment::Student => "student",
        }
    }

    /// Accepts `low_income`, `lowincome`, `LowIncome` and similar spellings.
    pub fn parse(s: &str) -> Option<Segment> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "lowincome" => Some(Segment::LowIncome),
            "notlowincome" => Some(Segment::NotLowIncome),
            "senior" => Some(Segment::Senior),
            "student" => Some(Segment::Student),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PrivateVehicle,
    Transit,
    OnDemand,
    Biking,
    Walking,
    Carpool,
}

impl Mode {
    pub const ALL: [Mode; 6] =
        [Mode::PrivateVehicle, Mode::Transit, Mode::OnDemand, Mode::Biking, Mode::Walking, Mode::Carpool];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short column-friendly name.
    pub fn key(self) -> &'static str {
        match self {
            Mode::PrivateVehicle => "auto",
            Mode::Transit => "transit",
            Mode::OnDemand => "on_demand",
            Mode::Biking => "biking",
            Mode::Walking => "walking",
            Mode::Carpool => "carpool",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match key.as_str() {
            "auto" | "driving" | "drive" | "car" | "private_vehicle" => Some(Mode::PrivateVehicle),
            "transit" | "public_transit" => Some(Mode::Transit),
            "on_demand" | "ondemand" | "taxi" | "tnc" => Some(Mode::OnDemand),
            "biking" | "bike" | "bicycle" => Some(Mode::Biking),
            "walking" | "walk" => Some(Mode::Walking),
            "carpool" => Some(Mode::Carpool),
            _ => None,
        }
    }
}

/// Mode shares of one trip group, indexed by [`Mode`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeShares<T>(pub [T; 6]);

impl<T: Scalar> ModeShares<T> {
    pub fn get(&self, mode: Mode) -> T {
        self.0[mode.index()]
    }

    pub fn set(&mut self, mode: Mode, value: T) {
        self.0[mode.index()] = value;
    }

    pub fn transit(&self) -> T {
        self.get(Mode::Transit)
    }

    pub fn sum(&self) -> T {
        self.0.iter().copied().sum()
    }

    /// Closure tolerance: 1e-9, or a few ulps for narrower types.
    pub fn tolerance() -> T {
        T::lit(1e-9).max(T::epsilon() * T::lit(16.0))
    }

    pub fn validate(&self) -> Result<()> {
        for (mode, &p) in Mode::ALL.iter().zip(&self.0) {
            if !(p >= T::zero() && p <= T::one()) {
                return Err(DemandError::InvalidShares(format!("{} share {} outside [0, 1]", mode.key(), p)));
            }
        }
        let s = self.sum();
        if (s - T::one()).abs() > Self::tolerance() {
            return Err(DemandError::InvalidShares(format!("shares sum to {s}")));
        }
        Ok(())
    }

    /// Shares from per-mode trip counts.
    pub fn from_counts(counts: [T; 6]) -> Option<Self> {
        let total: T = counts.iter().copied().sum();
        (total > T::zero()).then(|| ModeShares(counts.map(|c| c / total)))
    }
}

/// Taste coefficients and mode constants of one trip group.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChoiceParams<T> {
    pub theta_auto_tt: T,
    pub theta_cost: T,
    pub theta_transit_at: T,
    pub theta_transit_et: T,
    pub theta_transit_ivt: T,
    pub theta_transit_nt: T,
    pub theta_nonvehicle_tt: T,
    pub asc_driving: T,
    pub asc_transit: T,
    pub asc_on_demand: T,
    pub asc_biking: T,
    pub asc_walking: T,
    pub asc_carpool: T,
}

impl<T: Scalar> ChoiceParams<T> {
    pub const FIELDS: [&'static str; 13] = [
        "theta_auto_tt",
        "theta_cost",
        "theta_transit_at",
        "theta_transit_et",
        "theta_transit_ivt",
        "theta_transit_nt",
        "theta_nonvehicle_tt",
        "asc_driving",
        "asc_transit",
        "asc_on_demand",
        "asc_biking",
        "asc_walking",
        "asc_carpool",
    ];

    pub fn to_array(&self) -> [T; 13] {
        [
            self.theta_auto_tt,
            self.theta_cost,
            self.theta_transit_at,
            self.theta_transit_et,
            self.theta_transit_ivt,
            self.theta_transit_nt,
            self.theta_nonvehicle_tt,
            self.asc_driving,
            self.asc_transit,
            self.asc_on_demand,
            self.asc_biking,
            self.asc_walking,
            self.asc_carpool,
        ]
    }

    pub fn from_array(v: [T; 13]) -> Self {
        ChoiceParams {
            theta_auto_tt: v[0],
            theta_cost: v[1],
            theta_transit_at: v[2],
            theta_transit_et: v[3],
            theta_transit_ivt: v[4],
            theta_transit_nt: v[5],
            theta_nonvehicle_tt: v[6],
            asc_driving: v[7],
            asc_transit: v[8],
            asc_on_demand: v[9],
            asc_biking: v[10],
            asc_walking: v[11],
            asc_carpool: v[12],
        }
    }

    /// Fails on a zero cost coefficient; returns the names of time or cost
    /// coefficients that are positive (wrong sign for a disutility).
    pub fn validate(&self) -> Result<Vec<&'static str>> {
        if self.theta_cost == T::zero() {
            return Err(DemandError::ZeroCostCoefficient);
        }
        let v = self.to_array();
        Ok(Self::FIELDS[..7]
            .iter()
            .zip(&v[..7])
            .filter(|(_, &x)| x > T::zero())
            .map(|(name, _)| *name)
            .collect())
    }

    /// Utility change of a transit trip from the given time changes.
    pub fn transit_time_utility(&self, delta: &TimeDelta<T>) -> T {
        self.theta_transit_at * delta.access + self.theta_transit_et * delta.egress + self.theta_transit_ivt * delta.ivt
    }
}

/// Transit time changes in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimeDelta<T> {
    pub access: T,
    pub egress: T,
    pub ivt: T,
}

impl<T: Scalar> TimeDelta<T> {
    pub fn new(access: T, egress: T, ivt: T) -> Self {
        TimeDelta { access, egress, ivt }
    }

    pub fn zero() -> Self {
        TimeDelta { access: T::zero(), egress: T::zero(), ivt: T::zero() }
    }

    pub fn total(&self) -> T {
        self.access + self.egress + self.ivt
    }
}

/// Baseline transit level of service of a trip group (minutes, transfers).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransitTimes<T> {
    pub access: T,
    pub egress: T,
    pub ivt: T,
    pub transfers: T,
}

/// Demand unit: all trips of one segment between two zones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripGroup<T> {
    pub origin: String,
    pub destination: String,
    pub segment: Segment,
    /// Trips per day.
    pub trips: T,
    pub shares: ModeShares<T>,
    /// Share of the group's trips departing in each service period.
    pub period_weights: Vec<T>,
    pub avg_auto_miles: Option<T>,
    pub fare_usd: T,
    pub auto_cost_usd: T,
    pub baseline: TransitTimes<T>,
}

impl<T: Scalar> TripGroup<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DemandError::InvalidGroup(format!("{}->{} {}: {m}", self.origin, self.destination, self.segment.as_str())));
        if !(self.trips > T::zero()) {
            return bad(format!("trip count {} must be positive", self.trips));
        }
        if let Err(e) = self.shares.validate() {
            return bad(e.to_string());
        }
        if self.period_weights.iter().any(|&w| !(w >= T::zero())) {
            return bad("negative period weight".into());
        }
        let s: T = self.period_weights.iter().copied().sum();
        if (s - T::one()).abs() > T::lit(1e-6) {
            return bad(format!("period weights sum to {s}"));
        }
        if let Some(m) = self.avg_auto_miles {
            if !(m >= T::zero()) {
                return bad(format!("negative trip distance {m}"));
            }
        }
        Ok(())
    }

    pub fn key(&self) -> (String, String, Segment) {
        (self.origin.clone(), self.destination.clone(), self.segment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_spellings() {
        assert_eq!(Segment::parse("lowincome"), Some(Segment::LowIncome));
        assert_eq!(Segment::parse("Notlowincome"), Some(Segment::NotLowIncome));
        assert_eq!(Segment::parse("not_low_income"), Some(Segment::NotLowIncome));
        assert_eq!(Segment::parse("Student"), Some(Segment::Student));
        assert_eq!(Segment::parse("retired"), None);
    }

    #[test]
    fn mode_spellings() {
        assert_eq!(Mode::parse("public_transit"), Some(Mode::Transit));
        assert_eq!(Mode::parse("Walk"), Some(Mode::Walking));
        assert_eq!(Mode::parse("on-demand"), Some(Mode::OnDemand));
        assert_eq!(Mode::parse("boat"), None);
    }

    #[test]
    fn shares_from_counts() {
        // 1 auto, 2 transit, 1 walk
        let s = ModeShares::from_counts([1.0, 2.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.0, [0.25, 0.5, 0.0, 0.0, 0.25, 0.0]);
        s.validate().unwrap();
        assert!(ModeShares::<f64>::from_counts([0.0; 6]).is_none());
    }

    #[test]
    fn share_validation() {
        assert!(ModeShares([0.5, 0.5, 0.1, 0.0, 0.0, 0.0f64]).validate().is_err());
        assert!(ModeShares([1.2, -0.2, 0.0, 0.0, 0.0, 0.0f64]).validate().is_err());
        ModeShares([0.1f32, 0.2, 0.3, 0.1, 0.2, 0.1]).validate().unwrap();
    }

    #[test]
    fn params_validation() {
        let mut p = ChoiceParams::<f64> { theta_cost: -0.1, theta_transit_ivt: 0.02, ..Default::default() };
        assert_eq!(p.validate().unwrap(), vec!["theta_transit_ivt"]);
        p.theta_cost = 0.0;
        assert_eq!(p.validate(), Err(DemandError::ZeroCostCoefficient));
    }

    #[test]
    fn params_array_round_trip() {
        let p = ChoiceParams::<f64>::from_array(std::array::from_fn(|i| i as f64));
        assert_eq!(ChoiceParams::from_array(p.to_array()), p);
        assert_eq!(p.asc_carpool, 12.0);
    }
}
