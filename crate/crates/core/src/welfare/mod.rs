//! Logsum consumer surplus and equity indices.
//!
//! Surplus is expressed in dollars per trip using `1 / |theta_cost|` as the
//! marginal utility of income, so a higher logsum is a positive surplus.

mod equity;
mod io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{ChoiceParams, Segment, TimeDelta, TransitTimes};
use crate::Scalar;

pub use equity::{csdi, csdi_scoped, csii, equity_report, mean_cs, CsiiEntry, EquityReport, Insufficiency, Scope, Threshold};
pub use io::{read_welfare_csv, write_welfare_csv};

#[derive(Debug, Error)]
pub enum WelfareError {
    #[error("transit share is zero; surplus through the transit utility is undefined")]
    ZeroShare,
    #[error("cost coefficient is zero")]
    ZeroCostCoefficient,
    #[error("scope `{0}` has no trips")]
    EmptyScope(&'static str),
    #[error("population average consumer surplus is zero")]
    ZeroAverage,
    #[error("sufficiency threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("pre and post records do not cover the same groups")]
    KeyMismatch,
    #[error("{file}:{line}: {message}")]
    Malformed { file: String, line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, WelfareError>;

/// Systematic utility of transit for a group.
pub fn transit_utility<T: Scalar>(params: &ChoiceParams<T>, times: &TransitTimes<T>, fare_usd: T) -> T {
    params.theta_transit_at * times.access
        + params.theta_transit_et * times.egress
        + params.theta_transit_ivt * times.ivt
        + params.theta_transit_nt * times.transfers
        + params.theta_cost * fare_usd
        + params.asc_transit
}

fn income_scale<T: Scalar>(params: &ChoiceParams<T>) -> Result<T> {
    if params.theta_cost == T::zero() {
        return Err(WelfareError::ZeroCostCoefficient);
    }
    Ok(T::one() / params.theta_cost.abs())
}

/// Expected surplus per trip from the transit utility and share:
/// `ln(exp(V_transit) / p_transit) / |theta_cost|`, which equals the scaled
/// logsum over all modes when the share is the logit share.
pub fn expected_cs<T: Scalar>(params: &ChoiceParams<T>, v_transit: T, p_transit: T) -> Result<T> {
    let scale = income_scale(params)?;
    if !(p_transit > T::zero()) {
        return Err(WelfareError::ZeroShare);
    }
    Ok(scale * (v_transit - p_transit.ln()))
}

/// Scaled logsum over all mode utilities, computed with a max shift.
pub fn logsum_cs<T: Scalar>(theta_cost: T, utilities: &[T]) -> Result<T> {
    if theta_cost == T::zero() {
        return Err(WelfareError::ZeroCostCoefficient);
    }
    let max = utilities.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = utilities.iter().map(|&v| (v - max).exp()).sum();
    Ok((max + sum.ln()) / theta_cost.abs())
}

/// Change in expected surplus per trip:
/// `[ln(p / p') + theta_at dt_at + theta_et dt_et + theta_ivt dt_ivt] / |theta_cost|`.
pub fn delta_cs<T: Scalar>(params: &ChoiceParams<T>, p: T, p_new: T, delta: &TimeDelta<T>) -> Result<T> {
    let scale = income_scale(params)?;
    if !(p > T::zero()) || !(p_new > T::zero()) {
        return Err(WelfareError::ZeroShare);
    }
    let dv = params.transit_time_utility(delta);
    Ok(scale * ((p / p_new).ln() + dv))
}

/// Surplus of one trip group before and after the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareRecord<T> {
    pub origin: String,
    pub destination: String,
    pub segment: Segment,
    pub trips: T,
    pub cs_pre: T,
    pub delta_cs: T,
    pub cs_post: T,
}

impl<T: Scalar> WelfareRecord<T> {
    pub fn new(origin: String, destination: String, segment: Segment, trips: T, cs_pre: T, delta_cs: T) -> Self {
        WelfareRecord { origin, destination, segment, trips, cs_pre, delta_cs, cs_post: cs_pre + delta_cs }
    }

    pub fn key(&self) -> String {
        format!("{}|{}|{}", self.origin, self.destination, self.segment.as_str())
    }

    pub fn pre(&self) -> CsObservation<T> {
        CsObservation { key: self.key(), segment: self.segment, trips: self.trips, cs: self.cs_pre }
    }

    pub fn post(&self) -> CsObservation<T> {
        CsObservation { key: self.key(), segment: self.segment, trips: self.trips, cs: self.cs_post }
    }
}

/// Surplus level of one group at one point in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsObservation<T> {
    pub key: String,
    pub segment: Segment,
    pub trips: T,
    pub cs: T,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(cost: f64) -> ChoiceParams<f64> {
        ChoiceParams {
            theta_transit_at: -0.04,
            theta_transit_et: -0.04,
            theta_transit_ivt: -0.02,
            theta_cost: cost,
            ..Default::default()
        }
    }

    #[test]
    fn degenerate_world_has_zero_surplus() {
        let p = 0.3f64;
        assert!(expected_cs(&params(-0.1), p.ln(), p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn shortcut_matches_three_mode_logsum() {
        let v = [1.0f64, 0.5, 0.0];
        let denom: f64 = v.iter().map(|x| x.exp()).sum();
        let p = v[0].exp() / denom;
        let direct = 10.0 * (1f64.exp() + 0.5f64.exp() + 1.0).ln();
        assert!((expected_cs(&params(-0.1), v[0], p).unwrap() - direct).abs() < 1e-12);
        assert!((logsum_cs(-0.1, &v).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn doubling_cost_coefficient_halves_surplus() {
        let a = expected_cs(&params(-0.1), 0.7, 0.4).unwrap();
        let b = expected_cs(&params(-0.2), 0.7, 0.4).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-12);
    }

    #[test]
    fn zero_share_and_cost_rejected() {
        assert!(matches!(expected_cs(&params(-0.1), 0.0, 0.0), Err(WelfareError::ZeroShare)));
        assert!(matches!(expected_cs(&params(0.0), 0.0, 0.5), Err(WelfareError::ZeroCostCoefficient)));
        assert!(matches!(delta_cs(&params(-0.1), 0.2, 0.0, &TimeDelta::zero()), Err(WelfareError::ZeroShare)));
    }

    #[test]
    fn delta_cs_example() {
        let d = delta_cs(&params(-0.1), 0.25, 0.3625, &TimeDelta::new(-5.0, -5.0, -10.0)).unwrap();
        let want = (0.6 + (0.25f64 / 0.3625).ln()) / 0.1;
        assert!((d - want).abs() < 1e-12);
        assert!((d - 2.284).abs() < 5e-4);
        assert_eq!(delta_cs(&params(-0.1), 0.25, 0.25, &TimeDelta::zero()).unwrap(), 0.0);
    }

    #[test]
    fn transit_utility_terms() {
        let p = ChoiceParams {
            theta_transit_at: -0.1,
            theta_transit_et: -0.2,
            theta_transit_ivt: -0.05,
            theta_transit_nt: -0.3,
            theta_cost: -0.5,
            asc_transit: 1.0,
            ..Default::default()
        };
        let t = TransitTimes { access: 10.0f64, egress: 5.0, ivt: 20.0, transfers: 1.0 };
        // -1 - 1 - 1 - 0.3 - 1.375 + 1
        assert!((transit_utility(&p, &t, 2.75f64) + 3.675).abs() < 1e-12);
    }

    #[test]
    fn record_post_is_pre_plus_delta() {
        let r = WelfareRecord::new("a".into(), "b".into(), Segment::Senior, 10.0, 4.0, 1.5);
        assert_eq!(r.cs_post, 5.5);
        assert_eq!(r.key(), "a|b|senior");
    }
}
