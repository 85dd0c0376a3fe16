use serde::{Deserialize, Serialize};

use super::{
    rescale_other_modes, transit_share_update, ChoiceParams, DemandError, Mode, ModeShares, Result, TimeDelta,
};
use crate::Scalar;

/// Emission factor of an internal-combustion passenger vehicle, grams per mile.
pub const DEFAULT_GRAMS_PER_MILE: f64 = 400.0;

/// Daily time change of an OD as the weighted mean of its per-period changes.
///
/// Periods without a delta (`None`) are dropped and the remaining weights
/// renormalised.
pub fn group_daily_delta<T: Scalar>(per_period: &[Option<TimeDelta<T>>], weights: &[T]) -> Result<TimeDelta<T>> {
    let mut acc = TimeDelta::<T>::zero();
    let mut total = T::zero();
    for (delta, &w) in per_period.iter().zip(weights) {
        if let Some(d) = delta {
            acc.access = acc.access + w * d.access;
            acc.egress = acc.egress + w * d.egress;
            acc.ivt = acc.ivt + w * d.ivt;
            total = total + w;
        }
    }
    if !(total > T::zero()) {
        return Err(DemandError::Unreachable);
    }
    Ok(TimeDelta::new(acc.access / total, acc.egress / total, acc.ivt / total))
}

/// Result of applying the share update to one trip group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome<T> {
    /// The daily transit time strictly decreased.
    pub benefiting: bool,
    pub shares_before: ModeShares<T>,
    pub shares_after: ModeShares<T>,
    /// Daily trips attributed to the new line.
    pub ridership: T,
}

impl<T: Scalar> GroupOutcome<T> {
    pub fn transit_increase(&self, trips: T) -> T {
        trips * (self.shares_after.transit() - self.shares_before.transit())
    }

    pub fn switched_from(&self, trips: T, mode: Mode) -> T {
        if mode == Mode::Transit {
            return T::zero();
        }
        trips * (self.shares_before.get(mode) - self.shares_after.get(mode))
    }
}

/// Attribution rule: a group whose daily transit time strictly falls sends all
/// its transit trips over the new line; any other group keeps its baseline
/// shares and contributes nothing.
pub fn attribute_ridership<T: Scalar>(
    trips: T,
    shares_before: &ModeShares<T>,
    shares_updated: &ModeShares<T>,
    daily_total_delta: T,
) -> GroupOutcome<T> {
    if daily_total_delta < T::zero() {
        GroupOutcome {
            benefiting: true,
            shares_before: *shares_before,
            shares_after: *shares_updated,
            ridership: trips * shares_updated.transit(),
        }
    } else {
        GroupOutcome {
            benefiting: false,
            shares_before: *shares_before,
            shares_after: *shares_before,
            ridership: T::zero(),
        }
    }
}

/// Share update, rescale and attribution for one group.
pub fn evaluate_group<T: Scalar>(
    params: &ChoiceParams<T>,
    trips: T,
    shares: &ModeShares<T>,
    daily: &TimeDelta<T>,
) -> GroupOutcome<T> {
    let new_transit = transit_share_update(params, shares.transit(), daily);
    let updated = rescale_other_modes(shares, new_transit);
    attribute_ridership(trips, shares, &updated, daily.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModeShift<T> {
    pub transit_increase: T,
    /// Trips leaving each mode; the transit entry is always zero.
    pub switched_from: [T; 6],
}

impl<T: Scalar> ModeShift<T> {
    pub fn total_switched(&self) -> T {
        self.switched_from.iter().copied().sum()
    }
}

/// Sums mode switches over `(trips, outcome)` pairs in the given order.
pub fn mode_shift_summary<'a, T: Scalar>(groups: impl IntoIterator<Item = (T, &'a GroupOutcome<T>)>) -> ModeShift<T> {
    let mut out = ModeShift { transit_increase: T::zero(), switched_from: [T::zero(); 6] };
    for (trips, g) in groups {
        out.transit_increase = out.transit_increase + g.transit_increase(trips);
        for mode in Mode::ALL {
            let i = mode.index();
            out.switched_from[i] = out.switched_from[i] + g.switched_from(trips, mode);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Ghg<T> {
    pub grams: T,
    pub metric_tons: T,
}

/// Daily emission savings of auto trips moved to transit, one vehicle per trip.
///
/// Items are `(switched auto trips, average trip miles)`.
pub fn ghg_savings<T: Scalar>(items: &[(T, Option<T>)], grams_per_mile: T) -> Result<Ghg<T>> {
    let mut grams = T::zero();
    for (i, &(switched, miles)) in items.iter().enumerate() {
        if switched == T::zero() {
            continue;
        }
        let miles = miles.ok_or(DemandError::MissingDistance(i))?;
        grams = grams + switched * miles * grams_per_mile;
    }
    Ok(Ghg { grams, metric_tons: grams / T::lit(1e6) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shares() -> ModeShares<f64> {
        ModeShares([0.5, 0.25, 0.0, 0.0, 0.25, 0.0])
    }

    fn params() -> ChoiceParams<f64> {
        ChoiceParams {
            theta_transit_at: -0.04,
            theta_transit_et: -0.04,
            theta_transit_ivt: -0.02,
            theta_cost: -0.1,
            ..Default::default()
        }
    }

    #[test]
    fn daily_delta_mean() {
        let per: Vec<_> = [-10.0f64, -20.0, -30.0, -20.0, -20.0]
            .iter()
            .map(|&t| Some(TimeDelta::new(0.0, 0.0, t)))
            .collect();
        let d = group_daily_delta(&per, &[0.2; 5]).unwrap();
        assert!((d.total() + 20.0).abs() < 1e-12);
    }

    #[test]
    fn daily_delta_identity_and_zero() {
        let one = [Some(TimeDelta::new(-1.0f64, -2.0, -3.0)), Some(TimeDelta::new(9.0, 9.0, 9.0))];
        assert_eq!(group_daily_delta(&one, &[1.0, 0.0]).unwrap(), TimeDelta::new(-1.0, -2.0, -3.0));
        let zeros = [Some(TimeDelta::<f64>::zero()); 3];
        assert_eq!(group_daily_delta(&zeros, &[0.5, 0.25, 0.25]).unwrap(), TimeDelta::zero());
    }

    #[test]
    fn daily_delta_skips_unreachable_periods() {
        let per = [None, Some(TimeDelta::new(0.0f64, 0.0, -4.0))];
        assert_eq!(group_daily_delta(&per, &[0.5, 0.5]).unwrap().ivt, -4.0);
        assert_eq!(group_daily_delta::<f64>(&[None, None], &[0.5, 0.5]), Err(DemandError::Unreachable));
    }

    #[test]
    fn ridership_attribution() {
        let g = evaluate_group(&params(), 1000.0, &shares(), &TimeDelta::new(-5.0, -5.0, -10.0));
        assert!(g.benefiting);
        assert!((g.ridership - 362.5).abs() < 1e-9);

        let none = evaluate_group(&params(), 1000.0, &shares(), &TimeDelta::zero());
        assert!(!none.benefiting);
        assert_eq!(none.ridership, 0.0);
        assert_eq!(none.shares_after, shares());

        let worse = evaluate_group(&params(), 1000.0, &shares(), &TimeDelta::new(0.0, 0.0, 5.0));
        assert_eq!(worse.ridership, 0.0);
        assert_eq!(worse.shares_after, shares());
    }

    #[test]
    fn mode_shift_example() {
        let g = evaluate_group(&params(), 1000.0, &shares(), &TimeDelta::new(-5.0, -5.0, -10.0));
        let s = mode_shift_summary([(1000.0, &g)]);
        assert!((s.transit_increase - 112.5).abs() < 1e-9);
        assert!((s.switched_from[Mode::PrivateVehicle.index()] - 75.0).abs() < 1e-9);
        assert!((s.total_switched() - s.transit_increase).abs() < 1e-9);

        let none = evaluate_group(&params(), 1000.0, &shares(), &TimeDelta::zero());
        assert_eq!(mode_shift_summary([(1000.0, &none)]), ModeShift::default());
        assert_eq!(mode_shift_summary::<f64>([]), ModeShift::default());
    }

    #[test]
    fn ghg_examples() {
        assert_eq!(ghg_savings(&[(1.0f64, Some(2.5))], 400.0).unwrap().grams, 1000.0);
        assert_eq!(ghg_savings(&[(0.0f64, None)], 400.0).unwrap().grams, 0.0);
        assert_eq!(ghg_savings(&[(3.0f64, None)], 400.0), Err(DemandError::MissingDistance(0)));
        let t = ghg_savings(&[(16_375.0f64, Some(4.47))], 400.0).unwrap().metric_tons;
        assert!((t - 29.28).abs() < 0.005);
    }
}
