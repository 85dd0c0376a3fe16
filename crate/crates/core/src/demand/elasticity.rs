use super::{ChoiceParams, DemandError, Mode, ModeShares, Result, TimeDelta};
use crate::Scalar;

/// Point elasticity of a logit share with respect to a time attribute:
/// `theta * (1 - p) * t`.
pub fn point_elasticity<T: Scalar>(theta: T, p: T, t: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(DemandError::ShareOutOfRange(p.as_f64()));
    }
    Ok(theta * (T::one() - p) * t)
}

/// Share after a relative time change: `p * (1 + e * dt/t)`, clamped to [0, 1].
pub fn elasticity_share<T: Scalar>(e: T, p: T, relative_dt: T) -> T {
    clamp_unit(p * (T::one() + e * relative_dt))
}

/// Linearised logit update of the transit share,
/// `p' = p * [1 + (1 - p) * (theta_at dt_at + theta_et dt_et + theta_ivt dt_ivt)]`,
/// clamped to [0, 1]. Shares of exactly 0 and 1 are fixed points.
pub fn transit_share_update<T: Scalar>(params: &ChoiceParams<T>, p: T, delta: &TimeDelta<T>) -> T {
    let relative = (T::one() - p) * params.transit_time_utility(delta);
    clamp_unit(p * (T::one() + relative))
}

fn clamp_unit<T: Scalar>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

/// Rescales the non-transit shares by `(1 - p'_transit) / (1 - p_transit)`.
///
/// A transit share of one leaves every other share at zero.
pub fn rescale_other_modes<T: Scalar>(shares: &ModeShares<T>, new_transit: T) -> ModeShares<T> {
    let old = shares.transit();
    let mut out = *shares;
    out.set(Mode::Transit, new_transit);
    if old >= T::one() {
        return out;
    }
    let scale = (T::one() - new_transit) / (T::one() - old);
    for mode in Mode::ALL {
        if mode != Mode::Transit {
            out.set(mode, clamp_unit(shares.get(mode) * scale));
        }
    }
    out
}

/// Value of time in $/hour implied by a per-minute time coefficient.
pub fn value_of_time<T: Scalar>(theta_time: T, theta_cost: T) -> Result<T> {
    if theta_cost == T::zero() {
        return Err(DemandError::ZeroCostCoefficient);
    }
    Ok((theta_time / theta_cost * T::lit(60.0)).abs())
}

/// Demand-weighted mean of parameter sets, e.g. finer-zone sets rolled up to
/// the analysis zone.
pub fn aggregate_params<T: Scalar>(inputs: &[(ChoiceParams<T>, T)]) -> Result<ChoiceParams<T>> {
    if inputs.is_empty() {
        return Err(DemandError::EmptyInput);
    }
    if inputs.iter().any(|(_, w)| !(*w > T::zero())) {
        return Err(DemandError::NonPositiveWeight);
    }
    if inputs.len() == 1 {
        return Ok(inputs[0].0);
    }
    let total: T = inputs.iter().map(|(_, w)| *w).sum();
    let mut acc = [T::zero(); 13];
    for (p, w) in inputs {
        for (a, v) in acc.iter_mut().zip(p.to_array()) {
            *a = *a + *w * v;
        }
    }
    Ok(ChoiceParams::from_array(acc.map(|a| a / total)))
}
