use std::collections::BTreeMap;

use serde::Serialize;

use super::{CsObservation, Result, WelfareError};
use crate::demand::Segment;
use crate::Scalar;

/// Subset of trip groups an index is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    All,
    LowIncome,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::All => "all",
            Scope::LowIncome => "low_income",
        }
    }

    pub fn contains(self, segment: Segment) -> bool {
        match self {
            Scope::All => true,
            Scope::LowIncome => segment == Segment::LowIncome,
        }
    }
}

fn weighted_mean<'a, T: Scalar>(obs: impl Iterator<Item = &'a CsObservation<T>>, scope: Scope) -> Result<T> {
    let (mut num, mut den) = (T::zero(), T::zero());
    for o in obs {
        num = num + o.trips * o.cs;
        den = den + o.trips;
    }
    if den > T::zero() {
        Ok(num / den)
    } else {
        Err(WelfareError::EmptyScope(scope.as_str()))
    }
}

/// Trip-weighted mean surplus over a scope.
pub fn mean_cs<T: Scalar>(obs: &[CsObservation<T>], scope: Scope) -> Result<T> {
    weighted_mean(obs.iter().filter(|o| scope.contains(o.segment)), scope)
}

/// Ratio of mean surplus in `scope` to the population mean.
pub fn csdi_scoped<T: Scalar>(obs: &[CsObservation<T>], scope: Scope) -> Result<T> {
    let all = mean_cs(obs, Scope::All)?;
    if all == T::zero() {
        return Err(WelfareError::ZeroAverage);
    }
    Ok(mean_cs(obs, scope)? / all)
}

/// Low-income surplus distribution index.
pub fn csdi<T: Scalar>(obs: &[CsObservation<T>]) -> Result<T> {
    csdi_scoped(obs, Scope::LowIncome)
}

/// Squared-gap insufficiency index and the trip share below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Insufficiency<T> {
    pub index: T,
    pub rate: T,
}

/// `sum d * max(0, (z - cs) / z)^2 / sum d` over the groups in `scope`.
///
/// Logsum surplus can be negative; the normalised gap is capped at one so a
/// negative surplus counts as a full shortfall and the index stays in [0, 1].
pub fn csii<T: Scalar>(obs: &[CsObservation<T>], scope: Scope, z: T) -> Result<Insufficiency<T>> {
    if !(z > T::zero()) {
        return Err(WelfareError::NonPositiveThreshold(z.as_f64()));
    }
    let (mut gap, mut below, mut den) = (T::zero(), T::zero(), T::zero());
    for o in obs.iter().filter(|o| scope.contains(o.segment)) {
        den = den + o.trips;
        if o.cs < z {
            let g = ((z - o.cs) / z).min(T::one());
            gap = gap + o.trips * g * g;
            below = below + o.trips;
        }
    }
    if !(den > T::zero()) {
        return Err(WelfareError::EmptyScope(scope.as_str()));
    }
    Ok(Insufficiency { index: gap / den, rate: below / den })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold<T> {
    pub fraction: T,
    pub z: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsiiEntry<T> {
    pub scope: Scope,
    pub fraction: T,
    pub z: T,
    pub pre: T,
    pub post: T,
    pub delta: T,
    pub rate_pre: T,
    pub rate_post: T,
    pub rate_delta: T,
}

/// Before/after equity summary. Thresholds are fixed from the pre-scenario
/// population mean so both sides are measured against the same line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquityReport<T> {
    pub mean_cs_pre: T,
    pub mean_cs_post: T,
    pub mean_cs_low_income_pre: T,
    pub mean_cs_low_income_post: T,
    pub csdi_pre: T,
    pub csdi_post: T,
    pub csdi_delta: T,
    pub thresholds: Vec<Threshold<T>>,
    pub csii: Vec<CsiiEntry<T>>,
}

fn aligned<T>(obs: &[CsObservation<T>]) -> BTreeMap<&str, &CsObservation<T>> {
    obs.iter().map(|o| (o.key.as_str(), o)).collect()
}

pub fn equity_report<T: Scalar>(
    pre: &[CsObservation<T>],
    post: &[CsObservation<T>],
    fractions: &[T],
) -> Result<EquityReport<T>> {
    let (a, b) = (aligned(pre), aligned(post));
    if a.len() != pre.len() || b.len() != post.len() || a.len() != b.len() || !a.keys().eq(b.keys()) {
        return Err(WelfareError::KeyMismatch);
    }
    if a.values().zip(b.values()).any(|(x, y)| x.segment != y.segment || x.trips != y.trips) {
        return Err(WelfareError::KeyMismatch);
    }

    let mean_pre = mean_cs(pre, Scope::All)?;
    let csdi_pre = csdi(pre)?;
    let csdi_post = csdi(post)?;
    let thresholds: Vec<Threshold<T>> =
        fractions.iter().map(|&fraction| Threshold { fraction, z: fraction * mean_pre }).collect();

    let mut entries = Vec::new();
    for scope in [Scope::LowIncome, Scope::All] {
        for t in &thresholds {
            let before = csii(pre, scope, t.z)?;
            let after = csii(post, scope, t.z)?;
            entries.push(CsiiEntry {
                scope,
                fraction: t.fraction,
                z: t.z,
                pre: before.index,
                post: after.index,
                delta: after.index - before.index,
                rate_pre: before.rate,
                rate_post: after.rate,
                rate_delta: after.rate - before.rate,
            });
        }
    }

    Ok(EquityReport {
        mean_cs_pre: mean_pre,
        mean_cs_post: mean_cs(post, Scope::All)?,
        mean_cs_low_income_pre: mean_cs(pre, Scope::LowIncome)?,
        mean_cs_low_income_post: mean_cs(post, Scope::LowIncome)?,
        csdi_pre,
        csdi_post,
        csdi_delta: csdi_post - csdi_pre,
        thresholds,
        csii: entries,
    })
}
