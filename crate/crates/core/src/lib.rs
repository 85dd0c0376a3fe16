//! Scenario evaluation for a proposed transit line.
//!
//! The crate is organised as a pipeline of stages:
//!
//! * [`gtfs`] reads, writes, synthesises and merges static GTFS feeds.
//! * [`skim`] plans transit journeys and builds per-period OD skim matrices.
//! * [`demand`] applies the logit elasticity update to trip-group mode shares and
//!   derives ridership, mode shift and emission savings.
//! * [`welfare`] computes logsum consumer surplus and the disparity and
//!   insufficiency equity indices.
//! * [`pipeline`] wires the stages together, persists intermediates and writes
//!   reports.
//!
//! The choice-model math is generic over a [`Scalar`] float type; the aliases
//! below fix it to `f64`, which is what the pipeline uses.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demand;
pub mod gtfs;
pub mod pipeline;
pub mod scalar;
pub mod skim;
pub mod welfare;

pub use scalar::Scalar;

pub type ChoiceParams = demand::ChoiceParams<f64>;
pub type ModeShares = demand::ModeShares<f64>;
pub type TripGroup = demand::TripGroup<f64>;
pub type TimeDelta = demand::TimeDelta<f64>;
pub type GroupOutcome = demand::GroupOutcome<f64>;
pub type ModeShift = demand::ModeShift<f64>;
pub type WelfareRecord = welfare::WelfareRecord<f64>;
pub type CsObservation = welfare::CsObservation<f64>;
pub type EquityReport = welfare::EquityReport<f64>;
