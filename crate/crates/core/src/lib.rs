//! Computable invariants of Reeb-foliation flows on the punctured quarter-plane.
//!
//! Transition-time functions of flows live in the space E of functions on
//! `(0, inf)` diverging at 0. This crate realizes flows from such functions
//! and extracts them back, computes the oscillation functionals `f*` and
//! `f#` together with `sigma = limsup f*`, runs the Koenigs-style
//! linearization of `lambda f = f o h + k`, and classifies flows as standard
//! or not.
//!
//! Numeric kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix `f64`.

pub mod classify;
pub mod cli;
pub mod efunc;
pub mod error;
pub mod homeo;
pub mod linearize;
pub mod oscillation;
pub mod plot;
pub mod real;
pub mod reebflow;
pub mod report;

pub use error::{Error, Result};
pub use real::Real;

pub use classify::{Thresholds as GenericThresholds, Verdict};
pub use efunc::{FunctionClass, FunctionSpec, GridSpec};
pub use homeo::BasinCase;
pub use oscillation::{Trend, Variant};
pub use reebflow::{FlowConfig, FlowKind};

pub type EFunction = efunc::EFunction<f64>;
pub type Shift = efunc::Shift<f64>;
pub type GridProfile = efunc::GridProfile<f64>;
pub type Homeo = homeo::Homeo<f64>;
pub type BasinReport = homeo::BasinReport<f64>;
pub type OscillationProfile = oscillation::OscillationProfile<f64>;
pub type SigmaEstimate = oscillation::SigmaEstimate<f64>;
pub type EquivalenceWitness = oscillation::EquivalenceWitness<f64>;
pub type WitnessReport = oscillation::WitnessReport<f64>;
pub type Lemma2Report = oscillation::Lemma2Report<f64>;
pub type LinearizeConfig = linearize::LinearizeConfig<f64>;
pub type LinearizeResult = linearize::LinearizeResult<f64>;
pub type Flow = reebflow::Flow<f64>;
pub type QuarterPlanePoint = reebflow::QuarterPlanePoint<f64>;
pub type LeafCoords = reebflow::LeafCoords<f64>;
pub type Transversal = reebflow::Transversal<f64>;
pub type Thresholds = classify::Thresholds<f64>;
pub type ClassificationReport = classify::ClassificationReport<f64>;
