//! Spectral analysis of the generalized Rosenau equation
//!
//! ```text
//! u_tt + δ(−Δ)^θ u_tt + μΔ²u − κΔu = 0,   x ∈ ℝⁿ
//! ```
//!
//! The solution is exact in Fourier space, `ŵ(t,ξ) = cos(tf)ŵ₀ + sin(tf)/f·ŵ₁`
//! with dispersion `f(r) = √((μr⁴+κr²)/(1+δr^{2θ}))`. This crate evaluates
//! `‖u(t)‖²` for radial data by oscillation-resolved quadrature, splits it into
//! frequency bands, assembles the explicit lower and upper envelopes of the
//! growth estimates, fits growth laws, and checks the Hardy-type and
//! multiplier identities that accompany them.
//!
//! Everything numerical is generic over [`Real`] (`f64` or `f32`); the
//! aliases at the crate root fix `f64`.
//!
//! Fourier convention: `û(ξ) = ∫ e^{-ix·ξ} u(x) dx`, so physical squared
//! norms equal `(2π)^{-n}` times spectral ones.
// `!(x > 0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod data;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod growth;
pub mod hardy;
pub mod model;
pub mod moments;
pub mod quadrature;
pub mod radial_norm;
pub mod scalar;
pub mod special;
pub mod wellposed;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ModelParams = model::ModelParams<f64>;
pub type SincConstants = model::SincConstants<f64>;
pub type BandBoundaries = model::BandBoundaries<f64>;
pub type ModePair = evolution::ModePair<f64>;
pub type EnergyReport = evolution::EnergyReport<f64>;
pub type RadialInitialData = data::RadialInitialData<f64>;
pub type RadialFunction = data::RadialFunction<f64>;
pub type GridField = grid::GridField<f64>;
pub type QuadratureConfig = radial_norm::QuadratureConfig<f64>;
pub type NormTrace = radial_norm::NormTrace<f64>;
pub type NormEstimate = radial_norm::NormEstimate<f64>;
pub type MomentDecomposition = moments::MomentDecomposition<f64>;
pub type EnvelopeReport = bounds::EnvelopeReport<f64>;
pub type TailRemainder = bounds::TailRemainder<f64>;
pub type LowerEnvelope = bounds::LowerEnvelope<f64>;
pub type UpperEnvelope = bounds::UpperEnvelope<f64>;
pub type GrowthFit = growth::GrowthFit<f64>;
pub type GrowthClassification = growth::GrowthClassification<f64>;
pub type SandwichReport = growth::SandwichReport<f64>;
pub type QuotientTrace = hardy::QuotientTrace<f64>;
pub type BlowupScan = hardy::BlowupScan<f64>;
pub type EnergyIdentity = hardy::EnergyIdentity<f64>;
pub type MultiplierScan = wellposed::MultiplierScan<f64>;
pub type SobolevEquivalence = wellposed::SobolevEquivalence<f64>;
