//! Free induction decays and NMR line shapes of spin-1/2 gases confined in
//! fluctuating or vibrating nano-containers.
//!
//! Every numeric routine is generic over the scalar type through
//! [`scalar::Real`]; the aliases below fix it to `f64` or `f32`.

pub mod cli;
pub mod error;
pub mod fid;
pub mod model;
pub mod quad;
pub mod scalar;
pub mod specfun;
pub mod spectrum;
pub mod stochastic;

pub use error::{Error, Result};

pub type ContainerGeometry64 = model::ContainerGeometry<f64>;
pub type ContainerGeometry32 = model::ContainerGeometry<f32>;
pub type GaussianFluctuationModel64 = model::GaussianFluctuationModel<f64>;
pub type GaussianFluctuationModel32 = model::GaussianFluctuationModel<f32>;
pub type VibrationModel64 = model::VibrationModel<f64>;
pub type VibrationModel32 = model::VibrationModel<f32>;
pub type FrequencyDistribution64 = model::FrequencyDistribution<f64>;
pub type FrequencyDistribution32 = model::FrequencyDistribution<f32>;
pub type TimeGrid64 = fid::TimeGrid<f64>;
pub type TimeGrid32 = fid::TimeGrid<f32>;
pub type CouplingTrajectory64 = fid::CouplingTrajectory<f64>;
pub type CouplingTrajectory32 = fid::CouplingTrajectory<f32>;
pub type FidSeries64 = fid::FidSeries<f64>;
pub type FidSeries32 = fid::FidSeries<f32>;
pub type Spectrum64 = spectrum::Spectrum<f64>;
pub type Spectrum32 = spectrum::Spectrum<f32>;
pub type TransformPlan64 = spectrum::TransformPlan<f64>;
pub type TransformPlan32 = spectrum::TransformPlan<f32>;
pub type McConfig64 = stochastic::McConfig<f64>;
pub type McConfig32 = stochastic::McConfig<f32>;
pub type McResult64 = stochastic::McResult<f64>;
pub type McResult32 = stochastic::McResult<f32>;
