//! Link-level simulator for multiuser mmWave massive-MIMO downlink with
//! hybrid precoding.
//!
//! The pipeline of one trial is
//! channel generation ([`channel`]) → uplink beam training ([`training`]) →
//! beam allocation ([`allocation`]) → analog/digital precoder design
//! ([`precoding`]) → achievable rate ([`metrics`]). [`sim`] runs it as a
//! seeded Monte-Carlo experiment and backs the command-line tool.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the simulator uses.

pub mod allocation;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod precoding;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ComplexMatrix = linalg::ComplexMatrix<f64>;
pub type SteeringVector = channel::SteeringVector<f64>;
pub type Codebook = channel::Codebook<f64>;
pub type ChannelRealization = channel::ChannelRealization<f64>;
pub type Codebooks = training::Codebooks<f64>;
pub type MeasurementMatrix = training::MeasurementMatrix<f64>;
pub type PrecoderSet = precoding::PrecoderSet<f64>;

pub type ComplexMatrixF32 = linalg::ComplexMatrix<f32>;
pub type ChannelRealizationF32 = channel::ChannelRealization<f32>;
pub type MeasurementMatrixF32 = training::MeasurementMatrix<f32>;
