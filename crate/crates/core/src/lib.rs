//! Rabi-oscillation quantum state tomography.
//!
//! Simulates an NV-centre style electron/nuclear spin register, synthesizes
//! noisy Rabi oscillation traces, fits them to sinusoids, and reconstructs
//! single-qubit states from either the oscillation amplitudes (with a
//! reference trace) or the oscillation phases alone, alongside a standard
//! projective-readout baseline. An analysis layer reproduces the
//! error-sensitivity curves of both reconstructions and runs seeded
//! Monte-Carlo fidelity studies.
//!
//! The numeric core is generic over the real scalar via [`scalar::RealScalar`]
//! (`f32` or `f64`); the aliases at the crate root pin the default `f64`
//! precision used by the CLI.

pub mod analysis;
pub mod error;
pub mod fit;
pub mod gates;
pub mod io;
pub mod linalg;
pub mod rabi;
pub mod scalar;
pub mod spin;
pub mod tomo;

pub use error::{Error, Result};
pub use scalar::RealScalar;

/// Default-precision (f64) aliases.
pub type Matrix64 = linalg::ComplexMatrix<f64>;
pub type PureState64 = spin::PureState<f64>;
pub type DensityMatrix64 = spin::DensityMatrix<f64>;
pub type BlochVector64 = spin::BlochVector<f64>;
pub type StateAngles64 = spin::StateAngles<f64>;
pub type GateOp64 = gates::GateOp<f64>;
pub type HybridState64 = gates::HybridState<f64>;
pub type RabiConfig64 = rabi::RabiConfig<f64>;
pub type RabiTrace64 = rabi::RabiTrace<f64>;
pub type SineFit64 = fit::SineFit<f64>;
pub type TomographyResult64 = tomo::TomographyResult<f64>;

/// Single-precision aliases, for narrow-scalar instantiations.
pub type Matrix32 = linalg::ComplexMatrix<f32>;
pub type DensityMatrix32 = spin::DensityMatrix<f32>;
pub type BlochVector32 = spin::BlochVector<f32>;
pub type StateAngles32 = spin::StateAngles<f32>;
