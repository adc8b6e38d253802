//! Dual-polarization soliton transmission over the Manakov channel: nonlinear
//! Fourier transform, Darboux synthesis, split-step fiber propagation,
//! differential phase modulation and ensemble statistics.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod darboux;
pub mod envelope;
pub mod error;
pub mod modem;
pub mod nft;
pub mod scalar;
pub mod spectrum;
pub mod ssfm;
pub mod stats;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Envelope = envelope::DualPolEnvelope<f64>;
pub type Grid = envelope::TimeGrid<f64>;
pub type Spectrum = spectrum::DiscreteSpectrum<f64>;
pub type Entry = spectrum::SpectralEntry<f64>;
