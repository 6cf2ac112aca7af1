//! Coincidence-rate interference of spatially modulated type-II SPDC pairs.
//!
//! A photon pair from a birefringent crystal passes a Fourier-plane phase
//! modulator (spatial light modulator or deformable mirror) before a
//! polarization interferometer. The coincidence rate versus delay is a
//! triangular dip shaped by the walk-off, the detection pupils and the
//! modulator phase. The crate evaluates it three ways:
//!
//! - [`analytic`]: closed forms (no modulation, linear tilt) and reduced
//!   integrals (large-pupil limit, pointlike detector).
//! - [`kernels`]: the pixel method. Configuration-dependent kernels are
//!   tabulated once and any pixel mask is then a weighted double sum.
//! - [`oracle`]: brute-force quadrature of the exact double-momentum
//!   integrals, used to validate the other two.
//!
//! Modulator phases come from [`zernike`] (synthesis, parity splitting and
//! pixelization) or from mask files.
//!
//! All quantities are SI internally.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analytic;
pub mod apertures;
pub mod error;
pub mod kernels;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod trace;
pub mod zernike;

pub use apertures::{gaussian_equivalent, p_tilde, q_tilde, Aperture, ApertureKind, ApertureLabel};
pub use error::{HomError, Result};

pub use model::{
    biphoton_amplitude, phase_mismatch, rect, sinc, triangle, CrystalParams, DelayScan, OpticalLayout, Vec2,
};
pub use num_complex::Complex64;

pub use kernels::{KernelConfig, KernelTable};
pub use trace::DipTrace;
pub use zernike::{PhaseMask, ZernikeSpec, ZernikeTerm};
