//! Numerical toolkit for the angular EPR criterion with orbital angular
//! momentum (OAM) and angular position.
//!
//! The pipeline follows one conditional measurement:
//!
//! 1. [`aperture`] samples the signal and idler aperture densities on a
//!    uniform grid over `[-pi, pi)`.
//! 2. [`correlate`] forms their periodic convolution (the conditional angle
//!    density under perfect angle correlation) and the zero-phase conditional
//!    wavefunction `psi = sqrt(P)`.
//! 3. [`oam`] transforms `psi` into OAM amplitudes and evaluates truncated
//!    conditional variances, next to the closed-form spectra for rectangular
//!    and Gaussian apertures.
//! 4. [`criterion`] compares the measured OAM conditional variance with the
//!    inferred minimum variance.
//!
//! All numerical code is generic over the scalar type through [`Real`];
//! the aliases below fix it to `f64` (and `f32` where that is useful).
//!
//! ```
//! use oam_epr::{conditional_variance, conditional_wavefunction, convolve_periodic, transform_numeric, ApertureSpec};
//!
//! let a1 = ApertureSpec::gauss(std::f64::consts::FRAC_PI_4)?;
//! let a2 = ApertureSpec::gauss(std::f64::consts::PI / 64.0)?;
//! let p = convolve_periodic(&a1.sample(512)?, &a2.sample(512)?)?;
//! let spectrum = transform_numeric(&conditional_wavefunction(&p), 64)?;
//! let var = conditional_variance(&spectrum)?;
//! assert!((var - 0.8074).abs() < 1e-3);
//! # Ok::<(), oam_epr::Error>(())
//! ```

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aperture;
pub mod correlate;
pub mod criterion;
pub mod error;
pub mod export;
pub mod oam;
pub mod real;
pub mod specfun;

pub use aperture::{angle_moments, check_uncertainty, ApertureShape, UncertaintyReport};
pub use correlate::{
    conditional_wavefunction, convolve_periodic, convolve_periodic_fft, rect_conditional_density,
};
pub use criterion::{evaluate, lhs_average, rhs_average, CriterionOptions};
pub use error::{Error, Result};
pub use oam::{
    classify_convergence, conditional_variance, gauss_amplitude_approx,
    gauss_density_transform_analytic, rect_amplitude_analytic, transform_numeric, Convergence,
    Provenance,
};
pub use real::Real;

pub type ApertureSpec = aperture::ApertureSpec<f64>;
pub type AngularDensity = aperture::AngularDensity<f64>;
pub type ConditionalWavefunction = correlate::ConditionalWavefunction<f64>;
pub type OamSpectrum = oam::OamSpectrum<f64>;
pub type VarianceSeries = oam::VarianceSeries<f64>;
pub type OamCorrelationModel = criterion::OamCorrelationModel<f64>;
pub type CriterionReport = criterion::CriterionReport<f64>;
pub type SpecFunResult = specfun::SpecFunResult<f64>;

pub type ApertureSpec32 = aperture::ApertureSpec<f32>;
pub type AngularDensity32 = aperture::AngularDensity<f32>;
pub type ConditionalWavefunction32 = correlate::ConditionalWavefunction<f32>;
pub type OamSpectrum32 = oam::OamSpectrum<f32>;

/// Default grid size for sampled densities.
pub const DEFAULT_GRID_N: usize = 512;
