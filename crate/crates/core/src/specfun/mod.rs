//! Special functions used by the closed-form amplitudes and normalizations.
//!
//! Everything here is a pure function of its arguments. Values carry an
//! absolute accuracy of 1e-10 or better for `f64` arguments with magnitude up
//! to 100 inside the documented domain; the `*_est` variants return the
//! value together with a running error estimate.

mod erf;
mod fresnel;
mod gamma;

pub use erf::{erf, erf_est, erfc, re_erf_complex, re_erf_complex_est, re_erf_complex_scaled};
pub use fresnel::{fresnel_c2, fresnel_c2_est, fresnel_cs, fresnel_s2, fresnel_s2_est};
pub use gamma::{gamma, gamma_lower, gamma_p, gamma_q, gamma_upper, gamma_upper_est, ln_gamma};

use crate::Real;

/// A special-function value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecFunResult<T> {
    pub value: T,
    pub est_abs_error: T,
}

impl<T: Real> SpecFunResult<T> {
    pub(crate) fn new(value: T, est_abs_error: T) -> Self {
        Self {
            value,
            est_abs_error: est_abs_error.abs(),
        }
    }
}

/// Iteration cap shared by the series and continued fractions.
pub(crate) const MAX_ITER: usize = 10_000;
