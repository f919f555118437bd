//! Conditional angle density under perfect angle correlation and the
//! zero-phase conditional wavefunction.
//!
//! With the two-photon angle density sharply peaked at `phi1 - phi2 = pi`,
//! the probability of finding the idler behind aperture 2 given a signal
//! aperture 1 reduces to the periodic convolution `P1 * P2`. For symmetric
//! apertures the `pi` shift and the sign of the second orientation drop out.

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::aperture::AngularDensity;
use crate::{Error, Real, Result};

fn check_same_grid<T: Real>(p1: &AngularDensity<T>, p2: &AngularDensity<T>) -> Result<()> {
    if p1.n() != p2.n() {
        return Err(Error::GridMismatch {
            left: p1.n(),
            right: p2.n(),
        });
    }
    Ok(())
}

fn convolved_meta<T: Real>(p1: &AngularDensity<T>, p2: &AngularDensity<T>) -> String {
    format!("({}) * ({})", p1.meta(), p2.meta())
}

// sum_k a[k] b[(i - k + n/2) mod n]
fn direct_bin<T: Real>(a: &[T], b: &[T], i: usize) -> T {
    let n = a.len();
    let mut acc = T::zero();
    for (k, &ak) in a.iter().enumerate() {
        if ak != T::zero() {
            acc += ak * b[(i + n + n / 2 - k) % n];
        }
    }
    acc
}

/// Periodic convolution by direct summation.
///
/// The grid origin sits at index `n / 2`, so the sum is taken as
/// `out[i] = h * sum_k p1[k] * p2[(i - k + n/2) mod n]`: a density centered at
/// the origin convolved with another one stays centered there. The result is
/// renormalized to unit discrete integral.
pub fn convolve_periodic<T: Real>(
    p1: &AngularDensity<T>,
    p2: &AngularDensity<T>,
) -> Result<AngularDensity<T>> {
    check_same_grid(p1, p2)?;
    let n = p1.n();
    let h = p1.step();
    let a = p1.values();
    let b = p2.values();
    let out: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| direct_bin(a, b, i) * h)
        .collect();
    Ok(AngularDensity::from_values(out, convolved_meta(p1, p2))?.renormalized())
}

/// Same result as [`convolve_periodic`] through a circular FFT.
///
/// FFT round-off is absolute, of order `eps * max`, and the square root taken
/// downstream turns it into `sqrt(eps)`-sized noise wherever the density is
/// near zero. Bins below `1e-6` of the peak are therefore recomputed by direct
/// summation; the rest keep their FFT values.
pub fn convolve_periodic_fft<T: Real>(
    p1: &AngularDensity<T>,
    p2: &AngularDensity<T>,
) -> Result<AngularDensity<T>> {
    check_same_grid(p1, p2)?;
    let n = p1.n();
    let h = p1.step();
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa: Vec<Complex<T>> = p1
        .values()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    let mut fb: Vec<Complex<T>> = p2
        .values()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inv.process(&mut fa);
    let scale = h / T::from_int(n as i64);
    let mut out: Vec<T> = (0..n).map(|i| fa[(i + n / 2) % n].re * scale).collect();
    let peak = out.iter().copied().fold(T::zero(), T::max);
    let floor = peak * T::lit(1e-6);
    let (a, b) = (p1.values(), p2.values());
    out.par_iter_mut()
        .enumerate()
        .filter(|(_, v)| **v < floor)
        .for_each(|(i, v)| {
            *v = direct_bin(a, b, i) * h;
        });
    Ok(AngularDensity::from_values(out, convolved_meta(p1, p2))?.renormalized())
}

/// Closed form of the convolution of two centered rectangular apertures.
///
/// With `d1 = (w1 + w2) / 2` and `d2 = (w1 - w2) / 2` the density is a
/// trapezoid: plateau `(d1 - d2) / (d1^2 - d2^2) = 1 / w1` for `|phi| < d2`,
/// linear shoulders down to zero at `|phi| = d1`. The arguments may come in
/// either order since the convolution is commutative.
pub fn rect_conditional_density<T: Real>(w1: T, w2: T, phi: T) -> Result<T> {
    for (field, w) in [("w1", w1), ("w2", w2)] {
        if !(w > T::zero() && w <= T::TAU()) {
            return Err(Error::InvalidAperture {
                field,
                value: w.as_f64(),
                constraint: "0 < w <= 2 pi",
            });
        }
    }
    if w1 + w2 > T::TAU() {
        return Err(Error::InvalidAperture {
            field: "w1 + w2",
            value: (w1 + w2).as_f64(),
            constraint: "w1 + w2 <= 2 pi (the overlap formula does not wrap)",
        });
    }
    let (w1, w2) = if w2 > w1 { (w2, w1) } else { (w1, w2) };
    let two = T::lit(2.0);
    let d1 = (w1 + w2) / two;
    let d2 = (w1 - w2) / two;
    let denom = d1 * d1 - d2 * d2;
    let x = crate::real::wrap_angle(phi).abs();
    Ok(if x < d2 {
        (d1 - d2) / denom
    } else if x < d1 {
        (d1 - x) / denom
    } else {
        T::zero()
    })
}

/// The real, non-negative wavefunction `psi = sqrt(P)` (phase `alpha = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalWavefunction<T> {
    values: Vec<T>,
    source: String,
}

impl<T: Real> ConditionalWavefunction<T> {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn step(&self) -> T {
        crate::aperture::grid_step(self.n())
    }

    /// `sum |psi|^2 * h`.
    pub fn norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>() * self.step()
    }

    /// The density `psi^2`.
    pub fn density(&self) -> Vec<T> {
        self.values.iter().map(|&v| v * v).collect()
    }
}

/// Pointwise square root of a normalized density.
pub fn conditional_wavefunction<T: Real>(p: &AngularDensity<T>) -> ConditionalWavefunction<T> {
    ConditionalWavefunction {
        values: p.values().iter().map(|&v| v.sqrt()).collect(),
        source: p.meta().to_string(),
    }
}
