//! Angle to OAM transforms and truncated conditional variances.
//!
//! Amplitudes follow `c_m = (1/sqrt(2 pi)) * int_{-pi}^{pi} e^{i m phi} psi(phi) dphi`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::aperture::grid_angle;
use crate::correlate::ConditionalWavefunction;
use crate::specfun::{erf, fresnel_c2, fresnel_s2, re_erf_complex_scaled};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Numeric,
    AnalyticRect,
    GaussApprox,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Numeric => "numeric",
            Provenance::AnalyticRect => "analytic_rect",
            Provenance::GaussApprox => "gauss_approx",
        })
    }
}

/// Real OAM amplitudes `c_m` for `m = -m_max..=m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct OamSpectrum<T> {
    m_max: usize,
    amps: Vec<T>,
    provenance: Provenance,
    grid_n: Option<usize>,
}

impl<T: Real> OamSpectrum<T> {
    /// `amps[j]` holds `c_{j - m_max}`.
    pub fn new(
        m_max: usize,
        amps: Vec<T>,
        provenance: Provenance,
        grid_n: Option<usize>,
    ) -> Result<Self> {
        if m_max == 0 {
            return Err(Error::InvalidArgument {
                name: "m_max",
                detail: "must be >= 1".into(),
            });
        }
        if amps.len() != 2 * m_max + 1 {
            return Err(Error::InvalidArgument {
                name: "amps",
                detail: format!("expected {} amplitudes, got {}", 2 * m_max + 1, amps.len()),
            });
        }
        Ok(Self {
            m_max,
            amps,
            provenance,
            grid_n,
        })
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    pub fn amps(&self) -> &[T] {
        &self.amps
    }

    /// `c_m`, zero outside the stored range.
    pub fn amp(&self, m: i64) -> T {
        if m.unsigned_abs() as usize > self.m_max {
            return T::zero();
        }
        self.amps[(m + self.m_max as i64) as usize]
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn grid_n(&self) -> Option<usize> {
        self.grid_n
    }

    /// `(m, c_m)` pairs in increasing `m`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, T)> + Clone + '_ {
        let off = self.m_max as i64;
        self.amps
            .iter()
            .enumerate()
            .map(move |(j, &c)| (j as i64 - off, c))
    }

    /// `sum |c_m|^2` over the stored range.
    pub fn parseval_sum(&self) -> T {
        self.amps.iter().map(|&c| c * c).sum()
    }

    /// The spectrum cut down to `|m| <= m_max`.
    pub fn truncated(&self, m_max: usize) -> Result<Self> {
        if m_max > self.m_max {
            return Err(Error::InvalidArgument {
                name: "m_max",
                detail: format!("{m_max} exceeds the stored truncation {}", self.m_max),
            });
        }
        let lo = self.m_max - m_max;
        Self::new(
            m_max,
            self.amps[lo..lo + 2 * m_max + 1].to_vec(),
            self.provenance,
            self.grid_n,
        )
    }
}

/// Upper bound on the truncation index for an `n`-point grid.
pub fn truncation_bound(n: usize) -> usize {
    n / 4
}

fn check_truncation(m_max: usize, n: usize) -> Result<()> {
    let bound = truncation_bound(n);
    if m_max == 0 {
        return Err(Error::InvalidArgument {
            name: "m_max",
            detail: "must be >= 1".into(),
        });
    }
    if m_max > bound {
        return Err(Error::TruncationTooLarge { m_max, bound });
    }
    Ok(())
}

// e^{i 2 pi j / n}
fn roots_of_unity<T: Real>(n: usize) -> Vec<Complex<T>> {
    (0..n)
        .map(|j| {
            Complex::from_polar(
                T::one(),
                T::TAU() * T::from_int(j as i64) / T::from_int(n as i64),
            )
        })
        .collect()
}

// h * sum_k x_k e^{i m phi_k}
fn rectangle_rule<T: Real>(x: &[Complex<T>], m: i64, roots: &[Complex<T>]) -> Complex<T> {
    let n = x.len() as i64;
    let half = n / 2;
    let h = T::TAU() / T::from_int(n);
    let mut acc = Complex::new(T::zero(), T::zero());
    for (k, &v) in x.iter().enumerate() {
        if v.re != T::zero() || v.im != T::zero() {
            let j = (m * (k as i64 - half)).rem_euclid(n) as usize;
            acc += v * roots[j];
        }
    }
    acc * h
}

// zeta(-1/2 - k), k = 0..15
const ZETA_NEG_HALF: [f64; 16] = [
    -0.207_886_224_977_354_57,
    -0.025_485_201_889_833_036,
    0.008_516_928_777_850_331,
    0.004_441_011_335_479_432,
    -0.003_091_669_247_215_833_8,
    -0.002_671_458_019_899_224_6,
    0.002_746_767_939_536_868_8,
    0.003_269_039_572_600_22,
    -0.004_416_032_873_004_89,
    -0.006_672_172_296_466_641,
    0.011_146_122_473_942_814,
    0.020_396_978_715_942_79,
    -0.040_574_967_481_194_58,
    -0.087_175_255_906_217_25,
    0.201_174_049_384_226_9,
    0.496_271_219_912_057_6,
];

// B_2, B_4, B_6
const BERNOULLI: [f64; 3] = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0];

enum Corner<T> {
    /// psi vanishes at `at` and rises like `sqrt(kappa * |phi - at|)` on side `sigma`.
    SqrtEdge { at: T, sigma: T, kappa: T },
    /// The density is linear on both sides with a slope jump at a positive value.
    Kink { at: T, p0: T, left: T, right: T },
}

/// Locates the points where `p` is piecewise linear with a corner. At such
/// points `sqrt(p)` loses smoothness and the periodic rectangle rule is no
/// longer spectrally accurate.
fn find_corners<T: Real>(p: &[T]) -> Vec<Corner<T>> {
    let n = p.len();
    let h = T::TAU() / T::from_int(n as i64);
    let scale = p.iter().copied().fold(T::zero(), T::max);
    if scale <= T::zero() {
        return Vec::new();
    }
    let lin_tol = T::tol(1e-9, 64.0) * scale;
    let zero_tol = T::tol(1e-14, 4.0) * scale;
    let slope_tol = T::tol(1e-6, 1024.0) * scale / h;
    let mut out = Vec::new();
    for i in 0..n {
        let q = |d: i64| p[(i as i64 + d).rem_euclid(n as i64) as usize];
        let lin_left = (q(-2) - T::lit(2.0) * q(-1) + q(0)).abs() <= lin_tol;
        let lin_right = (q(0) - T::lit(2.0) * q(1) + q(2)).abs() <= lin_tol;
        let s_left = (q(0) - q(-1)) / h;
        let s_right = (q(1) - q(0)) / h;
        let at = grid_angle::<T>(n, i);
        if q(0) <= zero_tol {
            if lin_right && s_right > slope_tol {
                out.push(Corner::SqrtEdge {
                    at,
                    sigma: T::one(),
                    kappa: s_right,
                });
            }
            if lin_left && -s_left > slope_tol {
                out.push(Corner::SqrtEdge {
                    at,
                    sigma: -T::one(),
                    kappa: -s_left,
                });
            }
        } else if lin_left && lin_right && (s_right - s_left).abs() > slope_tol {
            out.push(Corner::Kink {
                at,
                p0: q(0),
                left: s_left,
                right: s_right,
            });
        }
    }
    out
}

fn factorial<T: Real>(k: usize) -> T {
    (1..=k).fold(T::one(), |acc, j| acc * T::from_int(j as i64))
}

fn binomial<T: Real>(n: usize, k: usize) -> T {
    factorial::<T>(n) / (factorial::<T>(k) * factorial::<T>(n - k))
}

// k-th derivative of sqrt(p0 + s x) at x = 0
fn sqrt_linear_derivative<T: Real>(p0: T, s: T, k: usize) -> T {
    let mut c = T::one();
    for j in 0..k {
        c *= T::lit(0.5) - T::from_int(j as i64);
    }
    s.powi(k as i32) * c * p0.powf(T::lit(0.5) - T::from_int(k as i64))
}

/// Error of the rectangle rule at one corner, for the transform at order `m`.
///
/// Square-root edges use the Navot extension of Euler-Maclaurin (zeta values
/// at negative half-integers); kinks use the Euler-Maclaurin jump terms.
fn corner_error<T: Real>(corner: &Corner<T>, m: i64, h: T) -> Complex<T> {
    let im = Complex::new(T::zero(), T::from_int(m));
    match *corner {
        Corner::SqrtEdge { at, sigma, kappa } => {
            let mut total = Complex::new(T::zero(), T::zero());
            let mut pw = Complex::new(T::one(), T::zero());
            let mut hk = h * h.sqrt();
            for (k, &z) in ZETA_NEG_HALF.iter().enumerate() {
                total += pw * (T::lit(z) * kappa.sqrt() * hk / factorial::<T>(k));
                pw = pw * im * sigma;
                hk *= h;
            }
            total * Complex::from_polar(T::one(), T::from_int(m) * at)
        }
        Corner::Kink {
            at,
            p0,
            left,
            right,
        } => {
            let mut total = Complex::new(T::zero(), T::zero());
            for (j, &b) in BERNOULLI.iter().enumerate() {
                let order = 2 * j + 1;
                let mut jump = Complex::new(T::zero(), T::zero());
                for k in 1..=order {
                    let d =
                        sqrt_linear_derivative(p0, left, k) - sqrt_linear_derivative(p0, right, k);
                    jump += im.powi((order - k) as i32) * (binomial::<T>(order, k) * d);
                }
                total += jump * (T::lit(b) / factorial::<T>(2 * j + 2) * h.powi(2 * j as i32 + 2));
            }
            total * Complex::from_polar(T::one(), T::from_int(m) * at)
        }
    }
}

// circular mean of the density, snapped to the half-bin lattice when close
fn symmetry_center<T: Real>(p: &[T]) -> T {
    let n = p.len();
    let h = T::TAU() / T::from_int(n as i64);
    let z: Complex<T> = p
        .iter()
        .enumerate()
        .map(|(k, &v)| Complex::from_polar(v, grid_angle::<T>(n, k)))
        .sum();
    if z.norm() * h < T::tol(1e-12, 64.0) {
        return T::zero();
    }
    let c = z.arg();
    let half_bins = c / (h / T::lit(2.0));
    if (half_bins - half_bins.round()).abs() < T::tol(1e-6, 1e3) {
        half_bins.round() * h / T::lit(2.0)
    } else {
        c
    }
}

/// OAM amplitudes of a real, non-negative wavefunction.
///
/// The periodic rectangle rule on the grid is spectrally accurate for smooth
/// `psi` but only `O(h^1.5)` where `psi` is the square root of a density with
/// linear shoulders (rect-rect trapezoids). Such corners are detected on the
/// grid and their leading error terms subtracted.
///
/// The phase `e^{i m c}` from the symmetry center `c` of the density is removed,
/// so a density that is even about any grid point or half-point yields real
/// amplitudes. A remaining imaginary part above `1e-10` is an error.
pub fn transform_numeric<T: Real>(
    psi: &ConditionalWavefunction<T>,
    m_max: usize,
) -> Result<OamSpectrum<T>> {
    let n = psi.n();
    check_truncation(m_max, n)?;
    let h = psi.step();
    let p = psi.density();
    let corners = find_corners(&p);
    let center = symmetry_center(&p);
    let roots = roots_of_unity::<T>(n);
    let x: Vec<Complex<T>> = psi
        .values()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    let inv_sqrt = T::one() / T::TAU().sqrt();
    let coeffs: Vec<Complex<T>> = (0..=m_max as i64)
        .into_par_iter()
        .map(|m| {
            let mut c = rectangle_rule(&x, m, &roots);
            for corner in &corners {
                c -= corner_error(corner, m, h);
            }
            c * inv_sqrt * Complex::from_polar(T::one(), -T::from_int(m) * center)
        })
        .collect();
    let residue = coeffs.iter().map(|c| c.im.abs()).fold(T::zero(), T::max);
    let tolerance = T::tol(1e-10, 1e4);
    if residue > tolerance {
        return Err(Error::ImaginaryResidue {
            residue: residue.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    // psi real: c_{-m} is the conjugate of c_m, and both are real here
    let amps: Vec<T> = (-(m_max as i64)..=m_max as i64)
        .map(|m| coeffs[m.unsigned_abs() as usize].re)
        .collect();
    OamSpectrum::new(m_max, amps, Provenance::Numeric, Some(n))
}

/// Plain rectangle-rule transform of a complex wavefunction on the grid,
/// for `m = -m_max..=m_max`. No centering or corner handling.
pub fn transform_complex<T: Real>(psi: &[Complex<T>], m_max: usize) -> Result<Vec<Complex<T>>> {
    crate::aperture::check_grid(psi.len())?;
    check_truncation(m_max, psi.len())?;
    let roots = roots_of_unity::<T>(psi.len());
    let inv_sqrt = T::one() / T::TAU().sqrt();
    Ok((-(m_max as i64)..=m_max as i64)
        .into_par_iter()
        .map(|m| rectangle_rule(psi, m, &roots) * inv_sqrt)
        .collect())
}

fn check_width<T: Real>(field: &'static str, w: T) -> Result<()> {
    if !(w > T::zero() && w <= T::TAU()) {
        return Err(Error::InvalidAperture {
            field,
            value: w.as_f64(),
            constraint: "0 < w <= 2 pi",
        });
    }
    Ok(())
}

/// Closed-form amplitude of the square-root trapezoid from two rectangular
/// apertures.
///
/// With `d1 = (w1 + w2) / 2` and `C2`, `S2` the Fresnel integrals,
/// `c_m = [sin(|m| d1) C2(|m| w2) - cos(|m| d1) S2(|m| w2)] / (|m|^{3/2} sqrt(w1 w2))`.
/// At `m = 0` the integral of the wavefunction is used directly:
/// `c_0 = 2 (d2 + 2 w2 / 3) / sqrt(2 pi w1)` with `d2 = (w1 - w2) / 2`.
pub fn rect_amplitude_analytic<T: Real>(w1: T, w2: T, m: i64) -> Result<T> {
    check_width("w1", w1)?;
    check_width("w2", w2)?;
    if w1 + w2 > T::TAU() {
        return Err(Error::InvalidAperture {
            field: "w1 + w2",
            value: (w1 + w2).as_f64(),
            constraint: "w1 + w2 <= 2 pi",
        });
    }
    let (w1, w2) = if w2 > w1 { (w2, w1) } else { (w1, w2) };
    let two = T::lit(2.0);
    if m == 0 {
        let d2 = (w1 - w2) / two;
        return Ok(two * (d2 + two * w2 / T::lit(3.0)) / (T::TAU() * w1).sqrt());
    }
    let am = T::from_int(m.abs());
    let d1 = (w1 + w2) / two;
    let x = am * w2;
    let c2 = fresnel_c2(x)?;
    let s2 = fresnel_s2(x)?;
    Ok(((am * d1).sin() * c2 - (am * d1).cos() * s2) / (am * am.sqrt() * (w1 * w2).sqrt()))
}

/// Approximate amplitude for two truncated Gaussians, obtained by setting the
/// `Re erf` factors of the exact density transform to one.
pub fn gauss_amplitude_approx<T: Real>(w1: T, w2: T, m: i64) -> Result<T> {
    check_width("w1", w1)?;
    check_width("w2", w2)?;
    let s = w1 * w1 + w2 * w2;
    let m = T::from_int(m);
    let norm = erf(T::PI() / w1) * erf(T::PI() / w2);
    Ok((s / T::PI()).powf(T::lit(0.25)) / norm.sqrt() * (-m * m * s / T::lit(2.0)).exp())
}

/// Fourier coefficient of the density `P1 * P2` (not of the wavefunction) for
/// two centered truncated Gaussians:
/// `(1/sqrt(2 pi)) exp(-m^2 (w1^2 + w2^2) / 4) prod_j Re erf(pi/w_j - i m w_j / 2) / erf(pi/w_j)`.
pub fn gauss_density_transform_analytic<T: Real>(w1: T, w2: T, m: i64) -> Result<T> {
    check_width("w1", w1)?;
    check_width("w2", w2)?;
    let m = T::from_int(m);
    let factor = |w: T| {
        // exp(-b^2) Re erf(a + i b) with b = -m w / 2 absorbs the Gaussian
        re_erf_complex_scaled(T::PI() / w, -m * w / T::lit(2.0)) / erf(T::PI() / w)
    };
    Ok(factor(w1) * factor(w2) / T::TAU().sqrt())
}

fn build_spectrum<T: Real>(
    m_max: usize,
    provenance: Provenance,
    f: impl Fn(i64) -> Result<T> + Sync,
) -> Result<OamSpectrum<T>> {
    if m_max == 0 {
        return Err(Error::InvalidArgument {
            name: "m_max",
            detail: "must be >= 1".into(),
        });
    }
    let half: Vec<T> = (0..=m_max as i64)
        .into_par_iter()
        .map(&f)
        .collect::<Result<_>>()?;
    let amps = (-(m_max as i64)..=m_max as i64)
        .map(|m| half[m.unsigned_abs() as usize])
        .collect();
    OamSpectrum::new(m_max, amps, provenance, None)
}

/// [`rect_amplitude_analytic`] for `|m| <= m_max`.
pub fn rect_spectrum_analytic<T: Real>(w1: T, w2: T, m_max: usize) -> Result<OamSpectrum<T>> {
    build_spectrum(m_max, Provenance::AnalyticRect, |m| {
        rect_amplitude_analytic(w1, w2, m)
    })
}

/// [`gauss_amplitude_approx`] for `|m| <= m_max`.
pub fn gauss_spectrum_approx<T: Real>(w1: T, w2: T, m_max: usize) -> Result<OamSpectrum<T>> {
    build_spectrum(m_max, Provenance::GaussApprox, |m| {
        gauss_amplitude_approx(w1, w2, m)
    })
}

// variance of m under weights |c_m|^2 / sum |c|^2
fn weighted_variance<T: Real>(pairs: impl Iterator<Item = (i64, T)> + Clone) -> Result<T> {
    let total: T = pairs.clone().map(|(_, w)| w).sum();
    if !(total > T::zero()) {
        return Err(Error::EmptySpectrum);
    }
    let mean = pairs.clone().map(|(m, w)| T::from_int(m) * w).sum::<T>() / total;
    let var = pairs
        .map(|(m, w)| {
            let d = T::from_int(m) - mean;
            d * d * w
        })
        .sum::<T>()
        / total;
    Ok(var.max(T::zero()))
}

/// Variance of `m` under the truncation-renormalized distribution
/// `|c_m|^2 / sum |c|^2`: the inferred minimum variance.
pub fn conditional_variance<T: Real>(spectrum: &OamSpectrum<T>) -> Result<T> {
    weighted_variance(spectrum.iter().map(|(m, c)| (m, c * c)))
}

/// [`conditional_variance`] restricted to `|m| <= m_max`.
pub fn truncated_variance<T: Real>(spectrum: &OamSpectrum<T>, m_max: usize) -> Result<T> {
    let m_max = m_max.min(spectrum.m_max()) as i64;
    weighted_variance(
        spectrum
            .iter()
            .filter(|(m, _)| m.abs() <= m_max)
            .map(|(m, c)| (m, c * c)),
    )
}

/// Mean OAM `sum |c|^2 m / sum |c|^2`.
pub fn mean_oam<T: Real>(spectrum: &OamSpectrum<T>) -> Result<T> {
    let total = spectrum.parseval_sum();
    if !(total > T::zero()) {
        return Err(Error::EmptySpectrum);
    }
    Ok(spectrum
        .iter()
        .map(|(m, c)| T::from_int(m) * c * c)
        .sum::<T>()
        / total)
}

/// Variance of `m` under `|a_m|^2` for a complex spectrum stored as
/// `a[j] = a_{j - m_max}`.
pub fn complex_spectrum_variance<T: Real>(amps: &[Complex<T>]) -> Result<T> {
    let off = (amps.len() / 2) as i64;
    weighted_variance(
        amps.iter()
            .enumerate()
            .map(move |(j, a)| (j as i64 - off, a.norm_sqr())),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Converged,
    LogDivergent,
    Undetermined,
}

impl std::fmt::Display for Convergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Convergence::Converged => "converged",
            Convergence::LogDivergent => "log_divergent",
            Convergence::Undetermined => "undetermined",
        })
    }
}

/// Relative change over the last decade below which a series counts as converged.
pub const CONVERGED_REL_CHANGE: f64 = 0.01;
/// Minimum slope of variance against `ln M` for a logarithmic divergence.
pub const LOG_SLOPE_MIN: f64 = 0.05;
/// Minimum coefficient of determination of that fit.
pub const LOG_R2_MIN: f64 = 0.98;

/// Least-squares line `variance = intercept + slope * ln M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
}

/// Fits variance against `ln M` over all given entries.
pub fn log_fit<T: Real>(entries: &[(usize, T)]) -> Option<LogFit<T>> {
    if entries.len() < 2 {
        return None;
    }
    let k = T::from_int(entries.len() as i64);
    let xs: Vec<T> = entries
        .iter()
        .map(|&(m, _)| T::from_int(m as i64).ln())
        .collect();
    let ys: Vec<T> = entries.iter().map(|&(_, v)| v).collect();
    let mx = xs.iter().copied().sum::<T>() / k;
    let my = ys.iter().copied().sum::<T>() / k;
    let sxx: T = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: T = xs.iter().zip(&ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let syy: T = ys.iter().map(|&y| (y - my) * (y - my)).sum();
    if sxx <= T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > T::zero() {
        sxy * sxy / (sxx * syy)
    } else {
        T::one()
    };
    Some(LogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

// entries with M in the last decade of the series
fn last_decade<T: Real>(entries: &[(usize, T)]) -> &[(usize, T)] {
    let last = entries[entries.len() - 1].0;
    let start = entries
        .iter()
        .position(|&(m, _)| 10 * m >= last)
        .unwrap_or(0);
    &entries[start..]
}

fn check_entries<T: Real>(entries: &[(usize, T)]) -> Result<()> {
    if entries.len() < 6 {
        return Err(Error::TooFewEntries {
            needed: "at least 6 entries",
            detail: format!("got {}", entries.len()),
        });
    }
    if entries.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidArgument {
            name: "entries",
            detail: "truncation indices must be strictly increasing".into(),
        });
    }
    let (first, last) = (entries[0].0, entries[entries.len() - 1].0);
    if first == 0 || last < 10 * first {
        return Err(Error::TooFewEntries {
            needed: "entries spanning at least one decade of M",
            detail: format!("M runs from {first} to {last}"),
        });
    }
    Ok(())
}

/// Classifies a variance-vs-truncation series from its last decade of `M`.
///
/// Converged when the relative change across that decade is below 1%;
/// otherwise LogDivergent when variance against `ln M` there has slope above
/// 0.05 with `R^2 > 0.98`; otherwise Undetermined.
pub fn classify_convergence<T: Real>(entries: &[(usize, T)]) -> Result<Convergence> {
    check_entries(entries)?;
    let window = last_decade(entries);
    let (v0, v1) = (window[0].1, window[window.len() - 1].1);
    let rel = if v1 != T::zero() {
        ((v1 - v0) / v1).abs()
    } else {
        (v1 - v0).abs()
    };
    if rel < T::lit(CONVERGED_REL_CHANGE) {
        return Ok(Convergence::Converged);
    }
    match log_fit(window) {
        Some(fit) if fit.slope > T::lit(LOG_SLOPE_MIN) && fit.r_squared > T::lit(LOG_R2_MIN) => {
            Ok(Convergence::LogDivergent)
        }
        _ => Ok(Convergence::Undetermined),
    }
}

/// Conditional variance at a list of truncation indices.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSeries<T> {
    pub entries: Vec<(usize, T)>,
    pub classification: Convergence,
    /// Fit of variance against `ln M` over the last decade.
    pub fit: Option<LogFit<T>>,
}

impl<T: Real> VarianceSeries<T> {
    pub fn final_variance(&self) -> T {
        self.entries[self.entries.len() - 1].1
    }

    pub fn variance_at(&self, m_max: usize) -> Option<T> {
        self.entries
            .iter()
            .find(|&&(m, _)| m == m_max)
            .map(|&(_, v)| v)
    }
}

/// Truncated variances of an existing spectrum.
pub fn variance_series_from_spectrum<T: Real>(
    spectrum: &OamSpectrum<T>,
    m_maxes: &[usize],
) -> Result<VarianceSeries<T>> {
    if m_maxes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument {
            name: "m_maxes",
            detail: "must be strictly increasing".into(),
        });
    }
    if let Some(&last) = m_maxes.last() {
        if last > spectrum.m_max() {
            return Err(Error::InvalidArgument {
                name: "m_maxes",
                detail: format!(
                    "{last} exceeds the spectrum truncation {}",
                    spectrum.m_max()
                ),
            });
        }
    }
    let entries: Vec<(usize, T)> = m_maxes
        .iter()
        .map(|&m| truncated_variance(spectrum, m).map(|v| (m, v)))
        .collect::<Result<_>>()?;
    let classification = classify_convergence(&entries)?;
    let fit = log_fit(last_decade(&entries));
    Ok(VarianceSeries {
        entries,
        classification,
        fit,
    })
}

/// Transforms `psi` once at the largest truncation and evaluates the
/// conditional variance at each index.
pub fn variance_series<T: Real>(
    psi: &ConditionalWavefunction<T>,
    m_maxes: &[usize],
) -> Result<VarianceSeries<T>> {
    let top = *m_maxes.last().ok_or(Error::TooFewEntries {
        needed: "at least 6 entries",
        detail: "got 0".into(),
    })?;
    let spectrum = transform_numeric(psi, top)?;
    variance_series_from_spectrum(&spectrum, m_maxes)
}

/// `1, 2, 4, ...` up to and including `limit` when it is a power of two.
pub fn power_of_two_truncations(limit: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |&m| m.checked_mul(2))
        .take_while(|&m| m <= limit)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aperture::{AngularDensity, ApertureSpec};
    use crate::correlate::{conditional_wavefunction, convolve_periodic};
    use crate::specfun::tests_support::adaptive_simpson;
    use std::f64::consts::PI;

    const W1: f64 = PI / 4.0;
    const W2: f64 = PI / 64.0;

    fn pipeline(
        a: ApertureSpec<f64>,
        b: ApertureSpec<f64>,
        n: usize,
    ) -> ConditionalWavefunction<f64> {
        let p = convolve_periodic(&a.sample(n).unwrap(), &b.sample(n).unwrap()).unwrap();
        conditional_wavefunction(&p)
    }

    fn rect_pair(n: usize) -> ConditionalWavefunction<f64> {
        pipeline(
            ApertureSpec::rect(W1).unwrap(),
            ApertureSpec::rect(W2).unwrap(),
            n,
        )
    }

    fn gauss_pair(n: usize) -> ConditionalWavefunction<f64> {
        pipeline(
            ApertureSpec::gauss(W1).unwrap(),
            ApertureSpec::gauss(W2).unwrap(),
            n,
        )
    }

    #[test]
    fn uniform_has_only_c0() {
        let psi = conditional_wavefunction(&AngularDensity::<f64>::uniform(512).unwrap());
        let s = transform_numeric(&psi, 128).unwrap();
        for (m, c) in s.iter() {
            let expected = if m == 0 { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-12, "m = {m}: {c}");
        }
    }

    #[test]
    fn spike_is_flat() {
        let psi = conditional_wavefunction(&AngularDensity::<f64>::spike(512, 256).unwrap());
        let s = transform_numeric(&psi, 128).unwrap();
        let c0 = s.amp(0) * s.amp(0);
        for (_, c) in s.iter() {
            assert!((c * c - c0).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_guard() {
        let psi = gauss_pair(512);
        assert_eq!(
            transform_numeric(&psi, 129).unwrap_err(),
            Error::TruncationTooLarge {
                m_max: 129,
                bound: 128
            }
        );
        assert!(transform_numeric(&psi, 0).is_err());
    }

    #[test]
    fn rect_numeric_matches_analytic() {
        for (n, tol) in [(512, 1e-4), (4096, 1e-6)] {
            let s = transform_numeric(&rect_pair(n), 30).unwrap();
            for m in -30..=30 {
                let a = rect_amplitude_analytic(W1, W2, m).unwrap();
                assert!(
                    (s.amp(m) - a).abs() < tol,
                    "n = {n}, m = {m}: {} vs {a}",
                    s.amp(m)
                );
            }
        }
    }

    #[test]
    fn corrections_beat_the_plain_rule() {
        let psi = rect_pair(512);
        let plain = transform_complex(
            &psi.values()
                .iter()
                .map(|&v| Complex::new(v, 0.0))
                .collect::<Vec<_>>(),
            30,
        )
        .unwrap();
        let corrected = transform_numeric(&psi, 30).unwrap();
        let h = 2.0 * PI / 512.0;
        let mut plain_err: f64 = 0.0;
        let mut corrected_err: f64 = 0.0;
        for m in 0..=30_i64 {
            let a = rect_amplitude_analytic(W1, W2, m).unwrap();
            // undo the one-bin offset of the grid trapezoid
            let p = (plain[(m + 30) as usize] * Complex::from_polar(1.0, m as f64 * h)).re;
            plain_err = plain_err.max((p - a).abs());
            corrected_err = corrected_err.max((corrected.amp(m) - a).abs());
        }
        assert!(plain_err > 1e-4);
        assert!(corrected_err < 1e-6, "{corrected_err}");
    }

    fn trapezoid_psi(phi: f64) -> f64 {
        crate::correlate::rect_conditional_density(W1, W2, phi)
            .unwrap()
            .sqrt()
    }

    #[test]
    fn rect_analytic_matches_quadrature() {
        let d1 = (W1 + W2) / 2.0;
        let d2 = (W1 - W2) / 2.0;
        for m in [0_i64, 1, 7, 25] {
            let f = |x: f64| trapezoid_psi(x) * (m as f64 * x).cos();
            // split at the corners so each piece is smooth
            let q =
                2.0 * (adaptive_simpson(&f, 0.0, d2, 1e-14) + adaptive_simpson(&f, d2, d1, 1e-14));
            let oracle = q / (2.0 * PI).sqrt();
            let a = rect_amplitude_analytic(W1, W2, m).unwrap();
            assert!((a - oracle).abs() < 1e-8, "m = {m}: {a} vs {oracle}");
        }
    }

    #[test]
    fn rect_analytic_is_even_and_order_free() {
        for m in 1..40 {
            let a = rect_amplitude_analytic(W1, W2, m).unwrap();
            assert_eq!(a, rect_amplitude_analytic(W1, W2, -m).unwrap());
            assert_eq!(a, rect_amplitude_analytic(W2, W1, m).unwrap());
        }
    }

    #[test]
    fn rect_parseval_and_tail() {
        let s = rect_spectrum_analytic(W1, W2, 1024).unwrap();
        let total = s.parseval_sum();
        assert!(total < 1.0 && total > 0.99999);
        // |c|^2 m^3 oscillates but its block means settle at a constant
        let y: Vec<f64> = (200..2000)
            .map(|m| {
                let c = rect_amplitude_analytic(W1, W2, m).unwrap();
                c * c * (m as f64).powi(3)
            })
            .collect();
        let blocks: Vec<f64> = y
            .chunks(100)
            .map(|b| b.iter().sum::<f64>() / 100.0)
            .collect();
        let mean = blocks.iter().sum::<f64>() / blocks.len() as f64;
        for b in blocks {
            assert!((b / mean - 1.0).abs() < 0.2);
        }
    }

    #[test]
    fn gauss_approx_values() {
        let c0 = gauss_amplitude_approx(W1, W2, 0).unwrap();
        let erfs: f64 = crate::specfun::erf(4.0) * crate::specfun::erf(64.0);
        assert!((c0 - ((W1 * W1 + W2 * W2) / PI).powf(0.25) / erfs.sqrt()).abs() < 1e-15);
        assert!((c0 - 0.666).abs() < 1e-3);
        for m in 0..30 {
            assert!(
                gauss_amplitude_approx(W1, W2, m + 1).unwrap()
                    < gauss_amplitude_approx(W1, W2, m).unwrap()
            );
        }
        let s = transform_numeric(&gauss_pair(512), 5).unwrap();
        for m in -5..=5 {
            assert!((s.amp(m) - gauss_amplitude_approx(W1, W2, m).unwrap()).abs() < 1e-3);
        }
    }

    #[test]
    fn gauss_density_transform() {
        let p = convolve_periodic(
            &ApertureSpec::gauss(W1).unwrap().sample(512).unwrap(),
            &ApertureSpec::gauss(W2).unwrap().sample(512).unwrap(),
        )
        .unwrap();
        let h = p.step();
        let grid = |m: i64| {
            p.angles()
                .zip(p.values())
                .map(|(phi, &v)| v * (m as f64 * phi).cos())
                .sum::<f64>()
                * h
                / (2.0 * PI).sqrt()
        };
        assert!(
            (gauss_density_transform_analytic(W1, W2, 0).unwrap() - 1.0 / (2.0 * PI).sqrt()).abs()
                < 1e-14
        );
        assert!((grid(0) - gauss_density_transform_analytic(W1, W2, 0).unwrap()).abs() < 1e-8);
        for m in [1_i64, 3, 10] {
            let a = gauss_density_transform_analytic(W1, W2, m).unwrap();
            assert_eq!(a, gauss_density_transform_analytic(W1, W2, -m).unwrap());
            assert!((a - grid(m)).abs() < 1e-6, "m = {m}");
        }
        // finite far out, where Re erf alone overflows
        let far = gauss_density_transform_analytic(0.5_f64, 0.5, 200).unwrap();
        assert!(far.is_finite() && far.abs() < 1e-15);
    }

    #[test]
    fn variance_basics() {
        let mut amps = vec![0.0; 7];
        amps[3] = 1.0;
        let s = OamSpectrum::new(3, amps.clone(), Provenance::Numeric, None).unwrap();
        assert_eq!(conditional_variance(&s).unwrap(), 0.0);
        amps[3] = 0.0;
        amps[2] = 0.5_f64.sqrt();
        amps[4] = 0.5_f64.sqrt();
        let s = OamSpectrum::new(3, amps, Provenance::Numeric, None).unwrap();
        assert!((conditional_variance(&s).unwrap() - 1.0).abs() < 1e-15);
        let z = OamSpectrum::new(3, vec![0.0; 7], Provenance::Numeric, None).unwrap();
        assert_eq!(conditional_variance(&z).unwrap_err(), Error::EmptySpectrum);
    }

    #[test]
    fn gauss_approx_variance() {
        let s = gauss_spectrum_approx(W1, W2, 20).unwrap();
        let v = conditional_variance(&s).unwrap();
        let continuum = 1.0 / (2.0 * (W1 * W1 + W2 * W2));
        assert!((v / continuum - 1.0).abs() < 0.02);
        // brute force straight from the formula
        let (mut s0, mut s2) = (0.0, 0.0);
        for m in -20..=20_i64 {
            let c = gauss_amplitude_approx(W1, W2, m).unwrap();
            s0 += c * c;
            s2 += c * c * (m * m) as f64;
        }
        assert!((v - s2 / s0).abs() < 1e-12);
        assert!((v - 0.81).abs() < 0.01);
    }

    #[test]
    fn classifier_synthetic() {
        let ms = power_of_two_truncations(1024);
        let flat: Vec<(usize, f64)> = ms.iter().map(|&m| (m, 0.8)).collect();
        assert_eq!(classify_convergence(&flat).unwrap(), Convergence::Converged);
        let log: Vec<(usize, f64)> = ms
            .iter()
            .map(|&m| (m, 1.0 + 0.5 * (m as f64).ln()))
            .collect();
        assert_eq!(
            classify_convergence(&log).unwrap(),
            Convergence::LogDivergent
        );
        let noisy: Vec<(usize, f64)> = ms
            .iter()
            .enumerate()
            .map(|(i, &m)| (m, 1.0 + if i % 2 == 0 { 0.0 } else { 0.5 }))
            .collect();
        assert_eq!(
            classify_convergence(&noisy).unwrap(),
            Convergence::Undetermined
        );
        assert!(matches!(
            classify_convergence(&flat[..5]),
            Err(Error::TooFewEntries { .. })
        ));
        let narrow: Vec<(usize, f64)> = (10..16).map(|m| (m, 1.0)).collect();
        assert!(matches!(
            classify_convergence(&narrow),
            Err(Error::TooFewEntries { .. })
        ));
    }

    #[test]
    fn series_classifications() {
        let g = variance_series(&gauss_pair(512), &power_of_two_truncations(128)).unwrap();
        assert_eq!(g.classification, Convergence::Converged);
        assert!((g.variance_at(16).unwrap() / g.variance_at(64).unwrap() - 1.0).abs() < 0.01);

        let r = variance_series_from_spectrum(
            &rect_spectrum_analytic(W1, W2, 1024).unwrap(),
            &power_of_two_truncations(1024)[2..],
        )
        .unwrap();
        assert_eq!(r.classification, Convergence::LogDivergent);
        assert!(r.fit.unwrap().slope > 0.0);

        let t3 = pipeline(
            ApertureSpec::super_gauss(W1, 3.0).unwrap(),
            ApertureSpec::super_gauss(W2, 3.0).unwrap(),
            512,
        );
        let s = variance_series(&t3, &power_of_two_truncations(128)).unwrap();
        assert_eq!(s.classification, Convergence::Converged);

        let t80 = pipeline(
            ApertureSpec::super_gauss(W1, 80.0).unwrap(),
            ApertureSpec::super_gauss(W2, 80.0).unwrap(),
            512,
        );
        let s = variance_series(&t80, &power_of_two_truncations(128)).unwrap();
        assert_ne!(s.classification, Convergence::LogDivergent);
    }

    #[test]
    fn parseval_for_smooth_families() {
        for (a, b) in [
            (
                ApertureSpec::gauss(W1).unwrap(),
                ApertureSpec::gauss(W2).unwrap(),
            ),
            (
                ApertureSpec::super_gauss(W1, 3.0).unwrap(),
                ApertureSpec::super_gauss(W2, 3.0).unwrap(),
            ),
            (
                ApertureSpec::super_gauss(W1, 5.0).unwrap(),
                ApertureSpec::super_gauss(W2, 5.0).unwrap(),
            ),
        ] {
            let s = transform_numeric(&pipeline(a, b, 512), 50).unwrap();
            let total = s.parseval_sum();
            assert!(1.0 - total < 1e-6 && total < 1.0 + 1e-9, "{total}");
            assert!(mean_oam(&s).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn variance_grows_with_truncation() {
        for psi in [gauss_pair(512), rect_pair(512)] {
            let s = transform_numeric(&psi, 128).unwrap();
            let mut prev = 0.0;
            for m in 1..=128 {
                let v = truncated_variance(&s, m).unwrap();
                assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn resolution_convergence_gauss() {
        let a = transform_numeric(&gauss_pair(512), 20).unwrap();
        let b = transform_numeric(&gauss_pair(1024), 20).unwrap();
        for m in -20..=20 {
            assert!((a.amp(m) - b.amp(m)).abs() < 1e-5);
        }
    }

    #[test]
    fn asymmetric_density_is_rejected() {
        let mut v = vec![0.0; 64];
        v[10] = 1.0;
        v[11] = 3.0;
        let d = AngularDensity::from_values(v, "lopsided")
            .unwrap()
            .renormalized();
        let err = transform_numeric(&conditional_wavefunction(&d), 8).unwrap_err();
        assert!(matches!(err, Error::ImaginaryResidue { .. }));
    }

    #[test]
    fn truncation_list() {
        assert_eq!(
            power_of_two_truncations(128),
            vec![1, 2, 4, 8, 16, 32, 64, 128]
        );
        assert_eq!(power_of_two_truncations(100).last(), Some(&64));
    }
}
