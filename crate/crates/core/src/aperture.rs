//! Angular aperture families and their sampled probability densities.
//!
//! Angles live on `[-pi, pi)`; a grid of `n` points has
//! `phi_k = -pi + 2 pi k / n`, so index `n / 2` is the origin. All densities
//! are treated as 2pi-periodic.

use serde::Serialize;

use crate::oam::{truncated_variance, OamSpectrum};
use crate::real::wrap_angle;
use crate::specfun::{erf, gamma_lower};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureShape {
    /// Cake-slice aperture: uniform over a width `w`.
    Rect,
    /// `exp(-(phi/w)^2)` truncated to one period.
    TruncGauss,
    /// `exp(-(phi/w)^(2 gamma))` truncated to one period.
    TruncSuperGauss,
}

impl std::fmt::Display for ApertureShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ApertureShape::Rect => "rect",
            ApertureShape::TruncGauss => "gauss",
            ApertureShape::TruncSuperGauss => "tsg",
        })
    }
}

/// A validated aperture with its normalization constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApertureSpec<T> {
    shape: ApertureShape,
    w: T,
    gamma: T,
    tau: T,
    #[serde(skip)]
    norm: T,
}

impl<T: Real> ApertureSpec<T> {
    /// Validates the parameters and precomputes the normalization.
    ///
    /// `gamma` is only meaningful for [`ApertureShape::TruncSuperGauss`];
    /// the other shapes store 1.
    pub fn new(shape: ApertureShape, w: T, gamma: T, tau: T) -> Result<Self> {
        if !(w > T::zero() && w <= T::TAU()) {
            return Err(Error::InvalidAperture {
                field: "w",
                value: w.as_f64(),
                constraint: "0 < w <= 2 pi",
            });
        }
        let gamma = match shape {
            ApertureShape::TruncSuperGauss => {
                if !(gamma >= T::one()) || !gamma.is_finite() {
                    return Err(Error::InvalidAperture {
                        field: "gamma",
                        value: gamma.as_f64(),
                        constraint: "gamma >= 1",
                    });
                }
                gamma
            }
            _ => T::one(),
        };
        if !(tau >= -T::PI() && tau < T::PI()) {
            return Err(Error::InvalidAperture {
                field: "tau",
                value: tau.as_f64(),
                constraint: "-pi <= tau < pi",
            });
        }
        let norm = normalization(shape, w, gamma)?;
        Ok(Self {
            shape,
            w,
            gamma,
            tau,
            norm,
        })
    }

    pub fn rect(w: T) -> Result<Self> {
        Self::new(ApertureShape::Rect, w, T::one(), T::zero())
    }

    pub fn gauss(w: T) -> Result<Self> {
        Self::new(ApertureShape::TruncGauss, w, T::one(), T::zero())
    }

    pub fn super_gauss(w: T, gamma: T) -> Result<Self> {
        Self::new(ApertureShape::TruncSuperGauss, w, gamma, T::zero())
    }

    pub fn with_tau(self, tau: T) -> Result<Self> {
        Self::new(self.shape, self.w, self.gamma, tau)
    }

    /// The same aperture turned by `angle`; the orientation is wrapped.
    pub fn rotated(&self, angle: T) -> Self {
        Self {
            tau: wrap_angle(self.tau + angle),
            ..*self
        }
    }

    pub fn shape(&self) -> ApertureShape {
        self.shape
    }

    pub fn w(&self) -> T {
        self.w
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    /// Peak value of the continuous density.
    pub fn normalization(&self) -> T {
        self.norm
    }

    /// Continuous density `P(phi; tau)`.
    pub fn density_at(&self, phi: T) -> T {
        self.profile(wrap_angle(phi - self.tau))
    }

    // density at a wrapped offset from the center
    fn profile(&self, d: T) -> T {
        match self.shape {
            ApertureShape::Rect => {
                let half = self.w / T::lit(2.0);
                if d >= -half && d < half {
                    self.norm
                } else {
                    T::zero()
                }
            }
            ApertureShape::TruncGauss => {
                let u = d / self.w;
                self.norm * (-u * u).exp()
            }
            ApertureShape::TruncSuperGauss => {
                let u = d / self.w;
                if self.gamma == T::one() {
                    self.norm * (-u * u).exp()
                } else {
                    self.norm * (-(u.abs().powf(T::lit(2.0) * self.gamma))).exp()
                }
            }
        }
    }

    /// Samples the density on an `n`-point grid and renormalizes so that the
    /// discrete integral is exactly one.
    pub fn sample(&self, n: usize) -> Result<AngularDensity<T>> {
        check_grid(n)?;
        let h = grid_step::<T>(n);
        let values: Vec<T> = match self.shape {
            ApertureShape::Rect => {
                // membership decided in units of bins so that grid-aligned
                // widths and orientations are exact
                let half = snap(self.w / (h + h));
                let shift = snap(self.tau / h);
                let n_t = T::from_int(n as i64);
                let members: Vec<bool> = (0..n)
                    .map(|k| {
                        let mut d = T::from_int(k as i64 - (n / 2) as i64) - shift;
                        d = wrap_bins(snap(d), n_t);
                        d >= -half && d < half
                    })
                    .collect();
                let count = members.iter().filter(|&&m| m).count();
                if count == 0 {
                    return Err(Error::GridSize {
                        n,
                        constraint: "rect aperture narrower than one grid cell",
                    });
                }
                let v = T::one() / (T::from_int(count as i64) * h);
                members
                    .into_iter()
                    .map(|m| if m { v } else { T::zero() })
                    .collect()
            }
            _ => {
                let raw: Vec<T> = (0..n)
                    .map(|k| {
                        let d = T::from_int(k as i64 - (n / 2) as i64) * h - self.tau;
                        self.profile(wrap_angle(d))
                    })
                    .collect();
                let total = raw.iter().copied().sum::<T>() * h;
                raw.into_iter().map(|v| v / total).collect()
            }
        };
        Ok(AngularDensity {
            values,
            meta: format!(
                "{} w={} gamma={} tau={}",
                self.shape,
                self.w.as_f64(),
                self.gamma.as_f64(),
                self.tau.as_f64()
            ),
        })
    }
}

/// Alias of [`ApertureSpec::new`].
pub fn make_aperture<T: Real>(
    shape: ApertureShape,
    w: T,
    gamma: T,
    tau: T,
) -> Result<ApertureSpec<T>> {
    ApertureSpec::new(shape, w, gamma, tau)
}

fn normalization<T: Real>(shape: ApertureShape, w: T, gamma: T) -> Result<T> {
    Ok(match shape {
        ApertureShape::Rect => T::one() / w,
        ApertureShape::TruncGauss => T::one() / (T::PI().sqrt() * w * erf(T::PI() / w)),
        ApertureShape::TruncSuperGauss => {
            // int_{-pi}^{pi} exp(-|phi/w|^(2g)) = (w / g) * lower_gamma(1/(2g), (pi/w)^(2g))
            let two_g = T::lit(2.0) * gamma;
            let x = (T::PI() / w).powf(two_g);
            gamma / (w * gamma_lower(T::one() / two_g, x)?)
        }
    })
}

fn snap<T: Real>(x: T) -> T {
    let r = x.round();
    if (x - r).abs() < T::tol(1e-9, 64.0) {
        r
    } else {
        x
    }
}

fn wrap_bins<T: Real>(d: T, n: T) -> T {
    let half = n / T::lit(2.0);
    let mut d = (d + half) % n;
    if d < T::zero() {
        d += n;
    }
    d - half
}

pub(crate) fn check_grid(n: usize) -> Result<()> {
    if n < 16 {
        return Err(Error::GridSize {
            n,
            constraint: "grid needs at least 16 points",
        });
    }
    if !n.is_power_of_two() {
        return Err(Error::GridSize {
            n,
            constraint: "grid size must be a power of two",
        });
    }
    Ok(())
}

pub(crate) fn grid_step<T: Real>(n: usize) -> T {
    T::TAU() / T::from_int(n as i64)
}

/// A 2pi-periodic density sampled at `phi_k = -pi + 2 pi k / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDensity<T> {
    values: Vec<T>,
    meta: String,
}

impl<T: Real> AngularDensity<T> {
    /// Wraps raw samples. Values must be finite and non-negative and the grid
    /// a power of two of at least 16 points; no renormalization is applied.
    pub fn from_values(values: Vec<T>, meta: impl Into<String>) -> Result<Self> {
        check_grid(values.len())?;
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= T::zero())) {
            return Err(Error::InvalidArgument {
                name: "values",
                detail: format!("density samples must be finite and >= 0, found {v}"),
            });
        }
        Ok(Self {
            values,
            meta: meta.into(),
        })
    }

    /// The uniform density `1 / (2 pi)`.
    pub fn uniform(n: usize) -> Result<Self> {
        check_grid(n)?;
        let v = T::one() / (T::from_int(n as i64) * grid_step::<T>(n));
        Ok(Self {
            values: vec![v; n],
            meta: "uniform".into(),
        })
    }

    /// All mass in bin `k`.
    pub fn spike(n: usize, k: usize) -> Result<Self> {
        check_grid(n)?;
        let mut values = vec![T::zero(); n];
        values[k % n] = T::one() / grid_step::<T>(n);
        Ok(Self {
            values,
            meta: format!("spike at bin {}", k % n),
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn meta(&self) -> &str {
        &self.meta
    }

    pub fn step(&self) -> T {
        grid_step(self.n())
    }

    pub fn angle(&self, k: usize) -> T {
        grid_angle(self.n(), k)
    }

    pub fn angles(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n()).map(move |k| self.angle(k))
    }

    /// Discrete integral `sum(values) * 2 pi / n`.
    pub fn integral(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.step()
    }

    /// `P(-pi)`, the density at the interval boundary.
    pub fn boundary_density(&self) -> T {
        self.values[0]
    }

    pub(crate) fn renormalized(mut self) -> Self {
        let total = self.integral();
        if total > T::zero() {
            for v in &mut self.values {
                *v /= total;
            }
        }
        self
    }

    /// Circular shift by `bins` grid cells (positive turns counterclockwise).
    pub fn shifted(&self, bins: isize) -> Self {
        let n = self.n() as isize;
        let s = bins.rem_euclid(n) as usize;
        let mut values = self.values.clone();
        values.rotate_right(s);
        Self {
            values,
            meta: format!("{} shifted {bins}", self.meta),
        }
    }
}

pub(crate) fn grid_angle<T: Real>(n: usize, k: usize) -> T {
    T::from_int(k as i64 - (n / 2) as i64) * grid_step::<T>(n)
}

/// Mean and variance of `phi` over `[-pi, pi)` by discrete sums.
///
/// The sample at `-pi` is the periodic image of `+pi`; its mass is split
/// evenly between both ends so that a symmetric density has zero mean.
pub fn angle_moments<T: Real>(d: &AngularDensity<T>) -> (T, T) {
    let h = d.step();
    let pi = T::PI();
    let p0 = d.values()[0];
    let interior = || d.angles().zip(d.values()).skip(1);
    let mean = interior().map(|(phi, &p)| phi * p).sum::<T>() * h;
    let edge = ((-pi - mean).powi(2) + (pi - mean).powi(2)) / T::lit(2.0) * p0;
    let var = (interior()
        .map(|(phi, &p)| (phi - mean) * (phi - mean) * p)
        .sum::<T>()
        + edge)
        * h;
    (mean, var)
}

/// Outcome of testing `dm * dphi >= |1 - 2 pi P(-pi)| / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub holds: bool,
    /// The OAM spread had not converged at the spectrum's truncation.
    pub unbounded: bool,
}

/// Checks the angle/OAM uncertainty relation (hbar = 1).
///
/// `spectrum` must be the transform of `sqrt(d)`. A spectrum whose variance
/// still grows by more than 1% between `m_max / 2` and `m_max` is treated as
/// divergent: the relation then holds trivially and the report is flagged.
pub fn check_uncertainty<T: Real>(
    d: &AngularDensity<T>,
    spectrum: &OamSpectrum<T>,
    boundary_density: T,
) -> Result<UncertaintyReport<T>> {
    let (_, var_phi) = angle_moments(d);
    let m_max = spectrum.m_max();
    let var_m = truncated_variance(spectrum, m_max)?;
    let half = truncated_variance(spectrum, (m_max / 2).max(1))?;
    let unbounded = (var_m - half).abs() > T::lit(0.01) * var_m.abs() + T::tol(1e-12, 1e4);
    let rhs = (T::one() - T::TAU() * boundary_density).abs() / T::lit(2.0);
    let lhs = var_m.sqrt() * var_phi.sqrt();
    let holds = unbounded || lhs >= rhs - T::lit(1e-9);
    Ok(UncertaintyReport {
        lhs,
        rhs,
        holds,
        unbounded,
    })
}
