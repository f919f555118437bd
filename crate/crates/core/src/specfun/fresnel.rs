use num_complex::Complex;

use super::{SpecFunResult, MAX_ITER};
use crate::{Error, Real, Result};

// Below this argument of the standard integrals the power series is used,
// above it the continued fraction for erfc along the diagonal.
const SERIES_LIMIT: f64 = 1.5;

/// Standard Fresnel integrals `C(t) = int_0^t cos(pi u^2 / 2) du` and
/// `S(t)`, for `t >= 0`. Returns `(C, S, estimated absolute error)`.
pub fn fresnel_cs<T: Real>(t: T) -> (T, T, T) {
    let eps = T::epsilon();
    if t == T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    if t <= T::lit(SERIES_LIMIT) {
        series(t, eps)
    } else {
        // phase pi t^2 / 2, evaluated once
        let half_phase = T::FRAC_PI_2() * t * t;
        continued_fraction(t, half_phase, eps)
    }
}

fn series<T: Real>(t: T, eps: T) -> (T, T, T) {
    // a_j = (pi t^2 / 2)^j / j! * t; C takes even j, S odd j, each / (2j + 1)
    let q = T::FRAC_PI_2() * t * t;
    let mut term = t;
    let mut c = t;
    let mut s = T::zero();
    let mut abs_sum = t;
    let mut last = t;
    for j in 1..MAX_ITER {
        term = term * q / T::from_int(j as i64);
        let contrib = term / T::from_int(2 * j as i64 + 1);
        let sign = if (j / 2) % 2 == 0 {
            T::one()
        } else {
            -T::one()
        };
        if j % 2 == 0 {
            c += sign * contrib;
        } else {
            s += sign * contrib;
        }
        abs_sum += contrib;
        last = contrib;
        if contrib < eps * T::lit(0.01) * (c.abs() + s.abs()) {
            break;
        }
    }
    (c, s, last + T::lit(4.0) * eps * abs_sum)
}

fn continued_fraction<T: Real>(t: T, half_phase: T, eps: T) -> (T, T, T) {
    let one = Complex::new(T::one(), T::zero());
    let tiny = T::lit(1e-30);
    let big = T::one() / tiny;
    let mut b = Complex::new(T::one(), -(half_phase + half_phase));
    let mut cc = Complex::new(big, T::zero());
    let mut d = one / b;
    let mut h = d;
    let mut n = -T::one();
    for _ in 2..MAX_ITER {
        n += T::lit(2.0);
        let a = -(n * (n + T::one()));
        b.re += T::lit(4.0);
        d = one / (d * a + b);
        cc = b + one * a / cc;
        let del = cc * d;
        h *= del;
        if (del.re - T::one()).abs() + del.im.abs() < eps {
            break;
        }
    }
    h *= Complex::new(t, -t);
    let rot = Complex::new(half_phase.cos(), half_phase.sin());
    let cs = Complex::new(T::lit(0.5), T::lit(0.5)) * (one - rot * h);
    let err = T::lit(8.0) * eps * (T::one() + h.norm());
    (cs.re, cs.im, err)
}

fn check_arg<T: Real>(function: &'static str, x: T) -> Result<()> {
    if x.is_nan() || x < T::zero() {
        return Err(Error::Domain {
            function,
            detail: format!("x = {x} must be >= 0"),
        });
    }
    Ok(())
}

fn scaled_arg<T: Real>(x: T) -> T {
    (T::lit(2.0) * x / T::PI()).sqrt()
}

/// `C2(x) = (2 pi)^(-1/2) int_0^x cos(t) / sqrt(t) dt`, tending to 1/2.
pub fn fresnel_c2_est<T: Real>(x: T) -> Result<SpecFunResult<T>> {
    check_arg("fresnel_c2", x)?;
    if x.is_infinite() {
        return Ok(SpecFunResult::new(T::lit(0.5), T::zero()));
    }
    let (c, _, err) = fresnel_cs(scaled_arg(x));
    Ok(SpecFunResult::new(c, err))
}

/// `S2(x) = (2 pi)^(-1/2) int_0^x sin(t) / sqrt(t) dt`, tending to 1/2.
pub fn fresnel_s2_est<T: Real>(x: T) -> Result<SpecFunResult<T>> {
    check_arg("fresnel_s2", x)?;
    if x.is_infinite() {
        return Ok(SpecFunResult::new(T::lit(0.5), T::zero()));
    }
    let (_, s, err) = fresnel_cs(scaled_arg(x));
    Ok(SpecFunResult::new(s, err))
}

pub fn fresnel_c2<T: Real>(x: T) -> Result<T> {
    fresnel_c2_est(x).map(|r| r.value)
}

pub fn fresnel_s2<T: Real>(x: T) -> Result<T> {
    fresnel_s2_est(x).map(|r| r.value)
}
