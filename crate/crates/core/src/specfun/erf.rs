use super::{SpecFunResult, MAX_ITER};
use crate::{Error, Real, Result};

// series below, continued fraction for erfc above
const CF_LIMIT: f64 = 3.0;

/// Error function, odd by construction.
pub fn erf<T: Real>(x: T) -> T {
    erf_est(x).value
}

pub fn erf_est<T: Real>(x: T) -> SpecFunResult<T> {
    if x.is_nan() {
        return SpecFunResult::new(x, T::zero());
    }
    let ax = x.abs();
    let (v, err) = if ax < T::lit(CF_LIMIT) {
        erf_series(ax)
    } else {
        let (c, err) = erfc_fraction(ax);
        (T::one() - c, err + T::epsilon())
    };
    let v = if x < T::zero() { -v } else { v };
    SpecFunResult::new(v, err)
}

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::lit(CF_LIMIT) {
        T::one() - erf(x)
    } else {
        erfc_fraction(x).0
    }
}

// erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (2n+1)!!, all terms positive
fn erf_series<T: Real>(x: T) -> (T, T) {
    let eps = T::epsilon();
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..MAX_ITER {
        term = term * (x2 + x2) / T::from_int(2 * n as i64 + 1);
        sum += term;
        if term < eps * T::lit(0.01) * sum {
            break;
        }
    }
    let pref = T::lit(2.0) / T::PI().sqrt() * (-x2).exp();
    let v = pref * sum;
    (v, T::lit(8.0) * eps * v.max(T::min_positive_value()))
}

// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), x > 0
fn erfc_fraction<T: Real>(x: T) -> (T, T) {
    let eps = T::epsilon();
    let tiny = T::lit(1e-30);
    let mut f = x;
    let mut c = x;
    let mut d = T::zero();
    for j in 1..MAX_ITER {
        let a = T::from_int(j as i64) * T::lit(0.5);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = c * d;
        f *= delta;
        if (delta - T::one()).abs() < eps {
            break;
        }
    }
    let v = (-x * x).exp() / (T::PI().sqrt() * f);
    (v, T::lit(8.0) * eps * v)
}

/// `exp(-b^2) * Re[erf(a + i b)]`, evaluated without overflow for any finite
/// `a`, `b`.
///
/// Uses the exponentially convergent series of Abramowitz & Stegun 7.1.29,
/// with the `cosh(n b)`, `sinh(n b)` factors folded into shifted Gaussians.
pub fn re_erf_complex_scaled<T: Real>(a: T, b: T) -> T {
    let y = b.abs();
    re_erf_core(a, b, y * y).0
}

/// `Re[erf(a + i b)]`.
///
/// The result grows like `exp(b^2 - a^2)`; arguments with
/// `b^2 - a^2 > 700` are reported as [`Error::Range`]
/// (for `f32` the limit is `ln(f32::MAX) - 9`, about 79).
pub fn re_erf_complex<T: Real>(a: T, b: T) -> Result<T> {
    re_erf_complex_est(a, b).map(|r| r.value)
}

pub fn re_erf_complex_est<T: Real>(a: T, b: T) -> Result<SpecFunResult<T>> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain {
            function: "re_erf_complex",
            detail: format!("arguments must be finite, got ({a}, {b})"),
        });
    }
    if a == T::zero() {
        return Ok(SpecFunResult::new(T::zero(), T::zero()));
    }
    let limit = T::max_value().ln() - T::lit(9.0);
    if b * b - a * a > limit {
        return Err(Error::Range {
            function: "re_erf_complex",
            detail: format!("b^2 - a^2 = {} exceeds {}", b * b - a * a, limit),
        });
    }
    let (v, err) = re_erf_core(a, b, T::zero());
    Ok(SpecFunResult::new(v, err))
}

// Returns exp(-shift) * Re erf(a + ib) and an error estimate.
fn re_erf_core<T: Real>(a: T, b: T, shift: T) -> (T, T) {
    let x = a.abs();
    let y = b.abs();
    if x == T::zero() {
        return (T::zero(), T::zero());
    }
    let eps = T::epsilon();
    let pi = T::PI();
    let two = T::lit(2.0);
    let x2 = x * x;
    let mut sum = erf(x) * (-shift).exp();
    let mut mag = sum.abs();

    // exp(-x^2) (1 - cos 2xy) / (2 pi x)
    let sxy = (x * y).sin();
    let t1 = (-x2 - shift).exp() * sxy * sxy / (pi * x);
    sum += t1;
    mag += t1.abs();

    let (s2, c2) = (two * x * y).sin_cos();
    // terms are negligible once |n/2 - y| exceeds sqrt(-ln eps) + 1
    let reach = (-eps.ln()).sqrt() + T::one();
    let n_max = ((y + reach) * two)
        .ceil()
        .to_usize()
        .unwrap_or(MAX_ITER)
        .min(MAX_ITER);
    let mut series = T::zero();
    for n in 1..=n_max {
        let nf = T::from_int(n as i64);
        let half = nf / two;
        // exp(-n^2/4 - x^2 - shift) * {1, cosh(ny), sinh(ny)}
        let base = -x2 - shift;
        let e_plain = (base - half * half).exp();
        let e_minus = (base - half * half + nf * y).exp();
        let e_plus = (base - half * half - nf * y).exp();
        let e_cosh = (e_minus + e_plus) / two;
        let e_sinh = (e_minus - e_plus) / two;
        let term = (two * x * e_plain - two * x * c2 * e_cosh + nf * s2 * e_sinh)
            / (nf * nf + T::lit(4.0) * x2);
        series += term;
        mag += term.abs();
    }
    sum += two / pi * series;
    let v = if a < T::zero() { -sum } else { sum };
    (v, T::lit(16.0) * eps * mag)
}
