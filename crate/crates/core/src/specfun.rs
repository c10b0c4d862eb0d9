//! Special functions needed by the closed-form spectra.
//!
//! * [`erfcx_complex`]: scaled complementary error function `e^{z²} erfc(z)`
//!   for complex `z`, built on the Faddeeva function `w(z) = e^{−z²} erfc(−iz)`.
//!   Inside `|z| < 8` the Faddeeva function is evaluated with Weideman's
//!   rational expansion; outside, with the Laplace continued fraction.
//! * [`bessel_k0`]: modified Bessel function of the second kind, order zero.
//!   Ascending series for `x ≤ 2`, Steed's continued fraction above.

use std::sync::OnceLock;

use num_complex::Complex;

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// Complex argument/result type used by the special functions.
pub type ComplexValue<T> = Complex<T>;

const WEIDEMAN_TERMS: usize = 48;
const CF_RADIUS: f64 = 8.0;
const CF_DEPTH: usize = 80;

/// Expansion coefficients `a_1..a_N` of Weideman's series, computed once.
fn weideman_coefficients() -> &'static (f64, Vec<f64>) {
    static COEFFS: OnceLock<(f64, Vec<f64>)> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let n = WEIDEMAN_TERMS;
        let m = 2 * n;
        let l = (n as f64 / std::f64::consts::SQRT_2).sqrt();
        // f_k = exp(−t_k²)(L² + t_k²), t_k = L tan(kπ/2M), k = −M+1..M−1, f_{−M} = 0
        let f = |k: i64| -> f64 {
            if k.unsigned_abs() as usize >= m {
                return 0.0;
            }
            let theta = k as f64 * std::f64::consts::PI / m as f64;
            let t = l * (theta / 2.0).tan();
            (-t * t).exp() * (l * l + t * t)
        };
        let coeffs = (1..=n)
            .map(|j| {
                let s: f64 = (-(m as i64)..(m as i64))
                    .map(|k| f(k) * (std::f64::consts::PI * (k * j as i64) as f64 / m as f64).cos())
                    .sum();
                s / (2 * m) as f64
            })
            .collect();
        (l, coeffs)
    })
}

fn faddeeva_upper<T: Real>(z: Complex<T>) -> Complex<T> {
    let i = Complex::new(T::zero(), T::one());
    let inv_sqrt_pi = T::FRAC_2_SQRT_PI() * T::half();
    if z.norm() >= T::lit(CF_RADIUS) {
        let mut t = z;
        for k in (1..=CF_DEPTH).rev() {
            t = z - Complex::new(T::lit(k as f64 * 0.5), T::zero()) / t;
        }
        return i * inv_sqrt_pi / t;
    }
    let (l, coeffs) = weideman_coefficients();
    let l = T::lit(*l);
    let lz = Complex::new(l, T::zero());
    let denom = lz - i * z;
    let zz = (lz + i * z) / denom;
    let p = coeffs
        .iter()
        .rev()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &a| {
            acc * zz + Complex::new(T::lit(a), T::zero())
        });
    p * T::two() / (denom * denom) + Complex::new(inv_sqrt_pi, T::zero()) / denom
}

/// Faddeeva function `w(z) = e^{−z²} erfc(−iz)` over the whole complex plane.
pub fn faddeeva<T: Real>(z: Complex<T>) -> Result<Complex<T>> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("faddeeva argument"));
    }
    if z.im >= T::zero() {
        Ok(faddeeva_upper(z))
    } else {
        // w(z) = 2 e^{−z²} − w(−z)
        let w = faddeeva_upper(-z);
        Ok((-(z * z)).exp() * T::two() - w)
    }
}

/// Scaled complementary error function `e^{z²} erfc(z)`.
///
/// For `Re z < 0` the value grows like `2e^{z²}` and overflows to infinity when
/// that is not representable.
pub fn erfcx_complex<T: Real>(z: Complex<T>) -> Result<Complex<T>> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("erfcx argument"));
    }
    faddeeva(Complex::new(-z.im, z.re))
}

/// `K₀` evaluation together with an underflow marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct K0Eval<T> {
    pub value: T,
    /// Set when the true value is below the representable range and `value` is 0.
    pub underflow: bool,
}

fn k0_underflow_threshold<T: Real>() -> T {
    T::lit(700.0).min(T::max_value().ln() - T::two())
}

/// Modified Bessel function `K₀(x)` for `x > 0`.
///
/// Returns 0 past the underflow threshold (`x > 700` in `f64`); use
/// [`bessel_k0_eval`] to see the flag.
pub fn bessel_k0<T: Real>(x: T) -> Result<T> {
    bessel_k0_eval(x).map(|k| k.value)
}

pub fn bessel_k0_eval<T: Real>(x: T) -> Result<K0Eval<T>> {
    if x.is_nan() {
        return Err(Error::NonFinite("bessel_k0 argument"));
    }
    if x <= T::zero() {
        return domain("bessel_k0 requires x > 0");
    }
    if x > k0_underflow_threshold::<T>() {
        return Ok(K0Eval {
            value: T::zero(),
            underflow: true,
        });
    }
    let value = if x <= T::two() {
        k0_series(x)
    } else {
        k0_scaled_cf(x) * (-x).exp()
    };
    Ok(K0Eval {
        value,
        underflow: false,
    })
}

/// Exponentially scaled `e^{x} K₀(x)`; never underflows.
pub fn bessel_k0_scaled<T: Real>(x: T) -> Result<T> {
    if x.is_nan() {
        return Err(Error::NonFinite("bessel_k0 argument"));
    }
    if x <= T::zero() {
        return domain("bessel_k0 requires x > 0");
    }
    if x <= T::two() {
        Ok(k0_series(x) * x.exp())
    } else {
        Ok(k0_scaled_cf(x))
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

fn k0_series<T: Real>(x: T) -> T {
    let q = x * x / T::lit(4.0);
    let mut term = T::one();
    let mut harmonic = T::zero();
    let mut i0 = T::one();
    let mut tail = T::zero();
    for k in 1..60 {
        let kf = T::from_usize_lossy(k);
        term = term * q / (kf * kf);
        harmonic = harmonic + T::one() / kf;
        i0 = i0 + term;
        tail = tail + term * harmonic;
        if term * harmonic < T::epsilon() * tail.abs() * T::lit(0.01) {
            break;
        }
    }
    -((x * T::half()).ln() + T::lit(EULER_GAMMA)) * i0 + tail
}

/// Steed's continued fraction for `e^{x} K₀(x)`, valid for `x ≳ 2`.
fn k0_scaled_cf<T: Real>(x: T) -> T {
    let mut b = T::two() * (T::one() + x);
    let mut d = T::one() / b;
    let mut delh = d;
    let mut q1 = T::zero();
    let mut q2 = T::one();
    let a1 = T::lit(0.25);
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = T::one() + q * delh;
    for i in 2..10_000usize {
        a = a - T::from_usize_lossy(2 * (i - 1));
        c = -a * c / T::from_usize_lossy(i);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q = q + c * qnew;
        b = b + T::two();
        d = T::one() / (b + a * d);
        delh = (b * d - T::one()) * delh;
        let dels = q * delh;
        s = s + dels;
        if (dels / s).abs() < T::epsilon() * T::half() {
            break;
        }
    }
    (T::PI() / (T::two() * x)).sqrt() / s
}
