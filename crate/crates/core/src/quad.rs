//! Numerical integration: adaptive Gauss–Kronrod, uniform-grid rules for
//! sampled signals (trapezoid, Filon cosine), and semi-infinite Fourier
//! cosine integrals of analytic integrands.

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

/// An integral estimate with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub abs_error: T,
}

#[allow(clippy::excessive_precision)]
const XGK21: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG10: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK21: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// One 21-point Kronrod panel with the embedded 10-point Gauss estimate.
///
/// The flag is set when the error estimate sits at the round-off floor.
fn gk21<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (Integral<T>, bool) {
    let center = (a + b) * T::half();
    let half = (b - a) * T::half();
    let fc = f(center);
    let mut kronrod = fc * T::lit(WGK21[10]);
    let mut gauss = T::zero();
    let mut res_abs = (kronrod).abs();
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    for j in 0..10 {
        let x = half * T::lit(XGK21[j]);
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        let w = T::lit(WGK21[j]);
        kronrod = kronrod + w * (f1 + f2);
        res_abs = res_abs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss = gauss + T::lit(WG10[j / 2]) * (f1 + f2);
        }
    }
    let mean = kronrod * T::half();
    let mut res_asc = T::lit(WGK21[10]) * (fc - mean).abs();
    for j in 0..10 {
        res_asc = res_asc + T::lit(WGK21[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if res_asc != T::zero() && err != T::zero() {
        let scale = (T::lit(200.0) * err / res_asc).powf(T::lit(1.5));
        err = if scale < T::one() {
            res_asc * scale
        } else {
            res_asc
        };
    }
    let floor = T::lit(50.0) * T::epsilon() * res_abs;
    let mut at_floor = false;
    if res_abs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) && floor >= err {
        err = floor;
        at_floor = true;
    }
    (
        Integral {
            value,
            abs_error: err,
        },
        at_floor,
    )
}

const MAX_PANELS: usize = 4000;

/// Adaptive Gauss–Kronrod integration of `f` over the finite interval `[a, b]`.
///
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<Integral<T>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("integration limits"));
    }
    if a == b {
        return Ok(Integral {
            value: T::zero(),
            abs_error: T::zero(),
        });
    }
    let (first, floor) = gk21(&mut f, a, b);
    let mut panels = vec![(a, b, first, floor)];
    loop {
        let value: T = panels.iter().map(|p| p.2.value).sum();
        let error: T = panels.iter().map(|p| p.2.abs_error).sum();
        let target = abs_tol.max(rel_tol * value.abs());
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| {
                x.1 .2
                    .abs_error
                    .partial_cmp(&y.1 .2.abs_error)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .expect("at least one panel");
        // the dominant panel is already limited by round-off: nothing left to gain
        if error <= target || panels[worst].3 {
            return Ok(Integral {
                value,
                abs_error: error,
            });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::NoConvergence(format!(
                "adaptive quadrature: error {} above target {} after {} panels",
                error.to_f64_lossy(),
                target.to_f64_lossy(),
                panels.len()
            )));
        }
        let (lo, hi, _, _) = panels.swap_remove(worst);
        let mid = (lo + hi) * T::half();
        if mid <= lo || mid >= hi {
            // interval cannot be split further in this precision
            let value: T = panels.iter().map(|p| p.2.value).sum();
            return Err(Error::NoConvergence(format!(
                "adaptive quadrature: panel width underflow near {} (partial value {})",
                lo.to_f64_lossy(),
                value.to_f64_lossy()
            )));
        }
        let (left, lf) = gk21(&mut f, lo, mid);
        let (right, rf) = gk21(&mut f, mid, hi);
        panels.push((lo, mid, left, lf));
        panels.push((mid, hi, right, rf));
    }
}

/// Adaptive integration of `f` over `[a, ∞)` via `t = a + u/(1 − u)`.
pub fn integrate_to_infinity<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<Integral<T>> {
    let g = |u: T| {
        let one_minus = T::one() - u;
        let t = a + u / one_minus;
        let v = f(t);
        if v == T::zero() {
            T::zero()
        } else {
            v / (one_minus * one_minus)
        }
    };
    integrate(g, T::zero(), T::one(), abs_tol, rel_tol)
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid<T: Real>(values: &[T], dt: T) -> T {
    match values.len() {
        0 | 1 => T::zero(),
        n => {
            let inner: T = values[1..n - 1].iter().copied().sum();
            dt * (inner + (values[0] + values[n - 1]) * T::half())
        }
    }
}

/// Running trapezoid integral; element `k` is `∫_{t_0}^{t_k}`, so the first is 0.
pub fn cumulative_trapezoid<T: Real>(values: &[T], dt: T) -> Vec<T> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::zero();
    if let Some(&first) = values.first() {
        out.push(acc);
        let mut prev = first;
        for &v in &values[1..] {
            acc = acc + dt * T::half() * (prev + v);
            out.push(acc);
            prev = v;
        }
    }
    out
}

/// `∫ f(t) cos(ωt) dt` over a uniform grid by the trapezoid rule.
pub fn trapezoid_cos<T: Real>(values: &[T], t0: T, dt: T, omega: T) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let mut acc = T::zero();
    for (k, &v) in values.iter().enumerate() {
        let w = if k == 0 || k == n - 1 {
            T::half()
        } else {
            T::one()
        };
        acc = acc + w * v * (omega * (t0 + dt * T::from_usize_lossy(k))).cos();
    }
    acc * dt
}

/// Filon weights `(α, β, γ)` at `θ = ωh`, from power series below `θ = 1`.
pub fn filon_weights<T: Real>(theta: T) -> (T, T, T) {
    if theta.abs() >= T::one() {
        let (s, c) = theta.sin_cos();
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let alpha =
            T::one() / theta + (T::two() * theta).sin() / (T::two() * t2) - T::two() * s * s / t3;
        let beta = T::two() * ((T::one() + c * c) / t2 - (T::two() * theta).sin() / t3);
        let gamma = T::lit(4.0) * (s / t3 - c / t2);
        return (alpha, beta, gamma);
    }
    // Coefficients of θ^{2m−1}, θ^{2k−2}, θ^{2k−2}: signed powers of 4 over factorials.
    let t2 = theta * theta;
    let mut alpha = T::zero();
    let mut beta = T::zero();
    let mut gamma = T::zero();
    // fact[n] = n!
    let mut fact = [1.0f64; 40];
    for n in 1..40 {
        fact[n] = fact[n - 1] * n as f64;
    }
    let mut pow_theta_alpha = t2 * theta; // θ^{2m−1}, m = 2
    let mut pow_theta = T::one(); // θ^{2k−2}, k = 1
    let mut four_k = 4.0f64;
    for k in 1..18usize {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let b = sign * four_k * (0.5 / fact[2 * k] - 2.0 / fact[2 * k + 1]);
        let g = sign * (1.0 / fact[2 * k + 1] - 1.0 / fact[2 * k]);
        beta = beta + T::lit(b) * pow_theta;
        gamma = gamma + T::lit(g) * pow_theta;
        let m = k + 1;
        let sign_m = -sign;
        let four_m = four_k * 4.0;
        let a = sign_m * four_m * (1.0 / fact[2 * m + 1] - 4.0 / fact[2 * m + 2]);
        alpha = alpha + T::lit(a) * pow_theta_alpha;
        pow_theta = pow_theta * t2;
        pow_theta_alpha = pow_theta_alpha * t2;
        four_k = four_m;
    }
    (alpha, T::two() * beta, T::lit(4.0) * gamma)
}

/// Filon's rule for `∫ f(t) cos(ωt) dt` over a uniform grid.
///
/// Piecewise-quadratic interpolation of `f` on panel pairs, with the
/// oscillatory factor integrated exactly. When the number of intervals is odd,
/// the last interval is closed with a linear (Filon-trapezoid) panel.
pub fn filon_cos<T: Real>(values: &[T], t0: T, dt: T, omega: T) -> T {
    let n = values.len();
    if n < 2 {
        return T::zero();
    }
    let intervals = n - 1;
    let even = intervals - intervals % 2;
    let mut total = T::zero();
    if even >= 2 {
        let theta = omega * dt;
        let (alpha, beta, gamma) = filon_weights(theta);
        let t_at = |k: usize| t0 + dt * T::from_usize_lossy(k);
        let mut c_even = T::zero();
        let mut c_odd = T::zero();
        for (k, &v) in values[..=even].iter().enumerate() {
            let c = (omega * t_at(k)).cos();
            if k % 2 == 0 {
                c_even = c_even + v * c;
            } else {
                c_odd = c_odd + v * c;
            }
        }
        let f0 = values[0];
        let fe = values[even];
        c_even =
            c_even - T::half() * (f0 * (omega * t_at(0)).cos() + fe * (omega * t_at(even)).cos());
        let boundary = fe * (omega * t_at(even)).sin() - f0 * (omega * t_at(0)).sin();
        total = dt * (alpha * boundary + beta * c_even + gamma * c_odd);
    }
    if even < intervals {
        let a = t0 + dt * T::from_usize_lossy(even);
        total = total + linear_filon_panel(values[even], values[even + 1], a, dt, omega);
    }
    total
}

/// Exact `∫_a^{a+h} p(t) cos(ωt) dt` for the linear `p` through `(a, f0)`, `(a+h, f1)`.
fn linear_filon_panel<T: Real>(f0: T, f1: T, a: T, h: T, omega: T) -> T {
    let theta = omega * h;
    if theta.abs() < T::lit(1e-4) {
        let m = a + h * T::half();
        let fm = (f0 + f1) * T::half();
        return h
            * (f0 * (omega * a).cos()
                + T::lit(4.0) * fm * (omega * m).cos()
                + f1 * (omega * (a + h)).cos())
            / T::lit(6.0);
    }
    let b = a + h;
    let slope = (f1 - f0) / h;
    let (sa, ca) = (omega * a).sin_cos();
    let (sb, cb) = (omega * b).sin_cos();
    (f1 * sb - f0 * sa) / omega + slope * (cb - ca) / (omega * omega)
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums.
fn wynn_epsilon<T: Real>(sums: &[T]) -> T {
    let n = sums.len();
    if n < 3 {
        return *sums.last().unwrap_or(&T::zero());
    }
    let mut prev = vec![T::zero(); n + 1];
    let mut cur: Vec<T> = sums.to_vec();
    let mut best = sums[n - 1];
    let mut col = 0;
    while cur.len() >= 2 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == T::zero() {
                return cur[i + 1];
            }
            next.push(prev[i + 1] + T::one() / diff);
        }
        prev = cur;
        cur = next;
        col += 1;
        if col % 2 == 0 {
            if let Some(&v) = cur.last() {
                if v.is_finite() {
                    best = v;
                }
            }
        }
    }
    best
}

/// `∫_0^∞ f(t) cos(ωt) dt` for an analytic integrand.
///
/// For `ω ≠ 0` the half-line is cut at the zeros of `cos(ωt)`; each piece is
/// integrated adaptively and the partial sums are extrapolated with Wynn's
/// epsilon algorithm. `f` must decay (possibly slowly, like `1/t`).
pub fn fourier_cosine_integral<T: Real, F: FnMut(T) -> T>(
    mut f: F,
    omega: T,
    abs_tol: T,
    rel_tol: T,
) -> Result<Integral<T>> {
    if !omega.is_finite() {
        return Err(Error::NonFinite("omega"));
    }
    let omega = omega.abs();
    if omega == T::zero() {
        return integrate_to_infinity(f, T::zero(), abs_tol, rel_tol);
    }
    let half_period = T::PI() / omega;
    let panel_tol = abs_tol * T::lit(1e-2);
    let mut g = |t: T| f(t) * (omega * t).cos();
    // first piece runs to the first zero of cos(ωt)
    let mut edges = vec![T::zero(), half_period * T::half()];
    let first = integrate(
        &mut g,
        edges[0],
        edges[1],
        panel_tol,
        rel_tol * T::lit(1e-2),
    )?;
    let mut sum = first.value;
    let mut err = first.abs_error;
    let mut sums = vec![sum];
    let mut last_estimate = sum;
    let mut stable = 0;
    const WINDOW: usize = 40;
    for k in 1..200_000usize {
        let a = *edges.last().expect("edge");
        let b = half_period * (T::from_usize_lossy(k) + T::half());
        let piece = integrate(&mut g, a, b, panel_tol, rel_tol * T::lit(1e-2))?;
        edges.push(b);
        sum = sum + piece.value;
        err = err + piece.abs_error;
        sums.push(sum);
        if sums.len() > WINDOW {
            sums.remove(0);
        }
        let target = abs_tol.max(rel_tol * sum.abs());
        // negligible tail: plain summation has converged
        if piece.value.abs() <= target * T::lit(1e-3) && k > 2 {
            let prev_small =
                sums.len() >= 2 && (sums[sums.len() - 1] - sums[sums.len() - 2]).abs() <= target;
            if prev_small {
                return Ok(Integral {
                    value: sum,
                    abs_error: err + piece.value.abs(),
                });
            }
        }
        if sums.len() >= 6 {
            let estimate = wynn_epsilon(&sums);
            let change = (estimate - last_estimate).abs();
            if change <= abs_tol.max(rel_tol * estimate.abs()) {
                stable += 1;
                if stable >= 3 {
                    return Ok(Integral {
                        value: estimate,
                        abs_error: err + change,
                    });
                }
            } else {
                stable = 0;
            }
            last_estimate = estimate;
        }
    }
    Err(Error::NoConvergence(
        "Fourier cosine integral did not converge".to_string(),
    ))
}

/// Checks that a uniform grid is usable.
pub(crate) fn check_grid<T: Real>(dt: T, len: usize) -> Result<()> {
    if !(dt.is_finite() && dt > T::zero()) {
        return domain("grid spacing dt must be finite and > 0");
    }
    if len < 2 {
        return domain("grid needs at least 2 samples");
    }
    Ok(())
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn gauss_kronrod_polynomials_and_smooth() {
        let r = integrate(|x: f64| x.powi(7) - 3.0 * x * x, -1.0, 2.0, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(r.value, (256.0 - 1.0) / 8.0 - 9.0, epsilon = 1e-12);
        let r = integrate(|x: f64| x.sin(), 0.0, PI, 1e-14, 1e-14).unwrap();
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_kronrod_handles_endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert_relative_eq!(r.value, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn semi_infinite_gaussian() {
        let r = integrate_to_infinity(|t: f64| (-t * t).exp(), 0.0, 1e-14, 1e-13).unwrap();
        assert_relative_eq!(r.value, PI.sqrt() / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn cumulative_trapezoid_on_constant_is_exact() {
        let c = cumulative_trapezoid(&[2.0; 5], 0.5);
        assert_eq!(c, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(cumulative_trapezoid::<f64>(&[], 0.1).is_empty());
    }

    #[test]
    fn filon_series_matches_closed_form_at_switch() {
        for &th in &[0.999_999_f64, 0.5, 0.9] {
            let (a1, b1, g1) = filon_weights(th);
            let (s, c) = th.sin_cos();
            let t2 = th * th;
            let t3 = t2 * th;
            let a2 = 1.0 / th + (2.0 * th).sin() / (2.0 * t2) - 2.0 * s * s / t3;
            let b2 = 2.0 * ((1.0 + c * c) / t2 - (2.0 * th).sin() / t3);
            let g2 = 4.0 * (s / t3 - c / t2);
            assert_relative_eq!(a1, a2, max_relative = 1e-9);
            assert_relative_eq!(b1, b2, max_relative = 1e-13);
            assert_relative_eq!(g1, g2, max_relative = 1e-13);
        }
        let (a, b, g) = filon_weights(0.0f64);
        assert_eq!(a, 0.0);
        assert_relative_eq!(b, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(g, 4.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn filon_exact_for_quadratics() {
        // ∫_0^2 t² cos(5t) dt
        let n = 41;
        let dt = 2.0 / 40.0;
        let vals: Vec<f64> = (0..n).map(|k| (k as f64 * dt).powi(2)).collect();
        let w = 5.0f64;
        let exact = (2.0 * 2.0 * (w * 2.0).cos()) / (w * w)
            + ((w * w * 4.0 - 2.0) * (w * 2.0).sin()) / w.powi(3);
        assert_relative_eq!(filon_cos(&vals, 0.0, dt, w), exact, epsilon = 1e-13);
    }

    #[test]
    fn filon_odd_interval_count() {
        let n = 40;
        let dt = 0.05;
        let vals: Vec<f64> = (0..n).map(|k| (-(k as f64 * dt)).exp()).collect();
        let t_end = dt * (n - 1) as f64;
        let w = 3.0f64;
        // ∫_0^T e^{-t} cos(wt) dt
        let exact =
            (1.0 + (-t_end).exp() * (w * (w * t_end).sin() - (w * t_end).cos())) / (1.0 + w * w);
        assert!((filon_cos(&vals, 0.0, dt, w) - exact).abs() < 2e-5);
    }

    #[test]
    fn fourier_cosine_of_exponential() {
        for &w in &[0.0, 0.3, 1.0, 7.0] {
            let r = fourier_cosine_integral(|t: f64| (-t).exp(), w, 1e-14, 1e-12).unwrap();
            assert_relative_eq!(r.value, 1.0 / (1.0 + w * w), max_relative = 1e-11);
        }
    }

    #[test]
    fn fourier_cosine_of_slow_tail() {
        // ∫_0^∞ cos(xt)/√(1+t²) dt = K0(x); K0(1) from a 40-digit reference
        let r = fourier_cosine_integral(|t: f64| 1.0 / (1.0 + t * t).sqrt(), 1.0, 1e-14, 1e-12)
            .unwrap();
        assert_relative_eq!(r.value, 0.42102443824070833334, max_relative = 1e-10);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 − 1/2 + 1/3 − ...
        let mut s = 0.0;
        let sums: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        assert!((wynn_epsilon(&sums) - 2f64.ln()).abs() < 1e-12);
    }
}
