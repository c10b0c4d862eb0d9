//! Frequency-domain results: the numeric cosine transform of a sampled decay
//! and the closed-form line shapes.
//!
//! Every line shape is normalised so that `∫_{−∞}^{∞} I(ω) dω = F(0)`, i.e.
//! `I(ω) = (1/π)∫_0^∞ F(t) cos(ωt) dt`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fid::FidSeries;
use crate::model::{
    finite, FrequencyDistribution, GaussianFluctuationModel, SpinEnsemble, VibrationModel,
};
use crate::quad::{filon_cos, trapezoid_cos};
use crate::scalar::Real;
use crate::specfun::{bessel_k0_scaled, erfcx_complex};

/// Rule used to integrate `F(t) cos(ωt)` over the sampled grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Plain trapezoid; only allowed while `ω·dt ≤ 0.5`.
    TrapezoidDense,
    /// Filon's rule: quadratic interpolation with the cosine integrated exactly.
    #[default]
    FilonCosine,
}

/// Largest `ω·dt` for which the plain trapezoid rule is accepted.
pub const TRAPEZOID_MAX_PHASE_STEP: f64 = 0.5;

/// Default bound on `|F(t_max)|` for the truncation check.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;

/// Discretisation of the cosine transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformPlan<T> {
    omega_min: T,
    omega_max: T,
    n_omega: usize,
    t_max: T,
    quadrature: Quadrature,
    truncation_tol: Option<T>,
}

impl<T: Real> TransformPlan<T> {
    /// Uniform ω grid on `[0, omega_max]` with `n_omega` points.
    ///
    /// The decay must satisfy `|F(t_max)| < 1e−10`; see [`Self::with_truncation_tol`].
    pub fn new(omega_max: T, n_omega: usize, t_max: T, quadrature: Quadrature) -> Result<Self> {
        finite(omega_max, "omega_max")?;
        finite(t_max, "t_max")?;
        if omega_max <= T::zero() {
            return domain("omega_max must be > 0");
        }
        if n_omega < 2 {
            return domain("n_omega must be >= 2");
        }
        if t_max <= T::zero() {
            return domain("t_max must be > 0");
        }
        Ok(Self {
            omega_min: T::zero(),
            omega_max,
            n_omega,
            t_max,
            quadrature,
            truncation_tol: Some(T::lit(DEFAULT_TRUNCATION_TOL)),
        })
    }

    /// Moves the start of the ω grid away from zero.
    pub fn with_omega_min(mut self, omega_min: T) -> Result<Self> {
        finite(omega_min, "omega_min")?;
        if omega_min < T::zero() || omega_min >= self.omega_max {
            return domain("omega_min must lie in [0, omega_max)");
        }
        self.omega_min = omega_min;
        Ok(self)
    }

    /// Replaces the truncation bound on `|F(t_max)|`; `None` disables the check.
    pub fn with_truncation_tol(mut self, tol: Option<T>) -> Self {
        self.truncation_tol = tol;
        self
    }

    pub fn omega_min(&self) -> T {
        self.omega_min
    }

    pub fn omega_max(&self) -> T {
        self.omega_max
    }

    pub fn n_omega(&self) -> usize {
        self.n_omega
    }

    pub fn t_max(&self) -> T {
        self.t_max
    }

    pub fn quadrature(&self) -> Quadrature {
        self.quadrature
    }

    pub fn truncation_tol(&self) -> Option<T> {
        self.truncation_tol
    }

    pub fn omegas(&self) -> Vec<T> {
        omega_grid(self.omega_min, self.omega_max, self.n_omega)
    }
}

/// `n` equally spaced frequencies from `lo` to `hi` inclusive.
pub fn omega_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / T::from_usize_lossy(n - 1);
    (0..n)
        .map(|j| {
            if j == n - 1 {
                hi
            } else {
                lo + step * T::from_usize_lossy(j)
            }
        })
        .collect()
}

/// Line-shape samples `I(ω_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    omegas: Vec<T>,
    intensities: Vec<T>,
}

impl<T: Real> Spectrum<T> {
    /// `omegas` must be strictly increasing and match `intensities` in length.
    pub fn new(omegas: Vec<T>, intensities: Vec<T>) -> Result<Self> {
        if omegas.len() != intensities.len() {
            return domain("omegas and intensities differ in length");
        }
        if omegas.is_empty() {
            return domain("spectrum needs at least one frequency");
        }
        if omegas.iter().chain(&intensities).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("spectrum samples"));
        }
        if omegas.windows(2).any(|w| w[1] <= w[0]) {
            return domain("omegas must be strictly increasing");
        }
        Ok(Self {
            omegas,
            intensities,
        })
    }

    /// Evaluates `f` at every frequency in parallel.
    pub fn tabulate<F>(omegas: Vec<T>, f: F) -> Result<Self>
    where
        F: Fn(T) -> Result<T> + Sync,
    {
        let intensities = omegas
            .par_iter()
            .map(|&w| f(w))
            .collect::<Result<Vec<T>>>()?;
        Self::new(omegas, intensities)
    }

    pub fn omegas(&self) -> &[T] {
        &self.omegas
    }

    pub fn intensities(&self) -> &[T] {
        &self.intensities
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Pointwise `|I|`.
    pub fn abs(&self) -> Self {
        Self {
            omegas: self.omegas.clone(),
            intensities: self.intensities.iter().map(|v| v.abs()).collect(),
        }
    }

    /// Trapezoid integral of the even extension over `[−ω_max, ω_max]`.
    ///
    /// Requires the grid to start at `ω = 0`. Equals `F(0)` up to truncation.
    pub fn sum_rule(&self) -> Result<T> {
        if self.omegas[0] != T::zero() {
            return domain("sum rule needs a grid starting at omega = 0");
        }
        Ok(T::two() * self.trapezoid_moment(0))
    }

    /// `∫ ω^k I(ω) dω` over the sampled half-line by the trapezoid rule.
    pub fn trapezoid_moment(&self, k: i32) -> T {
        let f = |j: usize| self.omegas[j].powi(k) * self.intensities[j];
        (1..self.omegas.len())
            .map(|j| (self.omegas[j] - self.omegas[j - 1]) * (f(j) + f(j - 1)) * T::half())
            .sum()
    }
}

/// `I(ω_j) = (1/π)∫_0^{t_max} F(t) cos(ω_j t) dt` with the plan's rule.
pub fn cosine_transform<T: Real>(
    fid: &FidSeries<T>,
    plan: &TransformPlan<T>,
) -> Result<Spectrum<T>> {
    if fid.t0() != T::zero() {
        return domain("decay series must start at t = 0");
    }
    let dt = fid.dt();
    let slack = T::lit(1e-9);
    let steps = plan.t_max() / dt;
    let m = (steps + slack).floor();
    if m.to_f64_lossy() > (fid.len() - 1) as f64 || (steps - m).abs() > slack * steps.max(T::one())
    {
        if plan.t_max() > fid.t_max() * (T::one() + slack) {
            return domain(format!(
                "t_max {} lies beyond the decay grid (last sample at {})",
                plan.t_max(),
                fid.t_max()
            ));
        }
        return domain("t_max must be a multiple of the grid spacing dt");
    }
    let m = m.to_f64_lossy() as usize;
    if m < 1 {
        return domain("t_max must span at least one grid step");
    }
    let values = &fid.values()[..=m];
    if let Some(tol) = plan.truncation_tol() {
        let tail = values[m].abs();
        if tail >= tol {
            return domain(format!(
                "|F(t_max)| = {} is not below the truncation tolerance {}",
                tail, tol
            ));
        }
    }
    if plan.quadrature() == Quadrature::TrapezoidDense
        && plan.omega_max() * dt > T::lit(TRAPEZOID_MAX_PHASE_STEP)
    {
        return domain(format!(
            "omega_max*dt = {} exceeds {}; use the Filon rule",
            plan.omega_max() * dt,
            TRAPEZOID_MAX_PHASE_STEP
        ));
    }
    let inv_pi = T::one() / T::PI();
    let rule = plan.quadrature();
    Spectrum::tabulate(plan.omegas(), |w| {
        let integral = match rule {
            Quadrature::TrapezoidDense => trapezoid_cos(values, T::zero(), dt, w),
            Quadrature::FilonCosine => filon_cos(values, T::zero(), dt, w),
        };
        Ok(integral * inv_pi)
    })
}

fn positive<T: Real>(x: T, what: &'static str) -> Result<T> {
    finite(x, what)?;
    if x <= T::zero() {
        return domain(format!("{what} must be > 0"));
    }
    Ok(x)
}

/// Normalised Gaussian `e^{−ω²/ν²}/(ν√π)`, the transform of `e^{−t²ν²/4}`.
pub fn gaussian_line<T: Real>(omega: T, nu: T) -> T {
    let x = omega / nu;
    (-x * x).exp() / (nu * T::PI().sqrt())
}

/// Fast-fluctuation line shape
/// `(1/(α√π τ_c ν²))·Re(erfcx(√z)/√z)`, `z = (2ατ_cν)⁻² + iω/(ατ_cν²)`.
///
/// This is the transform of `e^{−t/(4ατ_c)}/√(1+ατ_cν²t)`, valid while
/// `τ_c²⟨(δD)²⟩ ≪ 1`.
pub fn lineshape_fast_fluct<T: Real>(omega: T, alpha: T, tau_c: T, nu: T) -> Result<T> {
    finite(omega, "omega")?;
    let alpha = positive(alpha, "alpha")?;
    let tau_c = positive(tau_c, "tau_c")?;
    let nu = positive(nu, "nu")?;
    let atn = alpha * tau_c * nu;
    let atn2 = atn * nu;
    let z = Complex::new(T::one() / (T::lit(4.0) * atn * atn), omega / atn2);
    let root = z.sqrt();
    let ratio = erfcx_complex(root)? / root;
    Ok(ratio.re / (alpha * T::PI().sqrt() * tau_c * nu * nu))
}

/// Far-wing asymptote `(9N/(4π))·⟨(δD)²⟩/(τ_c ω⁴)`.
pub fn wing_tail<T: Real>(
    omega: T,
    ens: SpinEnsemble,
    model: &GaussianFluctuationModel<T>,
) -> Result<T> {
    let omega = positive(omega, "omega")?;
    let n = ens.n::<T>();
    Ok(
        T::lit(9.0) * n / (T::lit(4.0) * T::PI()) * model.variance()
            / model.tau_c()
            / omega.powi(4),
    )
}

/// Frozen-disorder line shape `(e^{−1/(2α)}/(πν))·√(2/α)·K₀(|ω|√2/(ν√α))`.
///
/// Diverges logarithmically at `ω = 0`, which is rejected.
pub fn lineshape_static_disorder<T: Real>(omega: T, alpha: T, nu: T) -> Result<T> {
    finite(omega, "omega")?;
    let alpha = positive(alpha, "alpha")?;
    let nu = positive(nu, "nu")?;
    if omega == T::zero() {
        return domain("static-disorder line shape diverges at omega = 0");
    }
    let x = omega.abs() * T::two().sqrt() / (nu * alpha.sqrt());
    let k0s = bessel_k0_scaled(x)?;
    let prefactor = (T::two() / alpha).sqrt() / (T::PI() * nu);
    Ok(prefactor * k0s * (-x - T::one() / (T::two() * alpha)).exp())
}

/// Low-frequency form `(e^{−1/(2α)}/(πν))·√(2/α)·ln(ν√α/(|ω|√2))`.
pub fn static_disorder_log_asymptote<T: Real>(omega: T, alpha: T, nu: T) -> Result<T> {
    let alpha = positive(alpha, "alpha")?;
    let nu = positive(nu, "nu")?;
    let w = positive(omega.abs(), "|omega|")?;
    let prefactor =
        (-T::one() / (T::two() * alpha)).exp() / (T::PI() * nu) * (T::two() / alpha).sqrt();
    Ok(prefactor * (nu * alpha.sqrt() / (w * T::two().sqrt())).ln())
}

/// High-frequency form `(e^{−1/(2α)}/√(πν√(2α)))·|ω|^{−1/2}·e^{−|ω|√2/(ν√α)}`.
pub fn static_disorder_high_asymptote<T: Real>(omega: T, alpha: T, nu: T) -> Result<T> {
    let alpha = positive(alpha, "alpha")?;
    let nu = positive(nu, "nu")?;
    let w = positive(omega.abs(), "|omega|")?;
    let lead = T::one() / (T::PI() * nu * (T::two() * alpha).sqrt()).sqrt();
    Ok(lead / w.sqrt()
        * (-T::one() / (T::two() * alpha) - w * T::two().sqrt() / (nu * alpha.sqrt())).exp())
}

/// Transform of the second-order vibration decay at a single frequency `Ω`,
/// with `ν` given directly and no bound on `ε`.
///
/// Besides the `±Ω` and `±2Ω` satellites this keeps the `ε²` reduction of the
/// central line, `−(ε²/2)(ν/2Ω)²·e^{−ω²/ν²}/(ν√π)`, which the constant part of
/// `sin²Ωt` contributes.
pub fn homogeneous_lineshape<T: Real>(omega: T, epsilon: T, big_omega: T, nu: T) -> Result<T> {
    finite(omega, "omega")?;
    finite(epsilon, "epsilon")?;
    finite(big_omega, "Omega")?;
    let nu = positive(nu, "nu")?;
    if big_omega == T::zero() {
        return domain("vibration frequency Omega must be nonzero");
    }
    let r = nu / (T::two() * big_omega);
    let eps2r2 = epsilon * epsilon * r * r;
    let central = gaussian_line(omega, nu) * (T::one() - eps2r2 * T::half());
    let i1 =
        |w: T| -epsilon * T::half() * (T::one() + w / big_omega) * gaussian_line(w + big_omega, nu);
    let i2 = |w: T| eps2r2 / T::lit(4.0) * gaussian_line(w + T::two() * big_omega, nu);
    Ok(central + i1(omega) + i1(-omega) + i2(omega) + i2(-omega))
}

/// Satellite line shape of a container vibrating at `Ω`; see [`homogeneous_lineshape`].
pub fn lineshape_satellites<T: Real>(omega: T, vib: &VibrationModel<T>, nu: T) -> Result<T> {
    homogeneous_lineshape(omega, vib.epsilon(), vib.omega(), nu)
}

/// Probability density of vibration frequencies, `A₀Ω²e^{−(Ω−Ω₀)²/Δ²}`.
pub fn frequency_density<T: Real>(big_omega: T, dist: &FrequencyDistribution<T>) -> T {
    dist.density(big_omega)
}

/// Homogeneous line shape averaged over the frequency distribution.
///
/// Central line, pairs at `±Ω₀` of width `2√(ν²+Δ²)` and pairs at `±2Ω₀` of
/// width `2√(ν²+4Δ²)`. With `δ = Δ/ν`, the `±2Ω₀` amplitude is
/// `(ε²/16)A₀νΔ/√(1+4δ²)` and the central line carries the averaged `ε²`
/// reduction `−(ε²ν²/8)A₀√πΔ·e^{−ω²/ν²}/(ν√π)`.
pub fn lineshape_inhomogeneous<T: Real>(
    omega: T,
    epsilon: T,
    nu: T,
    dist: &FrequencyDistribution<T>,
) -> Result<T> {
    finite(omega, "omega")?;
    finite(epsilon, "epsilon")?;
    let nu = positive(nu, "nu")?;
    let a0 = dist.a0();
    let delta = dist.delta();
    let o0 = dist.omega0();
    let d2 = (delta / nu).powi(2);
    let sqrt_pi = T::PI().sqrt();
    let four = T::lit(4.0);
    let central = gaussian_line(omega, nu)
        * (T::one() - epsilon * epsilon * nu * nu / T::lit(8.0) * a0 * sqrt_pi * delta);
    let g1 = |w: T| {
        let bracket = T::half() + (o0 - w * d2) * (o0 + w) / (delta * delta * (T::one() + d2));
        let amp =
            -epsilon * T::half() * a0 * delta.powi(3) / (nu * (T::one() + d2).powf(T::lit(1.5)));
        amp * bracket * (-(w + o0).powi(2) / (nu * nu + delta * delta)).exp()
    };
    let g2 = |w: T| {
        let amp =
            epsilon * epsilon / T::lit(16.0) * a0 * nu * delta / (T::one() + four * d2).sqrt();
        amp * (-(w + T::two() * o0).powi(2) / (nu * nu + four * delta * delta)).exp()
    };
    Ok(central + g1(omega) + g1(-omega) + g2(omega) + g2(-omega))
}
