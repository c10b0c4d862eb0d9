//! Time-domain signals: phase accumulation, exact and large-N free induction
//! decays, the Gaussian-noise-averaged decay and the vibration decay.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{
    finite, FrequencyDistribution, GaussianFluctuationModel, SpinEnsemble, VibrationModel,
};
use crate::quad::{check_grid, cumulative_trapezoid, integrate};
use crate::scalar::Real;

/// Uniform time grid `t_k = t0 + k·dt`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    t0: T,
    dt: T,
    n: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t0: T, dt: T, n: usize) -> Result<Self> {
        finite(t0, "t0")?;
        check_grid(dt, n)?;
        Ok(Self { t0, dt, n })
    }

    /// Grid starting at zero that covers `[0, t_max]` with spacing at most `dt_max`.
    pub fn covering(t_max: T, dt_max: T) -> Result<Self> {
        finite(t_max, "t_max")?;
        finite(dt_max, "dt_max")?;
        if t_max <= T::zero() || dt_max <= T::zero() {
            return domain("t_max and dt_max must be > 0");
        }
        let steps = (t_max / dt_max).ceil().to_f64_lossy();
        if steps >= MAX_SAMPLES as f64 {
            return domain(format!("grid would exceed {MAX_SAMPLES} samples"));
        }
        let steps = (steps as usize).max(1);
        Self::new(T::zero(), t_max / T::from_usize_lossy(steps), steps + 1)
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + T::from_usize_lossy(k) * self.dt
    }

    pub fn t_max(&self) -> T {
        self.time(self.n - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n).map(move |k| self.time(k))
    }
}

/// Samples of the coupling `D(t)` in rad/s on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTrajectory<T> {
    t0: T,
    dt: T,
    d_values: Vec<T>,
}

impl<T: Real> CouplingTrajectory<T> {
    pub fn new(t0: T, dt: T, d_values: Vec<T>) -> Result<Self> {
        finite(t0, "t0")?;
        check_grid(dt, d_values.len())?;
        if d_values.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("coupling samples"));
        }
        Ok(Self { t0, dt, d_values })
    }

    /// Samples `d(t)` on `grid`.
    pub fn from_fn(grid: &TimeGrid<T>, d: impl Fn(T) -> T) -> Result<Self> {
        Self::new(grid.t0(), grid.dt(), grid.times().map(d).collect())
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn d_values(&self) -> &[T] {
        &self.d_values
    }

    pub fn grid(&self) -> TimeGrid<T> {
        TimeGrid {
            t0: self.t0,
            dt: self.dt,
            n: self.d_values.len(),
        }
    }
}

/// Accumulated phase `φ(t_k) = ½∫_{t0}^{t_k} D dt'` by cumulative trapezoid.
///
/// The first element is zero.
pub fn phase_shift<T: Real>(traj: &CouplingTrajectory<T>) -> Vec<T> {
    let mut phi = cumulative_trapezoid(&traj.d_values, traj.dt);
    for p in &mut phi {
        *p = *p * T::half();
    }
    phi
}

/// Exact decay `cos(3φ)^{N−1}` for a spatially uniform coupling.
pub fn fid_exact<T: Real>(phi: T, ens: SpinEnsemble) -> T {
    (T::lit(3.0) * phi).cos().powi((ens.n_spins() - 1) as i32)
}

/// Large-N limit `exp(−(N/2)(3φ)²)`.
pub fn fid_large_n<T: Real>(phi: T, ens: SpinEnsemble) -> T {
    let x = T::lit(3.0) * phi;
    (-(ens.n::<T>() * T::half()) * x * x).exp()
}

/// Phase-variance kernel of the exponential correlation,
/// `T²(t) = τ_c²(e^{−t/τ_c} + t/τ_c − 1)`.
///
/// `tau_c = +∞` gives `t²/2`. Small `t/τ_c` uses the Taylor series.
pub fn t2_correlation<T: Real>(t: T, tau_c: T) -> Result<T> {
    if t.is_nan() || tau_c.is_nan() {
        return Err(Error::NonFinite("t2_correlation argument"));
    }
    if t < T::zero() {
        return domain("t must be >= 0");
    }
    if tau_c <= T::zero() {
        return domain("tau_c must be > 0");
    }
    if tau_c.is_infinite() {
        return Ok(t * t * T::half());
    }
    let x = t / tau_c;
    let g = if x < T::lit(0.25) {
        // Σ_{k≥2} (−x)^k/k!
        let mut term = x * x * T::half();
        let mut sum = term;
        let mut k = 2usize;
        loop {
            k += 1;
            term = -term * x / T::from_usize_lossy(k);
            sum = sum + term;
            if term.abs() <= T::epsilon() * sum.abs() || k > 40 {
                break;
            }
        }
        sum
    } else {
        (-x).exp_m1() + x
    };
    Ok(tau_c * tau_c * g)
}

/// Gaussian-noise-averaged decay of the large-N signal.
///
/// Evaluated as `exp(−(9N/8)⟨D⟩²t²/s)/√s` with `s = 1 + (9N/2)⟨(δD)²⟩T²(t)`,
/// which equals `exp(−(t²ν²/4)/(1+αν²T²))/√(1+αν²T²)` and stays finite at `⟨D⟩ = 0`.
pub fn fid_gaussian<T: Real>(
    t: T,
    ens: SpinEnsemble,
    model: &GaussianFluctuationModel<T>,
) -> Result<T> {
    let t2 = t2_correlation(t, model.tau_c())?;
    let n = ens.n::<T>();
    let s = T::one() + T::lit(4.5) * n * model.variance() * t2;
    let m = model.mean_d();
    Ok((-(T::lit(9.0) / T::lit(8.0)) * n * m * m * t * t / s).exp() / s.sqrt())
}

fn check_regime<T: Real>(t: T, alpha: T, nu: T) -> Result<()> {
    if t.is_nan() || alpha.is_nan() || nu.is_nan() {
        return Err(Error::NonFinite("regime argument"));
    }
    if t < T::zero() {
        return domain("t must be >= 0");
    }
    if alpha <= T::zero() || !alpha.is_finite() {
        return domain("alpha must be finite and > 0");
    }
    if nu <= T::zero() || !nu.is_finite() {
        return domain("nu must be finite and > 0");
    }
    Ok(())
}

/// Fast-fluctuation regime `e^{−t/(4ατ_c)}/√(1 + ατ_cν²t)` (valid for `t ≫ τ_c`).
pub fn fid_fast_regime<T: Real>(t: T, alpha: T, tau_c: T, nu: T) -> Result<T> {
    check_regime(t, alpha, nu)?;
    if !(tau_c > T::zero() && tau_c.is_finite()) {
        return domain("tau_c must be finite and > 0");
    }
    let at = alpha * tau_c;
    Ok((-t / (T::lit(4.0) * at)).exp() / (T::one() + at * nu * nu * t).sqrt())
}

/// Frozen-disorder regime `e^{−1/(2α)}/√(1 + αν²t²/2)` (valid for `t ≫ 1/ν`).
pub fn fid_frozen_regime<T: Real>(t: T, alpha: T, nu: T) -> Result<T> {
    check_regime(t, alpha, nu)?;
    let x = nu * t;
    Ok((-T::one() / (T::two() * alpha)).exp() / (T::one() + alpha * x * x * T::half()).sqrt())
}

/// Decay of a harmonically vibrating container to second order in `ε`:
/// `e^{−t²ν²/4}(1 − ε(ν²t/2Ω) sin Ωt − ε²(ν/2Ω)² sin²Ωt)`.
pub fn fid_vibration<T: Real>(t: T, ens: SpinEnsemble, vib: &VibrationModel<T>) -> Result<T> {
    fid_vibration_kernel(t, vib.epsilon(), vib.omega(), vib.nu(ens))
}

/// Same expansion as [`fid_vibration`] with `ν` given directly and no bound on `ε`.
pub fn fid_vibration_kernel<T: Real>(t: T, epsilon: T, omega: T, nu: T) -> Result<T> {
    if t.is_nan() || epsilon.is_nan() || omega.is_nan() || nu.is_nan() {
        return Err(Error::NonFinite("vibration argument"));
    }
    if omega == T::zero() {
        return domain("vibration frequency omega must be nonzero");
    }
    if t < T::zero() {
        return domain("t must be >= 0");
    }
    let s = (omega * t).sin();
    let r = nu / (T::two() * omega);
    let envelope = (-(t * t * nu * nu) / T::lit(4.0)).exp();
    Ok(envelope
        * (T::one()
            - epsilon * nu * nu * t * s / (T::two() * omega)
            - epsilon * epsilon * r * r * s * s))
}

/// Vibration decay averaged over the frequency distribution,
/// `∫ P(Ω) F(t, Ω) dΩ` with `F` the second-order expansion of [`fid_vibration_kernel`].
///
/// The `Ω²` of the density cancels the `1/Ω` and `1/Ω²` of the expansion, so the
/// integrand is regular at `Ω = 0`.
pub fn fid_vibration_ensemble<T: Real>(
    t: T,
    epsilon: T,
    nu: T,
    dist: &FrequencyDistribution<T>,
) -> Result<T> {
    if t.is_nan() || epsilon.is_nan() || nu.is_nan() {
        return Err(Error::NonFinite("vibration argument"));
    }
    if t < T::zero() {
        return domain("t must be >= 0");
    }
    if !(nu.is_finite() && nu > T::zero()) {
        return domain("nu must be finite and > 0");
    }
    let envelope = (-(t * t * nu * nu) / T::lit(4.0)).exp();
    if envelope == T::zero() {
        return Ok(T::zero());
    }
    let (o0, d, a0) = (dist.omega0(), dist.delta(), dist.a0());
    let nu2 = nu * nu;
    let integrand = |w: T| {
        let x = (w - o0) / d;
        let s = (w * t).sin();
        let body = w * w
            - epsilon * nu2 * t * w * s * T::half()
            - epsilon * epsilon * nu2 * s * s / T::lit(4.0);
        a0 * (-x * x).exp() * body
    };
    let reach = T::lit(12.0) * d;
    let pieces = (t * reach / T::PI())
        .ceil()
        .to_f64_lossy()
        .clamp(1.0, 4096.0) as usize;
    let width = T::two() * reach / T::from_usize_lossy(pieces);
    let tol = T::lit(1e-15);
    let mut total = T::zero();
    for k in 0..pieces {
        let a = o0 - reach + width * T::from_usize_lossy(k);
        total = total + integrate(integrand, a, a + width, tol, tol)?.value;
    }
    Ok(envelope * total)
}

/// Largest number of samples a generated series may hold.
pub const MAX_SAMPLES: usize = 10_000_000;

/// Grid spacing resolving the envelope, vibration and correlation time scales:
/// `min(0.05/ν, 0.05·2π/|Ω|, 0.05·τ_c)`, skipping absent or infinite scales.
pub fn recommended_dt<T: Real>(nu: T, omega: Option<T>, tau_c: Option<T>) -> Result<T> {
    if !(nu.is_finite() && nu > T::zero()) {
        return domain("nu must be finite and > 0");
    }
    let c = T::lit(0.05);
    let mut dt = c / nu;
    if let Some(w) = omega.filter(|w| *w != T::zero() && w.is_finite()) {
        dt = dt.min(c * T::two() * T::PI() / w.abs());
    }
    if let Some(tau) = tau_c.filter(|tau| tau.is_finite() && *tau > T::zero()) {
        dt = dt.min(c * tau);
    }
    Ok(dt)
}

/// Real decay samples `F(t_k)` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidSeries<T> {
    t0: T,
    dt: T,
    values: Vec<T>,
}

impl<T: Real> FidSeries<T> {
    pub fn new(t0: T, dt: T, values: Vec<T>) -> Result<Self> {
        finite(t0, "t0")?;
        check_grid(dt, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("FID samples"));
        }
        Ok(Self { t0, dt, values })
    }

    /// Evaluates `f` at every grid point in parallel.
    pub fn tabulate<F>(grid: &TimeGrid<T>, f: F) -> Result<Self>
    where
        F: Fn(T) -> Result<T> + Sync,
    {
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| f(grid.time(k)))
            .collect::<Result<Vec<T>>>()?;
        Self::new(grid.t0(), grid.dt(), values)
    }

    /// Samples `f` from `t = 0` with spacing `dt` until `|F| < 1e−10` or `t ≥ 50/ν`,
    /// whichever comes first, keeping at most [`MAX_SAMPLES`] points.
    pub fn until_decayed<F>(dt: T, nu: T, f: F) -> Result<Self>
    where
        F: Fn(T) -> Result<T>,
    {
        if !(nu.is_finite() && nu > T::zero()) {
            return domain("nu must be finite and > 0");
        }
        Self::until_below(dt, T::lit(1e-10), T::lit(50.0) / nu, f)
    }

    /// Samples `f` from `t = 0` with spacing `dt` until `|F| < threshold` or
    /// `t ≥ t_end`, keeping at most [`MAX_SAMPLES`] points.
    pub fn until_below<F>(dt: T, threshold: T, t_end: T, f: F) -> Result<Self>
    where
        F: Fn(T) -> Result<T>,
    {
        check_grid(dt, 2)?;
        if t_end.is_nan() || threshold.is_nan() {
            return Err(Error::NonFinite("horizon"));
        }
        let mut values = Vec::new();
        for k in 0..MAX_SAMPLES {
            let t = T::from_usize_lossy(k) * dt;
            let v = f(t)?;
            values.push(v);
            if k >= 1 && (v.abs() < threshold || t >= t_end) {
                break;
            }
        }
        Self::new(T::zero(), dt, values)
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> TimeGrid<T> {
        TimeGrid {
            t0: self.t0,
            dt: self.dt,
            n: self.values.len(),
        }
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + T::from_usize_lossy(k) * self.dt
    }

    pub fn t_max(&self) -> T {
        self.time(self.values.len() - 1)
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}
