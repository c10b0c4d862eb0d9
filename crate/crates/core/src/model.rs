//! Domain types and the scalar parameters derived from them.
//!
//! Every frequency and coupling is angular (rad/s); every time is in seconds.
//! Conversion from ordinary frequency happens once, at the CLI boundary.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Real;

pub(crate) fn finite<T: Real>(x: T, what: &'static str) -> Result<T> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Shape, size and orientation of a single nano-container.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContainerGeometry<T> {
    gamma2hbar: T,
    form_factor: T,
    volume: T,
    theta: T,
}

impl<T: Real> ContainerGeometry<T> {
    /// `gamma2hbar` in rad·s⁻¹·nm³, `volume` in nm³, `theta` in radians.
    ///
    /// `theta` is folded into `[0, π]`; the coupling only sees `cos²θ`.
    pub fn new(gamma2hbar: T, form_factor: T, volume: T, theta: T) -> Result<Self> {
        finite(gamma2hbar, "gamma2hbar")?;
        finite(form_factor, "form_factor")?;
        finite(volume, "volume")?;
        finite(theta, "theta")?;
        if gamma2hbar <= T::zero() {
            return domain("gamma2hbar must be > 0");
        }
        if form_factor <= T::zero() {
            return domain("form_factor must be > 0");
        }
        if volume <= T::zero() {
            return domain("volume must be > 0");
        }
        Ok(Self {
            gamma2hbar,
            form_factor,
            volume,
            theta: fold_angle(theta),
        })
    }

    pub fn gamma2hbar(&self) -> T {
        self.gamma2hbar
    }

    pub fn form_factor(&self) -> T {
        self.form_factor
    }

    pub fn volume(&self) -> T {
        self.volume
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// The orientation factor `3cos²θ − 1`.
    pub fn angular_factor(&self) -> T {
        let c = self.theta.cos();
        T::lit(3.0) * c * c - T::one()
    }

    /// Effective dipolar coupling in rad/s. See [`coupling_from_geometry`].
    pub fn coupling(&self) -> T {
        coupling_from_geometry(self)
    }
}

fn fold_angle<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let mut th = theta % two_pi;
    if th < T::zero() {
        th = th + two_pi;
    }
    if th > T::PI() {
        th = two_pi - th;
    }
    th
}

/// Motionally averaged coupling `D = γ²ħ · (f/V) · (3cos²θ − 1)`.
///
/// Negative near θ = π/2 and zero at the magic angle.
pub fn coupling_from_geometry<T: Real>(geom: &ContainerGeometry<T>) -> T {
    geom.gamma2hbar * (geom.form_factor / geom.volume) * geom.angular_factor()
}

/// Number of spin-½ molecules sharing one container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinEnsemble {
    n_spins: u32,
}

impl SpinEnsemble {
    pub fn new(n_spins: u32) -> Result<Self> {
        if n_spins < 2 {
            return domain(format!("n_spins must be >= 2 (got {n_spins})"));
        }
        Ok(Self { n_spins })
    }

    pub fn n_spins(&self) -> u32 {
        self.n_spins
    }

    pub fn n<T: Real>(&self) -> T {
        T::from_u32(self.n_spins).expect("spin count representable")
    }
}

/// Correlation kernel of the coupling noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationKind {
    /// `C(t) = exp(−t/τ_c)`.
    #[default]
    Exponential,
}

/// Stationary Gaussian fluctuations of the coupling around its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFluctuationModel<T> {
    mean_d: T,
    variance: T,
    tau_c: T,
    correlation: CorrelationKind,
}

impl<T: Real> GaussianFluctuationModel<T> {
    /// `tau_c` may be `+∞` for frozen (static) disorder.
    pub fn new(mean_d: T, variance: T, tau_c: T) -> Result<Self> {
        finite(mean_d, "mean_d")?;
        finite(variance, "variance")?;
        if tau_c.is_nan() {
            return Err(Error::NonFinite("tau_c"));
        }
        if variance < T::zero() {
            return domain("variance must be >= 0");
        }
        if tau_c <= T::zero() {
            return domain("tau_c must be > 0");
        }
        Ok(Self {
            mean_d,
            variance,
            tau_c,
            correlation: CorrelationKind::Exponential,
        })
    }

    /// Builds the model from the dimensionless pair `(α, τ_c·ν)` at line width `ν`.
    ///
    /// `nu` must be positive; `tau_c_nu` may be `+∞`.
    pub fn from_dimensionless(nu: T, alpha: T, tau_c_nu: T, ens: SpinEnsemble) -> Result<Self> {
        finite(nu, "nu")?;
        finite(alpha, "alpha")?;
        if nu <= T::zero() {
            return domain("nu must be > 0");
        }
        if alpha < T::zero() {
            return domain("alpha must be >= 0");
        }
        let mean_d = nu / (T::lit(3.0) * (ens.n::<T>() / T::two()).sqrt());
        Self::new(mean_d, alpha * mean_d * mean_d, tau_c_nu / nu)
    }

    pub fn mean_d(&self) -> T {
        self.mean_d
    }

    pub fn variance(&self) -> T {
        self.variance
    }

    pub fn sigma(&self) -> T {
        self.variance.sqrt()
    }

    pub fn tau_c(&self) -> T {
        self.tau_c
    }

    pub fn correlation(&self) -> CorrelationKind {
        self.correlation
    }

    pub fn is_frozen(&self) -> bool {
        self.tau_c.is_infinite()
    }

    /// Relative fluctuation strength `α = ⟨(δD)²⟩/⟨D⟩²`; `None` when `⟨D⟩ = 0`.
    pub fn alpha(&self) -> Option<T> {
        if self.mean_d == T::zero() {
            None
        } else {
            Some(self.variance / (self.mean_d * self.mean_d))
        }
    }

    pub fn nu(&self, ens: SpinEnsemble) -> T {
        nu(self.mean_d, ens)
    }
}

/// Harmonic modulation `D(t) = ⟨D⟩(1 + ε cos Ωt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationModel<T> {
    mean_d: T,
    epsilon: T,
    omega: T,
}

impl<T: Real> VibrationModel<T> {
    /// Requires `0 ≤ ε < 1` and `Ω ≠ 0`. Only `|Ω|` is physically meaningful.
    pub fn new(mean_d: T, epsilon: T, omega: T) -> Result<Self> {
        finite(mean_d, "mean_d")?;
        finite(epsilon, "epsilon")?;
        finite(omega, "omega")?;
        if epsilon < T::zero() || epsilon >= T::one() {
            return domain("epsilon must lie in [0, 1)");
        }
        if omega == T::zero() {
            return domain("vibration frequency omega must be nonzero");
        }
        Ok(Self {
            mean_d,
            epsilon,
            omega,
        })
    }

    pub fn mean_d(&self) -> T {
        self.mean_d
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn omega(&self) -> T {
        self.omega
    }

    pub fn nu(&self, ens: SpinEnsemble) -> T {
        nu(self.mean_d, ens)
    }

    /// Instantaneous coupling at time `t`.
    pub fn coupling_at(&self, t: T) -> T {
        self.mean_d * (T::one() + self.epsilon * (self.omega * t).cos())
    }
}

/// Distribution of vibration frequencies over an ensemble of containers,
/// `P(Ω) = A₀ Ω² exp(−(Ω − Ω₀)²/Δ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDistribution<T> {
    omega0: T,
    delta: T,
}

impl<T: Real> FrequencyDistribution<T> {
    pub fn new(omega0: T, delta: T) -> Result<Self> {
        finite(omega0, "omega0")?;
        finite(delta, "delta")?;
        if omega0 < T::zero() {
            return domain("omega0 must be >= 0");
        }
        if delta <= T::zero() {
            return domain("delta must be > 0");
        }
        Ok(Self { omega0, delta })
    }

    pub fn omega0(&self) -> T {
        self.omega0
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// Normalisation constant `A₀ = 1/(√π Δ (Δ²/2 + Ω₀²))`.
    pub fn a0(&self) -> T {
        let d = self.delta;
        T::one() / (T::PI().sqrt() * d * (T::half() * d * d + self.omega0 * self.omega0))
    }

    pub fn density(&self, big_omega: T) -> T {
        let x = (big_omega - self.omega0) / self.delta;
        self.a0() * big_omega * big_omega * (-x * x).exp()
    }
}

/// Gaussian line-width parameter `ν = 3|⟨D⟩|√(N/2)`.
pub fn nu<T: Real>(mean_d: T, ens: SpinEnsemble) -> T {
    T::lit(3.0) * mean_d.abs() * (ens.n::<T>() / T::two()).sqrt()
}

/// Second moment `M₂ = (9N/4)(⟨D⟩² + ⟨(δD)²⟩)` of the fluctuation-averaged line.
pub fn second_moment<T: Real>(ens: SpinEnsemble, model: &GaussianFluctuationModel<T>) -> T {
    T::lit(9.0) * ens.n::<T>() / T::lit(4.0) * (model.mean_d * model.mean_d + model.variance)
}
