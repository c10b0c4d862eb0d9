//! Command-line front end for the `nmr-linesim` binary.
//!
//! Three subcommands share one parameter set: `fid` writes `(t, F)`, `spectrum`
//! writes `(omega, I)` and `mc` writes `(t, mean, stderr)`. Parameters come from
//! flags and optionally from a JSON file given with `--config`; flags win.
//! Input frequencies are ordinary frequencies (Hz) unless `--units angular`;
//! they are converted to rad/s once, at intake. Output is always in rad/s and
//! seconds, and the JSON output's `config` block holds the effective parameters
//! in those units, so it can be fed back through `--config`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fid::{
    fid_exact, fid_fast_regime, fid_frozen_regime, fid_gaussian, fid_large_n, fid_vibration,
    fid_vibration_ensemble, recommended_dt, FidSeries, TimeGrid, MAX_SAMPLES,
};
use crate::model::{
    coupling_from_geometry, nu as nu_of, ContainerGeometry, FrequencyDistribution,
    GaussianFluctuationModel, SpinEnsemble, VibrationModel,
};
use crate::quad::fourier_cosine_integral;
use crate::spectrum::{
    cosine_transform, gaussian_line, lineshape_fast_fluct, lineshape_inhomogeneous,
    lineshape_satellites, lineshape_static_disorder, omega_grid, Quadrature, Spectrum,
    TransformPlan,
};
use crate::stochastic::{mc_average_fid, FidForm, McConfig, RNG_ALGORITHM};

const PROGRAM: &str = "nmr-linesim";
const VERSION: &str = env!("CARGO_PKG_VERSION");
const TWO_PI: f64 = std::f64::consts::TAU;
/// Smallest closed-form decay value included in the Monte Carlo comparison.
const MC_COMPARE_FLOOR: f64 = 1e-2;

#[derive(Debug, Parser)]
#[command(
    name = "nmr-linesim",
    version,
    about = "NMR decays and line shapes of spin-1/2 gases in nano-containers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Free induction decay F(t).
    Fid {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        physics: PhysicsArgs,
        #[command(flatten)]
        time: TimeArgs,
    },
    /// Line shape I(omega), closed form or numeric cosine transform.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        physics: PhysicsArgs,
        #[command(flatten)]
        time: TimeArgs,
        #[command(flatten)]
        spectrum: SpectrumArgs,
    },
    /// Monte Carlo average of the decay over Ornstein-Uhlenbeck coupling noise.
    Mc {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        physics: PhysicsArgs,
        #[command(flatten)]
        time: TimeArgs,
        #[command(flatten)]
        mc: McArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Fixed container, no fluctuations.
    Static,
    /// Gaussian coupling noise with exponential correlation.
    Gaussian,
    /// Harmonic vibration at one frequency.
    Vibration,
    /// Harmonic vibration averaged over a Gaussian frequency distribution.
    VibrationEnsemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    /// Frequencies in Hz, multiplied by 2*pi on input.
    Hz,
    /// Frequencies already in rad/s.
    Angular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Closed,
    Transform,
}

/// Which decay the gaussian scenario uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Full noise-averaged decay.
    Full,
    /// Fast-fluctuation limit (erfc line shape).
    Fast,
    /// Frozen-disorder limit (K0 line shape).
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureArg {
    Filon,
    Trapezoid,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Unit mode of the frequency inputs [default: hz].
    #[arg(long, value_enum)]
    pub units: Option<Units>,
    /// JSON parameter file: a bare parameter object or a previous JSON output.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PhysicsArgs {
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    /// Number of spins N [default: 500].
    #[arg(long)]
    pub n_spins: Option<u32>,
    /// Mean coupling <D> (frequency).
    #[arg(long, allow_hyphen_values = true)]
    pub mean_d: Option<f64>,
    /// Coupling scale gamma^2*hbar (frequency * nm^3); geometry source of <D>.
    #[arg(long)]
    pub gamma2hbar: Option<f64>,
    /// Container form factor f.
    #[arg(long)]
    pub form_factor: Option<f64>,
    /// Container volume in nm^3.
    #[arg(long)]
    pub volume: Option<f64>,
    /// Orientation angle in radians.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Gaussian line width nu (frequency); alternative source of <D>.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Coupling variance <(dD)^2> (frequency squared).
    #[arg(long)]
    pub variance: Option<f64>,
    /// Correlation time in seconds; `inf` for frozen disorder.
    #[arg(long)]
    pub tau_c: Option<f64>,
    /// Relative variance alpha = <(dD)^2>/<D>^2.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Dimensionless correlation time tau_c*nu; `inf` for frozen disorder.
    #[arg(long)]
    pub tauc_nu: Option<f64>,
    /// Gaussian-scenario decay: full, fast or frozen regime.
    #[arg(long, value_enum)]
    pub regime: Option<Regime>,
    /// Vibration amplitude epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Vibration frequency Omega (frequency).
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// Mean vibration frequency Omega_0 of the ensemble (frequency).
    #[arg(long)]
    pub omega0: Option<f64>,
    /// Dispersion Delta of the vibration frequencies (frequency).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Use cos(3 phi)^(N-1) instead of the large-N Gaussian form.
    #[arg(long)]
    pub exact_fid: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TimeArgs {
    /// Time step in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Last time sample in seconds.
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SpectrumArgs {
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Rule for the numeric transform [default: filon].
    #[arg(long, value_enum)]
    pub quadrature: Option<QuadratureArg>,
    /// Lowest frequency of the output grid.
    #[arg(long)]
    pub omega_min: Option<f64>,
    /// Highest frequency of the output grid.
    #[arg(long)]
    pub omega_max: Option<f64>,
    /// Number of output frequencies [default: 501].
    #[arg(long)]
    pub n_omega: Option<usize>,
    /// Write |I| instead of I.
    #[arg(long)]
    pub abs: bool,
    /// Accept a decay that has not fallen below 1e-10 at t_max.
    #[arg(long)]
    pub allow_truncation: bool,
    /// Evaluate both methods and exit with status 3 if they disagree.
    #[arg(long)]
    pub compare: bool,
    /// Tolerance of --compare relative to the peak intensity [default: 1e-5].
    #[arg(long)]
    pub compare_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct McArgs {
    /// Number of trajectories [default: 1000].
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; does not change the output.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Check the mean against the closed form and exit with status 3 if fewer
    /// than 99% of the points with F >= 1e-2 lie within 3 standard errors.
    #[arg(long)]
    pub compare: bool,
}

mod opt_float {
    //! `Option<f64>` that writes infinities as the string "inf".
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_infinite() => {
                let text = if *x > 0.0 { "inf" } else { "-inf" };
                s.serialize_some(text)
            }
            Some(x) => s.serialize_some(x),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) => t
                .trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|_| serde::de::Error::custom(format!("not a number: {t}"))),
        }
    }
}

/// Every run parameter; absent values take scenario defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_spins: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub mean_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub gamma2hbar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub form_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub volume: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub tau_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub tauc_nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub omega0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_fid: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureArg>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub omega_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub omega_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_omega: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_truncation: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", with = "opt_float")]
    pub compare_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),* $(,)?) => {
        $( if $src.$field.is_some() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl RunConfig {
    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &RunConfig) {
        overlay!(self, other;
            scenario, units, format, n_spins, mean_d, gamma2hbar, form_factor, volume, theta,
            nu, variance, tau_c, alpha, tauc_nu, regime, epsilon, omega, omega0, delta,
            exact_fid, dt, t_max, method, quadrature, omega_min, omega_max, n_omega, abs,
            allow_truncation, compare, compare_tol, trajectories, seed);
    }

    /// Converts frequency-valued fields from `units` to rad/s and marks the
    /// config as angular.
    pub fn into_angular(mut self, units: Units) -> Self {
        if units == Units::Hz {
            for f in [
                &mut self.mean_d,
                &mut self.gamma2hbar,
                &mut self.nu,
                &mut self.omega,
                &mut self.omega0,
                &mut self.delta,
                &mut self.omega_min,
                &mut self.omega_max,
            ] {
                *f = f.map(|x| x * TWO_PI);
            }
            self.variance = self.variance.map(|v| v * TWO_PI * TWO_PI);
        }
        self.units = Some(Units::Angular);
        self
    }

    /// Parses a parameter file: either a bare config object or an output
    /// document carrying a `config` member.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
        let body = match value.get("config") {
            Some(inner) if value.get("program").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(body).map_err(|e| format!("invalid config: {e}"))
    }
}

fn physics_overlay(p: &PhysicsArgs) -> RunConfig {
    RunConfig {
        scenario: p.scenario,
        n_spins: p.n_spins,
        mean_d: p.mean_d,
        gamma2hbar: p.gamma2hbar,
        form_factor: p.form_factor,
        volume: p.volume,
        theta: p.theta,
        nu: p.nu,
        variance: p.variance,
        tau_c: p.tau_c,
        alpha: p.alpha,
        tauc_nu: p.tauc_nu,
        regime: p.regime,
        epsilon: p.epsilon,
        omega: p.omega,
        omega0: p.omega0,
        delta: p.delta,
        exact_fid: p.exact_fid.then_some(true),
        ..RunConfig::default()
    }
}

/// Failure of a CLI run, mapped to the process exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Invalid or inconsistent parameters (status 2).
    Validation(String),
    /// `--compare` found a disagreement beyond tolerance (status 3).
    Compare(String),
    /// File system failure (status 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Compare(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Compare(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

fn require(v: Option<f64>, flag: &str, scenario: &str) -> CliResult<f64> {
    v.ok_or_else(|| CliError::Validation(format!("scenario {scenario} requires --{flag}")))
}

/// Coupling and time scales shared by every scenario.
#[derive(Debug, Clone, Copy)]
struct Coupling {
    ens: SpinEnsemble,
    mean_d: f64,
    nu: f64,
}

fn resolve_coupling(cfg: &RunConfig) -> CliResult<Coupling> {
    let ens = SpinEnsemble::new(cfg.n_spins.unwrap_or(500))?;
    let geometry = [cfg.gamma2hbar, cfg.form_factor, cfg.volume, cfg.theta];
    let geo_given = geometry.iter().filter(|g| g.is_some()).count();
    let sources =
        cfg.mean_d.is_some() as usize + (geo_given > 0) as usize + cfg.nu.is_some() as usize;
    if sources > 1 {
        return invalid("give only one coupling source: --mean-d, --nu, or the geometry flags");
    }
    let mean_d = if let Some(d) = cfg.mean_d {
        d
    } else if geo_given > 0 {
        if geo_given < 4 {
            return invalid("geometry needs all of --gamma2hbar, --form-factor, --volume, --theta");
        }
        let g = ContainerGeometry::new(
            geometry[0].unwrap_or_default(),
            geometry[1].unwrap_or_default(),
            geometry[2].unwrap_or_default(),
            geometry[3].unwrap_or_default(),
        )?;
        coupling_from_geometry(&g)
    } else if let Some(nu) = cfg.nu {
        if !(nu.is_finite() && nu >= 0.0) {
            return invalid("nu must be finite and >= 0");
        }
        nu / (3.0 * (ens.n::<f64>() / 2.0).sqrt())
    } else {
        return invalid("a coupling is required: --mean-d, --nu, or the geometry flags");
    };
    if !mean_d.is_finite() {
        return invalid("mean coupling must be finite");
    }
    Ok(Coupling {
        ens,
        mean_d,
        nu: nu_of(mean_d, ens),
    })
}

fn resolve_gaussian(cfg: &RunConfig, c: &Coupling) -> CliResult<GaussianFluctuationModel<f64>> {
    let variance = match (cfg.variance, cfg.alpha) {
        (Some(_), Some(_)) => return invalid("give either --variance or --alpha, not both"),
        (Some(v), None) => v,
        (None, Some(a)) => a * c.mean_d * c.mean_d,
        (None, None) => return invalid("scenario gaussian requires --variance or --alpha"),
    };
    let tau_c = match (cfg.tau_c, cfg.tauc_nu) {
        (Some(_), Some(_)) => return invalid("give either --tau-c or --tauc-nu, not both"),
        (Some(t), None) => t,
        (None, Some(x)) => {
            if c.nu <= 0.0 {
                return invalid("--tauc-nu needs a nonzero coupling");
            }
            x / c.nu
        }
        (None, None) => return invalid("scenario gaussian requires --tau-c or --tauc-nu"),
    };
    Ok(GaussianFluctuationModel::new(c.mean_d, variance, tau_c)?)
}

/// Physical content of a resolved scenario.
#[derive(Debug, Clone)]
enum Physics {
    Static {
        exact: bool,
    },
    Gaussian {
        model: GaussianFluctuationModel<f64>,
        regime: Regime,
    },
    Vibration {
        vib: VibrationModel<f64>,
    },
    Ensemble {
        epsilon: f64,
        dist: FrequencyDistribution<f64>,
    },
}

#[derive(Debug, Clone)]
struct Resolved {
    coupling: Coupling,
    physics: Physics,
}

impl Resolved {
    fn from_config(cfg: &RunConfig) -> CliResult<Self> {
        let scenario = cfg
            .scenario
            .ok_or_else(|| CliError::Validation("--scenario is required".into()))?;
        let coupling = resolve_coupling(cfg)?;
        let physics = match scenario {
            Scenario::Static => Physics::Static {
                exact: cfg.exact_fid.unwrap_or(false),
            },
            Scenario::Gaussian => Physics::Gaussian {
                model: resolve_gaussian(cfg, &coupling)?,
                regime: cfg.regime.unwrap_or(Regime::Full),
            },
            Scenario::Vibration => {
                let eps = require(cfg.epsilon, "epsilon", "vibration")?;
                let omega = require(cfg.omega, "omega", "vibration")?;
                Physics::Vibration {
                    vib: VibrationModel::new(coupling.mean_d, eps, omega)?,
                }
            }
            Scenario::VibrationEnsemble => {
                let epsilon = require(cfg.epsilon, "epsilon", "vibration-ensemble")?;
                if !(epsilon.is_finite() && epsilon >= 0.0) {
                    return invalid("epsilon must be finite and >= 0");
                }
                let o0 = require(cfg.omega0, "omega0", "vibration-ensemble")?;
                let d = require(cfg.delta, "delta", "vibration-ensemble")?;
                Physics::Ensemble {
                    epsilon,
                    dist: FrequencyDistribution::new(o0, d)?,
                }
            }
        };
        if !matches!(physics, Physics::Static { .. })
            && cfg.exact_fid == Some(true)
            && scenario != Scenario::Gaussian
        {
            return invalid("--exact-fid applies to the static and gaussian scenarios only");
        }
        if matches!(
            physics,
            Physics::Vibration { .. } | Physics::Ensemble { .. }
        ) && coupling.nu <= 0.0
        {
            return invalid("vibration scenarios need a nonzero coupling (nu > 0)");
        }
        Ok(Self { coupling, physics })
    }

    /// Rate that sets the time scale of the decay, `√(ν² + (9N/2)⟨(δD)²⟩)`.
    fn rate(&self) -> f64 {
        let nu = self.coupling.nu;
        match &self.physics {
            Physics::Gaussian { model, .. } => {
                (nu * nu + 4.5 * self.coupling.ens.n::<f64>() * model.variance()).sqrt()
            }
            _ => nu,
        }
    }

    fn default_dt(&self) -> CliResult<f64> {
        let rate = self.rate();
        if rate <= 0.0 {
            return Ok(1e-3);
        }
        let dt = match &self.physics {
            Physics::Gaussian { model, .. } => recommended_dt(rate, None, Some(model.tau_c()))?,
            Physics::Vibration { vib } => recommended_dt(rate, Some(vib.omega()), None)?,
            Physics::Ensemble { dist, .. } => {
                recommended_dt(rate, Some(dist.omega0() + 4.0 * dist.delta()), None)?
            }
            Physics::Static { .. } => recommended_dt(rate, None, None)?,
        };
        Ok(dt)
    }

    /// Decay at time `t` of the configured scenario.
    fn fid(&self, t: f64) -> crate::error::Result<f64> {
        let c = &self.coupling;
        match &self.physics {
            Physics::Static { exact } => {
                let phi = c.mean_d * t / 2.0;
                Ok(if *exact {
                    fid_exact(phi, c.ens)
                } else {
                    fid_large_n(phi, c.ens)
                })
            }
            Physics::Gaussian { model, regime } => match regime {
                Regime::Full => fid_gaussian(t, c.ens, model),
                Regime::Fast => fid_fast_regime(t, self.alpha()?, model.tau_c(), c.nu),
                Regime::Frozen => fid_frozen_regime(t, self.alpha()?, c.nu),
            },
            Physics::Vibration { vib } => fid_vibration(t, c.ens, vib),
            Physics::Ensemble { epsilon, dist } => fid_vibration_ensemble(t, *epsilon, c.nu, dist),
        }
    }

    fn alpha(&self) -> crate::error::Result<f64> {
        match &self.physics {
            Physics::Gaussian { model, .. } => {
                model.alpha().filter(|a| *a > 0.0).ok_or_else(|| {
                    Error::Domain("regime forms need alpha > 0 and a nonzero mean coupling".into())
                })
            }
            _ => Err(Error::Domain(
                "alpha is defined for the gaussian scenario only".into(),
            )),
        }
    }

    /// Closed-form line shape and, for the gaussian scenario, the decay it transforms.
    fn closed_line(&self, regime: Regime) -> CliResult<()> {
        let c = &self.coupling;
        match &self.physics {
            Physics::Static { exact: true } => {
                invalid("no closed-form line shape for --exact-fid; use --method transform")
            }
            Physics::Static { exact: false } if c.nu <= 0.0 => {
                invalid("the line of a zero coupling is a delta function; give a nonzero coupling")
            }
            Physics::Gaussian { model, .. } => {
                self.alpha()?;
                if regime == Regime::Fast && model.is_frozen() {
                    return invalid("the fast-fluctuation line shape needs a finite tau_c");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn closed(&self, omega: f64, regime: Regime) -> crate::error::Result<f64> {
        let c = &self.coupling;
        match &self.physics {
            Physics::Static { .. } => Ok(gaussian_line(omega, c.nu)),
            Physics::Gaussian { model, .. } => match regime {
                Regime::Frozen => lineshape_static_disorder(omega, self.alpha()?, c.nu),
                _ => lineshape_fast_fluct(omega, self.alpha()?, model.tau_c(), c.nu),
            },
            Physics::Vibration { vib } => lineshape_satellites(omega, vib, c.nu),
            Physics::Ensemble { epsilon, dist } => {
                lineshape_inhomogeneous(omega, *epsilon, c.nu, dist)
            }
        }
    }

    fn default_omega_max(&self) -> f64 {
        let nu = self.coupling.nu;
        match &self.physics {
            Physics::Static { .. } => 5.0 * nu,
            Physics::Gaussian { .. } => 10.0 * self.rate(),
            Physics::Vibration { vib } => 2.0 * vib.omega().abs() + 5.0 * nu,
            Physics::Ensemble { dist, .. } => {
                let d = dist.delta();
                2.0 * dist.omega0() + 5.0 * (nu * nu + 4.0 * d * d).sqrt()
            }
        }
    }
}

/// Grid `t_k = k·dt` through `t_max` (rounded to the nearest step when within 1e−9).
fn grid_through(dt: f64, t_max: f64) -> CliResult<TimeGrid<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return invalid("dt must be finite and > 0");
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return invalid("t_max must be finite and > 0");
    }
    let ratio = t_max / dt;
    let nearest = ratio.round();
    let steps = if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    if steps + 1.0 > MAX_SAMPLES as f64 {
        return invalid(format!("t_max/dt gives more than {MAX_SAMPLES} samples"));
    }
    Ok(TimeGrid::new(0.0, dt, steps as usize + 1)?)
}

/// Decay series on the explicit grid, or until the default horizon.
fn fid_series(res: &Resolved, cfg: &mut RunConfig) -> CliResult<FidSeries<f64>> {
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => res.default_dt()?,
    };
    cfg.dt = Some(dt);
    let series = match cfg.t_max {
        Some(t_max) => FidSeries::tabulate(&grid_through(dt, t_max)?, |t| res.fid(t))?,
        None if res.rate() > 0.0 => FidSeries::until_decayed(dt, res.rate(), |t| res.fid(t))?,
        None => FidSeries::tabulate(&grid_through(dt, 1.0)?, |t| res.fid(t))?,
    };
    cfg.t_max = Some(series.t_max());
    Ok(series)
}

/// Decay series for a numeric transform: runs until `|F| < 1e−10`, at most
/// `2000/rate` unless `t_max` is given.
fn transform_series(res: &Resolved, cfg: &mut RunConfig) -> CliResult<FidSeries<f64>> {
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => res.default_dt()?,
    };
    cfg.dt = Some(dt);
    let series = match cfg.t_max {
        Some(t_max) => FidSeries::tabulate(&grid_through(dt, t_max)?, |t| res.fid(t))?,
        None => {
            let rate = res.rate();
            if rate <= 0.0 {
                return invalid(
                    "a zero coupling does not decay; give --t-max and --allow-truncation",
                );
            }
            FidSeries::until_below(dt, 1e-10, 2000.0 / rate, |t| res.fid(t))?
        }
    };
    cfg.t_max = Some(series.t_max());
    Ok(series)
}

/// Output table: named columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<(&'static str, Vec<f64>)>,
}

/// Result of one CLI run before serialisation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub command: &'static str,
    pub input_units: Units,
    pub config: RunConfig,
    pub derived: serde_json::Value,
    pub rng: Option<&'static str>,
    pub table: Table,
    /// Set when `--compare` found a disagreement.
    pub compare_failure: Option<String>,
}

impl RunOutput {
    fn metadata(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut m = serde_json::Map::new();
        m.insert("program".into(), PROGRAM.into());
        m.insert("version".into(), VERSION.into());
        m.insert("command".into(), self.command.into());
        m.insert(
            "input_units".into(),
            serde_json::to_value(self.input_units).unwrap_or_default(),
        );
        m.insert(
            "output_units".into(),
            "angular: rad/s for frequencies, s for times".into(),
        );
        if let Some(rng) = self.rng {
            m.insert("rng".into(), rng.into());
        }
        m.insert(
            "config".into(),
            serde_json::to_value(&self.config).unwrap_or_default(),
        );
        m.insert("derived".into(), self.derived.clone());
        m
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.metadata() {
            let text = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            let _ = writeln!(out, "# {k}: {text}");
        }
        let names: Vec<&str> = self.table.columns.iter().map(|c| c.0).collect();
        let _ = writeln!(out, "{}", names.join(","));
        let rows = self.table.columns.first().map_or(0, |c| c.1.len());
        for r in 0..rows {
            let cells: Vec<String> = self
                .table
                .columns
                .iter()
                .map(|c| format!("{:.16e}", c.1[r]))
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut m = self.metadata();
        let names: Vec<&str> = self.table.columns.iter().map(|c| c.0).collect();
        m.insert(
            "columns".into(),
            serde_json::to_value(names).unwrap_or_default(),
        );
        let mut data = serde_json::Map::new();
        for (name, values) in &self.table.columns {
            data.insert(
                (*name).into(),
                serde_json::to_value(values).unwrap_or_default(),
            );
        }
        m.insert("data".into(), data.into());
        let mut text =
            serde_json::to_string_pretty(&serde_json::Value::Object(m)).unwrap_or_default();
        text.push('\n');
        text
    }
}

fn derived(res: &Resolved) -> serde_json::Value {
    let c = &res.coupling;
    let mut m = serde_json::Map::new();
    m.insert("n_spins".into(), c.ens.n_spins().into());
    m.insert("mean_d".into(), c.mean_d.into());
    m.insert("nu".into(), c.nu.into());
    if let Physics::Gaussian { model, .. } = &res.physics {
        m.insert("variance".into(), model.variance().into());
        let tau = model.tau_c();
        m.insert(
            "tau_c".into(),
            if tau.is_finite() {
                tau.into()
            } else {
                "inf".into()
            },
        );
        if let Some(a) = model.alpha() {
            m.insert("alpha".into(), a.into());
        }
        m.insert(
            "second_moment".into(),
            crate::model::second_moment(c.ens, model).into(),
        );
    }
    if let Physics::Ensemble { dist, .. } = &res.physics {
        m.insert("a0".into(), dist.a0().into());
    }
    m.into()
}

fn run_fid(mut cfg: RunConfig) -> CliResult<(RunConfig, Resolved, Table)> {
    let res = Resolved::from_config(&cfg)?;
    let series = fid_series(&res, &mut cfg)?;
    let t: Vec<f64> = series.grid().times().collect();
    Ok((
        cfg,
        res,
        Table {
            columns: vec![("t", t), ("F", series.into_values())],
        },
    ))
}

fn check_agreement(closed: &[f64], other: &[f64], tol: f64) -> Option<String> {
    let peak = closed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = closed
        .iter()
        .zip(other)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if worst > tol * peak {
        Some(format!(
            "closed form and transform differ by {worst:e}, above {tol:e} of the peak {peak:e}"
        ))
    } else {
        None
    }
}

fn run_spectrum(mut cfg: RunConfig) -> CliResult<(RunConfig, Resolved, Table, Option<String>)> {
    let res = Resolved::from_config(&cfg)?;
    let method = cfg.method.unwrap_or(Method::Closed);
    cfg.method = Some(method);
    let compare = cfg.compare.unwrap_or(false);
    let gaussian_model = match &res.physics {
        Physics::Gaussian { model, .. } => Some(*model),
        _ => None,
    };
    // closed forms of the gaussian scenario belong to a limiting regime
    let closed_regime = match (gaussian_model, cfg.regime) {
        (Some(_), Some(Regime::Fast)) => Regime::Fast,
        (Some(_), Some(Regime::Frozen)) => Regime::Frozen,
        (Some(m), _) if m.is_frozen() => Regime::Frozen,
        (Some(_), _) => Regime::Fast,
        (None, _) => Regime::Full,
    };
    let uses_closed = method == Method::Closed || compare;
    if uses_closed {
        res.closed_line(closed_regime)?;
    }
    let omega_max = cfg.omega_max.unwrap_or_else(|| res.default_omega_max());
    if !(omega_max.is_finite() && omega_max > 0.0) {
        return invalid(
            "omega_max must be finite and > 0 (give --omega-max or a nonzero coupling)",
        );
    }
    let n_omega = cfg.n_omega.unwrap_or(501);
    let omega_min = match cfg.omega_min {
        Some(w) => w,
        None if uses_closed && closed_regime == Regime::Frozen => {
            omega_max / (n_omega.max(2) - 1) as f64
        }
        None => 0.0,
    };
    if uses_closed && closed_regime == Regime::Frozen && omega_min <= 0.0 {
        return invalid("the frozen-disorder line diverges at omega = 0; set --omega-min > 0");
    }
    cfg.omega_max = Some(omega_max);
    cfg.n_omega = Some(n_omega);
    cfg.omega_min = Some(omega_min);
    let omegas = omega_grid(omega_min, omega_max, n_omega);
    if n_omega < 2 || omega_min < 0.0 || omega_min >= omega_max {
        return invalid("need n_omega >= 2 and 0 <= omega_min < omega_max");
    }

    let closed = if uses_closed {
        Some(Spectrum::tabulate(omegas.clone(), |w| {
            res.closed(w, closed_regime)
        })?)
    } else {
        None
    };
    let transformed = if method == Method::Transform || compare {
        // under --compare the gaussian transform uses the decay of the same regime
        let source = match (&res.physics, compare) {
            (Physics::Gaussian { model, .. }, true) => Resolved {
                coupling: res.coupling,
                physics: Physics::Gaussian {
                    model: *model,
                    regime: closed_regime,
                },
            },
            _ => res.clone(),
        };
        if compare && gaussian_model.is_some() {
            Some(regime_quadrature(&source, &omegas)?)
        } else {
            let series = transform_series(&source, &mut cfg)?;
            let quadrature = match cfg.quadrature.unwrap_or(QuadratureArg::Filon) {
                QuadratureArg::Filon => Quadrature::FilonCosine,
                QuadratureArg::Trapezoid => Quadrature::TrapezoidDense,
            };
            cfg.quadrature = Some(cfg.quadrature.unwrap_or(QuadratureArg::Filon));
            let tol = if cfg.allow_truncation.unwrap_or(false) {
                None
            } else {
                Some(crate::spectrum::DEFAULT_TRUNCATION_TOL)
            };
            let plan = TransformPlan::new(omega_max, n_omega, series.t_max(), quadrature)?
                .with_truncation_tol(tol);
            let plan = if omega_min > 0.0 {
                plan.with_omega_min(omega_min)?
            } else {
                plan
            };
            Some(cosine_transform(&series, &plan).map_err(|e| match e {
                Error::Domain(m) if m.contains("truncation") => CliError::Validation(format!(
                    "{m}; the decay is too slow for the default horizon, give --t-max or --allow-truncation"
                )),
                other => other.into(),
            })?)
        }
    } else {
        None
    };
    let abs = cfg.abs.unwrap_or(false);
    let post = |s: Spectrum<f64>| if abs { s.abs() } else { s };
    let mut failure = None;
    let mut columns = vec![("omega", omegas.clone())];
    match (closed, transformed) {
        (Some(c), Some(t)) => {
            let tol = cfg.compare_tol.unwrap_or(1e-5);
            cfg.compare_tol = Some(tol);
            failure = check_agreement(c.intensities(), t.intensities(), tol);
            columns.push(("I_closed", post(c).intensities().to_vec()));
            columns.push(("I_transform", post(t).intensities().to_vec()));
        }
        (Some(s), None) | (None, Some(s)) => columns.push(("I", post(s).intensities().to_vec())),
        (None, None) => unreachable!("at least one method runs"),
    }
    Ok((cfg, res, Table { columns }, failure))
}

/// `(1/π)∫_0^∞ F(t) cos(ωt) dt` of an analytic regime decay by adaptive quadrature.
fn regime_quadrature(res: &Resolved, omegas: &[f64]) -> CliResult<Spectrum<f64>> {
    Ok(Spectrum::tabulate(omegas.to_vec(), |w| {
        let mut failure = None;
        let q = fourier_cosine_integral(
            |t| match res.fid(t) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            },
            w,
            1e-16,
            1e-10,
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(q.value / std::f64::consts::PI),
        }
    })?)
}

fn run_mc(mut cfg: RunConfig) -> CliResult<(RunConfig, Resolved, Table, Option<String>)> {
    let mut res = Resolved::from_config(&cfg)?;
    let model = match &res.physics {
        Physics::Gaussian {
            model,
            regime: Regime::Full,
        } => *model,
        Physics::Gaussian { .. } => return invalid("mc averages the full decay; drop --regime"),
        Physics::Static { .. } => {
            let m = GaussianFluctuationModel::new(res.coupling.mean_d, 0.0, f64::INFINITY)?;
            res = Resolved {
                coupling: res.coupling,
                physics: Physics::Gaussian {
                    model: m,
                    regime: Regime::Full,
                },
            };
            m
        }
        _ => return invalid("mc supports the static and gaussian scenarios"),
    };
    let exact = cfg.exact_fid.unwrap_or(false);
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => res.default_dt()?,
    };
    cfg.dt = Some(dt);
    let grid = match cfg.t_max {
        Some(t_max) => grid_through(dt, t_max)?,
        None => {
            let probe = if res.rate() > 0.0 {
                FidSeries::until_decayed(dt, res.rate(), |t| {
                    fid_gaussian(t, res.coupling.ens, &model)
                })?
            } else {
                FidSeries::tabulate(&grid_through(dt, 1.0)?, |_| Ok(1.0))?
            };
            probe.grid()
        }
    };
    cfg.t_max = Some(grid.t_max());
    let n = cfg.trajectories.unwrap_or(1000);
    let seed = cfg.seed.unwrap_or(0);
    cfg.trajectories = Some(n);
    cfg.seed = Some(seed);
    let form = if exact {
        FidForm::Exact
    } else {
        FidForm::LargeN
    };
    let mc_cfg = McConfig::new(n, seed, grid)?.with_form(form);
    let result = mc_average_fid(&model, res.coupling.ens, &mc_cfg)?;
    let mut failure = None;
    if cfg.compare.unwrap_or(false) {
        let mut outside = 0usize;
        let mut checked = 0usize;
        for (k, t) in grid.times().enumerate() {
            let expect = fid_gaussian(t, res.coupling.ens, &model)?;
            if expect < MC_COMPARE_FLOOR {
                continue;
            }
            checked += 1;
            if (result.mean.values()[k] - expect).abs() > 3.0 * result.stderr[k] {
                outside += 1;
            }
        }
        if outside as f64 > 0.01 * checked as f64 {
            failure = Some(format!(
                "{outside} of {checked} points lie more than 3 standard errors from the closed form"
            ));
        }
    }
    let t: Vec<f64> = grid.times().collect();
    let table = Table {
        columns: vec![
            ("t", t),
            ("mean", result.mean.into_values()),
            ("stderr", result.stderr),
        ],
    };
    Ok((cfg, res, table, failure))
}

fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::from_json(&text).map_err(CliError::Validation)
}

/// Merges file and flag parameters and converts both to rad/s.
fn effective_config(common: &CommonArgs, flags: RunConfig) -> CliResult<(RunConfig, Units)> {
    let file = match &common.config {
        Some(p) => Some(load_config(p)?),
        None => None,
    };
    let file_units = file.as_ref().and_then(|f| f.units);
    let flag_units = common.units.or(file_units).unwrap_or(Units::Hz);
    let mut cfg = match file {
        Some(f) => f.into_angular(file_units.unwrap_or(flag_units)),
        None => RunConfig::default(),
    };
    let mut flags = flags;
    flags.format = common.format;
    cfg.overlay(&flags.into_angular(flag_units));
    cfg.units = Some(Units::Angular);
    Ok((cfg, flag_units))
}

/// Runs one parsed command line and returns the output document.
pub fn execute(cli: &Cli) -> CliResult<(RunOutput, Option<PathBuf>)> {
    let (common, output) = match &cli.command {
        Command::Fid {
            common,
            physics,
            time,
        } => {
            let mut flags = physics_overlay(physics);
            flags.dt = time.dt;
            flags.t_max = time.t_max;
            let (cfg, units) = effective_config(common, flags)?;
            let (cfg, res, table) = run_fid(cfg)?;
            (
                common,
                RunOutput {
                    command: "fid",
                    input_units: units,
                    derived: derived(&res),
                    config: cfg,
                    rng: None,
                    table,
                    compare_failure: None,
                },
            )
        }
        Command::Spectrum {
            common,
            physics,
            time,
            spectrum,
        } => {
            let mut flags = physics_overlay(physics);
            flags.dt = time.dt;
            flags.t_max = time.t_max;
            flags.method = spectrum.method;
            flags.quadrature = spectrum.quadrature;
            flags.omega_min = spectrum.omega_min;
            flags.omega_max = spectrum.omega_max;
            flags.n_omega = spectrum.n_omega;
            flags.abs = spectrum.abs.then_some(true);
            flags.allow_truncation = spectrum.allow_truncation.then_some(true);
            flags.compare = spectrum.compare.then_some(true);
            flags.compare_tol = spectrum.compare_tol;
            let (cfg, units) = effective_config(common, flags)?;
            let (cfg, res, table, failure) = run_spectrum(cfg)?;
            (
                common,
                RunOutput {
                    command: "spectrum",
                    input_units: units,
                    derived: derived(&res),
                    config: cfg,
                    rng: None,
                    table,
                    compare_failure: failure,
                },
            )
        }
        Command::Mc {
            common,
            physics,
            time,
            mc,
        } => {
            let mut flags = physics_overlay(physics);
            flags.dt = time.dt;
            flags.t_max = time.t_max;
            flags.trajectories = mc.trajectories;
            flags.seed = mc.seed;
            flags.compare = mc.compare.then_some(true);
            let (cfg, units) = effective_config(common, flags)?;
            let run = || run_mc(cfg.clone());
            let (cfg, res, table, failure) = match mc.threads {
                Some(0) => return invalid("--threads must be >= 1"),
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Io(format!("cannot start thread pool: {e}")))?
                    .install(run)?,
                None => run()?,
            };
            (
                common,
                RunOutput {
                    command: "mc",
                    input_units: units,
                    derived: derived(&res),
                    config: cfg,
                    rng: Some(RNG_ALGORITHM),
                    table,
                    compare_failure: failure,
                },
            )
        }
    };
    Ok((output, common.out.clone()))
}

fn write_output(output: &RunOutput, path: Option<&Path>) -> CliResult<()> {
    let text = match output.config.format.unwrap_or(Format::Csv) {
        Format::Csv => output.to_csv(),
        Format::Json => output.to_json(),
    };
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write output: {e}"))),
    }
}

/// Runs `cli`, writes its output and returns the process status.
pub fn run(cli: &Cli) -> CliResult<()> {
    let (output, path) = execute(cli)?;
    write_output(&output, path.as_deref())?;
    match output.compare_failure {
        Some(msg) => Err(CliError::Compare(msg)),
        None => Ok(()),
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
