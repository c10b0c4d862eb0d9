//! Numerical oracles: Ornstein–Uhlenbeck coupling trajectories, Monte Carlo
//! noise-averaged decays and the exact small-N spin trace.
//!
//! Trajectory `i` of a run with seed `s` draws from `ChaCha8Rng::seed_from_u64(s)`
//! switched to stream `i`, so every trajectory is reproducible on its own and
//! the reduction order is fixed by trajectory index, not by scheduling.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fid::{fid_exact, fid_large_n, phase_shift, CouplingTrajectory, FidSeries, TimeGrid};
use crate::model::{GaussianFluctuationModel, SpinEnsemble};
use crate::scalar::Real;

/// Name of the random generator and its stream derivation, for run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng::seed_from_u64(seed), stream = trajectory index";

/// Trajectories reduced together before blocks are merged.
const BLOCK: usize = 256;

/// Blocks held in memory at once.
const BLOCKS_PER_BATCH: usize = 64;

/// Which decay is averaged over the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidForm {
    /// `exp(−(N/2)(3φ)²)`, the form whose average has a closed expression.
    #[default]
    LargeN,
    /// `cos(3φ)^{N−1}`.
    Exact,
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig<T> {
    n_trajectories: usize,
    seed: u64,
    grid: TimeGrid<T>,
    form: FidForm,
}

impl<T: Real> McConfig<T> {
    pub fn new(n_trajectories: usize, seed: u64, grid: TimeGrid<T>) -> Result<Self> {
        if n_trajectories < 1 {
            return domain("n_trajectories must be >= 1");
        }
        Ok(Self {
            n_trajectories,
            seed,
            grid,
            form: FidForm::LargeN,
        })
    }

    pub fn with_form(mut self, form: FidForm) -> Self {
        self.form = form;
        self
    }

    pub fn n_trajectories(&self) -> usize {
        self.n_trajectories
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid(&self) -> TimeGrid<T> {
        self.grid
    }

    pub fn form(&self) -> FidForm {
        self.form
    }
}

/// Pointwise sample mean and standard error of the averaged decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult<T> {
    pub mean: FidSeries<T>,
    /// Sample standard deviation over `√n`; zero when `n = 1`.
    pub stderr: Vec<T>,
    pub n_trajectories: usize,
}

/// Generator for trajectory `stream_id` of a run seeded with `seed`.
pub fn trajectory_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.sample::<f64, _>(StandardNormal))
}

/// Samples `D(t_k) = ⟨D⟩ + δD_k` on `grid` with the exact OU transition.
///
/// `δD_0` is drawn from the stationary law `N(0, σ²)`. For `τ_c = ∞` the
/// single draw is held for the whole trajectory.
pub fn sample_ou_with_rng<T: Real, R: Rng + ?Sized>(
    model: &GaussianFluctuationModel<T>,
    grid: &TimeGrid<T>,
    rng: &mut R,
) -> Result<CouplingTrajectory<T>> {
    let sigma = model.sigma();
    let mean = model.mean_d();
    let mut dd = sigma * normal::<T, R>(rng);
    let mut values = Vec::with_capacity(grid.len());
    values.push(mean + dd);
    if model.is_frozen() {
        values.resize(grid.len(), mean + dd);
    } else {
        let x = grid.dt() / model.tau_c();
        let decay = (-x).exp();
        // 1 − e^{−2x} without cancellation
        let kick = sigma * (-(-T::two() * x).exp_m1()).sqrt();
        for _ in 1..grid.len() {
            dd = dd * decay + kick * normal::<T, R>(rng);
            values.push(mean + dd);
        }
    }
    CouplingTrajectory::new(grid.t0(), grid.dt(), values)
}

/// [`sample_ou_with_rng`] driven by the generator of trajectory `stream_id`.
pub fn sample_ou_trajectory<T: Real>(
    model: &GaussianFluctuationModel<T>,
    grid: &TimeGrid<T>,
    seed: u64,
    stream_id: u64,
) -> Result<CouplingTrajectory<T>> {
    sample_ou_with_rng(model, grid, &mut trajectory_rng(seed, stream_id))
}

/// Running mean and sum of squared deviations per grid point.
#[derive(Debug, Clone)]
struct Moments<T> {
    count: usize,
    mean: Vec<T>,
    m2: Vec<T>,
}

impl<T: Real> Moments<T> {
    fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![T::zero(); len],
            m2: vec![T::zero(); len],
        }
    }

    fn push(&mut self, sample: &[T]) {
        self.count += 1;
        let n = T::from_usize_lossy(self.count);
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let delta = x - *m;
            *m = *m + delta / n;
            *s = *s + delta * (x - *m);
        }
    }

    fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = T::from_usize_lossy(self.count);
        let nb = T::from_usize_lossy(other.count);
        let n = na + nb;
        for j in 0..self.mean.len() {
            let delta = other.mean[j] - self.mean[j];
            self.mean[j] = self.mean[j] + delta * nb / n;
            self.m2[j] = self.m2[j] + other.m2[j] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }
}

/// Noise average of the decay over `cfg.n_trajectories()` OU trajectories.
///
/// Each trajectory gives `φ` by [`phase_shift`] and then the decay of
/// `cfg.form()`. The result is bit-identical for a given seed whatever the
/// number of worker threads. Requires `dt ≤ τ_c/10` and a grid starting at 0.
pub fn mc_average_fid<T: Real>(
    model: &GaussianFluctuationModel<T>,
    ens: SpinEnsemble,
    cfg: &McConfig<T>,
) -> Result<McResult<T>> {
    let grid = cfg.grid();
    if grid.t0() != T::zero() {
        return domain("Monte Carlo grid must start at t = 0");
    }
    if !model.is_frozen() && grid.dt() > model.tau_c() / T::lit(10.0) {
        return domain(format!(
            "dt = {} exceeds tau_c/10 = {}",
            grid.dt(),
            model.tau_c() / T::lit(10.0)
        ));
    }
    let len = grid.len();
    let n = cfg.n_trajectories();
    let form = cfg.form();
    let run_block = |b: usize| -> Result<Moments<T>> {
        let mut acc = Moments::new(len);
        let mut sample = vec![T::zero(); len];
        for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
            let traj = sample_ou_trajectory(model, &grid, cfg.seed(), i as u64)?;
            for (f, phi) in sample.iter_mut().zip(phase_shift(&traj)) {
                *f = match form {
                    FidForm::LargeN => fid_large_n(phi, ens),
                    FidForm::Exact => fid_exact(phi, ens),
                };
            }
            acc.push(&sample);
        }
        Ok(acc)
    };
    let n_blocks = n.div_ceil(BLOCK);
    let mut total = Moments::new(len);
    for batch_start in (0..n_blocks).step_by(BLOCKS_PER_BATCH) {
        let batch_end = (batch_start + BLOCKS_PER_BATCH).min(n_blocks);
        let blocks = (batch_start..batch_end)
            .into_par_iter()
            .map(run_block)
            .collect::<Result<Vec<_>>>()?;
        for block in &blocks {
            total.merge(block);
        }
    }
    let stderr = if n > 1 {
        let denom = T::from_usize_lossy(n - 1) * T::from_usize_lossy(n);
        total
            .m2
            .iter()
            .map(|s| (s.max(T::zero()) / denom).sqrt())
            .collect()
    } else {
        vec![T::zero(); len]
    };
    Ok(McResult {
        mean: FidSeries::new(grid.t0(), grid.dt(), total.mean)?,
        stderr,
        n_trajectories: n,
    })
}

/// Largest spin count accepted by [`exact_trace_fid`].
pub const MAX_TRACE_SPINS: u32 = 14;

/// Decay from the spin trace `tr{e^{i3φ(2I_z−1)} I₊I₋}/tr{I₊I₋}`.
///
/// Both operators are diagonal in the `I_z` basis: a state with `k` spins up has
/// `2I_z − 1 = 2k − N − 1` and `⟨I₊I₋⟩ = k`, with multiplicity `C(N, k)`.
/// The imaginary part must cancel; otherwise an error is returned.
pub fn exact_trace_fid<T: Real>(phi: T, n_spins: u32) -> Result<T> {
    if !(2..=MAX_TRACE_SPINS).contains(&n_spins) {
        return domain(format!("n_spins must lie in [2, {MAX_TRACE_SPINS}]"));
    }
    if !phi.is_finite() {
        return Err(Error::NonFinite("phi"));
    }
    let theta = T::lit(3.0) * phi;
    let n = n_spins as usize;
    let mut binom = T::one();
    let mut num = Complex::new(T::zero(), T::zero());
    let mut den = T::zero();
    for k in 0..=n {
        if k > 0 {
            binom = binom * T::from_usize_lossy(n + 1 - k) / T::from_usize_lossy(k);
        }
        let weight = binom * T::from_usize_lossy(k);
        let m = T::from_usize_lossy(2 * k) - T::from_usize_lossy(n + 1);
        num = num + Complex::from_polar(weight, theta * m);
        den = den + weight;
    }
    let f = num / den;
    let tol = T::lit(1e-12).max(T::lit(100.0) * T::epsilon());
    if f.im.abs() > tol {
        return Err(Error::NoConvergence(format!(
            "trace has imaginary part {}",
            f.im.to_f64_lossy()
        )));
    }
    Ok(f.re)
}
