//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test --test acceptance`.

use std::f64::consts::{PI, TAU};
use std::process::Command;
use std::time::Instant;

use nmr_linesim::fid::{
    fid_exact, fid_fast_regime, fid_frozen_regime, fid_gaussian, fid_vibration, FidSeries, TimeGrid,
};
use nmr_linesim::model::{
    coupling_from_geometry, nu, second_moment, ContainerGeometry, FrequencyDistribution,
    GaussianFluctuationModel, SpinEnsemble, VibrationModel,
};
use nmr_linesim::quad::{fourier_cosine_integral, integrate, integrate_to_infinity};
use nmr_linesim::spectrum::{
    cosine_transform, frequency_density, homogeneous_lineshape, lineshape_fast_fluct,
    lineshape_inhomogeneous, lineshape_satellites, lineshape_static_disorder,
    static_disorder_high_asymptote, static_disorder_log_asymptote, wing_tail, Quadrature, Spectrum,
    TransformPlan,
};
use nmr_linesim::stochastic::{exact_trace_fid, mc_average_fid, McConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

/// Model with `⟨D⟩` chosen so that `ν = nu_value` for the ensemble.
fn gaussian_model(
    ens: SpinEnsemble,
    nu_value: f64,
    alpha: f64,
    tauc_nu: f64,
) -> GaussianFluctuationModel<f64> {
    GaussianFluctuationModel::from_dimensionless(nu_value, alpha, tauc_nu, ens).unwrap()
}

/// Filon transform of `f` sampled on `t_k = k·dt` through `t_max`.
fn filon_spectrum(
    f: impl Fn(f64) -> nmr_linesim::Result<f64> + Sync,
    dt: f64,
    t_max: f64,
    omegas: (f64, f64, usize),
    truncation_tol: Option<f64>,
) -> Result<Spectrum<f64>, String> {
    let steps = (t_max / dt).ceil() as usize;
    let grid = TimeGrid::new(0.0, dt, steps + 1).map_err(e)?;
    let fid = FidSeries::tabulate(&grid, f).map_err(e)?;
    let plan = TransformPlan::new(omegas.1, omegas.2, fid.t_max(), Quadrature::FilonCosine)
        .map_err(e)?
        .with_truncation_tol(truncation_tol);
    let plan = if omegas.0 > 0.0 {
        plan.with_omega_min(omegas.0).map_err(e)?
    } else {
        plan
    };
    cosine_transform(&fid, &plan).map_err(e)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn c1_trace() -> Outcome {
    let phis = [0.0, 0.1, 0.5, 1.0, PI / 3.0];
    let mut worst = 0.0f64;
    for n in 2..=12u32 {
        let ens = SpinEnsemble::new(n).map_err(e)?;
        for &phi in &phis {
            let trace = exact_trace_fid(phi, n).map_err(e)?;
            let closed = fid_exact(phi, ens);
            worst = worst.max((trace - closed).abs());
        }
    }
    ensure(worst <= 1e-12, || {
        format!("max |trace − cos^(N−1)| = {worst:e}")
    })?;
    Ok(format!("max deviation {worst:.1e} over N in [2, 12]"))
}

fn c2_monte_carlo() -> Outcome {
    let ens = SpinEnsemble::new(500).map_err(e)?;
    let mut notes = Vec::new();
    for (i, &(alpha, tauc_nu)) in [(1.0, 0.1), (1.0, 10.0), (100.0, 10.0)].iter().enumerate() {
        let model = gaussian_model(ens, 1.0, alpha, tauc_nu);
        let dt = (0.05f64).min(model.tau_c() / 10.0);
        // horizon: first grid time with F < 1e−2
        let mut n = 1usize;
        while fid_gaussian(n as f64 * dt, ens, &model).map_err(e)? >= 1e-2 {
            n += 1;
        }
        let grid = TimeGrid::new(0.0, dt, n + 1).map_err(e)?;
        let cfg = McConfig::new(10_000, 1000 + i as u64, grid).map_err(e)?;
        let result = mc_average_fid(&model, ens, &cfg).map_err(e)?;
        let mut inside = 0usize;
        for (k, t) in grid.times().enumerate() {
            let expect = fid_gaussian(t, ens, &model).map_err(e)?;
            if (result.mean.values()[k] - expect).abs() <= 3.0 * result.stderr[k] {
                inside += 1;
            }
        }
        let frac = inside as f64 / grid.len() as f64;
        ensure(frac >= 0.99, || {
            format!(
                "(alpha, tau_c nu) = ({alpha}, {tauc_nu}): only {:.2}% within 3 sigma",
                100.0 * frac
            )
        })?;
        notes.push(format!("({alpha}, {tauc_nu}): {:.1}%", 100.0 * frac));
    }
    Ok(format!("within 3 sigma: {}", notes.join(", ")))
}

fn c3_fast_fluctuation() -> Outcome {
    let (alpha, tau_c, nu_value) = (1.0, 0.1, 1.0);
    let f = |t: f64| fid_fast_regime(t, alpha, tau_c, nu_value);
    let mut t_max = 1.0;
    while f(t_max).map_err(e)? > 1e-13 {
        t_max *= 1.25;
    }
    let spec = filon_spectrum(f, 1e-3, t_max, (0.0, 10.0 * nu_value, 201), Some(1e-12))?;
    let mut worst = 0.0f64;
    for (&w, &numeric) in spec.omegas().iter().zip(spec.intensities()) {
        let closed = lineshape_fast_fluct(w, alpha, tau_c, nu_value).map_err(e)?;
        worst = worst.max(((numeric - closed) / closed).abs());
    }
    ensure(worst <= 1e-5, || {
        format!("erfc form vs Filon transform: relative {worst:e}")
    })?;

    let tau_c = 0.01;
    let gamma = 1.0 / (4.0 * alpha * tau_c);
    let mut lorentz_worst = 0.0f64;
    for k in 0..=100 {
        let w = 2.0 * gamma * k as f64 / 100.0;
        let closed = lineshape_fast_fluct(w, alpha, tau_c, nu_value).map_err(e)?;
        let lorentz = gamma / (PI * (gamma * gamma + w * w));
        lorentz_worst = lorentz_worst.max(((closed - lorentz) / lorentz).abs());
    }
    ensure(lorentz_worst <= 0.02, || {
        format!("Lorentzian core: relative {lorentz_worst:e}")
    })?;
    Ok(format!(
        "transform rel. error {worst:.1e}; Lorentzian core (|omega| <= 2 Gamma) rel. error {lorentz_worst:.1e}"
    ))
}

fn c4_wings() -> Outcome {
    let ens = SpinEnsemble::new(500).map_err(e)?;
    let model = gaussian_model(ens, 1.0, 1.0, 0.1);
    let line = |w: f64| -> Result<f64, String> {
        let q = fourier_cosine_integral(|t| fid_gaussian(t, ens, &model).unwrap(), w, 1e-19, 1e-12)
            .map_err(e)?;
        Ok(q.value / PI)
    };
    let omegas: Vec<f64> = (0..=10)
        .map(|k| 100.0 * 10f64.powf(k as f64 / 10.0))
        .collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &w in &omegas {
        let v = line(w)?;
        ensure(v > 0.0, || {
            format!("non-positive wing intensity {v:e} at omega = {w}")
        })?;
        xs.push(w.ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    ensure((slope + 4.0).abs() <= 0.2, || {
        format!("log-log slope {slope:.4}")
    })?;
    let mut ratios = Vec::new();
    for (&w, &y) in omegas.iter().zip(&ys) {
        ratios.push(y.exp() / wing_tail(w, ens, &model).map_err(e)?);
    }
    let (lo, hi) = ratios
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &r| (a.min(r), b.max(r)));
    ensure(lo >= 0.5 && hi <= 2.0, || {
        format!("prefactor ratio in [{lo:.4}, {hi:.4}]")
    })?;
    Ok(format!(
        "slope {slope:.4} over omega in [100, 1000] nu; prefactor ratio in [{lo:.4}, {hi:.4}]"
    ))
}

fn c5_frozen() -> Outcome {
    let (alpha, nu_value): (f64, f64) = (1.0, 1.0);
    let scale = nu_value * alpha.sqrt();
    let mut worst = 0.0f64;
    for &x in &[0.01, 0.1, 0.5, 1.0, 2.0, 5.0] {
        let w = x * scale;
        let q = fourier_cosine_integral(
            |t| fid_frozen_regime(t, alpha, nu_value).unwrap(),
            w,
            1e-16,
            1e-12,
        )
        .map_err(e)?;
        let numeric = q.value / PI;
        let closed = lineshape_static_disorder(w, alpha, nu_value).map_err(e)?;
        worst = worst.max(((numeric - closed) / closed).abs());
    }
    ensure(worst <= 1e-5, || {
        format!("K0 form vs quadrature: relative {worst:e}")
    })?;
    let w_low = 1e-6 * scale;
    let low = lineshape_static_disorder(w_low, alpha, nu_value).map_err(e)?
        / static_disorder_log_asymptote(w_low, alpha, nu_value).map_err(e)?;
    ensure((low - 1.0).abs() <= 0.05, || {
        format!("low-frequency ratio {low}")
    })?;
    let w_high = 50.0 * scale;
    let high = lineshape_static_disorder(w_high, alpha, nu_value).map_err(e)?
        / static_disorder_high_asymptote(w_high, alpha, nu_value).map_err(e)?;
    ensure((high - 1.0).abs() <= 0.03, || {
        format!("high-frequency ratio {high}")
    })?;
    Ok(format!(
        "quadrature rel. error {worst:.1e}; log ratio {low:.4}; high ratio {high:.4}"
    ))
}

fn c6_second_moment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let ens = SpinEnsemble::new(rng.random_range(10..=1000)).map_err(e)?;
        let mean_d: f64 = 10f64.powf(rng.random_range(-1.0..1.0));
        let alpha: f64 = 10f64.powf(rng.random_range(-2.0..2.0));
        let tau_c: f64 = 10f64.powf(rng.random_range(-2.0..2.0));
        let model =
            GaussianFluctuationModel::new(mean_d, alpha * mean_d * mean_d, tau_c).map_err(e)?;
        let m2 = second_moment(ens, &model);
        let h0 = 0.2 * tau_c.min(1.0 / m2.sqrt());
        let levels = 7;
        let mut table: Vec<Vec<f64>> = Vec::new();
        for i in 0..levels {
            let h = h0 / 2f64.powi(i as i32);
            let f = fid_gaussian(h, ens, &model).map_err(e)?;
            let mut row = vec![2.0 * (f - 1.0) / (h * h)];
            for k in 1..=i {
                let p = 2f64.powi(k as i32);
                let v = (p * row[k - 1] - table[i - 1][k - 1]) / (p - 1.0);
                row.push(v);
            }
            table.push(row);
        }
        let curvature = -table[levels - 1][levels - 1];
        let rel = ((curvature - m2) / m2).abs();
        ensure(rel <= 1e-6, || {
            format!("N = {}, relative error {rel:e}", ens.n_spins())
        })?;
        worst = worst.max(rel);
    }
    Ok(format!(
        "max relative error {worst:.1e} over 5 random parameter sets"
    ))
}

fn local_maxima(values: &[f64]) -> Vec<usize> {
    (1..values.len() - 1)
        .filter(|&i| values[i] > values[i - 1] && values[i] > values[i + 1])
        .collect()
}

fn c7_satellites() -> Outcome {
    let ens = SpinEnsemble::new(500).map_err(e)?;
    let nu_value = 1.0;
    let mean_d = nu_value / (3.0 * 250f64.sqrt());
    let big_omega = 10.0 * nu_value;
    let vib = VibrationModel::new(mean_d, 0.5, big_omega).map_err(e)?;
    let nu_model = vib.nu(ens);
    let spec = filon_spectrum(
        |t| fid_vibration(t, ens, &vib),
        1e-3,
        14.0 / nu_model,
        (0.0, 30.0, 601),
        Some(1e-12),
    )?;
    let closed: Vec<f64> = spec
        .omegas()
        .iter()
        .map(|&w| lineshape_satellites(w, &vib, nu_model))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let peak = max_abs(&closed);
    let diff = closed
        .iter()
        .zip(spec.intensities())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let rel = diff / peak;
    ensure(rel <= 1e-5, || {
        format!("satellites vs transform: {rel:e} of the peak")
    })?;

    let step = nu_value;
    let omegas: Vec<f64> = (-30..=30).map(|k| k as f64 * step).collect();
    let magnitude: Vec<f64> = omegas
        .iter()
        .map(|&w| lineshape_satellites(w, &vib, nu_model).map(f64::abs))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let maxima: Vec<f64> = local_maxima(&magnitude)
        .into_iter()
        .map(|i| omegas[i])
        .collect();
    for target in [-2.0 * big_omega, -big_omega, big_omega, 2.0 * big_omega] {
        ensure(
            maxima
                .iter()
                .any(|m| (m - target).abs() <= step * (1.0 + 1e-12)),
            || format!("no local maximum of |I| within one step of {target}; maxima at {maxima:?}"),
        )?;
    }
    Ok(format!(
        "transform deviation {rel:.1e} of the peak; |I| maxima at {maxima:?}"
    ))
}

/// `∫ρ(Ω)·part(ω, Ω) dΩ` over `Ω₀ ± 12Δ`, split at `Ω = 0`.
fn averaged_homogeneous(
    w: f64,
    dist: &FrequencyDistribution<f64>,
    part: impl Fn(f64, f64) -> f64,
) -> Result<f64, String> {
    let reach = 12.0 * dist.delta();
    let (a, b) = (dist.omega0() - reach, dist.omega0() + reach);
    let integrand = |o: f64| frequency_density(o, dist) * part(w, o);
    let mut total = 0.0;
    let cuts: Vec<f64> = if a < 0.0 && b > 0.0 {
        vec![a, 0.0, b]
    } else {
        vec![a, b]
    };
    for pair in cuts.windows(2) {
        total += integrate(integrand, pair[0], pair[1], 1e-15, 1e-13)
            .map_err(e)?
            .value;
    }
    Ok(total)
}

/// Least-squares fit of `P(ω)·exp(−(ω−c)²/W²)` with quadratic `P`; returns the residual.
fn poly_gauss_residual(omegas: &[f64], values: &[f64], centre: f64, width: f64) -> f64 {
    let basis = |w: f64| {
        let g = (-(w - centre).powi(2) / (width * width)).exp();
        [g, (w - centre) * g, (w - centre).powi(2) * g]
    };
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (&w, &v) in omegas.iter().zip(values) {
        let b = basis(w);
        for i in 0..3 {
            atb[i] += b[i] * v;
            for j in 0..3 {
                ata[i][j] += b[i] * b[j];
            }
        }
    }
    let c = solve3(ata, atb);
    omegas
        .iter()
        .zip(values)
        .map(|(&w, &v)| {
            let b = basis(w);
            let fit = c[0] * b[0] + c[1] * b[1] + c[2] * b[2];
            (fit - v).powi(2)
        })
        .sum()
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *x -= factor * p;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Width `W` minimising the polynomial-times-Gaussian residual (golden section after a scan).
fn fit_width(omegas: &[f64], values: &[f64], centre: f64) -> f64 {
    let r = |w: f64| poly_gauss_residual(omegas, values, centre, w);
    let scan: Vec<f64> = (1..=400).map(|k| 0.05 * k as f64).collect();
    let best = scan
        .iter()
        .copied()
        .min_by(|a, b| r(*a).total_cmp(&r(*b)))
        .unwrap();
    let (mut lo, mut hi) = (best - 0.05, best + 0.05);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if r(x1) < r(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    0.5 * (lo + hi)
}

fn c8_inhomogeneous() -> Outcome {
    let (epsilon, nu_value) = (5.0, 1.0);
    let dist = FrequencyDistribution::new(TAU, 2.0).map_err(e)?;
    let omegas: Vec<f64> = (-120..=120).map(|k| k as f64 * 0.25).collect();
    let mut closed = Vec::new();
    let mut quadrature = Vec::new();
    for &w in &omegas {
        closed.push(lineshape_inhomogeneous(w, epsilon, nu_value, &dist).map_err(e)?);
        quadrature.push(averaged_homogeneous(w, &dist, |w, o| {
            homogeneous_lineshape(w, epsilon, o, nu_value).unwrap()
        })?);
    }
    let peak = max_abs(&closed);
    let diff = closed
        .iter()
        .zip(&quadrature)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let rel = diff / peak;
    ensure(rel <= 1e-5, || {
        format!("closed vs quadrature: {rel:e} of the peak")
    })?;

    // satellite components of the averaged homogeneous line, fitted separately
    let gauss = |x: f64| (-x * x / (nu_value * nu_value)).exp() / (nu_value * PI.sqrt());
    let o0 = dist.omega0();
    let fit_grid: Vec<f64> = (0..=400).map(|k| o0 - 20.0 + 0.1 * k as f64).collect();
    let first: Vec<f64> = fit_grid
        .iter()
        .map(|&w| {
            averaged_homogeneous(w, &dist, |w, o| {
                -epsilon / 2.0 * (1.0 - w / o) * gauss(w - o)
            })
        })
        .collect::<Result<_, _>>()?;
    let second_grid: Vec<f64> = fit_grid.iter().map(|w| w + o0).collect();
    let second: Vec<f64> = second_grid
        .iter()
        .map(|&w| {
            averaged_homogeneous(w, &dist, |w, o| {
                epsilon * epsilon * nu_value * nu_value / (16.0 * o * o) * gauss(w - 2.0 * o)
            })
        })
        .collect::<Result<_, _>>()?;
    let w1 = 2.0 * fit_width(&fit_grid, &first, o0);
    let w2 = 2.0 * fit_width(&second_grid, &second, 2.0 * o0);
    let d = dist.delta();
    let e1 = 2.0 * (nu_value * nu_value + d * d).sqrt();
    let e2 = 2.0 * (nu_value * nu_value + 4.0 * d * d).sqrt();
    ensure(((w1 - e1) / e1).abs() <= 0.05, || {
        format!("first satellite width {w1} vs {e1}")
    })?;
    ensure(((w2 - e2) / e2).abs() <= 0.05, || {
        format!("second satellite width {w2} vs {e2}")
    })?;

    let narrow = FrequencyDistribution::new(TAU, 1e-3).map_err(e)?;
    let mut limit_diff = 0.0f64;
    let mut limit_peak = 0.0f64;
    for &w in &omegas {
        let a = lineshape_inhomogeneous(w, epsilon, nu_value, &narrow).map_err(e)?;
        let b = homogeneous_lineshape(w, epsilon, TAU, nu_value).map_err(e)?;
        limit_diff = limit_diff.max((a - b).abs());
        limit_peak = limit_peak.max(b.abs());
    }
    let limit_rel = limit_diff / limit_peak;
    ensure(limit_rel <= 1e-4, || {
        format!("Delta -> 0 limit: {limit_rel:e} of the peak")
    })?;
    Ok(format!(
        "quadrature {rel:.1e} of peak; widths {w1:.4} (expect {e1:.4}), {w2:.4} (expect {e2:.4}); Delta -> 0 {limit_rel:.1e}"
    ))
}

fn c9_worked_numbers() -> Outcome {
    let theta = (2.0f64 / 3.0).sqrt().acos();
    let geom = ContainerGeometry::new(TAU * 120.0, 2.0, 45.0, theta).map_err(e)?;
    let d = coupling_from_geometry(&geom);
    let d_hz = d / TAU;
    ensure(((d_hz - 5.3) / 5.3).abs() <= 0.02, || {
        format!("<D>/2pi = {d_hz}")
    })?;
    ensure((d_hz - 16.0 / 3.0).abs() <= 1e-12, || {
        format!("<D>/2pi = {d_hz}, expected 16/3")
    })?;
    let ens = SpinEnsemble::new(500).map_err(e)?;
    let nu_hz = nu(d_hz, ens);
    ensure(((nu_hz - 250.0) / 250.0).abs() <= 0.02, || {
        format!("nu = {nu_hz} Hz")
    })?;
    Ok(format!(
        "<D> = 2pi x {d_hz:.4} rad/s; nu = {nu_hz:.2} s^-1 (Hz reading)"
    ))
}

fn zero_frequency_intensity(
    ens: SpinEnsemble,
    model: &GaussianFluctuationModel<f64>,
) -> Result<f64, String> {
    let q = integrate_to_infinity(|t| fid_gaussian(t, ens, model).unwrap(), 0.0, 1e-14, 1e-11)
        .map_err(e)?;
    Ok(q.value / PI)
}

/// `√(∫ω²I dω / ∫I dω)` of the Filon spectrum on `0 ≤ ω ≤ ω_max`.
fn moment_width(ens: SpinEnsemble, model: &GaussianFluctuationModel<f64>) -> Result<f64, String> {
    let (dt, t_cap, omega_max, n) = (0.02, 1500.0, 400.0, 4001);
    let mut t_max = 1.0;
    while t_max < t_cap && fid_gaussian(t_max, ens, model).map_err(e)? > 1e-9 {
        t_max *= 1.1;
    }
    let spec = filon_spectrum(
        |t| fid_gaussian(t, ens, model),
        dt,
        t_max.min(t_cap),
        (0.0, omega_max, n),
        None,
    )?;
    let dw = omega_max / (n - 1) as f64;
    let weigh = |k: i32| -> f64 {
        spec.omegas()
            .iter()
            .zip(spec.intensities())
            .enumerate()
            .map(|(i, (w, v))| {
                let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                end * w.powi(k) * v
            })
            .sum::<f64>()
            * dw
    };
    Ok((weigh(2) / weigh(0)).sqrt())
}

fn c10_trends() -> Outcome {
    let ens = SpinEnsemble::new(500).map_err(e)?;
    let i0_tau: Vec<f64> = [0.1, 1.0, 10.0, 100.0]
        .iter()
        .map(|&x| zero_frequency_intensity(ens, &gaussian_model(ens, 1.0, 1.0, x)))
        .collect::<Result<_, _>>()?;
    ensure(i0_tau.windows(2).all(|p| p[1] > p[0]), || {
        format!("I(0) across tau_c nu: {i0_tau:?}")
    })?;
    let alphas = [0.01, 0.1, 1.0, 10.0, 100.0];
    let mut i0_alpha = Vec::new();
    let mut widths = Vec::new();
    for &a in &alphas {
        let model = gaussian_model(ens, 1.0, a, 10.0);
        i0_alpha.push(zero_frequency_intensity(ens, &model)?);
        widths.push(moment_width(ens, &model)?);
    }
    let (first, last) = (i0_alpha[0], i0_alpha[alphas.len() - 1]);
    ensure(last > first, || {
        format!("I(0) at alpha = 100 ({last}) not above alpha = 0.01 ({first})")
    })?;
    ensure(widths.windows(2).all(|p| p[1] > p[0]), || {
        format!("second-moment width across alpha: {widths:?}")
    })?;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(" < ")
    };
    Ok(format!(
        "I(0) vs tau_c nu: {}; I(0) at alpha = 0.01, 0.1, 1, 10, 100: {:?}; width vs alpha: {}",
        fmt(&i0_tau),
        i0_alpha
            .iter()
            .map(|x| (x * 1e4).round() / 1e4)
            .collect::<Vec<_>>(),
        fmt(&widths)
    ))
}

fn c11_determinism() -> Outcome {
    let run = |threads: &str| -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_nmr-linesim"))
            .args([
                "mc",
                "--scenario",
                "gaussian",
                "--nu",
                "1",
                "--alpha",
                "1",
                "--tauc-nu",
                "1",
                "--trajectories",
                "3000",
                "--seed",
                "2024",
                "--threads",
                threads,
            ])
            .output()
            .map_err(e)?;
        ensure(out.status.success(), || {
            String::from_utf8_lossy(&out.stderr).into_owned()
        })?;
        Ok(out.stdout)
    };
    let one = run("1")?;
    let four = run("4")?;
    let seven = run("7")?;
    ensure(one == four && one == seven, || {
        "outputs differ between thread counts".into()
    })?;
    Ok(format!(
        "{} bytes identical for 1, 4 and 7 threads",
        one.len()
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("exact decay equals spin trace", c1_trace),
        (
            "Monte Carlo matches Gaussian-averaged decay",
            c2_monte_carlo,
        ),
        ("erfc line shape and Lorentzian core", c3_fast_fluctuation),
        ("omega^-4 far wings", c4_wings),
        ("K0 line shape and its asymptotes", c5_frozen),
        ("second moment from decay curvature", c6_second_moment),
        ("vibration satellites", c7_satellites),
        ("inhomogeneous vibration line shape", c8_inhomogeneous),
        ("worked numbers", c9_worked_numbers),
        (
            "line shape trends with tau_c nu and alpha",
            c10_trends,
        ),
        (
            "Monte Carlo output independent of thread count",
            c11_determinism,
        ),
    ];
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let start = Instant::now();
                    let outcome =
                        std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
                    (outcome, start.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failures = 0;
    for (i, ((name, _), (outcome, secs))) in criteria.iter().zip(results).enumerate() {
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {name} [{secs:.1} s]: {detail}",
                i + 1
            ),
            Err(detail) => {
                failures += 1;
                println!(
                    "criterion {:>2} FAIL  {name} [{secs:.1} s]: {detail}",
                    i + 1
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
