use num_complex::Complex64;

use super::orbit::{integrate_orbit_unchecked, OrbitEnsemble};
use super::{OscillatorParams, PDensityKind, PDensitySpec};
use crate::error::{invalid, Result};
use crate::metrics::linear_fit;
pub use crate::series::ComplexSeries;

/// Smallest ensemble accepted by the ensemble correlators.
pub const MIN_SAMPLES: usize = 1000;

/// Above this σ the second-cumulant law is not expected to hold.
pub const FGR_SIGMA_LIMIT: f64 = 0.3;

fn require_samples(p: &PDensitySpec) -> Result<()> {
    if !matches!(p.kind, PDensityKind::Delta { .. }) && p.n_samples < MIN_SAMPLES {
        return Err(invalid("n_samples", format!("need at least {MIN_SAMPLES}, got {}", p.n_samples)));
    }
    Ok(())
}

/// `<exp(ic[φ(t) - φ(0)])>` over initial points drawn from `p`.
pub fn phase_correlation(p: &PDensitySpec, params: &OscillatorParams, c: f64, t_max: f64) -> Result<ComplexSeries> {
    p.validate()?;
    require_samples(p)?;
    if let PDensityKind::Delta { center } = p.kind {
        let tr = integrate_orbit_unchecked(center, params, t_max)?;
        let values = tr.phase.iter().map(|ph| Complex64::from_polar(1.0, c * (ph - tr.phase[0]))).collect();
        return Ok(ComplexSeries { times: tr.times, values });
    }
    let ens = OrbitEnsemble::generate(p, params, t_max)?;
    Ok(ComplexSeries { values: ens.phase_correlation(c), times: ens.times })
}

/// `|<exp(i σ/2 [φ(t) - φ(0)])>|²`.
pub fn allegiance_classical(p: &PDensitySpec, params: &OscillatorParams, sigma: f64, t_max: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    let s = phase_correlation(p, params, sigma / 2.0, t_max)?;
    Ok((s.modulus_sqr(), s.times))
}

/// `exp(-σ² χ₂(t))`.
pub fn fgr_prediction(chi2: &[f64], sigma: f64) -> Vec<f64> {
    chi2.iter().map(|c| (-sigma * sigma * c).exp()).collect()
}

/// Second cumulant of the action fluctuations and derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCumulant {
    pub times: Vec<f64>,
    /// `χ₂(t) = ∫₀ᵗ∫₀ᵗ K_I(τ₁, τ₂)`.
    pub chi2: Vec<f64>,
    /// `∫₀^∞ K_I(τ, 0) dτ` over the truncated window.
    pub k_int: f64,
    /// Correlation time of the action.
    pub tau_i: f64,
    /// Slope of `<I(t)>`.
    pub diffusion: f64,
    pub diffusion_r2: f64,
    /// Lags and values of the time-averaged autocovariance.
    pub kernel_lags: Vec<f64>,
    pub kernel: Vec<f64>,
    /// False when the autocovariance does not decay (no chaos).
    pub decaying: bool,
}

/// Estimates the action covariance from an ensemble drawn from `p`.
pub fn action_cumulant(p: &PDensitySpec, params: &OscillatorParams, t_max: f64) -> Result<ActionCumulant> {
    p.validate()?;
    if p.n_samples < MIN_SAMPLES {
        return Err(invalid("n_samples", format!("need at least {MIN_SAMPLES}, got {}", p.n_samples)));
    }
    ActionCumulant::from_ensemble(&OrbitEnsemble::generate(p, params, t_max)?)
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

/// Decay rate of `k` fitted on lags `[0, window]`, stopping at the first
/// non-positive value.
fn exp_rate(lags: &[f64], k: &[f64], window: f64) -> Option<f64> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&l, &v) in lags.iter().zip(k) {
        if l > window || !(v > 0.0) {
            break;
        }
        x.push(l);
        y.push(v.ln());
    }
    let fit = linear_fit(&x, &y).ok()?;
    (fit.slope < 0.0).then_some(-fit.slope)
}

impl ActionCumulant {
    pub fn from_ensemble(ens: &OrbitEnsemble) -> Result<Self> {
        let n = ens.len();
        let nt = ens.times.len();
        if n < 2 || nt < 4 {
            return Err(invalid("ensemble", "too small to estimate a covariance"));
        }
        let nf = n as f64;
        let times = ens.times.clone();

        // χ₂(t) is the variance of the trapezoid integral J(t) = ∫₀ᵗ I, i.e.
        // the double quadrature of the empirical covariance.
        let mut j_sum = vec![0.0; nt];
        let mut j_sq = vec![0.0; nt];
        for act in &ens.action {
            let mut j = 0.0;
            for m in 1..nt {
                j += 0.5 * (times[m] - times[m - 1]) * (act[m] + act[m - 1]);
                j_sum[m] += j;
                j_sq[m] += j * j;
            }
        }
        let chi2: Vec<f64> = (0..nt).map(|m| (j_sq[m] / nf - (j_sum[m] / nf).powi(2)).max(0.0)).collect();

        // Time-averaged autocovariance over all reference nodes.
        let mean = ens.mean_action();
        let max_lag = nt / 2;
        let step = times[1] - times[0];
        let mut kernel = vec![0.0; max_lag + 1];
        for (l, kv) in kernel.iter_mut().enumerate() {
            let refs = nt - l;
            let mut acc = 0.0;
            for s in 0..refs {
                let cov: f64 = ens.action.iter().map(|a| (a[s] - mean[s]) * (a[s + l] - mean[s + l])).sum();
                acc += cov / nf;
            }
            *kv = acc / refs as f64;
        }
        let kernel_lags: Vec<f64> = (0..=max_lag).map(|l| l as f64 * step).collect();

        let mut tau = None;
        let mut window = kernel_lags[max_lag] / 2.0;
        for _ in 0..3 {
            match exp_rate(&kernel_lags, &kernel, window) {
                Some(rate) => {
                    tau = Some(1.0 / rate);
                    window = 5.0 / rate;
                }
                None => {
                    tau = None;
                    break;
                }
            }
        }
        let tail_idx = kernel_lags.iter().position(|&l| l > window).unwrap_or(max_lag);
        let decaying = tau.is_some() && kernel[tail_idx.min(max_lag)] < 0.5 * kernel[0] && window < kernel_lags[max_lag];
        let (tau_i, k_int) = match tau {
            Some(tau) if decaying => {
                let peak = kernel.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let mut end = 0;
                while end + 1 < kernel.len() && kernel_lags[end + 1] <= window && kernel[end + 1] >= 1e-3 * peak {
                    end += 1;
                }
                (tau, trapezoid(&kernel_lags[..=end], &kernel[..=end]))
            }
            _ => (f64::INFINITY, f64::NAN),
        };

        let fit = linear_fit(&times, &mean)?;
        Ok(Self {
            times,
            chi2,
            k_int,
            tau_i,
            diffusion: fit.slope,
            diffusion_r2: fit.r2,
            kernel_lags,
            kernel,
            decaying,
        })
    }
}
