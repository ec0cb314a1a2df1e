use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use super::orbit::{integrate_orbit_unchecked, OrbitEnsemble};
use super::{substream, OscillatorParams};
use crate::error::{invalid, Result};
use crate::metrics::linear_fit;

/// Monte Carlo standard error above which an amplitude is flagged.
pub const MC_ERROR_LIMIT: f64 = 0.05;

/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Disagreement between steps `h` and `h/2` that marks a derivative as unreliable.
pub const FD_CONSISTENCY: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct SemiclassicalAmplitude {
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Standard error of the complex mean.
    pub stderr: Vec<f64>,
    /// Some `stderr` exceeds [`MC_ERROR_LIMIT`].
    pub undersampled: bool,
}

impl SemiclassicalAmplitude {
    pub fn fidelity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }
}

/// Monte Carlo estimate of the fidelity amplitude in the initial value
/// representation: `δ` is complex Gaussian with variance ħ/4 per quadrature,
/// and each orbit starts at `α₀ + δ` with linear frequency `ω₀ - 2|δ|²`.
pub fn semiclassical_amplitude(
    alpha0: Complex64,
    params: &OscillatorParams,
    sigma: f64,
    t_max: f64,
    n_mc: usize,
    seed: u64,
) -> Result<SemiclassicalAmplitude> {
    semiclassical_amplitude_with(alpha0, params, sigma, t_max, n_mc, seed, true)
}

/// As [`semiclassical_amplitude`]; with `fluctuations = false` every `δ` is
/// forced to zero.
pub fn semiclassical_amplitude_with(
    alpha0: Complex64,
    params: &OscillatorParams,
    sigma: f64,
    t_max: f64,
    n_mc: usize,
    seed: u64,
    fluctuations: bool,
) -> Result<SemiclassicalAmplitude> {
    if n_mc < 1000 {
        return Err(invalid("n_mc", format!("need at least 1000 samples, got {n_mc}")));
    }
    if !sigma.is_finite() {
        return Err(invalid("sigma", "must be finite"));
    }
    let s = (params.hbar / 4.0).sqrt();
    let starts: Vec<(Complex64, f64)> = (0..n_mc)
        .map(|i| {
            if !fluctuations {
                return (alpha0, params.omega0);
            }
            let mut rng = substream(seed, i as u64);
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            let d = Complex64::new(s * x, s * y);
            (alpha0 + d, params.omega0 - 2.0 * d.norm_sqr())
        })
        .collect();
    let ens = OrbitEnsemble::from_starts(&starts, params, t_max)?;
    let values = ens.phase_correlation(sigma / 2.0);
    let n = n_mc as f64;
    let stderr: Vec<f64> = values.iter().map(|m| ((1.0 - m.norm_sqr()).max(0.0) / (n - 1.0)).sqrt()).collect();
    let undersampled = stderr.iter().any(|&e| e > MC_ERROR_LIMIT);
    Ok(SemiclassicalAmplitude { times: ens.times, values, stderr, undersampled })
}

/// Early-time fidelity from the quadratic expansion of the phase about the
/// orbit, with the derivatives that enter it.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyTimeFidelity {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// `|∂φ/∂α°|`, with `|∂φ/∂α°|² = (φ_x² + φ_y²)/4`.
    pub dphi_dalpha: Vec<f64>,
    /// `∂φ/∂ω₀`.
    pub dphi_domega: Vec<f64>,
    /// Step-halving agreement of both derivatives at each node.
    pub fd_consistent: Vec<bool>,
    /// Log-linear growth rates of `|∂φ/∂α°|` and `|∂φ/∂ω₀|`.
    pub growth_rate_alpha: f64,
    pub growth_rate_omega: f64,
    /// `(1/Λ) ln(2/ε)` with `Λ` the α-channel growth rate.
    pub validity_horizon: f64,
}

struct Derivatives {
    times: Vec<f64>,
    phi_x: Vec<f64>,
    phi_y: Vec<f64>,
    phi_w: Vec<f64>,
}

fn derivatives(alpha0: Complex64, params: &OscillatorParams, t_max: f64, rel: f64) -> Result<Derivatives> {
    let ha = rel * alpha0.norm().max(1.0);
    let hw = rel * params.omega0.abs().max(1.0);
    let phase = |a: Complex64, w: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut p = params.clone();
        p.omega0 = w;
        let tr = integrate_orbit_unchecked(a, &p, t_max)?;
        Ok((tr.times, tr.phase))
    };
    let w0 = params.omega0;
    let (times, xp) = phase(alpha0 + Complex64::new(ha, 0.0), w0)?;
    let (_, xm) = phase(alpha0 - Complex64::new(ha, 0.0), w0)?;
    let (_, yp) = phase(alpha0 + Complex64::new(0.0, ha), w0)?;
    let (_, ym) = phase(alpha0 - Complex64::new(0.0, ha), w0)?;
    let (_, wp) = phase(alpha0, w0 + hw)?;
    let (_, wm) = phase(alpha0, w0 - hw)?;
    let cd = |p: &[f64], m: &[f64], h: f64| -> Vec<f64> { p.iter().zip(m).map(|(a, b)| (a - b) / (2.0 * h)).collect() };
    Ok(Derivatives { phi_x: cd(&xp, &xm, ha), phi_y: cd(&yp, &ym, ha), phi_w: cd(&wp, &wm, hw), times })
}

fn growth_rate(times: &[f64], mag: &[f64]) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(mag)
        .filter(|(t, m)| **t > 0.0 && **m > 0.0)
        .map(|(t, m)| (*t, m.ln()))
        .unzip();
    linear_fit(&x, &y).map_or(f64::NAN, |f| f.slope)
}

/// `F = [1 + (ε/2)² φ_ω²]⁻¹ exp{-(ε²/4ħ) |∂φ/∂α°|² [1 + (ε/2)² φ_ω²]⁻¹}`
/// with derivatives from central differences of the orbit.
pub fn early_time_fidelity(
    alpha0: Complex64,
    params: &OscillatorParams,
    epsilon: f64,
    hbar: f64,
    t_max: f64,
) -> Result<EarlyTimeFidelity> {
    if !(hbar > 0.0) {
        return Err(invalid("hbar", "must be positive"));
    }
    if !epsilon.is_finite() {
        return Err(invalid("epsilon", "must be finite"));
    }
    let d = derivatives(alpha0, params, t_max, FD_STEP)?;
    let d2 = derivatives(alpha0, params, t_max, FD_STEP / 2.0)?;
    let close = |a: f64, b: f64| (a - b).abs() <= FD_CONSISTENCY * a.abs().max(b.abs()).max(1e-300);
    let nt = d.times.len();
    let mut fidelity = Vec::with_capacity(nt);
    let mut dphi_dalpha = Vec::with_capacity(nt);
    let mut fd_consistent = Vec::with_capacity(nt);
    for i in 0..nt {
        let grad_sq = 0.25 * (d.phi_x[i].powi(2) + d.phi_y[i].powi(2));
        let grad_sq2 = 0.25 * (d2.phi_x[i].powi(2) + d2.phi_y[i].powi(2));
        let q = 1.0 + (0.5 * epsilon * d.phi_w[i]).powi(2);
        fidelity.push((-(epsilon * epsilon / (4.0 * hbar)) * grad_sq / q).exp() / q);
        dphi_dalpha.push(grad_sq.sqrt());
        fd_consistent.push(i == 0 || (close(grad_sq.sqrt(), grad_sq2.sqrt()) && close(d.phi_w[i], d2.phi_w[i])));
    }
    let growth_rate_alpha = growth_rate(&d.times, &dphi_dalpha);
    let omega_mag: Vec<f64> = d.phi_w.iter().map(|v| v.abs()).collect();
    let growth_rate_omega = growth_rate(&d.times, &omega_mag);
    let validity_horizon = if growth_rate_alpha > 0.0 && epsilon > 0.0 {
        (2.0 / epsilon).ln() / growth_rate_alpha
    } else {
        f64::INFINITY
    };
    Ok(EarlyTimeFidelity {
        times: d.times,
        fidelity,
        dphi_dalpha,
        dphi_domega: d.phi_w,
        fd_consistent,
        growth_rate_alpha,
        growth_rate_omega,
        validity_horizon,
    })
}
