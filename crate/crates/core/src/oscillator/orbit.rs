use num_complex::Complex64;
use rayon::prelude::*;

use super::{OscillatorParams, PDensitySpec};
use crate::error::{invalid, Error, Result};

/// Relative endpoint tolerance of the step-halving check.
pub const STEP_HALVING_TOLERANCE: f64 = 1e-5;

/// Drive sampled at every half step `k dt / 2`.
#[derive(Debug, Clone)]
pub(crate) struct DriveTable {
    pub dt: f64,
    pub n_steps: usize,
    values: Vec<f64>,
}

impl DriveTable {
    pub fn new(params: &OscillatorParams, dt: f64, n_steps: usize) -> Self {
        let values = (0..=2 * n_steps).map(|k| params.drive.value(k as f64 * dt / 2.0)).collect();
        Self { dt, n_steps, values }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct OrbitState {
    pub alpha: Complex64,
    pub phi: f64,
    /// `α° + i ∫ g e^{iφ}`, equal to `α e^{iφ}` along an exact orbit.
    pub a: Complex64,
}

#[inline]
fn rhs(omega0: f64, alpha: Complex64, phi: f64, g: f64) -> (Complex64, f64, Complex64) {
    let freq = omega0 + 2.0 * alpha.norm_sqr();
    let d_alpha = Complex64::new(0.0, -1.0) * (alpha * freq - g);
    let d_a = Complex64::new(0.0, g) * Complex64::from_polar(1.0, phi);
    (d_alpha, freq, d_a)
}

#[inline]
fn rk4(omega0: f64, s: OrbitState, g0: f64, gh: f64, g1: f64, dt: f64) -> OrbitState {
    let h = 0.5 * dt;
    let (ka1, kp1, kb1) = rhs(omega0, s.alpha, s.phi, g0);
    let (ka2, kp2, kb2) = rhs(omega0, s.alpha + ka1 * h, s.phi + kp1 * h, gh);
    let (ka3, kp3, kb3) = rhs(omega0, s.alpha + ka2 * h, s.phi + kp2 * h, gh);
    let (ka4, kp4, kb4) = rhs(omega0, s.alpha + ka3 * dt, s.phi + kp3 * dt, g1);
    let w = dt / 6.0;
    OrbitState {
        alpha: s.alpha + (ka1 + ka2 * 2.0 + ka3 * 2.0 + ka4) * w,
        phi: s.phi + (kp1 + 2.0 * kp2 + 2.0 * kp3 + kp4) * w,
        a: s.a + (kb1 + kb2 * 2.0 + kb3 * 2.0 + kb4) * w,
    }
}

/// Integrates one orbit, calling `sink(step, state)` at step 0, at every
/// `every`-th step, and at the final step.
pub(crate) fn run_orbit(
    alpha0: Complex64,
    omega0: f64,
    table: &DriveTable,
    every: usize,
    mut sink: impl FnMut(usize, &OrbitState),
) -> OrbitState {
    let mut s = OrbitState { alpha: alpha0, phi: 0.0, a: alpha0 };
    sink(0, &s);
    let g = &table.values;
    for step in 0..table.n_steps {
        s = rk4(omega0, s, g[2 * step], g[2 * step + 1], g[2 * step + 2], table.dt);
        let done = step + 1;
        if done % every == 0 || done == table.n_steps {
            sink(done, &s);
        }
    }
    s
}

pub(crate) fn step_count(params: &OscillatorParams, t_max: f64) -> Result<usize> {
    params.validate()?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(invalid("T", "must be positive"));
    }
    Ok(((t_max / params.dt).round() as usize).max(1))
}

pub(crate) fn node_times(params: &OscillatorParams, n_steps: usize) -> Vec<f64> {
    let every = params.sample_every();
    let mut t: Vec<f64> = (0..=n_steps).step_by(every).map(|s| s as f64 * params.dt).collect();
    if n_steps % every != 0 {
        t.push(n_steps as f64 * params.dt);
    }
    t
}

/// Classical orbit sampled on the stored nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorTrajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<Complex64>,
    /// `I = |α|²`.
    pub action: Vec<f64>,
    /// `φ(t) = ∫₀ᵗ (ω₀ + 2I)`.
    pub phase: Vec<f64>,
    /// `α° + i ∫₀ᵗ g e^{iφ}` accumulated alongside the orbit.
    pub rotating: Vec<Complex64>,
}

impl OscillatorTrajectory {
    /// `| I(t) - |α° + i∫g e^{iφ}|² |` at each node.
    pub fn integral_residual(&self) -> Vec<f64> {
        self.action
            .iter()
            .zip(&self.rotating)
            .map(|(i, a)| (i - a.norm_sqr()).abs())
            .collect()
    }

    pub fn max_integral_residual(&self) -> f64 {
        self.integral_residual().into_iter().fold(0.0, f64::max)
    }
}

fn trajectory(alpha0: Complex64, params: &OscillatorParams, n_steps: usize, dt: f64, every: usize) -> OscillatorTrajectory {
    let table = DriveTable::new(params, dt, n_steps);
    let mut tr = OscillatorTrajectory {
        times: Vec::new(),
        alpha: Vec::new(),
        action: Vec::new(),
        phase: Vec::new(),
        rotating: Vec::new(),
    };
    run_orbit(alpha0, params.omega0, &table, every, |step, s| {
        tr.times.push(step as f64 * dt);
        tr.alpha.push(s.alpha);
        tr.action.push(s.alpha.norm_sqr());
        tr.phase.push(s.phi);
        tr.rotating.push(s.a);
    });
    tr
}

/// Integrates without the step-halving verification.
pub fn integrate_orbit_unchecked(alpha0: Complex64, params: &OscillatorParams, t_max: f64) -> Result<OscillatorTrajectory> {
    let n = step_count(params, t_max)?;
    Ok(trajectory(alpha0, params, n, params.dt, params.sample_every()))
}

/// Integrates `dα/dt = -i[(ω₀ + 2|α|²)α - g(t)]` with fixed-step RK4 and
/// verifies the endpoint against a run at half the step.
pub fn integrate_orbit(alpha0: Complex64, params: &OscillatorParams, t_max: f64) -> Result<OscillatorTrajectory> {
    let n = step_count(params, t_max)?;
    let tr = trajectory(alpha0, params, n, params.dt, params.sample_every());
    let table = DriveTable::new(params, params.dt / 2.0, 2 * n);
    let fine = run_orbit(alpha0, params.omega0, &table, usize::MAX, |_, _| {});
    let end = *tr.alpha.last().expect("at least one node");
    let rel = (end - fine.alpha).norm() / end.norm().max(1.0);
    if rel > STEP_HALVING_TOLERANCE {
        return Err(Error::Accuracy(format!(
            "halving dt moves α(T = {t_max}) by {rel:.3e} (relative), above {STEP_HALVING_TOLERANCE:.0e}"
        )));
    }
    Ok(tr)
}

/// Actions and phases of many orbits on common nodes, `[sample][node]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitEnsemble {
    pub times: Vec<f64>,
    pub initial: Vec<Complex64>,
    pub action: Vec<Vec<f64>>,
    pub phase: Vec<Vec<f64>>,
}

impl OrbitEnsemble {
    /// Integrates one orbit per sample of `p`.
    pub fn generate(p: &PDensitySpec, params: &OscillatorParams, t_max: f64) -> Result<Self> {
        p.validate()?;
        let starts: Vec<(Complex64, f64)> = p.samples().into_iter().map(|a| (a, params.omega0)).collect();
        Self::from_starts(&starts, params, t_max)
    }

    /// Integrates one orbit per `(α°, ω₀)` pair.
    pub fn from_starts(starts: &[(Complex64, f64)], params: &OscillatorParams, t_max: f64) -> Result<Self> {
        let n = step_count(params, t_max)?;
        let table = DriveTable::new(params, params.dt, n);
        let every = params.sample_every();
        let times = node_times(params, n);
        let rows: Vec<(Vec<f64>, Vec<f64>)> = starts
            .par_iter()
            .map(|&(a0, w0)| {
                let mut act = Vec::with_capacity(times.len());
                let mut ph = Vec::with_capacity(times.len());
                run_orbit(a0, w0, &table, every, |_, s| {
                    act.push(s.alpha.norm_sqr());
                    ph.push(s.phi);
                });
                (act, ph)
            })
            .collect();
        let (action, phase) = rows.into_iter().unzip();
        Ok(Self { times, initial: starts.iter().map(|s| s.0).collect(), action, phase })
    }

    pub fn len(&self) -> usize {
        self.action.len()
    }

    pub fn is_empty(&self) -> bool {
        self.action.is_empty()
    }

    /// `<exp(i c [φ(t) - φ(0)])>` summed in sample order.
    pub fn phase_correlation(&self, c: f64) -> Vec<Complex64> {
        let n = self.len() as f64;
        (0..self.times.len())
            .map(|t| {
                self.phase
                    .iter()
                    .map(|ph| Complex64::from_polar(1.0, c * (ph[t] - ph[0])))
                    .sum::<Complex64>()
                    / n
            })
            .collect()
    }

    pub fn mean_action(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.times.len()).map(|t| self.action.iter().map(|a| a[t]).sum::<f64>() / n).collect()
    }
}
