//! Periodically driven quartic oscillator `H = ω₀|α|² + |α|⁴ - (α + α*) g(t)`:
//! classical orbits and ensembles, phase and action correlators, the
//! semiclassical fidelity amplitude and Glauber P / Fock-weight conversions.

pub mod correlation;
pub mod glauber;
pub mod orbit;
pub mod semiclassical;

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

pub use correlation::{
    action_cumulant, allegiance_classical, fgr_prediction, FGR_SIGMA_LIMIT, phase_correlation, ActionCumulant, ComplexSeries,
};
pub use glauber::{
    fock_to_p, p_to_fock, thermal_fock_weights, ExpTerm, FockWeights, GlauberInversion, RadialDensity,
};
pub use orbit::{integrate_orbit, integrate_orbit_unchecked, OrbitEnsemble, OscillatorTrajectory};
pub use semiclassical::{
    early_time_fidelity, semiclassical_amplitude, semiclassical_amplitude_with, EarlyTimeFidelity,
    SemiclassicalAmplitude,
};

/// One harmonic `g_m cos(2π m t + χ_m)` of the drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveMode {
    pub harmonic: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// Period-one drive `g(t) = Σ_m g_m cos(2π m t + χ_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSpec {
    pub modes: Vec<DriveMode>,
}

impl DriveSpec {
    pub fn new(modes: Vec<DriveMode>) -> Result<Self> {
        let d = Self { modes };
        d.validate()?;
        Ok(d)
    }

    /// `g₁ cos(2πt) + g₂ cos(4πt + χ)`.
    pub fn two_mode(g1: f64, g2: f64, chi: f64) -> Self {
        Self {
            modes: vec![
                DriveMode { harmonic: 1, amplitude: g1, phase: 0.0 },
                DriveMode { harmonic: 2, amplitude: g2, phase: chi },
            ],
        }
    }

    /// Train of Gaussian pulses of area `area` and width `width` centred on
    /// integer times, truncated to `harmonics` Fourier modes with the mean
    /// removed: `g_m = 2 area exp(-(2π m width)²/2)`.
    pub fn pulse_train(area: f64, width: f64, harmonics: u32) -> Self {
        Self {
            modes: (1..=harmonics)
                .map(|m| DriveMode {
                    harmonic: m,
                    amplitude: 2.0 * area * (-(TAU * m as f64 * width).powi(2) / 2.0).exp(),
                    phase: 0.0,
                })
                .collect(),
        }
    }

    /// `count` equal-amplitude harmonics with zero phases.
    pub fn comb(amplitude: f64, count: u32) -> Self {
        Self {
            modes: (1..=count).map(|m| DriveMode { harmonic: m, amplitude, phase: 0.0 }).collect(),
        }
    }

    /// Identically zero drive, kept as a single zero-amplitude mode.
    pub fn zero() -> Self {
        Self { modes: vec![DriveMode { harmonic: 1, amplitude: 0.0, phase: 0.0 }] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(invalid("drive", "needs at least one mode"));
        }
        for m in &self.modes {
            if m.harmonic < 1 {
                return Err(invalid("drive", "harmonic indices start at 1"));
            }
            if !m.amplitude.is_finite() || !m.phase.is_finite() {
                return Err(invalid("drive", "non-finite amplitude or phase"));
            }
        }
        Ok(())
    }

    pub fn value(&self, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| m.amplitude * (TAU * m.harmonic as f64 * t + m.phase).cos())
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.amplitude == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorParams {
    pub omega0: f64,
    pub hbar: f64,
    pub drive: DriveSpec,
    /// RK4 step.
    pub dt: f64,
    /// Spacing of stored nodes; a multiple of `dt`.
    pub sample_dt: f64,
}

impl OscillatorParams {
    pub fn new(omega0: f64, hbar: f64, drive: DriveSpec, dt: f64) -> Result<Self> {
        let p = Self { omega0, hbar, drive, dt, sample_dt: 0.1 };
        p.validate()?;
        Ok(p)
    }

    /// Chaotic default: pulse train of area 0.6 and width 0.01 (40 harmonics),
    /// `ω₀ = 1`, `ħ = 1e-5`, `dt = 1e-3`.
    pub fn default_chaotic() -> Self {
        Self {
            omega0: 1.0,
            hbar: 1e-5,
            drive: DriveSpec::pulse_train(0.6, 0.01, 40),
            dt: 1e-3,
            sample_dt: 0.1,
        }
    }

    pub fn with_sample_dt(mut self, sample_dt: f64) -> Self {
        self.sample_dt = sample_dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(invalid("hbar", "must be positive"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        if !self.omega0.is_finite() {
            return Err(invalid("omega0", "must be finite"));
        }
        let ratio = self.sample_dt / self.dt;
        if !(ratio >= 1.0 - 1e-9) || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(invalid("sample_dt", format!("{} is not a multiple of dt = {}", self.sample_dt, self.dt)));
        }
        self.drive.validate()
    }

    pub(crate) fn sample_every(&self) -> usize {
        (self.sample_dt / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PDensityKind {
    /// Isotropic Gaussian about `center` with `<|α - center|²> = width`.
    GaussianRing { center: Complex64, width: f64 },
    /// `𝒫(I) = exp(-I/Δ)/(πΔ)` about the origin.
    Exponential { width: f64 },
    /// Single initial point.
    Delta { center: Complex64 },
}

/// Glauber P-density of initial points plus sampling controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PDensitySpec {
    pub kind: PDensityKind,
    pub n_samples: usize,
    pub seed: u64,
}

impl PDensitySpec {
    pub fn new(kind: PDensityKind, n_samples: usize, seed: u64) -> Result<Self> {
        let s = Self { kind, n_samples, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PDensityKind::GaussianRing { width, center } => {
                if !(width > 0.0) || !width.is_finite() || !center.re.is_finite() || !center.im.is_finite() {
                    return Err(invalid("P.width", "must be positive and finite"));
                }
            }
            PDensityKind::Exponential { width } => {
                if !(width > 0.0) || !width.is_finite() {
                    return Err(invalid("P.width", "must be positive and finite"));
                }
            }
            PDensityKind::Delta { center } => {
                if !center.re.is_finite() || !center.im.is_finite() {
                    return Err(invalid("P.center", "must be finite"));
                }
            }
        }
        if self.n_samples == 0 {
            return Err(invalid("n_samples", "must be positive"));
        }
        Ok(())
    }

    pub fn center(&self) -> Complex64 {
        match self.kind {
            PDensityKind::GaussianRing { center, .. } | PDensityKind::Delta { center } => center,
            PDensityKind::Exponential { .. } => Complex64::new(0.0, 0.0),
        }
    }

    /// Initial point `i`, drawn from its own counter-based substream so that
    /// samples do not depend on evaluation order.
    pub fn sample(&self, i: usize) -> Complex64 {
        let width = match self.kind {
            PDensityKind::GaussianRing { width, .. } | PDensityKind::Exponential { width } => width,
            PDensityKind::Delta { center } => return center,
        };
        let mut rng = substream(self.seed, i as u64);
        let s = (width / 2.0).sqrt();
        let x: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = StandardNormal.sample(&mut rng);
        self.center() + Complex64::new(s * x, s * y)
    }

    pub fn samples(&self) -> Vec<Complex64> {
        (0..self.n_samples).map(|i| self.sample(i)).collect()
    }
}

/// Counter-based generator for item `index` of a run seeded with `seed`.
pub(crate) fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
