//! Torus-quantized Hilbert space: grids, wavefunctions, Gaussian packets,
//! inner products and the position/momentum transform.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

/// N-point quantum torus with `hbar = 2π/N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    n: usize,
    hbar: f64,
}

/// Builds the torus grid for Hilbert-space dimension `n`.
pub fn make_grid(n: usize) -> Result<TorusGrid> {
    if n < 2 {
        return Err(invalid("N", format!("need N >= 2, got {n}")));
    }
    Ok(TorusGrid { n, hbar: TAU / n as f64 })
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        make_grid(n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Index of the p = 0 momentum node.
    pub fn zero_momentum_index(&self) -> usize {
        self.n / 2
    }

    pub fn theta(&self, j: usize) -> f64 {
        TAU * j as f64 / self.n as f64
    }

    /// `p_n = hbar (n - N/2)`.
    pub fn momentum(&self, n: usize) -> f64 {
        self.hbar * (n as f64 - (self.n / 2) as f64)
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.theta(j)).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.momentum(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Position,
    Momentum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: TorusGrid,
    amplitudes: Vec<Complex64>,
    basis: Basis,
}

impl WaveFunction {
    pub fn new(grid: TorusGrid, amplitudes: Vec<Complex64>, basis: Basis) -> Result<Self> {
        if amplitudes.len() != grid.n {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for an N = {} grid",
                amplitudes.len(),
                grid.n
            )));
        }
        Ok(Self { grid, amplitudes, basis })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm. Fails on the zero vector.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NotNormalized { norm_sq: n });
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            amplitudes: self.amplitudes.iter().map(|a| a * c).collect(),
            basis: self.basis,
        }
    }

    /// Circular mean of θ, `arg <e^{iθ}>`, computed in the position basis.
    pub fn mean_angle(&self) -> f64 {
        let pos = transform(self, Basis::Position);
        let z: Complex64 = pos
            .amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| Complex64::from_polar(a.norm_sqr(), self.grid.theta(j)))
            .sum();
        z.arg().rem_euclid(TAU)
    }

    /// Mean and standard deviation of momentum over the grid nodes.
    pub fn momentum_moments(&self) -> (f64, f64) {
        let mom = transform(self, Basis::Momentum);
        let w: f64 = mom.norm_sqr();
        let mean: f64 = mom
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| a.norm_sqr() * self.grid.momentum(k))
            .sum::<f64>()
            / w;
        let var: f64 = mom
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| a.norm_sqr() * (self.grid.momentum(k) - mean).powi(2))
            .sum::<f64>()
            / w;
        (mean, var.sqrt())
    }
}

/// `Σ_j conj(ψ_j) φ_j`.
pub fn inner_product(psi: &WaveFunction, phi: &WaveFunction) -> Result<Complex64> {
    if psi.grid != phi.grid {
        return Err(Error::GridMismatch(format!("N = {} vs N = {}", psi.grid.n, phi.grid.n)));
    }
    if psi.basis != phi.basis {
        return Err(Error::GridMismatch(format!("bases {:?} vs {:?}", psi.basis, phi.basis)));
    }
    Ok(dot(&psi.amplitudes, &phi.amplitudes))
}

#[inline]
pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Unitary FFT pair on a fixed grid, with the modulation that places the
/// momentum origin at index `N/2`.
#[derive(Clone)]
pub struct Transformer {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    modulation: Vec<Complex64>,
    scale: f64,
}

impl std::fmt::Debug for Transformer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transformer").field("n", &self.n).finish()
    }
}

impl Transformer {
    pub fn new(grid: &TorusGrid) -> Self {
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let m0 = (n / 2) as f64;
        let modulation = (0..n)
            .map(|j| Complex64::from_polar(1.0, TAU * m0 * j as f64 / n as f64))
            .collect();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            modulation,
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    /// In place: position amplitudes → momentum amplitudes.
    pub fn to_momentum(&self, data: &mut [Complex64]) {
        for (a, m) in data.iter_mut().zip(&self.modulation) {
            *a *= m;
        }
        self.forward.process(data);
        data.iter_mut().for_each(|a| *a *= self.scale);
    }

    /// In place: momentum amplitudes → position amplitudes.
    pub fn to_position(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        for (a, m) in data.iter_mut().zip(&self.modulation) {
            *a *= m.conj() * self.scale;
        }
    }
}

/// Changes basis with the unitary DFT
/// `ψ̃_n = N^{-1/2} Σ_j ψ_j exp(-i p_n θ_j / ħ)`.
pub fn transform(psi: &WaveFunction, target: Basis) -> WaveFunction {
    if psi.basis == target {
        return psi.clone();
    }
    let tr = Transformer::new(&psi.grid);
    let mut out = psi.amplitudes.clone();
    match target {
        Basis::Momentum => tr.to_momentum(&mut out),
        Basis::Position => tr.to_position(&mut out),
    }
    WaveFunction { grid: psi.grid, amplitudes: out, basis: target }
}

/// Periodic Gaussian packet centred at `(theta0, p0)`, position basis.
pub fn gaussian_packet(grid: &TorusGrid, theta0: f64, p0: f64, sigma_theta: f64) -> Result<WaveFunction> {
    if !(sigma_theta > 0.0) || !sigma_theta.is_finite() {
        return Err(invalid("sigma_theta", format!("must be positive, got {sigma_theta}")));
    }
    if sigma_theta > PI / 4.0 {
        return Err(invalid(
            "sigma_theta",
            format!("{sigma_theta} exceeds π/4; periodic images would overlap"),
        ));
    }
    if !theta0.is_finite() || !p0.is_finite() {
        return Err(invalid("packet center", "must be finite"));
    }
    let n = grid.n;
    let hbar = grid.hbar;
    let inv4s2 = 1.0 / (4.0 * sigma_theta * sigma_theta);
    let mut amps = vec![Complex64::new(0.0, 0.0); n];
    let theta0 = theta0.rem_euclid(TAU);

    let mut add_winding = |w: i64| -> f64 {
        let shift = TAU * w as f64 - theta0;
        let mut max_mag: f64 = 0.0;
        for (j, a) in amps.iter_mut().enumerate() {
            let x = grid.theta(j) + shift;
            let mag = (-x * x * inv4s2).exp();
            max_mag = max_mag.max(mag);
            if mag > 0.0 {
                *a += Complex64::from_polar(mag, p0 * x / hbar);
            }
        }
        max_mag
    };
    add_winding(0);
    for dir in [1i64, -1] {
        let mut w = dir;
        while add_winding(w) >= 1e-16 {
            w += dir;
        }
    }
    let mut psi = WaveFunction { grid: *grid, amplitudes: amps, basis: Basis::Position };
    psi.normalize()?;
    Ok(psi)
}

/// Default packet width `sqrt(ħ/2)`.
pub fn default_sigma(grid: &TorusGrid) -> f64 {
    (grid.hbar / 2.0).sqrt()
}

/// Axis-aligned rectangle in scaled coordinates `(θ/2π, p/2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub theta_min: f64,
    pub theta_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Region {
    pub fn new(theta_min: f64, theta_max: f64, p_min: f64, p_max: f64) -> Result<Self> {
        let r = Self { theta_min, theta_max, p_min, p_max };
        r.validate()?;
        Ok(r)
    }

    /// The region `0.2 ≤ θ/2π ≤ 0.3, 0.3 ≤ p/2π ≤ 0.4`.
    pub fn fig1() -> Self {
        Self { theta_min: 0.2, theta_max: 0.3, p_min: 0.3, p_max: 0.4 }
    }

    /// The full torus.
    pub fn torus() -> Self {
        Self { theta_min: 0.0, theta_max: 1.0, p_min: -0.5, p_max: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.theta_min, self.theta_max, self.p_min, self.p_max]
            .iter()
            .all(|v| v.is_finite())
            && self.theta_max > self.theta_min
            && self.p_max > self.p_min;
        if !ok {
            return Err(invalid("region", format!("empty or non-finite rectangle {self:?}")));
        }
        Ok(())
    }

    /// Area in the unscaled `(θ, p)` plane.
    pub fn area(&self) -> f64 {
        TAU * TAU * (self.theta_max - self.theta_min) * (self.p_max - self.p_min)
    }

    pub fn contains(&self, theta: f64, p: f64) -> bool {
        let (x, y) = (theta / TAU, p / TAU);
        let tol = 1e-12;
        x >= self.theta_min - tol
            && x <= self.theta_max + tol
            && y >= self.p_min - tol
            && y <= self.p_max + tol
    }

    /// Uniform sample `(θ, p)` inside the region.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let x = self.theta_min + (self.theta_max - self.theta_min) * rng.random::<f64>();
        let y = self.p_min + (self.p_max - self.p_min) * rng.random::<f64>();
        (TAU * x, TAU * y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketEntry {
    pub weight: f64,
    pub theta0: f64,
    pub p0: f64,
    pub sigma_theta: f64,
}

/// Incoherent mixture of Gaussian packets.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub entries: Vec<PacketEntry>,
    pub region: Region,
    pub seed: u64,
}

impl MixtureSpec {
    /// `count` equal-weight packets with centres uniform in `region`.
    pub fn random(region: Region, count: usize, sigma_theta: f64, seed: u64) -> Result<Self> {
        region.validate()?;
        if count == 0 {
            return Err(invalid("packets", "need at least one packet"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = 1.0 / count as f64;
        let entries = (0..count)
            .map(|_| {
                let (theta0, p0) = region.sample(&mut rng);
                PacketEntry { weight: w, theta0, p0, sigma_theta }
            })
            .collect();
        let m = Self { entries, region, seed };
        m.validate()?;
        Ok(m)
    }

    /// Deterministic `nx × ny` lattice of cell centres inside `region`.
    pub fn lattice(region: Region, nx: usize, ny: usize, sigma_theta: f64) -> Result<Self> {
        region.validate()?;
        if nx == 0 || ny == 0 {
            return Err(invalid("packets", "lattice needs nx, ny >= 1"));
        }
        let w = 1.0 / (nx * ny) as f64;
        let mut entries = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for k in 0..ny {
                let x = region.theta_min + (region.theta_max - region.theta_min) * (i as f64 + 0.5) / nx as f64;
                let y = region.p_min + (region.p_max - region.p_min) * (k as f64 + 0.5) / ny as f64;
                entries.push(PacketEntry { weight: w, theta0: TAU * x, p0: TAU * y, sigma_theta });
            }
        }
        let m = Self { entries, region, seed: 0 };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(invalid("mixture", "no entries"));
        }
        let mut total = 0.0;
        for e in &self.entries {
            if !(e.weight > 0.0) {
                return Err(invalid("mixture", format!("non-positive weight {}", e.weight)));
            }
            if !self.region.contains(e.theta0, e.p0) {
                return Err(invalid(
                    "mixture",
                    format!("centre ({}, {}) outside region", e.theta0, e.p0),
                ));
            }
            total += e.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("mixture", format!("weights sum to {total}")));
        }
        Ok(())
    }

    /// Builds every packet on `grid`.
    pub fn packets(&self, grid: &TorusGrid) -> Result<Vec<WaveFunction>> {
        self.entries
            .iter()
            .map(|e| gaussian_packet(grid, e.theta0, e.p0, e.sigma_theta))
            .collect()
    }
}
