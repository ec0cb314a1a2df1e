//! Conversions between an isotropic Glauber P-density `𝒫(I)` centred at the
//! origin and the Fock weights of the same incoherent mixture,
//! `ρ_n = (π/n!) ∫ 𝒫(I) e^{-I/ħ} (I/ħ)ⁿ dI`.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use super::{PDensityKind, PDensitySpec};
use crate::error::{invalid, Error, Result};
use crate::harness::csv::fmt_f64;

/// Mass beyond `n_max` that `p_to_fock` refuses to drop.
pub const TAIL_LIMIT: f64 = 1e-6;
/// Largest Fock-weight round-trip residual accepted by `fock_to_p`.
pub const ROUND_TRIP_LIMIT: f64 = 1e-4;
const MAX_PADE_ORDER: usize = 10;
const QUAD_STEP: f64 = 0.02;

/// Diagonal density-matrix weights in the Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FockWeights {
    pub rho: Vec<f64>,
}

impl FockWeights {
    /// Validates the normalization and clamps rounding-level negatives.
    pub fn new(mut rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(invalid("rho", "empty"));
        }
        if let Some(v) = rho.iter().find(|v| !v.is_finite() || **v < -1e-12) {
            return Err(invalid("rho", format!("invalid weight {v}")));
        }
        rho.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = rho.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(invalid("rho", format!("weights sum to {total}")));
        }
        Ok(Self { rho })
    }

    pub fn n_max(&self) -> usize {
        self.rho.len() - 1
    }

    /// Writes `n, rho_n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,rho_n")?;
        for (n, r) in self.rho.iter().enumerate() {
            writeln!(w, "{n},{}", fmt_f64(*r))?;
        }
        Ok(())
    }
}

/// Isotropic P-density about the origin, as a function of `I = |α|²`.
pub trait RadialDensity {
    /// Regular part of `𝒫(I)`.
    fn density(&self, action: f64) -> f64;
    /// Probability concentrated at `α = 0`.
    fn point_mass(&self) -> f64 {
        0.0
    }
}

impl RadialDensity for PDensitySpec {
    fn density(&self, action: f64) -> f64 {
        match self.kind {
            PDensityKind::GaussianRing { width, .. } | PDensityKind::Exponential { width } => {
                (-action / width).exp() / (PI * width)
            }
            PDensityKind::Delta { .. } => 0.0,
        }
    }

    fn point_mass(&self) -> f64 {
        match self.kind {
            PDensityKind::Delta { .. } => 1.0,
            _ => 0.0,
        }
    }
}

/// `ρ_n` for `n = 0..=n_max` by Simpson quadrature in `u = I/ħ`.
pub fn p_to_fock<P: RadialDensity + ?Sized>(p: &P, hbar: f64, n_max: usize) -> Result<FockWeights> {
    if !(hbar > 0.0) {
        return Err(invalid("hbar", "must be positive"));
    }
    let u_end = n_max as f64 + 12.0 * (n_max as f64 + 1.0).sqrt() + 60.0;
    let n_pts = ((u_end / QUAD_STEP).ceil() as usize + 1) | 1;
    let dens: Vec<f64> = (0..n_pts).map(|i| p.density(hbar * i as f64 * QUAD_STEP)).collect();
    let mut ln_fact = 0.0;
    let mut rho = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        // The kernel e^{-u} uⁿ/n! is negligible outside n ± 12√n ± 30.
        let spread = 12.0 * (n as f64).sqrt() + 30.0;
        let lo = (((n as f64 - spread) / QUAD_STEP).floor().max(0.0)) as usize;
        let mut hi = (((n as f64 + spread) / QUAD_STEP).ceil() as usize).min(n_pts - 1);
        if (hi - lo) % 2 == 1 {
            hi -= 1;
        }
        let mut acc = 0.0;
        for i in lo..=hi {
            let u = i as f64 * QUAD_STEP;
            let kernel = if u == 0.0 {
                if n == 0 { 1.0 } else { 0.0 }
            } else {
                (-u + n as f64 * u.ln() - ln_fact).exp()
            };
            let w = if i == lo || i == hi { 1.0 } else if (i - lo) % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * kernel * dens[i];
        }
        rho.push(PI * hbar * acc * QUAD_STEP / 3.0);
    }
    rho[0] += p.point_mass();
    let total: f64 = rho.iter().sum();
    let tail = (1.0 - total).abs();
    if tail > TAIL_LIMIT {
        return Err(Error::TailOverflow { tail, n_max });
    }
    rho.iter_mut().for_each(|r| *r /= total);
    // A reconstructed (signed) P gives weights that may dip slightly below
    // zero; anything within the tail budget is numerical noise.
    if let Some(v) = rho.iter().find(|v| **v < -TAIL_LIMIT) {
        return Err(invalid("rho", format!("P density maps to a negative weight {v}")));
    }
    rho.iter_mut().for_each(|r| *r = r.max(0.0));
    FockWeights::new(rho)
}

/// `ρ_n ∝ exp(-(ħω₀ n + ħ² n²)/T)`.
pub fn thermal_fock_weights(temperature: f64, omega0: f64, hbar: f64, n_max: usize) -> Result<FockWeights> {
    if !(temperature > 0.0) {
        return Err(invalid("temperature", "must be positive"));
    }
    if !(hbar > 0.0) {
        return Err(invalid("hbar", "must be positive"));
    }
    let log_w = |n: f64| -(hbar * omega0 * n + hbar * hbar * n * n) / temperature;
    let head: Vec<f64> = (0..=n_max).map(|n| log_w(n as f64)).collect();
    let top = head.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let mut weights: Vec<f64> = head.iter().map(|v| (v - top).exp()).collect();
    let kept: f64 = weights.iter().sum();
    let mut tail = 0.0;
    let mut n = n_max + 1;
    loop {
        let w = (log_w(n as f64) - top).exp();
        tail += w;
        if w < 1e-20 * kept || n > n_max + 10_000_000 {
            break;
        }
        n += 1;
    }
    let frac = tail / (kept + tail);
    if frac > 1e-8 {
        return Err(Error::TailOverflow { tail: frac, n_max });
    }
    weights.iter_mut().for_each(|w| *w /= kept);
    FockWeights::new(weights)
}

/// One term `coefficient · exp(-rate · I)` of a reconstructed density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coefficient: Complex64,
    pub rate: Complex64,
}

/// Reconstructed P-density: a point mass at the origin plus a (real) sum of
/// exponentials, evaluated on the requested grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GlauberInversion {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub point_mass: f64,
    pub terms: Vec<ExpTerm>,
    /// Largest `|ρ'_n - ρ_n|` of the reconstruction.
    pub residual: f64,
    /// Numerator and denominator degrees of the rational continuation.
    pub order: (usize, usize),
}

impl RadialDensity for GlauberInversion {
    fn density(&self, action: f64) -> f64 {
        self.terms.iter().map(|t| (t.coefficient * (-t.rate * action).exp()).re).sum()
    }

    fn point_mass(&self) -> f64 {
        self.point_mass
    }
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn poly_eval(c: &[f64], z: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &v| acc * z + v)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect()
}

/// Roots of `Σ c_k z^k` by Durand-Kerner iteration with Newton polishing.
fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let deg = c.len() - 1;
    let lead = c[deg];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let radius = 1.0 + monic[..deg].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32 + 1) * radius).collect();
    for _ in 0..2000 {
        let mut delta: f64 = 0.0;
        for i in 0..deg {
            let num = poly_eval(&monic, z[i]);
            let den: Complex64 = (0..deg).filter(|&j| j != i).map(|j| z[i] - z[j]).product();
            let step = num / den;
            z[i] -= step;
            delta = delta.max(step.norm() / z[i].norm().max(1e-300));
        }
        if delta < 1e-15 {
            break;
        }
    }
    let d = poly_deriv(&monic);
    for zi in &mut z {
        for _ in 0..3 {
            let step = poly_eval(&monic, *zi) / poly_eval(&d, *zi);
            if step.is_finite() {
                *zi -= step;
            }
        }
    }
    z
}

struct Candidate {
    point_mass: f64,
    poles: Vec<(Complex64, Complex64)>,
    residual: f64,
    order: (usize, usize),
}

/// `[l/m]` Padé continuation of `Σ ρ_n zⁿ`, split into a constant and simple
/// poles, with the sup-norm mismatch of the Fock weights it reproduces.
fn pade_candidate(rho: &[f64], l: usize, m: usize) -> Option<Candidate> {
    let c = |k: isize| if k >= 0 && (k as usize) < rho.len() { rho[k as usize] } else { 0.0 };
    let mut b = vec![1.0];
    if m > 0 {
        let mat: Vec<Vec<f64>> = (1..=m)
            .map(|i| (1..=m).map(|j| c(l as isize + i as isize - j as isize)).collect())
            .collect();
        let rhs: Vec<f64> = (1..=m).map(|i| -c((l + i) as isize)).collect();
        b.extend(solve(mat, rhs)?);
    }
    let a: Vec<f64> = (0..=l)
        .map(|i| (0..=i.min(m)).map(|j| b[j] * c(i as isize - j as isize)).sum())
        .collect();
    let mut deg = m;
    let bscale = b.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    while deg > 0 && b[deg].abs() < 1e-12 * bscale {
        deg -= 1;
    }
    if deg < m || a.len() > deg + 1 {
        // A degenerate denominator means a lower order already fits.
        if a.len() > deg + 1 && a[deg + 1..].iter().any(|v| v.abs() > 1e-14) {
            return None;
        }
    }
    let b = &b[..=deg];
    let (q, r): (f64, Vec<f64>) = if a.len() == deg + 1 {
        let q = a[deg] / b[deg];
        (q, (0..deg).map(|k| a[k] - q * b[k]).collect())
    } else {
        let mut r = a.clone();
        r.resize(deg, 0.0);
        (0.0, r)
    };
    let mut poles = Vec::new();
    if deg > 0 {
        let db = poly_deriv(b);
        for z in poly_roots(b) {
            let res = poly_eval(&r, z) / poly_eval(&db, z);
            if !res.is_finite() || !(z.re > 0.0) {
                return None;
            }
            poles.push((z, res));
        }
    }
    let mut residual: f64 = 0.0;
    for (n, &target) in rho.iter().enumerate() {
        let mut v = if n == 0 { Complex64::new(q, 0.0) } else { Complex64::new(0.0, 0.0) };
        for &(z, res) in &poles {
            v -= res / z.powu(n as u32 + 1);
        }
        residual = residual.max((v.re - target).abs() + v.im.abs());
    }
    if !residual.is_finite() {
        return None;
    }
    Some(Candidate { point_mass: q, poles, residual, order: (a.len() - 1, deg) })
}

/// Reconstructs `𝒫(I)` from Fock weights. The generating function
/// `Σ ρ_n zⁿ`, whose value at `z = 1 - iħk` is the Fourier transform of
/// `π𝒫`, is continued off its disc of convergence by a Padé approximant;
/// the `k`-integral is then done exactly by residues, one decaying
/// exponential per pole. Fails when no rational continuation reproduces the
/// weights to [`ROUND_TRIP_LIMIT`].
pub fn fock_to_p(rho: &FockWeights, hbar: f64, grid: &[f64]) -> Result<GlauberInversion> {
    if !(hbar > 0.0) {
        return Err(invalid("hbar", "must be positive"));
    }
    let mut best: Option<Candidate> = None;
    'orders: for m in 0..=MAX_PADE_ORDER {
        for l in [m.saturating_sub(1), m] {
            if m == 0 && l == 0 && rho.rho.len() > 1 && rho.rho[1..].iter().any(|v| *v != 0.0) {
                continue;
            }
            if let Some(c) = pade_candidate(&rho.rho, l, m) {
                let better = best.as_ref().is_none_or(|b| c.residual < b.residual);
                let done = c.residual < 1e-13;
                if better {
                    best = Some(c);
                }
                if done {
                    break 'orders;
                }
            }
        }
    }
    let best = best.ok_or(Error::IllConditioned { residual: f64::INFINITY })?;
    if best.residual > ROUND_TRIP_LIMIT {
        return Err(Error::IllConditioned { residual: best.residual });
    }
    // A/(z - z_j) at z = 1 - iħk  ↔  -(A/πħ) exp(-(z_j - 1) I/ħ).
    let terms: Vec<ExpTerm> = best
        .poles
        .iter()
        .map(|&(z, res)| ExpTerm { coefficient: -res / (PI * hbar), rate: (z - 1.0) / hbar })
        .collect();
    let mut inv = GlauberInversion {
        grid: grid.to_vec(),
        values: Vec::new(),
        point_mass: best.point_mass,
        terms,
        residual: best.residual,
        order: best.order,
    };
    inv.values = grid.iter().map(|&i| inv.density(i)).collect();
    Ok(inv)
}
