//! Echo observables built from fidelity amplitudes: allegiance, averaged and
//! mixed-state fidelity, the decomposition identity, saturation levels and
//! exponential-rate fits.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::io::Write;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::kicked_rotor::EchoRecord;

/// Gram-matrix off-diagonal magnitude below which the mixed-state fidelity
/// is certified.
pub const ORTHOGONALITY_THRESHOLD: f64 = 1e-3;

/// Area of one quantum cell in units of ħ.
pub const CELL_AREA_OVER_HBAR: f64 = TAU;

fn check_shape(p: &[f64], f: &[Vec<Complex64>]) -> Result<usize> {
    if p.len() != f.len() {
        return Err(Error::ShapeMismatch(format!("{} weights for {} amplitude rows", p.len(), f.len())));
    }
    let nt = f.first().map_or(0, |r| r.len());
    if f.iter().any(|r| r.len() != nt) {
        return Err(Error::ShapeMismatch("ragged amplitude matrix".into()));
    }
    Ok(nt)
}

fn mean_amplitude(p: &[f64], f: &[Vec<Complex64>], t: usize) -> Complex64 {
    p.iter().zip(f).map(|(w, row)| row[t] * *w).sum()
}

/// `|Σ_k p_k f_k(t)|²`.
pub fn allegiance(p: &[f64], f: &[Vec<Complex64>]) -> Result<Vec<f64>> {
    let nt = check_shape(p, f)?;
    Ok((0..nt).map(|t| mean_amplitude(p, f, t).norm_sqr()).collect())
}

/// `Σ_k p_k |f_k(t)|²`.
pub fn averaged_fidelity(p: &[f64], f: &[Vec<Complex64>]) -> Result<Vec<f64>> {
    let nt = check_shape(p, f)?;
    Ok((0..nt)
        .map(|t| p.iter().zip(f).map(|(w, row)| w * row[t].norm_sqr()).sum())
        .collect())
}

/// `F̄ - 𝓕 - Σ_k p_k |f_k - f̄|²`, identically zero up to rounding.
pub fn decomposition_check(p: &[f64], f: &[Vec<Complex64>]) -> Result<Vec<f64>> {
    let nt = check_shape(p, f)?;
    let avg = averaged_fidelity(p, f)?;
    let all = allegiance(p, f)?;
    Ok((0..nt)
        .map(|t| {
            let mean = mean_amplitude(p, f, t);
            let fluct: f64 = p.iter().zip(f).map(|(w, row)| w * (row[t] - mean).norm_sqr()).sum();
            avg[t] - all[t] - fluct
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedFidelity {
    pub values: Vec<f64>,
    /// `Tr ρ² = Σ p_k p_k' |<ψ_k|ψ_k'>|²`.
    pub purity: f64,
    /// Largest off-diagonal Gram magnitude.
    pub orthogonality_defect: f64,
    pub certified: bool,
}

/// `Σ p_k p_k' |g_kk'(t)|² / Tr ρ²` from the cross tensor `cross[t][k][k']`.
pub fn mixed_state_fidelity(p: &[f64], cross: &[Vec<Vec<Complex64>>], gram: &[Vec<Complex64>]) -> Result<MixedFidelity> {
    let nk = p.len();
    let square = |m: &[Vec<Complex64>]| m.len() == nk && m.iter().all(|r| r.len() == nk);
    if !square(gram) || !cross.iter().all(|c| square(c)) {
        return Err(Error::ShapeMismatch(format!("cross/gram tensors must be {nk}×{nk}")));
    }
    let quad = |m: &[Vec<Complex64>]| -> f64 {
        let mut s = 0.0;
        for (k, row) in m.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                s += p[k] * p[j] * g.norm_sqr();
            }
        }
        s
    };
    let purity = quad(gram);
    let mut defect: f64 = 0.0;
    for (k, row) in gram.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            if j != k {
                defect = defect.max(g.norm());
            }
        }
    }
    Ok(MixedFidelity {
        values: cross.iter().map(|c| quad(c) / purity).collect(),
        purity,
        orthogonality_defect: defect,
        certified: defect < ORTHOGONALITY_THRESHOLD,
    })
}

/// All echo observables on a common time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoObservables {
    pub times: Vec<f64>,
    pub allegiance: Vec<f64>,
    pub avg_fidelity: Vec<f64>,
    pub mixed: Option<MixedFidelity>,
    /// `F̄ - 𝓕`.
    pub fluct: Vec<f64>,
}

impl EchoObservables {
    pub fn from_record(rec: &EchoRecord) -> Result<Self> {
        let allegiance = allegiance(&rec.weights, &rec.amplitudes)?;
        let avg_fidelity = averaged_fidelity(&rec.weights, &rec.amplitudes)?;
        let mixed = match (&rec.cross, rec.gram()) {
            (Some(c), Some(g)) => Some(mixed_state_fidelity(&rec.weights, c, g)?),
            _ => None,
        };
        let fluct = avg_fidelity.iter().zip(&allegiance).map(|(a, b)| a - b).collect();
        Ok(Self {
            times: rec.times.iter().map(|&t| t as f64).collect(),
            allegiance,
            avg_fidelity,
            mixed,
            fluct,
        })
    }

    /// Writes `t, allegiance, avg_fidelity, mixed_fidelity, fluct`; the mixed
    /// column is `nan` when the cross tensor was not computed.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,allegiance,avg_fidelity,mixed_fidelity,fluct")?;
        for i in 0..self.times.len() {
            let mixed = self.mixed.as_ref().map_or(f64::NAN, |m| m.values[i]);
            writeln!(
                w,
                "{},{},{},{},{}",
                crate::harness::csv::fmt_f64(self.times[i]),
                crate::harness::csv::fmt_f64(self.allegiance[i]),
                crate::harness::csv::fmt_f64(self.avg_fidelity[i]),
                crate::harness::csv::fmt_f64(mixed),
                crate::harness::csv::fmt_f64(self.fluct[i]),
            )?;
        }
        Ok(())
    }
}

/// Result of a log-linear least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub rate: f64,
    pub stderr: f64,
    pub r2: f64,
    pub n_points: usize,
    pub t_first: f64,
    pub t_last: f64,
    /// Intercept of `ln(series)`.
    pub log_amplitude: f64,
}

impl ExpFit {
    /// Key-value block, one `prefix.key = value` per line.
    pub fn report(&self, prefix: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{prefix}.rate = {}", self.rate);
        let _ = writeln!(s, "{prefix}.stderr = {}", self.stderr);
        let _ = writeln!(s, "{prefix}.r2 = {}", self.r2);
        let _ = writeln!(s, "{prefix}.points = {}", self.n_points);
        let _ = writeln!(s, "{prefix}.window = {}:{}", self.t_first, self.t_last);
        s
    }
}

/// Least-squares slope of `-ln(series)` against `t` on `window`. When a
/// saturation level is given the window ends before the first point below
/// three times that level.
pub fn fit_exp_rate(times: &[f64], series: &[f64], window: (f64, f64), saturation: Option<f64>) -> Result<ExpFit> {
    if times.len() != series.len() {
        return Err(Error::ShapeMismatch(format!("{} times for {} values", times.len(), series.len())));
    }
    let (t1, t2) = window;
    if !(t2 >= t1) {
        return Err(invalid("window", format!("empty window {t1}:{t2}")));
    }
    let floor = saturation.map(|s| 3.0 * s);
    let mut pts = Vec::new();
    for (&t, &y) in times.iter().zip(series) {
        if t < t1 || t > t2 {
            continue;
        }
        if let Some(fl) = floor {
            if y < fl {
                break;
            }
        }
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Fit(format!("non-positive value {y} at t = {t}")));
        }
        pts.push((t, y.ln()));
    }
    if pts.len() < 4 {
        return Err(Error::Fit(format!("only {} usable points in window {t1}:{t2}", pts.len())));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (n - 2.0) / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(ExpFit {
        rate: -slope,
        stderr,
        r2,
        n_points: pts.len(),
        t_first: pts[0].0,
        t_last: pts[pts.len() - 1].0,
        log_amplitude: intercept,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation {
    /// `1/N`, the plateau of the averaged fidelity.
    pub sat_avg: f64,
    /// `1/(N M)`, the plateau of the allegiance.
    pub sat_alleg: f64,
    /// Number of quantum cells `M` covered by the mixture.
    pub cells: u64,
}

/// Plateau levels for a mixture covering `mixture_area` on an `N`-state torus.
pub fn saturation_estimates(n: usize, mixture_area: f64, hbar: f64) -> Result<Saturation> {
    if n == 0 {
        return Err(invalid("N", "must be positive"));
    }
    if !(hbar > 0.0) {
        return Err(invalid("hbar", "must be positive"));
    }
    let cell = CELL_AREA_OVER_HBAR * hbar;
    let ratio = mixture_area / cell;
    if !(ratio >= 1.0 - 1e-9) {
        return Err(invalid("mixture_area", format!("{mixture_area} is smaller than one cell ({cell})")));
    }
    let cells = (ratio.round() as u64).max(1);
    Ok(Saturation { sat_avg: 1.0 / n as f64, sat_alleg: 1.0 / (n as f64 * cells as f64), cells })
}

/// First time the series drops below `level`, linearly interpolated in `ln`.
pub fn first_crossing(times: &[f64], series: &[f64], level: f64) -> Option<f64> {
    for i in 1..series.len().min(times.len()) {
        if series[i] < level && series[i - 1] >= level {
            let (y0, y1) = (series[i - 1].ln(), series[i].max(f64::MIN_POSITIVE).ln());
            let frac = (y0 - level.ln()) / (y0 - y1);
            return Some(times[i - 1] + frac * (times[i] - times[i - 1]));
        }
    }
    None
}

/// Mean over the samples with `t >= t_from`.
pub fn plateau(times: &[f64], series: &[f64], t_from: f64) -> Option<f64> {
    let vals: Vec<f64> = times.iter().zip(series).filter(|(t, _)| **t >= t_from).map(|(_, v)| *v).collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} abscissae for {} values", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Fit("need at least 3 points for a line".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(LinearFit { slope, intercept, r2 })
}
