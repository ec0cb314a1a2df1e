//! Reductions shared by the experiment runner and the acceptance checks:
//! rate fits on standard windows, delay times, plateaus, and the
//! comparisons between quantum, classical and semiclassical curves.

use crate::error::{Error, Result};
use crate::kicked_rotor::EchoRecord;
use crate::metrics::{
    decomposition_check, first_crossing, fit_exp_rate, plateau, saturation_estimates, EchoObservables, ExpFit,
    Saturation,
};

/// Reference slopes drawn on decay plots: `ln(K/2)` at K = 10 and the
/// correlation decay rate of the kicked rotor.
pub const REFERENCE_SLOPES: [f64; 2] = [1.61, 1.1];

#[derive(Debug, Clone, PartialEq)]
pub struct KrEchoAnalysis {
    pub observables: EchoObservables,
    pub saturation: Saturation,
    pub allegiance_fit: ExpFit,
    /// First time the averaged fidelity drops below 1/2.
    pub delay: Option<f64>,
    /// `τ_c ln M` with `M` the number of cells in the mixture.
    pub delay_predicted_cells: f64,
    /// `τ_c ln(area/ħ)`.
    pub delay_predicted_area: f64,
    pub avg_fit_after_delay: Option<ExpFit>,
    pub plateau_avg: Option<f64>,
    pub plateau_alleg: Option<f64>,
    pub max_decomposition_residual: f64,
}

/// Fits and plateaus of one kicked-rotor echo run.
pub fn analyze_kr_echo(
    record: &EchoRecord,
    n: usize,
    hbar: f64,
    mixture_area: f64,
    window: (f64, f64),
    plateau_from: f64,
) -> Result<KrEchoAnalysis> {
    let obs = EchoObservables::from_record(record)?;
    let sat = saturation_estimates(n, mixture_area, hbar)?;
    let allegiance_fit = fit_exp_rate(&obs.times, &obs.allegiance, window, Some(sat.sat_alleg))?;
    let tau_c = 1.0 / allegiance_fit.rate;
    let delay = first_crossing(&obs.times, &obs.avg_fidelity, 0.5);
    let avg_fit_after_delay = delay.and_then(|td| {
        fit_exp_rate(&obs.times, &obs.avg_fidelity, (td.ceil(), plateau_from), Some(sat.sat_avg)).ok()
    });
    let max_decomposition_residual = decomposition_check(&record.weights, &record.amplitudes)?
        .into_iter()
        .fold(0.0f64, |m, v: f64| m.max(v.abs()));
    Ok(KrEchoAnalysis {
        plateau_avg: plateau(&obs.times, &obs.avg_fidelity, plateau_from),
        plateau_alleg: plateau(&obs.times, &obs.allegiance, plateau_from),
        observables: obs,
        saturation: sat,
        allegiance_fit,
        delay,
        delay_predicted_cells: tau_c * (sat.cells as f64).ln(),
        delay_predicted_area: tau_c * (mixture_area / hbar).ln(),
        avg_fit_after_delay,
        max_decomposition_residual,
    })
}

/// Largest `|a - b|` over the times where both curves exceed `floor`.
pub fn max_abs_difference_above(a: &[f64], b: &[f64], floor: f64) -> Option<f64> {
    a.iter()
        .zip(b)
        .filter(|(x, y)| **x > floor && **y > floor)
        .map(|(x, y)| (x - y).abs())
        .reduce(f64::max)
}

/// Exponential rate from the onset of decay (the node before the curve first
/// drops below 1/2) to the last node above `floor`.
pub fn onset_fit(times: &[f64], curve: &[f64], floor: f64) -> Result<ExpFit> {
    let on = curve
        .iter()
        .position(|&v| v < 0.5)
        .ok_or_else(|| Error::Fit("curve never drops below 1/2".into()))?;
    let start = on.saturating_sub(1);
    let end = curve[start..]
        .iter()
        .position(|&v| v < floor)
        .map_or(curve.len() - 1, |i| start + i - 1);
    fit_exp_rate(times, curve, (times[start], times[end]), None)
}

/// Deviation of a decay curve from a prediction over the prediction's first
/// decade (the nodes where it is at least 0.1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecadeComparison {
    pub t_end: f64,
    pub max_abs: f64,
    pub max_rel: f64,
}

pub fn first_decade_comparison(times: &[f64], curve: &[f64], prediction: &[f64]) -> DecadeComparison {
    let mut out = DecadeComparison { t_end: times[0], max_abs: 0.0, max_rel: 0.0 };
    for i in 0..times.len() {
        if prediction[i] < 0.1 {
            break;
        }
        let d = (curve[i] - prediction[i]).abs();
        out.t_end = times[i];
        out.max_abs = out.max_abs.max(d);
        out.max_rel = out.max_rel.max(d / prediction[i]);
    }
    out
}

/// Largest relative deviation of `approx` from `reference` over the nodes
/// where both exceed 1/2, with the number of such nodes.
pub fn relative_agreement_above_half(approx: &[f64], reference: &[f64]) -> (f64, usize) {
    approx
        .iter()
        .zip(reference)
        .filter(|(a, r)| **a > 0.5 && **r > 0.5)
        .fold((0.0, 0), |(m, n), (a, r)| (m.max((a - r).abs() / r), n + 1))
}
