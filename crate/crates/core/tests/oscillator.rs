use std::f64::consts::TAU;

use echo_lab::oscillator::correlation::MIN_SAMPLES;
use echo_lab::oscillator::{
    action_cumulant, allegiance_classical, early_time_fidelity, fgr_prediction, integrate_orbit,
    integrate_orbit_unchecked, phase_correlation, semiclassical_amplitude, semiclassical_amplitude_with, DriveMode,
    DriveSpec, OrbitEnsemble, OscillatorParams, PDensityKind, PDensitySpec,
};
use echo_lab::Error;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn free_params() -> OscillatorParams {
    OscillatorParams::new(1.0, 1e-5, DriveSpec::zero(), 1e-3).unwrap()
}

fn ring(width: f64, n: usize, seed: u64) -> PDensitySpec {
    PDensitySpec::new(PDensityKind::GaussianRing { center: c(3.0, 0.0), width }, n, seed).unwrap()
}

#[test]
fn undriven_orbit_rotates_uniformly() {
    let a0 = c(1.2, 0.5);
    let tr = integrate_orbit(a0, &free_params(), 20.0).unwrap();
    let i0 = a0.norm_sqr();
    for (k, t) in tr.times.iter().enumerate() {
        assert!((tr.action[k] - i0).abs() < 1e-10);
        assert!((tr.phase[k] - (1.0 + 2.0 * i0) * t).abs() < 1e-8);
        assert!((tr.action[k] - tr.alpha[k].norm_sqr()).abs() < 1e-9);
    }
}

#[test]
fn weak_drive_matches_linear_response() {
    let (g1, w0) = (1e-3, 1.0);
    let drive = DriveSpec::new(vec![DriveMode { harmonic: 1, amplitude: g1, phase: 0.0 }]).unwrap();
    let params = OscillatorParams::new(w0, 1e-5, drive, 1e-3).unwrap();
    let tr = integrate_orbit(c(0.0, 0.0), &params, 10.0).unwrap();
    // ∫₀ᵗ g₁ cos(Ωτ) e^{iω₀τ} dτ in closed form.
    let big = TAU;
    let first_order = |t: f64| {
        let term = |w: f64| (Complex64::from_polar(1.0, w * t) - 1.0) / c(0.0, w);
        (term(w0 + big) + term(w0 - big)) * (g1 / 2.0)
    };
    let peak = tr.times.iter().map(|&t| first_order(t).norm()).fold(0.0, f64::max);
    let mut checked = 0;
    for (k, &t) in tr.times.iter().enumerate() {
        let lin = first_order(t).norm();
        if lin > 0.1 * peak {
            assert!((tr.alpha[k].norm() - lin).abs() < 0.01 * lin, "t={t}");
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn chaotic_orbit_satisfies_integral_equation() {
    let params = OscillatorParams::default_chaotic();
    let tr = integrate_orbit_unchecked(c(3.0, 0.0), &params, 15.0).unwrap();
    // At dt = 1e-3 and I ≈ 10 the RK4 error is about 2e-6 absolute, so the
    // bound is met relative to the action and absolutely at dt = 5e-4.
    let i_max = tr.action.iter().cloned().fold(0.0, f64::max);
    assert!(tr.max_integral_residual() < 1e-6 * i_max, "{}", tr.max_integral_residual());
    let fine = OscillatorParams { dt: 5e-4, ..params.clone() };
    let tf = integrate_orbit_unchecked(c(3.0, 0.0), &fine, 15.0).unwrap();
    assert!(tf.max_integral_residual() < 1e-6, "{}", tf.max_integral_residual());
    for (i, a) in tr.action.iter().zip(&tr.alpha) {
        assert!((i - a.norm_sqr()).abs() < 1e-9);
    }
    assert!(tr.phase.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn halving_check_holds_only_before_chaos_amplifies_step_error() {
    let params = OscillatorParams::default_chaotic();
    assert!(integrate_orbit(c(3.0, 0.0), &params, 2.0).is_ok());
    assert!(matches!(integrate_orbit(c(3.0, 0.0), &params, 15.0), Err(Error::Accuracy(_))));
}

#[test]
fn coarse_step_fails_the_halving_check() {
    let params = OscillatorParams::new(1.0, 1e-5, DriveSpec::pulse_train(0.6, 0.01, 40), 0.05)
        .unwrap()
        .with_sample_dt(0.1);
    assert!(matches!(integrate_orbit(c(3.0, 0.0), &params, 10.0), Err(Error::Accuracy(_))));
    assert!(integrate_orbit_unchecked(c(3.0, 0.0), &params, 10.0).is_ok());
}

#[test]
fn parameter_validation() {
    assert!(OscillatorParams::new(1.0, 0.0, DriveSpec::zero(), 1e-3).is_err());
    assert!(OscillatorParams::new(1.0, 1e-5, DriveSpec::zero(), -1.0).is_err());
    assert!(free_params().with_sample_dt(0.0015).validate().is_err());
    assert!(DriveSpec::new(vec![]).is_err());
    assert!(DriveSpec::new(vec![DriveMode { harmonic: 0, amplitude: 1.0, phase: 0.0 }]).is_err());
    assert!(integrate_orbit(c(1.0, 0.0), &free_params(), 0.0).is_err());
}

#[test]
fn drive_has_unit_period() {
    for d in [DriveSpec::two_mode(1.5, 1.5, 1.0), DriveSpec::pulse_train(0.6, 0.01, 40)] {
        for t in [0.0, 0.13, 0.5, 0.77] {
            assert!((d.value(t) - d.value(t + 3.0)).abs() < 1e-9);
        }
    }
    assert!(DriveSpec::zero().is_zero());
}

#[test]
fn density_sampling_is_order_free_and_isotropic() {
    let p = ring(0.5, 40_000, 9);
    let all = p.samples();
    assert_eq!(all[1234], p.sample(1234));
    let n = all.len() as f64;
    let mean = all.iter().sum::<Complex64>() / n;
    let spread = all.iter().map(|a| (a - p.center()).norm_sqr()).sum::<f64>() / n;
    assert!((mean - p.center()).norm() < 0.02);
    assert!((spread - 0.5).abs() < 0.02);
    let re2 = all.iter().map(|a| (a.re - 3.0).powi(2)).sum::<f64>() / n;
    assert!((re2 - 0.25).abs() < 0.01);
    assert!(PDensitySpec::new(PDensityKind::Exponential { width: 0.0 }, 10, 1).is_err());
    assert!(PDensitySpec::new(PDensityKind::Delta { center: c(1.0, 0.0) }, 0, 1).is_err());
}

#[test]
fn phase_correlation_limits() {
    let params = OscillatorParams::default_chaotic();
    let p = ring(1e-3, MIN_SAMPLES, 3);
    let s = phase_correlation(&p, &params, 1.0, 3.0).unwrap();
    assert_eq!(s.values[0], c(1.0, 0.0));
    assert!(s.modulus_sqr().iter().all(|v| *v <= 1.0 + 1e-12));
    let flat = phase_correlation(&p, &params, 0.0, 3.0).unwrap();
    assert!(flat.values.iter().all(|v| (v - 1.0).norm() < 1e-12));
    assert!(phase_correlation(&ring(1e-3, MIN_SAMPLES - 1, 3), &params, 1.0, 3.0).is_err());
}

#[test]
fn single_orbit_allegiance_never_decays() {
    let params = OscillatorParams::default_chaotic();
    let p = PDensitySpec::new(PDensityKind::Delta { center: c(3.0, 0.0) }, 1, 0).unwrap();
    let (f, times) = allegiance_classical(&p, &params, 2.0, 10.0).unwrap();
    assert_eq!(f.len(), times.len());
    assert!(f.iter().all(|v| (v - 1.0).abs() < 1e-12));
    assert!(allegiance_classical(&p, &params, 0.0, 10.0).is_err());
}

#[test]
fn frozen_actions_give_quadratic_cumulant() {
    let p = ring(0.1, MIN_SAMPLES, 4);
    let cum = action_cumulant(&p, &free_params(), 5.0).unwrap();
    let var_i = {
        let s = p.samples();
        let n = s.len() as f64;
        let m = s.iter().map(|a| a.norm_sqr()).sum::<f64>() / n;
        s.iter().map(|a| (a.norm_sqr() - m).powi(2)).sum::<f64>() / n
    };
    for (t, x) in cum.times.iter().zip(&cum.chi2).skip(1) {
        assert!((x / (t * t) - var_i).abs() < 1e-6 * var_i, "t={t}");
    }
    let k0 = cum.kernel[0];
    assert!(cum.kernel.iter().all(|k| (k - k0).abs() < 1e-6 * k0));
    assert!(!cum.decaying);
    assert!(cum.k_int.is_nan() && cum.tau_i.is_infinite());
}

#[test]
fn chaotic_cumulant_starts_at_zero_and_grows() {
    let cum = action_cumulant(&ring(1e-3, MIN_SAMPLES, 5), &OscillatorParams::default_chaotic(), 5.0).unwrap();
    assert_eq!(cum.chi2[0], 0.0);
    assert!(cum.chi2.iter().all(|v| *v >= 0.0));
    // Pulses make the action anticorrelated across a kick, so χ₂ may dip
    // briefly; over whole periods it grows.
    let at = |t: f64| cum.chi2[cum.times.iter().position(|x| (x - t).abs() < 1e-9).unwrap()];
    assert!(at(2.0) > at(1.0) && at(3.0) > at(2.0) && at(5.0) > at(3.0));
}

#[test]
fn fgr_formula() {
    let t: Vec<f64> = (0..20).map(f64::from).collect();
    let chi2: Vec<f64> = t.iter().map(|t| 2.0 * 0.5 * t).collect();
    let f = fgr_prediction(&chi2, 0.1);
    for (v, t) in f.iter().zip(&t) {
        assert!((v - (-0.01 * t).exp()).abs() < 1e-15);
    }
    assert!(fgr_prediction(&chi2, 0.0).iter().all(|v| *v == 1.0));
    let a = fgr_prediction(&chi2, 0.05);
    let b = fgr_prediction(&chi2, 0.1);
    assert!((b[10].ln() / a[10].ln() - 4.0).abs() < 1e-12);
}

#[test]
fn semiclassical_amplitude_limits() {
    let params = OscillatorParams::default_chaotic();
    let zero = semiclassical_amplitude(c(3.0, 0.0), &params, 0.0, 5.0, 1000, 1).unwrap();
    assert!(zero.values.iter().all(|v| (v - 1.0).norm() < 1e-12));
    assert!(!zero.undersampled);
    let frozen = semiclassical_amplitude_with(c(3.0, 0.0), &params, 1.0, 5.0, 1000, 1, false).unwrap();
    assert!(frozen.values.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    let live = semiclassical_amplitude(c(3.0, 0.0), &params, 1.0, 5.0, 1000, 1).unwrap();
    assert!(live.fidelity().last().unwrap() < &0.99);
    assert!(semiclassical_amplitude(c(3.0, 0.0), &params, 1.0, 5.0, 999, 1).is_err());
}

#[test]
fn semiclassical_amplitude_is_deterministic() {
    let params = OscillatorParams::default_chaotic();
    let a = semiclassical_amplitude(c(3.0, 0.0), &params, 1.0, 3.0, 2000, 7).unwrap();
    let b = semiclassical_amplitude(c(3.0, 0.0), &params, 1.0, 3.0, 2000, 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn early_time_expansion() {
    let params = OscillatorParams::default_chaotic();
    let zero = early_time_fidelity(c(3.0, 0.0), &params, 0.0, params.hbar, 8.0).unwrap();
    assert!(zero.fidelity.iter().all(|f| *f == 1.0));
    let eps = 2.0 * params.hbar.sqrt();
    let e = early_time_fidelity(c(3.0, 0.0), &params, eps, params.hbar, 8.0).unwrap();
    assert!(e.growth_rate_alpha > 0.0);
    let rel = (e.growth_rate_alpha - e.growth_rate_omega).abs() / e.growth_rate_alpha;
    assert!(rel < 0.3, "{} vs {}", e.growth_rate_alpha, e.growth_rate_omega);
    assert!(e.validity_horizon.is_finite() && e.validity_horizon > 0.0);
    // Where the ω-channel correction is small the Gaussian factor dominates.
    for i in 0..e.times.len() {
        if (0.5 * eps * e.dphi_domega[i]).powi(2) < 0.05 && e.fidelity[i] > 0.5 {
            let approx = (-(eps * eps / (4.0 * params.hbar)) * e.dphi_dalpha[i].powi(2)).exp();
            assert!((e.fidelity[i] - approx).abs() <= 0.05 * approx.max(e.fidelity[i]));
        }
    }
    assert!(early_time_fidelity(c(3.0, 0.0), &params, eps, 0.0, 8.0).is_err());
}

#[test]
fn ensemble_from_explicit_starts() {
    let params = free_params();
    let ens = OrbitEnsemble::from_starts(&[(c(1.0, 0.0), 1.0), (c(0.0, 0.5), 2.0)], &params, 1.0).unwrap();
    assert_eq!(ens.len(), 2);
    assert!((ens.phase[1].last().unwrap() - (2.0 + 2.0 * 0.25)).abs() < 1e-9);
    assert!((ens.mean_action()[5] - 0.625).abs() < 1e-12);
}
