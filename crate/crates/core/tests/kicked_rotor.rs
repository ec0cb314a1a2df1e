use std::f64::consts::TAU;

use echo_lab::kicked_rotor::{
    dense_floquet_matrix, dense_oracle_step, echo_amplitudes, kr_step, unitarity_defect, Branch, KickOrder,
    KickedRotorParams, PerturbationSplit, DENSE_ORACLE_MAX_N,
};
use echo_lab::quantum::{default_sigma, gaussian_packet, make_grid, transform, Basis, MixtureSpec, Region, WaveFunction};
use echo_lab::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(n: usize, rng: &mut ChaCha8Rng) -> WaveFunction {
    let amps = (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let mut psi = WaveFunction::new(make_grid(n).unwrap(), amps, Basis::Position).unwrap();
    psi.normalize().unwrap();
    psi
}

/// Floquet matrix assembled here from scratch: `F`, the DFT with entries
/// `exp(-i p_k θ_j/ħ)/√N`, then `U = K F† D F` (drift first) or `F† D F K`.
fn reference_matrix(n: usize, k: f64, c: f64, order: KickOrder) -> Vec<Vec<Complex64>> {
    let g = make_grid(n).unwrap();
    let h = g.hbar();
    let f = |kk: usize, j: usize| Complex64::from_polar(1.0 / (n as f64).sqrt(), -g.momentum(kk) * g.theta(j) / h);
    let d = |kk: usize| Complex64::from_polar(1.0, -c * g.momentum(kk).powi(2) / (2.0 * h));
    let kick = |j: usize| Complex64::from_polar(1.0, -k * g.theta(j).cos() / h);
    let mut u = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (a, row) in u.iter_mut().enumerate() {
        for (b, el) in row.iter_mut().enumerate() {
            let free: Complex64 = (0..n).map(|kk| f(kk, a).conj() * d(kk) * f(kk, b)).sum();
            *el = match order {
                KickOrder::DriftThenKick => kick(a) * free,
                KickOrder::KickThenDrift => free * kick(b),
            };
        }
    }
    u
}

fn apply(u: &[Vec<Complex64>], x: &[Complex64]) -> Vec<Complex64> {
    u.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

#[test]
fn single_step_matches_dense_oracle() {
    let g = make_grid(8).unwrap();
    let params = KickedRotorParams::new(g, 1.3, 0.0).unwrap();
    let psi = gaussian_packet(&g, 1.0, 0.5, 0.5).unwrap();
    let fast = kr_step(&psi, &params, Branch::Unperturbed).unwrap();
    let dense = dense_oracle_step(&psi, &params, Branch::Unperturbed).unwrap();
    for (a, b) in fast.amplitudes().iter().zip(dense.amplitudes()) {
        assert!((a - b).norm() < 1e-10);
    }
}

#[test]
fn library_dense_matrix_matches_independent_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for order in [KickOrder::DriftThenKick, KickOrder::KickThenDrift] {
        let g = make_grid(8).unwrap();
        let params = KickedRotorParams::new(g, 2.7, 0.3).unwrap().with_kick_order(order);
        for branch in [Branch::Unperturbed, Branch::Perturbed] {
            let lib = dense_floquet_matrix(&params, branch).unwrap();
            let reference = reference_matrix(8, 2.7, params.drift_coefficient(branch), order);
            let x = random_state(8, &mut rng);
            let a = apply(&lib, x.amplitudes());
            let b = apply(&reference, x.amplitudes());
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn split_operator_tracks_oracle_over_many_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [8, 16, 32] {
        for order in [KickOrder::DriftThenKick, KickOrder::KickThenDrift] {
            let k = rng.random_range(0.0..12.0);
            let eps = rng.random_range(0.0..0.5);
            let params = KickedRotorParams::new(make_grid(n).unwrap(), k, eps).unwrap().with_kick_order(order);
            let mut a = random_state(n, &mut rng);
            let mut b = a.clone();
            for _ in 0..10 {
                a = kr_step(&a, &params, Branch::Perturbed).unwrap();
                b = dense_oracle_step(&b, &params, Branch::Perturbed).unwrap();
            }
            let diff = a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "N={n}: {diff}");
        }
    }
}

#[test]
fn dense_matrix_is_unitary_and_size_limited() {
    let params = KickedRotorParams::new(make_grid(32).unwrap(), 5.0, 0.1).unwrap();
    let u = dense_floquet_matrix(&params, Branch::Perturbed).unwrap();
    assert!(unitarity_defect(&u) < 1e-12);
    let big = KickedRotorParams::new(make_grid(DENSE_ORACLE_MAX_N * 2).unwrap(), 5.0, 0.1).unwrap();
    assert!(matches!(dense_floquet_matrix(&big, Branch::Unperturbed), Err(Error::OracleTooLarge { .. })));
}

#[test]
fn step_preserves_norm_and_basis() {
    let g = make_grid(4096).unwrap();
    let params = KickedRotorParams::new(g, 10.0, 1.1 * g.hbar()).unwrap();
    let mut psi = transform(&gaussian_packet(&g, 1.5, 2.0, default_sigma(&g)).unwrap(), Basis::Momentum);
    for _ in 0..20 {
        psi = kr_step(&psi, &params, Branch::Perturbed).unwrap();
        assert_eq!(psi.basis(), Basis::Momentum);
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn step_rejects_bad_input() {
    let g = make_grid(16).unwrap();
    let params = KickedRotorParams::new(g, 1.0, 0.0).unwrap();
    let unnormalized = WaveFunction::new(g, vec![Complex64::new(1.0, 0.0); 16], Basis::Position).unwrap();
    assert!(matches!(kr_step(&unnormalized, &params, Branch::Unperturbed), Err(Error::NotNormalized { .. })));
    let other = gaussian_packet(&make_grid(32).unwrap(), 1.0, 0.0, 0.3).unwrap();
    assert!(matches!(kr_step(&other, &params, Branch::Unperturbed), Err(Error::GridMismatch(_))));
}

#[test]
fn parameter_validation() {
    let g = make_grid(16).unwrap();
    assert!(KickedRotorParams::new(g, f64::NAN, 0.0).is_err());
    assert!(KickedRotorParams::new(g, 1.0, -0.1).is_err());
    let sym = KickedRotorParams::new(g, 1.0, 0.0).unwrap().with_split(PerturbationSplit::Symmetric);
    let signed = KickedRotorParams { epsilon: -0.1, ..sym };
    assert!(signed.validate().is_ok());
    let p = KickedRotorParams::new(g, 1.0, 2.0 * g.hbar()).unwrap();
    assert!((p.sigma_quantum() - 2.0).abs() < 1e-12);
}

fn small_mixture(n: usize, count: usize, seed: u64) -> MixtureSpec {
    MixtureSpec::random(Region::fig1(), count, default_sigma(&make_grid(n).unwrap()), seed).unwrap()
}

#[test]
fn zero_perturbation_gives_unit_echo() {
    let g = make_grid(1024).unwrap();
    let params = KickedRotorParams::new(g, 10.0, 0.0).unwrap();
    let rec = echo_amplitudes(&small_mixture(1024, 8, 1), &params, 15, false).unwrap();
    for f in &rec.amplitudes {
        for v in f {
            assert!((v - 1.0).norm() < 1e-12);
        }
    }
}

#[test]
fn echo_record_invariants() {
    let g = make_grid(512).unwrap();
    let params = KickedRotorParams::new(g, 10.0, 1.1 * g.hbar()).unwrap();
    let mixture = small_mixture(512, 6, 2);
    let rec = echo_amplitudes(&mixture, &params, 12, true).unwrap();
    assert_eq!(rec.times, (0..=12).collect::<Vec<_>>());
    assert_eq!(rec.n_packets(), 6);
    for f in &rec.amplitudes {
        assert!((f[0] - 1.0).norm() < 1e-12);
        assert!(f.iter().all(|v| v.norm() <= 1.0 + 1e-10));
    }
    let gram = rec.gram().unwrap();
    let packets = mixture.packets(&g).unwrap();
    for (k, row) in gram.iter().enumerate() {
        for (l, v) in row.iter().enumerate() {
            let direct = echo_lab::quantum::inner_product(&packets[k], &packets[l]).unwrap();
            assert!((v - direct).norm() < 1e-10);
        }
    }
    let plain = echo_amplitudes(&mixture, &params, 12, false).unwrap();
    for (a, b) in plain.amplitudes.iter().zip(&rec.amplitudes) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}

#[test]
fn symmetric_split_sign_flip_conjugates_amplitudes() {
    let g = make_grid(512).unwrap();
    let base = KickedRotorParams::new(g, 7.0, 0.0).unwrap().with_split(PerturbationSplit::Symmetric);
    let plus = KickedRotorParams { epsilon: 1.5 * g.hbar(), ..base };
    let minus = KickedRotorParams { epsilon: -1.5 * g.hbar(), ..base };
    let mixture = small_mixture(512, 5, 4);
    let a = echo_amplitudes(&mixture, &plus, 20, false).unwrap();
    let b = echo_amplitudes(&mixture, &minus, 20, false).unwrap();
    for (x, y) in a.amplitudes.iter().zip(&b.amplitudes) {
        for (u, v) in x.iter().zip(y) {
            assert!((u - v.conj()).norm() < 1e-10);
        }
    }
}

#[test]
fn global_phase_of_packet_is_irrelevant() {
    let g = make_grid(256).unwrap();
    let params = KickedRotorParams::new(g, 10.0, 1.1 * g.hbar()).unwrap();
    let psi = gaussian_packet(&g, TAU * 0.25, TAU * 0.35, default_sigma(&g)).unwrap();
    let rotated = psi.scaled(Complex64::from_polar(1.0, 0.9));
    let echo = |start: &WaveFunction| {
        let (mut u, mut v) = (start.clone(), start.clone());
        for _ in 0..8 {
            u = kr_step(&u, &params, Branch::Unperturbed).unwrap();
            v = kr_step(&v, &params, Branch::Perturbed).unwrap();
        }
        echo_lab::quantum::inner_product(&u, &v).unwrap()
    };
    assert!((echo(&psi) - echo(&rotated)).norm() < 1e-12);
}

#[test]
fn echo_csv_layout() {
    let g = make_grid(64).unwrap();
    let params = KickedRotorParams::new(g, 2.0, 0.01).unwrap();
    let rec = echo_amplitudes(&small_mixture(64, 2, 5), &params, 3, false).unwrap();
    let mut buf = Vec::new();
    rec.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,k,re_f,im_f");
    assert_eq!(lines.len(), 1 + 4 * 2);
    assert!(lines[1].starts_with("0,0,1.0000000000000"));
}

#[test]
fn echo_needs_at_least_one_period() {
    let g = make_grid(64).unwrap();
    let params = KickedRotorParams::new(g, 2.0, 0.01).unwrap();
    assert!(echo_amplitudes(&small_mixture(64, 2, 5), &params, 0, false).is_err());
}
