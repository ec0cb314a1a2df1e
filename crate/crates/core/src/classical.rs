//! Chirikov standard map: single steps, Lyapunov exponent, ensembles and the
//! correlation functions compared against the quantum echoes.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::kicked_rotor::KickOrder;
use crate::quantum::Region;

/// Trajectories per deterministic reduction block.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub theta: f64,
    pub p: f64,
}

impl PhasePoint {
    /// Reduces both coordinates into `[0, 2π) × [-π, π)`.
    pub fn new(theta: f64, p: f64) -> Self {
        Self { theta: wrap_angle(theta), p: wrap_momentum(p) }
    }
}

#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU { 0.0 } else { y }
}

#[inline]
pub fn wrap_momentum(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y >= PI { -PI } else { y }
}

/// `p' = p + K sin θ`, `θ' = θ + p'`, both reduced.
pub fn std_map_step(pt: PhasePoint, k: f64) -> PhasePoint {
    let p = wrap_momentum(pt.p + k * pt.theta.sin());
    PhasePoint { theta: wrap_angle(pt.theta + p), p }
}

/// One period in the requested order. Drift-then-kick is
/// `θ' = θ + p`, `p' = p + K sin θ'`.
pub fn std_map_step_ordered(pt: PhasePoint, k: f64, order: KickOrder) -> PhasePoint {
    match order {
        KickOrder::KickThenDrift => std_map_step(pt, k),
        KickOrder::DriftThenKick => {
            let theta = wrap_angle(pt.theta + pt.p);
            PhasePoint { theta, p: wrap_momentum(pt.p + k * theta.sin()) }
        }
    }
}

/// Lyapunov estimate with its per-point values.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovEstimate {
    pub mean: f64,
    pub per_point: Vec<f64>,
    /// `(max - min) / |mean|` over initial points.
    pub spread: f64,
}

/// Number of random initial points averaged by [`lyapunov`].
pub const LYAPUNOV_POINTS: usize = 10;
const RENORMALIZE_EVERY: usize = 10;

fn lyapunov_single(mut pt: PhasePoint, k: f64, n_transient: usize, n_iter: usize) -> f64 {
    for _ in 0..n_transient {
        pt = std_map_step(pt, k);
    }
    let (mut dth, mut dp) = (1.0f64, 0.0f64);
    let mut log_sum = 0.0;
    for i in 1..=n_iter {
        dp += k * pt.theta.cos() * dth;
        dth += dp;
        pt = std_map_step(pt, k);
        if i % RENORMALIZE_EVERY == 0 || i == n_iter {
            let norm = dth.hypot(dp);
            log_sum += norm.ln();
            dth /= norm;
            dp /= norm;
        }
    }
    log_sum / n_iter as f64
}

/// Largest Lyapunov exponent from tangent-map iteration, averaged over
/// [`LYAPUNOV_POINTS`] random initial points.
pub fn lyapunov(k: f64, n_transient: usize, n_iter: usize, seed: u64) -> Result<LyapunovEstimate> {
    if n_iter < 10_000 {
        return Err(invalid("n_iter", format!("need at least 10^4 iterations, got {n_iter}")));
    }
    if !k.is_finite() {
        return Err(invalid("K", "must be finite"));
    }
    let starts = make_ensemble(Region::torus(), LYAPUNOV_POINTS, seed)?.initial_points;
    let per_point: Vec<f64> = starts
        .par_iter()
        .map(|&pt| lyapunov_single(pt, k, n_transient, n_iter))
        .collect();
    let mean = per_point.iter().sum::<f64>() / per_point.len() as f64;
    let (lo, hi) = per_point
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let width = hi - lo;
    let spread = if mean.abs() > 0.0 { width / mean.abs() } else { 0.0 };
    // Near the integrable limit every estimate is ~0 and relative spread is meaningless.
    if width > 1e-3 && spread > 0.1 {
        return Err(Error::NonConvergence { spread });
    }
    Ok(LyapunovEstimate { mean, per_point, spread })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalEnsemble {
    pub points: Vec<PhasePoint>,
    pub initial_points: Vec<PhasePoint>,
    pub seed: u64,
}

/// `n` points uniform in `region`, reproducible from `seed`.
pub fn make_ensemble(region: Region, n: usize, seed: u64) -> Result<ClassicalEnsemble> {
    region.validate()?;
    if n == 0 {
        return Err(invalid("n", "need at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial_points: Vec<PhasePoint> = (0..n)
        .map(|_| {
            let (theta, p) = region.sample(&mut rng);
            PhasePoint::new(theta, p)
        })
        .collect();
    Ok(ClassicalEnsemble { points: initial_points.clone(), initial_points, seed })
}

impl ClassicalEnsemble {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Advances the current points by `steps` periods.
    pub fn evolve(&mut self, k: f64, steps: usize, order: KickOrder) {
        self.points.par_iter_mut().for_each(|pt| {
            for _ in 0..steps {
                *pt = std_map_step_ordered(*pt, k, order);
            }
        });
    }

    /// Sub-ensemble of the first `n` initial points.
    pub fn truncated(&self, n: usize) -> Self {
        let initial_points: Vec<PhasePoint> = self.initial_points.iter().take(n).copied().collect();
        Self { points: initial_points.clone(), initial_points, seed: self.seed }
    }
}

/// Runs every trajectory from its initial point for `t_max` periods and sums
/// a per-time observable over the ensemble in a fixed order. The observable
/// receives the unwrapped angle and momentum displacements.
fn ensemble_sum<T, F>(ens: &ClassicalEnsemble, k: f64, t_max: usize, order: KickOrder, zero: T, obs: F) -> Vec<T>
where
    T: Copy + Send + Sync + std::ops::AddAssign,
    F: Fn(f64, f64) -> T + Sync,
{
    let partials: Vec<Vec<T>> = ens
        .initial_points
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![zero; t_max + 1];
            for &start in chunk {
                let mut pt = start;
                let (mut dtheta, mut dp) = (0.0, 0.0);
                acc[0] += obs(0.0, 0.0);
                for slot in acc.iter_mut().skip(1) {
                    let next = std_map_step_ordered(pt, k, order);
                    match order {
                        KickOrder::KickThenDrift => dtheta += next.p,
                        KickOrder::DriftThenKick => dtheta += pt.p,
                    }
                    dp += k * match order {
                        KickOrder::KickThenDrift => pt.theta.sin(),
                        KickOrder::DriftThenKick => next.theta.sin(),
                    };
                    pt = next;
                    *slot += obs(dtheta, dp);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![zero; t_max + 1];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

/// `C(t) = |<exp(iγ[θ_t - θ_0])>|²` with the unwrapped angle, for the default
/// kick order.
pub fn angular_correlation(ens: &ClassicalEnsemble, k: f64, gamma: f64, t_max: usize) -> Result<Vec<f64>> {
    angular_correlation_ordered(ens, k, gamma, t_max, KickOrder::default())
}

pub fn angular_correlation_ordered(
    ens: &ClassicalEnsemble,
    k: f64,
    gamma: f64,
    t_max: usize,
    order: KickOrder,
) -> Result<Vec<f64>> {
    if t_max < 1 {
        return Err(invalid("T", "need at least one period"));
    }
    let n = ens.len() as f64;
    let sums = ensemble_sum(ens, k, t_max, order, Complex64::new(0.0, 0.0), |dth, _| {
        Complex64::from_polar(1.0, gamma * dth)
    });
    let mut c: Vec<f64> = sums.into_iter().map(|s| (s / n).norm_sqr().min(1.0)).collect();
    c[0] = 1.0;
    Ok(c)
}

/// Mean squared momentum displacement `<(p_t - p_0)²>` with unwrapped momentum.
pub fn momentum_msd(ens: &ClassicalEnsemble, k: f64, t_max: usize, order: KickOrder) -> Vec<f64> {
    let n = ens.len() as f64;
    ensemble_sum(ens, k, t_max, order, 0.0, |_, dp| dp * dp)
        .into_iter()
        .map(|s| s / n)
        .collect()
}
