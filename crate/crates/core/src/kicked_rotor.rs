//! Quantum kicked rotor on the torus: split-operator Floquet steps, a dense
//! reference propagator, and echo amplitudes of packet mixtures.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::quantum::{dot, Basis, MixtureSpec, TorusGrid, Transformer, WaveFunction};

/// Largest dimension accepted by the dense propagator.
pub const DENSE_ORACLE_MAX_N: usize = 64;

/// Norm tolerance on inputs and during propagation.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KickOrder {
    KickThenDrift,
    #[default]
    DriftThenKick,
}

/// How the `ε p²/2` perturbation is shared between the two evolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbationSplit {
    /// Drift coefficients `1` and `1 + ε`.
    #[default]
    Asymmetric,
    /// Drift coefficients `1 - ε/2` and `1 + ε/2`.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Unperturbed,
    Perturbed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickedRotorParams {
    pub kick_strength: f64,
    pub epsilon: f64,
    pub grid: TorusGrid,
    pub kick_order: KickOrder,
    pub perturbation_split: PerturbationSplit,
}

impl KickedRotorParams {
    pub fn new(grid: TorusGrid, kick_strength: f64, epsilon: f64) -> Result<Self> {
        let p = Self {
            kick_strength,
            epsilon,
            grid,
            kick_order: KickOrder::default(),
            perturbation_split: PerturbationSplit::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_kick_order(mut self, order: KickOrder) -> Self {
        self.kick_order = order;
        self
    }

    pub fn with_split(mut self, split: PerturbationSplit) -> Self {
        self.perturbation_split = split;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.kick_strength.is_finite() {
            return Err(invalid("K", "must be finite"));
        }
        if !self.epsilon.is_finite() {
            return Err(invalid("epsilon", "must be finite"));
        }
        // A signed ε only makes sense when the two branches are mirror images.
        if self.perturbation_split == PerturbationSplit::Asymmetric && self.epsilon < 0.0 {
            return Err(invalid("epsilon", "must be >= 0 for the asymmetric split"));
        }
        Ok(())
    }

    /// Dimensionless perturbation strength `ε/ħ`.
    pub fn sigma_quantum(&self) -> f64 {
        self.epsilon / self.grid.hbar()
    }

    /// Coefficient `c` of the drift `exp(-i c p²/2ħ)` on a branch.
    pub fn drift_coefficient(&self, branch: Branch) -> f64 {
        match (self.perturbation_split, branch) {
            (PerturbationSplit::Asymmetric, Branch::Unperturbed) => 1.0,
            (PerturbationSplit::Asymmetric, Branch::Perturbed) => 1.0 + self.epsilon,
            (PerturbationSplit::Symmetric, Branch::Unperturbed) => 1.0 - 0.5 * self.epsilon,
            (PerturbationSplit::Symmetric, Branch::Perturbed) => 1.0 + 0.5 * self.epsilon,
        }
    }
}

/// Precomputed phases and FFT plans for repeated Floquet steps.
#[derive(Debug, Clone)]
pub struct FloquetPropagator {
    params: KickedRotorParams,
    transformer: Transformer,
    kick: Vec<Complex64>,
    drift_unperturbed: Vec<Complex64>,
    drift_perturbed: Vec<Complex64>,
}

impl FloquetPropagator {
    pub fn new(params: &KickedRotorParams) -> Result<Self> {
        params.validate()?;
        let g = params.grid;
        let hbar = g.hbar();
        let kick = (0..g.n())
            .map(|j| Complex64::from_polar(1.0, -params.kick_strength * g.theta(j).cos() / hbar))
            .collect();
        let drift = |c: f64| -> Vec<Complex64> {
            (0..g.n())
                .map(|k| {
                    let p = g.momentum(k);
                    Complex64::from_polar(1.0, -c * p * p / (2.0 * hbar))
                })
                .collect()
        };
        Ok(Self {
            params: *params,
            transformer: Transformer::new(&g),
            kick,
            drift_unperturbed: drift(params.drift_coefficient(Branch::Unperturbed)),
            drift_perturbed: drift(params.drift_coefficient(Branch::Perturbed)),
        })
    }

    pub fn params(&self) -> &KickedRotorParams {
        &self.params
    }

    /// One period applied in place to position-basis amplitudes.
    pub fn step_in_place(&self, data: &mut [Complex64], branch: Branch) {
        let drift = match branch {
            Branch::Unperturbed => &self.drift_unperturbed,
            Branch::Perturbed => &self.drift_perturbed,
        };
        let kick = |d: &mut [Complex64]| d.iter_mut().zip(&self.kick).for_each(|(a, k)| *a *= k);
        let free = |d: &mut [Complex64]| {
            self.transformer.to_momentum(d);
            d.iter_mut().zip(drift).for_each(|(a, k)| *a *= k);
            self.transformer.to_position(d);
        };
        match self.params.kick_order {
            KickOrder::KickThenDrift => {
                kick(data);
                free(data);
            }
            KickOrder::DriftThenKick => {
                free(data);
                kick(data);
            }
        }
    }
}

fn check_normalized(psi: &WaveFunction) -> Result<()> {
    let n = psi.norm_sqr();
    if !((n - 1.0).abs() <= NORM_TOLERANCE) {
        return Err(Error::NotNormalized { norm_sq: n });
    }
    Ok(())
}

fn check_grid(psi: &WaveFunction, params: &KickedRotorParams) -> Result<()> {
    if *psi.grid() != params.grid {
        return Err(Error::GridMismatch(format!(
            "state on N = {}, parameters on N = {}",
            psi.grid().n(),
            params.grid.n()
        )));
    }
    Ok(())
}

/// One Floquet period by the split-operator method. The result is returned in
/// the basis of the input.
pub fn kr_step(psi: &WaveFunction, params: &KickedRotorParams, branch: Branch) -> Result<WaveFunction> {
    check_grid(psi, params)?;
    check_normalized(psi)?;
    let prop = FloquetPropagator::new(params)?;
    let basis = psi.basis();
    let mut pos = crate::quantum::transform(psi, Basis::Position).into_amplitudes();
    prop.step_in_place(&mut pos, branch);
    let out = WaveFunction::new(params.grid, pos, Basis::Position)?;
    Ok(crate::quantum::transform(&out, basis))
}

/// Dense `N × N` Floquet matrix in the position basis, built from explicit DFT
/// matrices and diagonal phase factors. Row-major.
pub fn dense_floquet_matrix(params: &KickedRotorParams, branch: Branch) -> Result<Vec<Vec<Complex64>>> {
    params.validate()?;
    let g = params.grid;
    let n = g.n();
    if n > DENSE_ORACLE_MAX_N {
        return Err(Error::OracleTooLarge { n, max: DENSE_ORACLE_MAX_N });
    }
    let hbar = g.hbar();
    let c = params.drift_coefficient(branch);
    let norm = 1.0 / (n as f64).sqrt();
    // F[k][j] = exp(-i p_k θ_j / ħ) / sqrt(N)
    let f: Vec<Vec<Complex64>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|j| Complex64::from_polar(norm, -g.momentum(k) * g.theta(j) / hbar))
                .collect()
        })
        .collect();
    let d: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, -c * g.momentum(k).powi(2) / (2.0 * hbar)))
        .collect();
    let kick: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, -params.kick_strength * g.theta(j).cos() / hbar))
        .collect();
    // Free part V = F† D F.
    let mut v = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (0..n).map(|k| f[k][i].conj() * d[k] * f[k][j]).sum();
        }
    }
    for (i, row) in v.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x *= match params.kick_order {
                KickOrder::DriftThenKick => kick[i],
                KickOrder::KickThenDrift => kick[j],
            };
        }
    }
    Ok(v)
}

/// `max |U†U - 1|` over matrix entries.
pub fn unitarity_defect(u: &[Vec<Complex64>]) -> f64 {
    let n = u.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s: Complex64 = (0..n).map(|k| u[k][i].conj() * u[k][j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - target).norm());
        }
    }
    worst
}

/// One period by explicit matrix-vector multiplication with the dense Floquet
/// matrix. Returned in the basis of the input.
pub fn dense_oracle_step(psi: &WaveFunction, params: &KickedRotorParams, branch: Branch) -> Result<WaveFunction> {
    check_grid(psi, params)?;
    let u = dense_floquet_matrix(params, branch)?;
    let basis = psi.basis();
    let pos = crate::quantum::transform(psi, Basis::Position);
    let x = pos.amplitudes();
    let out: Vec<Complex64> = u.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect();
    let out = WaveFunction::new(params.grid, out, Basis::Position)?;
    Ok(crate::quantum::transform(&out, basis))
}

/// Echo amplitudes of every packet of a mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct EchoRecord {
    pub times: Vec<usize>,
    pub weights: Vec<f64>,
    /// `amplitudes[k][t] = f_k(t)`.
    pub amplitudes: Vec<Vec<Complex64>>,
    /// `cross[t][k][k'] = g_kk'(t)`, present when requested.
    pub cross: Option<Vec<Vec<Vec<Complex64>>>>,
}

impl EchoRecord {
    pub fn n_packets(&self) -> usize {
        self.amplitudes.len()
    }

    /// Packet Gram matrix, i.e. the cross tensor at `t = 0`.
    pub fn gram(&self) -> Option<&Vec<Vec<Complex64>>> {
        self.cross.as_ref().map(|c| &c[0])
    }

    /// Writes `t, k, re_f, im_f` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,k,re_f,im_f")?;
        for (ti, t) in self.times.iter().enumerate() {
            for (k, f) in self.amplitudes.iter().enumerate() {
                writeln!(w, "{t},{k},{:.16e},{:.16e}", f[ti].re, f[ti].im)?;
            }
        }
        Ok(())
    }
}

fn norm_drift(data: &[Complex64]) -> f64 {
    (data.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs()
}

/// Evolves every packet of the mixture under both branches for `t_max`
/// periods and records `f_k(t) = <ψ_k⁰(t)|ψ_kᵋ(t)>`, plus the cross
/// amplitudes `<ψ_k⁰(t)|ψ_k'ᵋ(t)>` when `want_cross` is set.
pub fn echo_amplitudes(
    mixture: &MixtureSpec,
    params: &KickedRotorParams,
    t_max: usize,
    want_cross: bool,
) -> Result<EchoRecord> {
    if t_max < 1 {
        return Err(invalid("T", "need at least one period"));
    }
    mixture.validate()?;
    let prop = FloquetPropagator::new(params)?;
    let grid = params.grid;
    let weights = mixture.weights();
    let times: Vec<usize> = (0..=t_max).collect();

    if !want_cross {
        let amplitudes = mixture
            .entries
            .par_iter()
            .enumerate()
            .map(|(k, e)| -> Result<Vec<Complex64>> {
                let psi = crate::quantum::gaussian_packet(&grid, e.theta0, e.p0, e.sigma_theta)?;
                let mut u = psi.into_amplitudes();
                let mut v = u.clone();
                let mut f = Vec::with_capacity(t_max + 1);
                f.push(dot(&u, &v));
                for step in 1..=t_max {
                    prop.step_in_place(&mut u, Branch::Unperturbed);
                    prop.step_in_place(&mut v, Branch::Perturbed);
                    let drift = norm_drift(&u).max(norm_drift(&v));
                    if drift > NORM_TOLERANCE {
                        return Err(Error::NormDrift { packet: k, step, drift });
                    }
                    f.push(dot(&u, &v));
                }
                Ok(f)
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(EchoRecord { times, weights, amplitudes, cross: None });
    }

    let packets = mixture.packets(&grid)?;
    let mut us: Vec<Vec<Complex64>> = packets.into_iter().map(|p| p.into_amplitudes()).collect();
    let mut vs = us.clone();
    let nk = us.len();
    let cross_at = |us: &[Vec<Complex64>], vs: &[Vec<Complex64>]| -> Vec<Vec<Complex64>> {
        us.par_iter().map(|u| vs.iter().map(|v| dot(u, v)).collect()).collect()
    };
    let mut cross = Vec::with_capacity(t_max + 1);
    cross.push(cross_at(&us, &vs));
    for step in 1..=t_max {
        us.par_iter_mut().for_each(|u| prop.step_in_place(u, Branch::Unperturbed));
        vs.par_iter_mut().for_each(|v| prop.step_in_place(v, Branch::Perturbed));
        for k in 0..nk {
            let drift = norm_drift(&us[k]).max(norm_drift(&vs[k]));
            if drift > NORM_TOLERANCE {
                return Err(Error::NormDrift { packet: k, step, drift });
            }
        }
        cross.push(cross_at(&us, &vs));
    }
    let amplitudes = (0..nk).map(|k| cross.iter().map(|c| c[k][k]).collect()).collect();
    Ok(EchoRecord { times, weights, amplitudes, cross: Some(cross) })
}
