//! Independent verification layer: Monte Carlo averaging over sampled
//! Gaussian noise fields, RK4 integration of the Lindbladian, and the
//! fidelity-based QFI.
//!
//! Every trajectory draws from its own ChaCha8 stream (`seed`, stream =
//! trajectory index), and ensemble sums use a fixed pairwise tree, so
//! results depend only on the inputs and never on the worker count.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{spin, LindbladGenerator, QubitRegisterState};
use crate::linalg::{herm_eigen, herm_psd_sqrt, hermiticity_deviation};
use crate::noise_model::{factor_sqrt, DephasingMatrix};
use crate::pulse_filter::{CutoffShape, PulseSequence, SpectralModel};
use crate::qfi::{QfiMethod, QfiResult};
use crate::{Error, Result, C64};

pub const MIN_TRAJECTORIES: usize = 100;
/// Largest allowed `dt γ λ_max` for the samplers and the integrator.
pub const MAX_STEP_RATE: f64 = 0.01;
pub const MIN_MODES: usize = 4096;
/// Required `ω_max t_s` of a synthesis grid.
pub const MIN_BANDWIDTH: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub label: String,
    pub mean: f64,
    pub stderr: f64,
}

impl EnsembleEstimate {
    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
    pub estimates: Vec<EnsembleEstimate>,
}

impl TrajectoryEnsemble {
    pub fn get(&self, label: &str) -> Option<&EnsembleEstimate> {
        self.estimates.iter().find(|e| e.label == label)
    }

    /// Real part of the averaged element `(row, col)`.
    pub fn re(&self, row: usize, col: usize) -> Option<&EnsembleEstimate> {
        self.get(&re_label(row, col))
    }

    pub fn im(&self, row: usize, col: usize) -> Option<&EnsembleEstimate> {
        self.get(&im_label(row, col))
    }
}

fn re_label(row: usize, col: usize) -> String {
    format!("re(rho[{row},{col}])")
}

fn im_label(row: usize, col: usize) -> String {
    format!("im(rho[{row},{col}])")
}

/// Generator for trajectory `index` of a seeded ensemble.
pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Sum with a fixed binary tree over the slice indices.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (l, r) = v.split_at(v.len() / 2);
    if v.len() > 1 << 14 {
        let (a, b) = rayon::join(|| pairwise_sum(l), || pairwise_sum(r));
        a + b
    } else {
        pairwise_sum(l) + pairwise_sum(r)
    }
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = pairwise_sum(v) / n;
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_traj(n_traj: usize) -> Result<()> {
    if n_traj < MIN_TRAJECTORIES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_TRAJECTORIES} trajectories, got {n_traj}")));
    }
    Ok(())
}

fn check_elements(state: &QubitRegisterState, elements: &[(usize, usize)]) -> Result<()> {
    let dim = state.dim();
    if let Some(&(r, c)) = elements.iter().find(|&&(r, c)| r >= dim || c >= dim) {
        return Err(Error::InvalidParameter(format!("element ({r}, {c}) outside a {dim}-dimensional state")));
    }
    Ok(())
}

/// Averages `ρ_{rc} exp(-i Σ_j φ_j (s_j - s'_j)/2)` over per-trajectory
/// qubit phases `phases[k]` (length N each).
fn ensemble_from_phases(
    state: &QubitRegisterState,
    phases: &[Vec<f64>],
    elements: &[(usize, usize)],
    seed: u64,
    dt: f64,
) -> TrajectoryEnsemble {
    let n = state.n_qubits();
    let mut estimates = Vec::with_capacity(2 * elements.len());
    for &(r, c) in elements {
        let rho = state.matrix()[(r, c)];
        let dsh: Vec<f64> = (0..n).map(|j| 0.5 * (spin(r, j, n) - spin(c, j, n))).collect();
        let values: Vec<C64> = phases
            .par_iter()
            .map(|phi| {
                let angle: f64 = phi.iter().zip(&dsh).map(|(p, d)| p * d).sum();
                rho * C64::from_polar(1.0, -angle)
            })
            .collect();
        let re: Vec<f64> = values.iter().map(|z| z.re).collect();
        let im: Vec<f64> = values.iter().map(|z| z.im).collect();
        let (m, s) = mean_and_stderr(&re);
        estimates.push(EnsembleEstimate { label: re_label(r, c), mean: m, stderr: s });
        let (m, s) = mean_and_stderr(&im);
        estimates.push(EnsembleEstimate { label: im_label(r, c), mean: m, stderr: s });
    }
    TrajectoryEnsemble { n_traj: phases.len(), seed, dt, estimates }
}

fn check_step(a: &DephasingMatrix, dt: f64) -> Result<()> {
    let max_dt = MAX_STEP_RATE / (a.gamma() * a.max_eigenvalue()).max(f64::MIN_POSITIVE);
    if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::StepTooCoarse { dt, max_dt });
    }
    Ok(())
}

/// White correlated noise: per step the qubit phases receive
/// `Δφ ~ Normal(0, γ A dt / 2)` drawn through the symmetric factor of A.
/// Returns estimates for the requested density-matrix elements.
pub fn sample_white_correlated(
    state: &QubitRegisterState,
    a: &DephasingMatrix,
    t: f64,
    dt: f64,
    n_traj: usize,
    seed: u64,
    elements: &[(usize, usize)],
) -> Result<TrajectoryEnsemble> {
    if a.n() != state.n_qubits() {
        return Err(Error::DimensionMismatch { expected: state.n_qubits(), got: a.n() });
    }
    check_traj(n_traj)?;
    check_step(a, dt)?;
    check_elements(state, elements)?;
    let n = a.n();
    let steps = (t / dt).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let g = factor_sqrt(a)?.entries * (0.5 * a.gamma() * h).sqrt();
    let phases: Vec<Vec<f64>> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut rng = trajectory_rng(seed, k);
            let mut phi = vec![0.0; n];
            let mut z = vec![0.0; n];
            for _ in 0..steps {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                for (j, p) in phi.iter_mut().enumerate() {
                    *p += (0..n).map(|m| g[(j, m)] * z[m]).sum::<f64>();
                }
            }
            phi
        })
        .collect();
    Ok(ensemble_from_phases(state, &phases, elements, seed, h))
}

/// Largest z-score of the empirical increment covariance against
/// `γ A dt / 2`, with standard errors `√((Σ_jj Σ_ll + Σ_jl²) / n)`.
pub fn increment_covariance_check(a: &DephasingMatrix, dt: f64, n_samples: usize, seed: u64) -> Result<f64> {
    check_traj(n_samples)?;
    let n = a.n();
    let g = factor_sqrt(a)?.entries * (0.5 * a.gamma() * dt).sqrt();
    let target = a.entries() * (0.5 * a.gamma() * dt);
    let samples: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = trajectory_rng(seed, k);
            let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            (0..n).map(|j| (0..n).map(|m| g[(j, m)] * z[m]).sum()).collect()
        })
        .collect();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for l in j..n {
            let prods: Vec<f64> = samples.iter().map(|s| s[j] * s[l]).collect();
            let emp = pairwise_sum(&prods) / n_samples as f64;
            let se = ((target[(j, j)] * target[(l, l)] + target[(j, l)].powi(2)) / n_samples as f64).sqrt();
            if se > 0.0 {
                worst = worst.max((emp - target[(j, l)]).abs() / se);
            }
        }
    }
    Ok(worst)
}

/// Frequency nodes and bin widths for spectral synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub omegas: Vec<f64>,
    pub widths: Vec<f64>,
}

impl FrequencyGrid {
    /// Logarithmic bins on `[ω_cut, 0.1/t_s]`, linear bins on
    /// `[0.1/t_s, 200/t_s]`, and for a flattened spectrum one extra bin on
    /// `[0, ω_cut]`.
    pub fn standard(spec: &SpectralModel, t_s: f64) -> Result<Self> {
        Self::build(spec, t_s, 1024, 4096, MIN_BANDWIDTH)
    }

    pub fn build(spec: &SpectralModel, t_s: f64, n_log: usize, n_lin: usize, bandwidth: f64) -> Result<Self> {
        if !(t_s > 0.0) {
            return Err(Error::InvalidParameter(format!("shot time must be > 0, got {t_s}")));
        }
        let split = 0.1 / t_s;
        let top = bandwidth / t_s;
        let mut omegas = Vec::with_capacity(n_log + n_lin + 1);
        let mut widths = Vec::with_capacity(n_log + n_lin + 1);
        if spec.cutoff_shape == CutoffShape::FlattenBelow {
            omegas.push(0.5 * spec.omega_cut);
            widths.push(spec.omega_cut);
        }
        let mut lower = spec.omega_cut;
        if spec.omega_cut < split && n_log > 0 {
            let ratio = (split / spec.omega_cut).ln() / n_log as f64;
            for i in 0..n_log {
                let a = spec.omega_cut * (ratio * i as f64).exp();
                let b = spec.omega_cut * (ratio * (i + 1) as f64).exp();
                omegas.push((a * b).sqrt());
                widths.push(b - a);
            }
            lower = split;
        }
        if n_lin > 0 && top > lower {
            let w = (top - lower) / n_lin as f64;
            for i in 0..n_lin {
                omegas.push(lower + (i as f64 + 0.5) * w);
                widths.push(w);
            }
        }
        let grid = Self { omegas, widths };
        grid.check(t_s)?;
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn check(&self, t_s: f64) -> Result<()> {
        if self.len() < MIN_MODES {
            return Err(Error::GridTooCoarse(format!("{} modes < {MIN_MODES}", self.len())));
        }
        let top = self.omegas.iter().zip(&self.widths).map(|(w, d)| w + 0.5 * d).fold(0.0, f64::max);
        if top * t_s < MIN_BANDWIDTH * (1.0 - 1e-12) {
            return Err(Error::GridTooCoarse(format!("omega_max * t_s = {} < {MIN_BANDWIDTH}", top * t_s)));
        }
        Ok(())
    }
}

/// `(∫ y cos ωτ dτ, ∫ y sin ωτ dτ)` over `[0, t_s]` for the toggling
/// function, summed exactly over its constant stretches.
fn toggled_quadratures(pulses: &PulseSequence, t_s: f64, omega: f64) -> (f64, f64) {
    let thetas = pulses.thetas();
    let k = thetas.len();
    let mut c = 0.0;
    let mut s = 0.0;
    for l in 0..=k {
        let a = if l == 0 { 0.0 } else { thetas[l - 1] * t_s };
        let b = if l == k { t_s } else { thetas[l] * t_s };
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let h = 0.5 * omega * (b - a);
        let mid = 0.5 * omega * (a + b);
        // sin ωb - sin ωa = 2 cos(mid) sin(h), cos ωa - cos ωb = 2 sin(mid) sin(h)
        let w = (b - a) * if h.abs() < 1e-8 { 1.0 } else { h.sin() / h };
        c += sign * w * mid.cos();
        s += sign * w * mid.sin();
    }
    (c, s)
}

/// Per-mode weights `σ_m (c_m, s_m)` with `σ_m² = S(ω_m) Δω_m / π`, so that
/// the toggled phase is `Σ_m σ_m (z_m c_m + z'_m s_m)` for standard normals.
fn phase_weights(spec: &SpectralModel, pulses: &PulseSequence, t_s: f64, grid: &FrequencyGrid) -> Vec<(f64, f64)> {
    grid.omegas
        .iter()
        .zip(&grid.widths)
        .map(|(&w, &dw)| {
            let sigma = (spec.spectrum(w) * dw / PI).sqrt();
            let (c, s) = toggled_quadratures(pulses, t_s, w);
            (sigma * c, sigma * s)
        })
        .collect()
}

/// Phase variance implied by the grid, `Σ_m σ_m² (c_m² + s_m²)`; twice the
/// grid's approximation of ζ.
pub fn grid_phase_variance(spec: &SpectralModel, pulses: &PulseSequence, t_s: f64, grid: &FrequencyGrid) -> f64 {
    let terms: Vec<f64> = phase_weights(spec, pulses, t_s, grid).iter().map(|(c, s)| c * c + s * s).collect();
    pairwise_sum(&terms)
}

fn sample_unit_phases(weights: &[(f64, f64)], rng: &mut ChaCha8Rng) -> f64 {
    let mut acc = 0.0;
    for &(c, s) in weights {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        acc += z1 * c + z2 * s;
    }
    acc
}

fn check_colored(spec: &SpectralModel, pulses: &PulseSequence, t_s: f64, grid: &FrequencyGrid) -> Result<()> {
    spec.validate()?;
    pulses.check_exponent(spec.p)?;
    if !(t_s > 0.0) {
        return Err(Error::InvalidParameter(format!("shot time must be > 0, got {t_s}")));
    }
    grid.check(t_s)
}

/// Single qubit in `|+⟩` under `B(t) = Σ_m (a_m cos ω_m t + b_m sin ω_m t)`
/// with Gaussian `a_m, b_m ~ Normal(0, S(ω_m) Δω_m / π)`. Estimates the
/// coherence `ρ_01`, whose target is `exp(-ζ)/2`.
pub fn sample_colored_single(
    spec: &SpectralModel,
    pulses: &PulseSequence,
    t_s: f64,
    grid: &FrequencyGrid,
    n_traj: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    check_traj(n_traj)?;
    check_colored(spec, pulses, t_s, grid)?;
    let weights = phase_weights(spec, pulses, t_s, grid);
    let phases: Vec<Vec<f64>> = (0..n_traj)
        .into_par_iter()
        .map(|k| vec![sample_unit_phases(&weights, &mut trajectory_rng(seed, k))])
        .collect();
    let plus = crate::dynamics::PureState::plus_product(1)?.density_matrix();
    Ok(ensemble_from_phases(&plus, &phases, &[(0, 1)], seed, 0.0))
}

/// N qubits under `B_j(t) = Σ_m g_mj b_m(t)` with independent colored
/// processes `b_m` and `gᵀ g = A₁` (the γ of `a_spatial` is ignored).
pub fn sample_colored_spatial(
    state: &QubitRegisterState,
    a_spatial: &DephasingMatrix,
    spec: &SpectralModel,
    pulses: &PulseSequence,
    t_s: f64,
    grid: &FrequencyGrid,
    n_traj: usize,
    seed: u64,
    elements: &[(usize, usize)],
) -> Result<TrajectoryEnsemble> {
    if a_spatial.n() != state.n_qubits() {
        return Err(Error::DimensionMismatch { expected: state.n_qubits(), got: a_spatial.n() });
    }
    check_traj(n_traj)?;
    check_colored(spec, pulses, t_s, grid)?;
    check_elements(state, elements)?;
    let n = a_spatial.n();
    let g = factor_sqrt(a_spatial)?.entries;
    let weights = phase_weights(spec, pulses, t_s, grid);
    let phases: Vec<Vec<f64>> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut rng = trajectory_rng(seed, k);
            let b: Vec<f64> = (0..n).map(|_| sample_unit_phases(&weights, &mut rng)).collect();
            (0..n).map(|j| (0..n).map(|m| g[(m, j)] * b[m]).sum()).collect()
        })
        .collect();
    Ok(ensemble_from_phases(state, &phases, elements, seed, 0.0))
}

/// Slope of `ln(-ln(2 ρ_01))` against `ln t_s`, i.e. the stretched-exponent
/// power of the single-qubit decay.
pub fn stretched_exponent(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("need at least two decay samples".into()));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(t, coh)| {
            let decay = -(2.0 * coh).ln();
            if !(decay > 0.0) {
                return Err(Error::InvalidParameter(format!("coherence {coh} at t = {t} shows no decay")));
            }
            Ok((t.ln(), decay.ln()))
        })
        .collect::<Result<_>>()?;
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Classical RK4 integration of the dephasing Lindbladian.
pub fn lindblad_integrate(state: &QubitRegisterState, a: &DephasingMatrix, t: f64, dt: f64) -> Result<QubitRegisterState> {
    if a.n() != state.n_qubits() {
        return Err(Error::DimensionMismatch { expected: state.n_qubits(), got: a.n() });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if a.gamma() * a.max_eigenvalue() > 0.0 {
        check_step(a, dt)?;
    }
    let generator = LindbladGenerator::new(a, state.n_qubits())?;
    let steps = if t == 0.0 { 0 } else { (t / dt).ceil().max(1.0) as usize };
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let rho = rk4(&generator, state.matrix().clone(), h, steps);
    Ok(QubitRegisterState::from_trusted(state.n_qubits(), rho))
}

fn rk4(generator: &LindbladGenerator, mut rho: DMatrix<C64>, h: f64, steps: usize) -> DMatrix<C64> {
    let hc = C64::new(h, 0.0);
    let half = C64::new(0.5 * h, 0.0);
    let two = C64::new(2.0, 0.0);
    for _ in 0..steps {
        let k1 = generator.apply(&rho);
        let k2 = generator.apply(&(&rho + &k1 * half));
        let k3 = generator.apply(&(&rho + &k2 * half));
        let k4 = generator.apply(&(&rho + &k3 * hc));
        rho += (k1 + k2 * two + k3 * two + k4) * (hc / 6.0);
    }
    rho
}

/// Relative eigenvalue floor below which density-matrix square roots treat
/// eigenvalues as exact zeros.
const SQRT_FLOOR: f64 = 1e-14;

fn check_density(m: &DMatrix<C64>) -> Result<()> {
    let dev = hermiticity_deviation(m);
    if dev > 1e-10 {
        return Err(Error::NotHermitian(dev));
    }
    if (m.trace().re - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("state trace is {}", m.trace())));
    }
    let min = herm_eigen(m).0[0];
    if min < -1e-10 {
        return Err(Error::NegativeEigenvalue(min));
    }
    Ok(())
}

/// Uhlmann root fidelity `√F = ‖√ρ₁ √ρ₂‖₁`.
pub fn root_fidelity(rho1: &DMatrix<C64>, rho2: &DMatrix<C64>) -> Result<f64> {
    if rho1.shape() != rho2.shape() {
        return Err(Error::DimensionMismatch { expected: rho1.nrows(), got: rho2.nrows() });
    }
    check_density(rho1)?;
    check_density(rho2)?;
    let product = herm_psd_sqrt(rho1, SQRT_FLOOR) * herm_psd_sqrt(rho2, SQRT_FLOOR);
    Ok(product.singular_values().sum())
}

/// `ℱ_Q ≈ 8 (1 - √F(ρ₋, ρ₊)) / (2 dξ)²` from states at `ξ ∓ dξ`.
pub fn fidelity_qfi(rho_minus: &DMatrix<C64>, rho_plus: &DMatrix<C64>, d_xi: f64) -> Result<QfiResult> {
    if !(d_xi > 0.0) {
        return Err(Error::InvalidParameter(format!("d_xi must be > 0, got {d_xi}")));
    }
    let sf = root_fidelity(rho_minus, rho_plus)?.min(1.0);
    Ok(QfiResult { value: 8.0 * (1.0 - sf) / (2.0 * d_xi).powi(2), method: QfiMethod::FidelityFd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve_markovian, evolve_markovian_dxi, evolve_spatiotemporal, PureState};
    use crate::linalg::max_abs_diff;
    use crate::noise_model::{build_dephasing_matrix, PowerLawSpatialModel};
    use crate::pulse_filter::{zeta_closed_form, CutoffShape};
    use crate::qfi::qfi_sld;

    fn a1(v: f64) -> DephasingMatrix {
        DephasingMatrix::from_entries(DMatrix::from_element(1, 1, v), 1.0).unwrap()
    }

    fn example3() -> DephasingMatrix {
        build_dephasing_matrix(&PowerLawSpatialModel::new(3, 1.0, 1.0).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let v: Vec<f64> = (0..100_000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-9);
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn white_single_qubit() {
        let rho = PureState::plus_product(1).unwrap().density_matrix();
        let ens = sample_white_correlated(&rho, &a1(2.0), 1.0, 0.005, 20_000, 11, &[(0, 1)]).unwrap();
        let re = ens.re(0, 1).unwrap();
        assert!(re.z_score(0.5 * (-0.5f64).exp()) < 4.0, "{re:?}");
        assert!(ens.im(0, 1).unwrap().z_score(0.0) < 4.0);
    }

    #[test]
    fn white_rejects_coarse_steps() {
        let rho = PureState::plus_product(1).unwrap().density_matrix();
        let r = sample_white_correlated(&rho, &a1(2.0), 1.0, 0.01, 1000, 1, &[(0, 1)]);
        assert!(matches!(r, Err(Error::StepTooCoarse { .. })));
        let r = sample_white_correlated(&rho, &a1(2.0), 1.0, 0.001, 10, 1, &[(0, 1)]);
        assert!(r.is_err());
    }

    #[test]
    fn increments_have_target_covariance() {
        let z = increment_covariance_check(&example3(), 1e-3, 50_000, 5).unwrap();
        assert!(z < 5.0, "{z}");
    }

    #[test]
    fn seeded_streams_extend() {
        let rho = PureState::ghz(3).unwrap().density_matrix();
        let a = example3();
        let run = |n| sample_white_correlated(&rho, &a, 0.1, 0.002, n, 3, &[(0, 7)]).unwrap();
        assert_eq!(run(500), run(500));
        // the first 500 trajectories of a longer run are the same draws
        let phases_short = run(500).re(0, 7).unwrap().mean;
        let phases_long = run(1000).re(0, 7).unwrap().mean;
        assert_ne!(phases_short, phases_long);
    }

    #[test]
    fn toggled_quadratures_match_filter() {
        let seq = PulseSequence::new(vec![0.2, 0.5, 0.9]).unwrap();
        for &w in &[0.0, 0.3, 5.0, 80.0] {
            let (c, s) = toggled_quadratures(&seq, 1.3, w);
            let f = crate::pulse_filter::filter_function(&seq, 1.3, w);
            assert!((c - f.re).abs() < 1e-13 && (s - f.im).abs() < 1e-13);
        }
    }

    #[test]
    fn grid_reproduces_zeta() {
        let spec = SpectralModel::new(1.0, 1.0, 1e-6, CutoffShape::FlattenBelow).unwrap();
        let hahn = PulseSequence::hahn();
        let grid = FrequencyGrid::standard(&spec, 1.0).unwrap();
        let var = grid_phase_variance(&spec, &hahn, 1.0, &grid);
        let zeta = zeta_closed_form(&spec, &hahn, 1.0).unwrap().value;
        assert!((0.5 * var - zeta).abs() < 5e-3 * zeta, "{} vs {zeta}", 0.5 * var);
    }

    #[test]
    fn grid_checks() {
        let spec = SpectralModel::new(0.5, 1.0, 1e-6, CutoffShape::FlattenBelow).unwrap();
        assert!(matches!(FrequencyGrid::build(&spec, 1.0, 100, 100, 200.0), Err(Error::GridTooCoarse(_))));
        assert!(matches!(FrequencyGrid::build(&spec, 1.0, 1024, 4096, 50.0), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn colored_hahn_matches_closed_form() {
        let p = 1.0;
        let hahn = PulseSequence::hahn();
        let probe = SpectralModel::new(p, 1.0, 1e-6, CutoffShape::FlattenBelow).unwrap();
        let c = zeta_closed_form(&probe, &hahn, 1.0).unwrap().value;
        let spec = SpectralModel { xi: 0.5 / c, ..probe };
        let grid = FrequencyGrid::standard(&spec, 1.0).unwrap();
        let ens = sample_colored_single(&spec, &hahn, 1.0, &grid, 4000, 9).unwrap();
        let re = ens.re(0, 1).unwrap();
        assert!(re.z_score(0.5 * (-0.5f64).exp()) < 4.0, "{re:?}");
    }

    #[test]
    fn colored_spatial_uncorrelated_factorizes() {
        let spec = SpectralModel::new(0.5, 0.7, 1e-6, CutoffShape::FlattenBelow).unwrap();
        let hahn = PulseSequence::hahn();
        let a = build_dephasing_matrix(&PowerLawSpatialModel::new(2, 1.0, 1.0).unwrap(), 1.0).unwrap();
        let diag = a.diagonal_part();
        let rho = PureState::ghz(2).unwrap().density_matrix();
        let grid = FrequencyGrid::standard(&spec, 1.0).unwrap();
        let ens = sample_colored_spatial(&rho, &diag, &spec, &hahn, 1.0, &grid, 2000, 4, &[(0, 3)]).unwrap();
        let exact = evolve_spatiotemporal(&rho, &diag, &spec, &hahn, 1.0).unwrap().matrix()[(0, 3)].re;
        assert!(ens.re(0, 3).unwrap().z_score(exact) < 4.0);
    }

    #[test]
    fn stretched_exponent_of_exact_decay() {
        let samples: Vec<(f64, f64)> =
            [0.5, 0.8, 1.0, 1.5, 2.0].iter().map(|&t: &f64| (t, 0.5 * (-0.3 * t.powf(1.7)).exp())).collect();
        assert!((stretched_exponent(&samples).unwrap() - 1.7).abs() < 1e-12);
    }

    #[test]
    fn rk4_matches_closed_form() {
        let rho = PureState::ghz(3).unwrap().density_matrix();
        let a = example3();
        let dt = 0.01 / a.max_eigenvalue();
        let num = lindblad_integrate(&rho, &a, 1.5, dt).unwrap();
        let exact = evolve_markovian(&rho, &a, 1.5).unwrap();
        assert!(max_abs_diff(num.matrix(), exact.matrix()) < 1e-9);
        assert!((num.matrix().trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rk4_zero_matrix_is_identity() {
        let rho = PureState::plus_product(2).unwrap().density_matrix();
        let zero = DephasingMatrix::from_entries(DMatrix::zeros(2, 2), 1.0).unwrap();
        assert_eq!(lindblad_integrate(&rho, &zero, 2.0, 0.1).unwrap(), rho);
    }

    #[test]
    fn rk4_fourth_order() {
        // steps far coarser than the public guard allows, to see the order
        let rho = PureState::plus_product(1).unwrap().density_matrix();
        let generator = LindbladGenerator::new(&a1(2.0), 1).unwrap();
        let exact = 0.5 * (-0.5f64 * 3.0).exp();
        let err = |steps: usize| (rk4(&generator, rho.matrix().clone(), 3.0 / steps as f64, steps)[(0, 1)].re - exact).abs();
        let ratio = err(15) / err(30);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn fidelity_examples() {
        let rho = PureState::ghz(2).unwrap().density_matrix();
        assert!(fidelity_qfi(rho.matrix(), rho.matrix(), 1e-4).unwrap().value.abs() < 1e-6);
        // e^{-iφZ/2}|+⟩ at φ = ±dφ
        let d = 1e-4;
        let state = |phi: f64| {
            let amps = nalgebra::DVector::from_vec(vec![
                C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, -phi / 2.0),
                C64::from_polar(std::f64::consts::FRAC_1_SQRT_2, phi / 2.0),
            ]);
            PureState::new(amps).unwrap().density_matrix().into_matrix()
        };
        let q = fidelity_qfi(&state(-d), &state(d), d).unwrap();
        assert!((q.value - 1.0).abs() < 1e-6, "{}", q.value);
        assert_eq!(q.method, QfiMethod::FidelityFd);
    }

    #[test]
    fn fidelity_matches_sld_on_dephasing() {
        let rho0 = PureState::plus_product(1).unwrap().density_matrix();
        let a = a1(2.0);
        let (xi, t) = (1.0, 0.25);
        let d = 1e-4 * xi;
        let at = |x: f64| evolve_markovian(&rho0, &a.scaled(x / xi), t).unwrap().into_matrix();
        let fd = fidelity_qfi(&at(xi - d), &at(xi + d), d).unwrap().value;
        let rho = evolve_markovian(&rho0, &a, t).unwrap();
        let sld = qfi_sld(rho.matrix(), &evolve_markovian_dxi(&rho0, &a, xi, t).unwrap()).unwrap().value;
        assert!((fd - sld).abs() < 1e-4 * sld, "{fd} vs {sld}");
    }

    #[test]
    fn fidelity_rejects_bad_input() {
        let bad = DMatrix::from_row_slice(2, 2, &[C64::new(1.5, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-0.5, 0.0)]);
        let good = PureState::plus_product(1).unwrap().density_matrix().into_matrix();
        assert!(matches!(fidelity_qfi(&bad, &good, 1e-4), Err(Error::NegativeEigenvalue(_))));
    }
}
