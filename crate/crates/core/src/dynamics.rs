//! Exact evolution of N-qubit register states under correlated pure
//! dephasing, with generators `h_j = Z_j / 2`.
//!
//! Basis convention: qubit `j` is bit `N-1-j` of the basis index (qubit 0 is
//! the most significant), and bit value 0 is the `Z = +1` eigenstate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::linalg::{herm_eigen, hermiticity_deviation};
use crate::noise_model::DephasingMatrix;
use crate::pulse_filter::{coefficient_closed_form, PulseSequence, SpectralModel};
use crate::{Error, Result, C64};

/// Largest register handled with dense matrices.
pub const MAX_QUBITS: usize = 14;

/// Registers up to this many qubits get a full eigenvalue PSD check on
/// construction; larger ones are checked for trace and Hermiticity only.
const PSD_CHECK_MAX_QUBITS: usize = 8;

/// `Z_j` eigenvalue (±1) of qubit `j` in basis state `index`.
#[inline]
pub fn spin(index: usize, j: usize, n: usize) -> f64 {
    if (index >> (n - 1 - j)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidParameter(format!("qubit count must be in 1..={MAX_QUBITS}, got {n}")));
    }
    Ok(())
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("dimension {dim} is not 2^N")));
    }
    let n = dim.trailing_zeros() as usize;
    check_qubits(n)?;
    Ok(n)
}

/// Normalized pure state of an N-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amps: DVector<C64>,
}

impl PureState {
    /// Wraps amplitudes; the norm must be 1 within 1e-10.
    pub fn new(amps: DVector<C64>) -> Result<Self> {
        let n_qubits = qubits_for_dim(amps.len())?;
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Unnormalized(norm));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes the given amplitudes first.
    pub fn normalized(amps: DVector<C64>) -> Result<Self> {
        let norm = amps.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Unnormalized(norm));
        }
        Self::new(amps / C64::new(norm, 0.0))
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1 << n;
        if index >= dim {
            return Err(Error::InvalidParameter(format!("basis index {index} >= {dim}")));
        }
        let mut amps = DVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits: n, amps })
    }

    /// `(|0…0⟩ + |1…1⟩)/√2`.
    pub fn ghz(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1 << n;
        let mut amps = DVector::zeros(dim);
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        amps[0] = a;
        amps[dim - 1] = a;
        Ok(Self { n_qubits: n, amps })
    }

    /// `|+⟩^{⊗N}`.
    pub fn plus_product(n: usize) -> Result<Self> {
        Self::product(&vec![[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]; n])
    }

    /// Tensor product of single-qubit states `[a0, a1]` (normalized here).
    pub fn product(qubits: &[[C64; 2]]) -> Result<Self> {
        let n = qubits.len();
        check_qubits(n)?;
        let local: Vec<[C64; 2]> = qubits
            .iter()
            .map(|q| {
                let norm = (q[0].norm_sqr() + q[1].norm_sqr()).sqrt();
                [q[0] / norm, q[1] / norm]
            })
            .collect();
        let amps = DVector::from_fn(1 << n, |s, _| {
            (0..n).fold(C64::new(1.0, 0.0), |acc, j| acc * local[j][(s >> (n - 1 - j)) & 1])
        });
        Ok(Self { n_qubits: n, amps })
    }

    /// Haar-distributed random state (normalized complex Gaussian vector).
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Result<Self> {
        check_qubits(n)?;
        let amps = DVector::from_fn(1 << n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        Self::normalized(amps)
    }

    /// Random product of single-qubit states.
    pub fn random_product<R: Rng>(n: usize, rng: &mut R) -> Result<Self> {
        let qubits: Vec<[C64; 2]> = (0..n)
            .map(|_| {
                [
                    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
                    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
                ]
            })
            .collect();
        Self::product(&qubits)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    /// Computational-basis probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Connected correlators `⟨Δh_a Δh_b⟩` for `h = Z/2`, as an N×N matrix.
    pub fn connected_correlators(&self) -> DMatrix<f64> {
        let n = self.n_qubits;
        let probs = self.probabilities();
        let mut mean = vec![0.0; n];
        let mut second = DMatrix::<f64>::zeros(n, n);
        for (s, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for a in 0..n {
                let sa = 0.5 * spin(s, a, n);
                mean[a] += p * sa;
                for b in 0..n {
                    second[(a, b)] += p * sa * 0.5 * spin(s, b, n);
                }
            }
        }
        DMatrix::from_fn(n, n, |a, b| second[(a, b)] - mean[a] * mean[b])
    }

    pub fn density_matrix(&self) -> QubitRegisterState {
        QubitRegisterState { n_qubits: self.n_qubits, matrix: &self.amps * self.amps.adjoint() }
    }
}

/// Density matrix of an N-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitRegisterState {
    n_qubits: usize,
    matrix: DMatrix<C64>,
}

impl QubitRegisterState {
    /// Validates trace (1e-12), Hermiticity (1e-12) and, for small
    /// registers, positivity (min eigenvalue ≥ -1e-10).
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let n_qubits = qubits_for_dim(matrix.nrows())?;
        let dev = hermiticity_deviation(&matrix);
        if dev > 1e-12 {
            return Err(Error::NotHermitian(dev));
        }
        let tr = matrix.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(Error::InvalidParameter(format!("trace must be 1, got {tr}")));
        }
        if n_qubits <= PSD_CHECK_MAX_QUBITS {
            let min = herm_eigen(&matrix).0[0];
            if min < -1e-10 {
                return Err(Error::NegativeEigenvalue(min));
            }
        }
        Ok(Self { n_qubits, matrix })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let dim = 1 << n;
        Ok(Self { n_qubits: n, matrix: DMatrix::identity(dim, dim) / C64::new(dim as f64, 0.0) })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    /// Wraps without validation; used for states produced by maps that
    /// preserve the invariants exactly.
    pub(crate) fn from_trusted(n_qubits: usize, matrix: DMatrix<C64>) -> Self {
        Self { n_qubits, matrix }
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }
}

impl From<&PureState> for QubitRegisterState {
    fn from(p: &PureState) -> Self {
        p.density_matrix()
    }
}

fn check_dims(state_qubits: usize, a: &DephasingMatrix) -> Result<()> {
    if a.n() != state_qubits {
        return Err(Error::DimensionMismatch { expected: state_qubits, got: a.n() });
    }
    Ok(())
}

/// Decay exponent per unit `γt` of the coherence `|s⟩⟨s'|`:
/// `q = (Δs)ᵀ A (Δs) / 16` with `Δs_j = s_j - s'_j ∈ {-2, 0, 2}`.
pub fn coherence_rate(a: &DMatrix<f64>, s: usize, sp: usize, n: usize) -> f64 {
    let diff = s ^ sp;
    if diff == 0 {
        return 0.0;
    }
    // (Δs_j / 2) = ±1 on differing qubits
    let mut idx = [0usize; MAX_QUBITS];
    let mut sign = [0.0f64; MAX_QUBITS];
    let mut k = 0;
    for j in 0..n {
        if (diff >> (n - 1 - j)) & 1 == 1 {
            idx[k] = j;
            sign[k] = spin(s, j, n);
            k += 1;
        }
    }
    let mut q = 0.0;
    for u in 0..k {
        for v in 0..k {
            q += sign[u] * sign[v] * a[(idx[u], idx[v])];
        }
    }
    q / 4.0
}

/// Multiplies each coherence by `exp(-scale · q(s, s'))`.
fn apply_dephasing(state: &QubitRegisterState, a: &DMatrix<f64>, scale: f64) -> QubitRegisterState {
    let n = state.n_qubits;
    let dim = state.dim();
    let src = state.matrix();
    // column-major storage: build column by column in parallel
    let cols: Vec<Vec<C64>> = (0..dim)
        .into_par_iter()
        .map(|c| {
            (0..dim)
                .map(|r| {
                    let z = src[(r, c)];
                    if r == c || z == C64::new(0.0, 0.0) {
                        z
                    } else {
                        z * (-scale * coherence_rate(a, r, c, n)).exp()
                    }
                })
                .collect()
        })
        .collect();
    let data: Vec<C64> = cols.into_iter().flatten().collect();
    QubitRegisterState::from_trusted(n, DMatrix::from_vec(dim, dim, data))
}

/// Closed-form solution of the dephasing Lindbladian:
/// `ρ_{ss'}(t) = ρ_{ss'}(0) exp(-γ t q(s, s'))`. Populations are untouched.
pub fn evolve_markovian(state: &QubitRegisterState, a: &DephasingMatrix, t: f64) -> Result<QubitRegisterState> {
    check_dims(state.n_qubits, a)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    Ok(apply_dephasing(state, a.entries(), a.gamma() * t))
}

/// `∂_ξ ρ(t)` for the linear family `A(ξ) = ξ A(1)`, evaluated at the given
/// `A = A(ξ)`: each coherence picks up the factor `-γ t q / ξ`.
pub fn evolve_markovian_dxi(
    state: &QubitRegisterState,
    a: &DephasingMatrix,
    xi: f64,
    t: f64,
) -> Result<DMatrix<C64>> {
    let evolved = evolve_markovian(state, a, t)?;
    let n = state.n_qubits;
    let gt = a.gamma() * t / xi;
    let m = evolved.matrix();
    Ok(DMatrix::from_fn(state.dim(), state.dim(), |r, c| {
        m[(r, c)] * (-gt * coherence_rate(a.entries(), r, c, n))
    }))
}

/// `t_eff` such that Markovian evolution under `ξ̃ A₁` for `t_eff` (at γ = 1)
/// reproduces the pulsed `1/f^p` evolution at shot time `t_s`:
/// `t_eff = 4 t_s^{1+p} C`.
pub fn effective_time(spec: &SpectralModel, pulses: &PulseSequence, t_s: f64) -> Result<f64> {
    let c = coefficient_closed_form(pulses, spec.p)?.value;
    Ok(4.0 * t_s.powf(1.0 + spec.p) * c)
}

/// Evolution under factorized spatiotemporal `1/f^p` noise with the given
/// unit-strength spatial matrix (its γ is ignored):
/// `ρ_{ss'} → ρ_{ss'} exp(-ξ̃ t_s^{1+p} C · (Δs)ᵀ A₁ (Δs) / 4)`.
/// A single qubit with `A₁ = [[1]]` decays as `exp(-ζ(t_s))`.
pub fn evolve_spatiotemporal(
    state: &QubitRegisterState,
    a_spatial: &DephasingMatrix,
    spec: &SpectralModel,
    pulses: &PulseSequence,
    t_s: f64,
) -> Result<QubitRegisterState> {
    check_dims(state.n_qubits, a_spatial)?;
    spec.validate()?;
    if !(t_s.is_finite() && t_s >= 0.0) {
        return Err(Error::InvalidParameter(format!("shot time must be >= 0, got {t_s}")));
    }
    let t_eff = effective_time(spec, pulses, t_s)?;
    if t_s == 0.0 {
        return Ok(state.clone());
    }
    Ok(apply_dephasing(state, a_spatial.entries(), spec.xi * t_eff))
}

/// Precomputed pieces of `ℒρ = (γ/2) Σ_jl A_jl (h_l ρ h_j - ½{h_j h_l, ρ})`
/// using dense generator matrices.
pub struct LindbladGenerator {
    gamma: f64,
    h: Vec<DMatrix<C64>>,
    k: Vec<DMatrix<C64>>,
    m: DMatrix<C64>,
}

impl LindbladGenerator {
    pub fn new(a: &DephasingMatrix, n_qubits: usize) -> Result<Self> {
        check_dims(n_qubits, a)?;
        check_qubits(n_qubits)?;
        let dim = 1 << n_qubits;
        let h: Vec<DMatrix<C64>> = (0..n_qubits)
            .map(|j| {
                DMatrix::from_diagonal(&DVector::from_fn(dim, |s, _| C64::new(0.5 * spin(s, j, n_qubits), 0.0)))
            })
            .collect();
        let e = a.entries();
        let k: Vec<DMatrix<C64>> = (0..n_qubits)
            .map(|j| {
                (0..n_qubits).fold(DMatrix::zeros(dim, dim), |acc, l| acc + &h[l] * C64::new(e[(j, l)], 0.0))
            })
            .collect();
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..n_qubits {
            for l in 0..n_qubits {
                m += (&h[j] * &h[l]) * C64::new(e[(j, l)], 0.0);
            }
        }
        Ok(Self { gamma: a.gamma(), h, k, m })
    }

    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = (&self.m * rho + rho * &self.m) * C64::new(-0.5, 0.0);
        for (k, h) in self.k.iter().zip(&self.h) {
            out += k * rho * h;
        }
        out * C64::new(0.5 * self.gamma, 0.0)
    }
}

/// One evaluation of the Lindbladian on an arbitrary matrix.
pub fn lindblad_rhs(rho: &DMatrix<C64>, a: &DephasingMatrix) -> Result<DMatrix<C64>> {
    let n = qubits_for_dim(rho.nrows())?;
    Ok(LindbladGenerator::new(a, n)?.apply(rho))
}
