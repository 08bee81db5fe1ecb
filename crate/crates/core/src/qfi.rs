//! Quantum Fisher information about the noise strength ξ: the exact SLD
//! QFI, the short-time rate, entangled and separable optima, the advantage
//! ratio and the multi-parameter rate matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dynamics::PureState;
use crate::linalg::{herm_eigen, hermiticity_deviation, sym_eigen};
use crate::noise_model::DephasingMatrix;
use crate::{Error, Result, C64};

/// Relative eigenvalue floor in the SLD spectral sum.
pub const SLD_FLOOR: f64 = 1e-12;

/// Largest register for which entangled optima are cross-checked against an
/// explicit GHZ state.
const GHZ_CHECK_MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QfiMethod {
    #[serde(rename = "SLD")]
    Sld,
    #[serde(rename = "FidelityFD")]
    FidelityFd,
    ShortTimeRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QfiResult {
    pub value: f64,
    pub method: QfiMethod,
}

/// `ℱ_Q = 2 Σ_{kl} |⟨k|∂ρ|l⟩|² / (λ_k + λ_l)`, dropping pairs with
/// `λ_k + λ_l ≤ 1e-12 λ_max`.
pub fn qfi_sld(rho: &DMatrix<C64>, drho: &DMatrix<C64>) -> Result<QfiResult> {
    let dim = rho.nrows();
    if rho.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: rho.ncols() });
    }
    if drho.nrows() != dim || drho.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: drho.nrows() });
    }
    for m in [rho, drho] {
        let dev = hermiticity_deviation(m);
        if dev > 1e-10 {
            return Err(Error::NotHermitian(dev));
        }
    }
    if (rho.trace().re - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("state trace is {}", rho.trace())));
    }
    if drho.trace().norm() > 1e-10 {
        return Err(Error::InvalidParameter(format!("derivative trace is {}", drho.trace())));
    }
    let (vals, vecs) = herm_eigen(rho);
    let lmax = vals[dim - 1];
    if vals[0] < -1e-10 * lmax.max(1.0) {
        return Err(Error::NegativeEigenvalue(vals[0]));
    }
    let d = vecs.adjoint() * drho * &vecs;
    let floor = SLD_FLOOR * lmax;
    let mut value = 0.0;
    for k in 0..dim {
        for l in 0..dim {
            let s = vals[k] + vals[l];
            if s > floor {
                value += 2.0 * d[(k, l)].norm_sqr() / s;
            }
        }
    }
    Ok(QfiResult { value, method: QfiMethod::Sld })
}

fn check_xi(xi: f64) -> Result<()> {
    if xi.is_finite() && xi > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("xi must be > 0, got {xi}")))
    }
}

fn check_n(psi: &PureState, a: &DephasingMatrix) -> Result<()> {
    if psi.n_qubits() != a.n() {
        return Err(Error::DimensionMismatch { expected: a.n(), got: psi.n_qubits() });
    }
    Ok(())
}

/// `Σ_ab A_ab ⟨Δh_a Δh_b⟩`.
fn weighted_correlation(a: &DMatrix<f64>, corr: &DMatrix<f64>) -> f64 {
    a.component_mul(corr).sum()
}

/// Short-time QFI rate `(γ / 2ξ²) Σ_ab A_ab ⟨ψ|Δh_a Δh_b|ψ⟩` for `A = A(ξ)`
/// linear in ξ.
pub fn fq_short_time(psi: &PureState, a: &DephasingMatrix, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    check_n(psi, a)?;
    let corr = psi.connected_correlators();
    Ok(a.gamma() / (2.0 * xi * xi) * weighted_correlation(a.entries(), &corr))
}

/// Best rate over product states, `(γ / 8ξ²) Σ_a A_aa`, reached by `|+⟩^{⊗N}`.
pub fn optimal_separable_rate(a: &DephasingMatrix, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    Ok(a.gamma() / (8.0 * xi * xi) * a.trace())
}

/// Best rate over all states, `(γ / 8ξ²) Σ_ab A_ab`, reached by GHZ.
/// Requires nonnegative entries.
pub fn optimal_entangled_rate(a: &DephasingMatrix, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    if let Some((row, col, value)) = a.first_negative_entry() {
        return Err(Error::NegativeEntries { row, col, value });
    }
    let rate = a.gamma() / (8.0 * xi * xi) * a.total_sum();
    if a.n() <= GHZ_CHECK_MAX_QUBITS {
        let ghz = fq_short_time(&PureState::ghz(a.n())?, a, xi)?;
        debug_assert!((ghz - rate).abs() <= 1e-12 * rate.abs().max(1e-300), "GHZ rate {ghz} vs bound {rate}");
    }
    Ok(rate)
}

/// `R = Σ_ab A_ab / Σ_a A_aa`.
pub fn advantage_ratio(a: &DephasingMatrix, xi: f64) -> Result<f64> {
    Ok(optimal_entangled_rate(a, xi)? / optimal_separable_rate(a, xi)?)
}

/// Two-point Richardson extrapolation to `h → 0` of a quantity with a
/// leading error linear in `h`.
pub fn richardson_limit(h1: f64, f1: f64, h2: f64, f2: f64) -> f64 {
    (h1 * f2 - h2 * f1) / (h1 - h2)
}

/// Multi-parameter rate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiparamFqMatrix {
    pub n_params: usize,
    pub entries: DMatrix<f64>,
}

impl MultiparamFqMatrix {
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> =
            (0..self.n_params).map(|i| self.entries.row(i).iter().copied().collect()).collect();
        json!({ "n": self.n_params, "entries": rows })
    }
}

/// `[F]_ℓj = 2γ Σ_ab ([∂_ℓ g]ᵀ[∂_j g])_ab ⟨Δh_a Δh_b⟩` from the derivatives
/// `∂_ℓ g` of the noise factor (`A = gᵀ g`) with respect to each parameter.
pub fn fq_multiparam_matrix(psi: &PureState, factor_derivatives: &[DMatrix<f64>], gamma: f64) -> Result<MultiparamFqMatrix> {
    let n = psi.n_qubits();
    let n_params = factor_derivatives.len();
    if n_params == 0 {
        return Err(Error::InvalidParameter("at least one parameter is required".into()));
    }
    for d in factor_derivatives {
        if d.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: d.ncols() });
        }
    }
    let corr = psi.connected_correlators();
    let entries = DMatrix::from_fn(n_params, n_params, |l, j| {
        2.0 * gamma * weighted_correlation(&(factor_derivatives[l].transpose() * &factor_derivatives[j]), &corr)
    });
    let asym = (&entries - entries.transpose()).amax();
    if asym > 1e-10 * entries.amax().max(1.0) {
        return Err(Error::AsymmetricInformation(asym));
    }
    Ok(MultiparamFqMatrix { n_params, entries: (&entries + entries.transpose()) * 0.5 })
}

/// Result of [`linear_function_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBound {
    /// `aᵀ F⁺ a` per unit time.
    pub value: f64,
    pub rank: usize,
    /// Set when `F` was rank deficient and the pseudo-inverse was used.
    pub singular: bool,
}

/// Variance bound `aᵀ F⁻¹ a` for estimating `Σ_ℓ a_ℓ ξ_ℓ`. Eigenvalues below
/// `1e-12 λ_max` are dropped and the result is flagged as singular.
pub fn linear_function_bound(f: &MultiparamFqMatrix, weights: &[f64]) -> Result<LinearBound> {
    if weights.len() != f.n_params {
        return Err(Error::DimensionMismatch { expected: f.n_params, got: weights.len() });
    }
    let (vals, vecs) = sym_eigen(&f.entries);
    let lmax = vals[vals.len() - 1];
    if lmax <= 0.0 {
        return Err(Error::InvalidParameter("information matrix is zero".into()));
    }
    let a = DVector::from_column_slice(weights);
    let mut value = 0.0;
    let mut rank = 0;
    for (k, &l) in vals.iter().enumerate() {
        if l > SLD_FLOOR * lmax {
            let proj = vecs.column(k).dot(&a);
            value += proj * proj / l;
            rank += 1;
        }
    }
    let singular = rank < f.n_params;
    if singular {
        log::warn!("information matrix has rank {rank} < {}; using the pseudo-inverse", f.n_params);
    }
    Ok(LinearBound { value, rank, singular })
}
