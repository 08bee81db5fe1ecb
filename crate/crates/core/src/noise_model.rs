//! Spatial dephasing coefficient matrix for power-law correlated noise on a
//! one-dimensional lattice, and its symmetric square root.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::sym_eigen;
use crate::{Error, Result};

/// Relative PSD tolerance: eigenvalues down to `-PSD_TOL * λ_max` are
/// accepted (and clamped to zero when factoring).
pub const PSD_TOL: f64 = 1e-10;

/// Default diagonal scale `a_d`, giving `A_jj = 2ξ`.
pub const DEFAULT_DIAG_SCALE: f64 = 2.0;

/// `A_jl = ξ |j-l|^{-α}` off the diagonal, `A_jj = ξ a_d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSpatialModel {
    pub n_sensors: usize,
    pub alpha: f64,
    pub xi: f64,
    pub diag_scale: f64,
}

impl PowerLawSpatialModel {
    pub fn new(n_sensors: usize, alpha: f64, xi: f64) -> Result<Self> {
        Self::with_diag_scale(n_sensors, alpha, xi, DEFAULT_DIAG_SCALE)
    }

    pub fn with_diag_scale(n_sensors: usize, alpha: f64, xi: f64, diag_scale: f64) -> Result<Self> {
        let m = Self { n_sensors, alpha, xi, diag_scale };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sensors == 0 {
            return Err(Error::InvalidParameter("n_sensors must be >= 1".into()));
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("xi", self.xi)?;
        positive("diag_scale", self.diag_scale)
    }

    /// Entry at lattice separation `d = |j - l|`.
    pub fn entry_at_distance(&self, d: usize) -> f64 {
        if d == 0 {
            self.xi * self.diag_scale
        } else {
            self.xi * (d as f64).powf(-self.alpha)
        }
    }

    /// Same model at unit strength (`ξ = 1`).
    pub fn unit_strength(&self) -> Self {
        Self { xi: 1.0, ..*self }
    }

    /// `Σ_jl A_jl` from the Toeplitz structure in O(N), without forming the
    /// matrix. Terms are accumulated from the smallest upward.
    pub fn total_sum(&self) -> f64 {
        let n = self.n_sensors;
        let mut off = 0.0;
        for d in (1..n).rev() {
            off += (n - d) as f64 * (d as f64).powf(-self.alpha);
        }
        n as f64 * self.xi * self.diag_scale + 2.0 * self.xi * off
    }

    /// `Σ_j A_jj = N ξ a_d`.
    pub fn diagonal_sum(&self) -> f64 {
        self.n_sensors as f64 * self.xi * self.diag_scale
    }
}

/// Real symmetric PSD coefficient matrix `A` together with the base rate γ.
#[derive(Debug, Clone, PartialEq)]
pub struct DephasingMatrix {
    entries: DMatrix<f64>,
    gamma: f64,
}

impl DephasingMatrix {
    /// Wraps an arbitrary matrix after checking symmetry and PSD. Asymmetry
    /// up to `1e-12` of the largest entry is removed by symmetrizing.
    pub fn from_entries(entries: DMatrix<f64>, gamma: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), got: entries.ncols() });
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be >= 0, got {gamma}")));
        }
        let scale = entries.amax().max(f64::MIN_POSITIVE);
        let asym = (&entries - entries.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidParameter(format!("matrix is not symmetric (deviation {asym:e})")));
        }
        let entries = if asym > 0.0 { (&entries + entries.transpose()) * 0.5 } else { entries };
        let a = Self { entries, gamma };
        a.check_psd()?;
        Ok(a)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { entries: self.entries.clone(), gamma }
    }

    /// Entrywise scaling `A → c A` (same γ).
    pub fn scaled(&self, c: f64) -> Self {
        Self { entries: &self.entries * c, gamma: self.gamma }
    }

    /// Copy with all off-diagonal entries set to zero.
    pub fn diagonal_part(&self) -> Self {
        let n = self.n();
        Self {
            entries: DMatrix::from_fn(n, n, |i, j| if i == j { self.entries[(i, i)] } else { 0.0 }),
            gamma: self.gamma,
        }
    }

    pub fn total_sum(&self) -> f64 {
        self.entries.sum()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// First negative entry in row-major order, if any.
    pub fn first_negative_entry(&self) -> Option<(usize, usize, f64)> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, self.entries[(i, j)]))
            .find(|&(_, _, v)| v < 0.0)
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigen(&self.entries).0.iter().copied().collect()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    fn check_psd(&self) -> Result<()> {
        let ev = self.eigenvalues();
        let (min, max) = (ev[0], ev[ev.len() - 1]);
        if min < -PSD_TOL * max.max(0.0) || (max <= 0.0 && min < 0.0) {
            return Err(Error::PsdViolation { min_eig: min, max_eig: max });
        }
        Ok(())
    }
}

/// Square-root factor `g` with `gᵀ g = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    pub entries: DMatrix<f64>,
}

impl FactorMatrix {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.entries.transpose() * &self.entries
    }
}

/// Builds the power-law matrix and verifies it is PSD.
pub fn build_dephasing_matrix(model: &PowerLawSpatialModel, gamma: f64) -> Result<DephasingMatrix> {
    model.validate()?;
    let n = model.n_sensors;
    let entries = DMatrix::from_fn(n, n, |i, j| model.entry_at_distance(i.abs_diff(j)));
    DephasingMatrix::from_entries(entries, gamma)
}

/// Symmetric PSD square root `V diag(√λ) Vᵀ`, with eigenvalues in
/// `[-1e-10 λ_max, 0]` clamped to zero.
pub fn factor_sqrt(a: &DephasingMatrix) -> Result<FactorMatrix> {
    let (vals, vecs) = sym_eigen(a.entries());
    let n = vals.len();
    let max = vals[n - 1];
    if vals[0] < -PSD_TOL * max.max(0.0) {
        return Err(Error::PsdViolation { min_eig: vals[0], max_eig: max });
    }
    let roots = vals.map(|l| l.max(0.0).sqrt());
    let scaled = DMatrix::from_fn(n, n, |i, k| vecs[(i, k)] * roots[k]);
    let g = &scaled * vecs.transpose();
    // symmetric by construction up to rounding; make it exact
    let g = (&g + g.transpose()) * 0.5;
    Ok(FactorMatrix { entries: g })
}

/// `[∂_ξ g]ᵀ[∂_ξ g]` for the linear-in-ξ family `A(ξ) = ξ A(1)` with the
/// symmetric root `g(ξ) = √ξ g(1)`, which equals `A(ξ) / (4ξ²)`.
pub fn dxi_factor_product(a: &DephasingMatrix, xi: f64) -> Result<DMatrix<f64>> {
    if !(xi.is_finite() && xi > 0.0) {
        return Err(Error::InvalidParameter(format!("xi must be > 0, got {xi}")));
    }
    Ok(a.entries() / (4.0 * xi * xi))
}
