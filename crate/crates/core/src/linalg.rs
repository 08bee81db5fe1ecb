//! Small dense linear-algebra helpers shared by the physics modules.

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// Eigenvalues (ascending) and matching eigenvector columns of a real
/// symmetric matrix.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    sort_eigen(eig.eigenvalues, eig.eigenvectors)
}

/// Eigen-decomposition of a Hermitian complex matrix, ascending eigenvalues.
pub fn herm_eigen(m: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let eig = m.clone().symmetric_eigen();
    sort_eigen(eig.eigenvalues, eig.eigenvectors)
}

fn sort_eigen<T: nalgebra::Scalar + Copy>(
    vals: DVector<f64>,
    vecs: DMatrix<T>,
) -> (DVector<f64>, DMatrix<T>) {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let sorted = DVector::from_iterator(vals.len(), idx.iter().map(|&i| vals[i]));
    let cols: Vec<_> = idx.iter().map(|&i| vecs.column(i).into_owned()).collect();
    (sorted, DMatrix::from_columns(&cols))
}

/// Largest entrywise modulus of `a - a†`.
pub fn hermiticity_deviation(a: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Square root of a Hermitian PSD matrix. Eigenvalues at or below
/// `floor_rel * λ_max` are treated as exact zeros.
pub fn herm_psd_sqrt(m: &DMatrix<C64>, floor_rel: f64) -> DMatrix<C64> {
    let (vals, vecs) = herm_eigen(m);
    let lmax = vals.iter().cloned().fold(0.0, f64::max);
    let floor = floor_rel * lmax;
    let roots = vals.map(|l| if l > floor { l.sqrt() } else { 0.0 });
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, k| vecs[(i, k)] * roots[k]);
    &scaled * vecs.adjoint()
}

/// Promotes a real matrix to complex.
pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}
