//! Dense eigendecompositions backed by faer.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::lattice::{SparseOperator, C64};

/// Eigenvalues in ascending order with eigenvectors stored column-wise.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the normalized eigenvector for `values[k]`.
    pub vectors: Vec<Vec<C64>>,
}

impl DenseEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Full eigendecomposition of a real symmetric matrix given entry-wise.
pub fn real_symmetric_eigen(dim: usize, entry: impl Fn(usize, usize) -> f64) -> Result<DenseEigen> {
    let m = Mat::<f64>::from_fn(dim, dim, entry);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence {
            residual: f64::NAN,
            tolerance: 0.0,
        })?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let raw: Vec<f64> = (0..dim).map(|k| s[k]).collect();
    let order = sorted_order(&raw);
    Ok(DenseEigen {
        values: order.iter().map(|&k| raw[k]).collect(),
        vectors: order
            .iter()
            .map(|&k| (0..dim).map(|i| C64::new(u[(i, k)], 0.0)).collect())
            .collect(),
    })
}

/// Full eigendecomposition of a complex hermitian matrix given entry-wise.
pub fn hermitian_eigen(dim: usize, entry: impl Fn(usize, usize) -> C64) -> Result<DenseEigen> {
    let m = Mat::<faer::c64>::from_fn(dim, dim, |i, j| {
        let z = entry(i, j);
        faer::c64::new(z.re, z.im)
    });
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence {
            residual: f64::NAN,
            tolerance: 0.0,
        })?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let raw: Vec<f64> = (0..dim).map(|k| s[k].re).collect();
    let order = sorted_order(&raw);
    Ok(DenseEigen {
        values: order.iter().map(|&k| raw[k]).collect(),
        vectors: order
            .iter()
            .map(|&k| {
                (0..dim)
                    .map(|i| {
                        let z = u[(i, k)];
                        C64::new(z.re, z.im)
                    })
                    .collect()
            })
            .collect(),
    })
}

/// Dense eigendecomposition of a hermitian sparse operator, using the real
/// path when every entry is real.
pub fn eigen_of(op: &SparseOperator) -> Result<DenseEigen> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let dim = 1usize << op.n_sites();
    let mut dense = vec![C64::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for (c, v) in op.row(r) {
            dense[r * dim + c] = v;
        }
    }
    if op.max_entry_real() {
        real_symmetric_eigen(dim, |i, j| dense[i * dim + j].re)
    } else {
        hermitian_eigen(dim, |i, j| dense[i * dim + j])
    }
}

/// `exp(-i H t) x` from a precomputed eigendecomposition.
pub fn evolve_with(eig: &DenseEigen, t: f64, x: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    for (e, v) in eig.values.iter().zip(&eig.vectors) {
        let overlap: C64 = v.iter().zip(x).map(|(a, b)| a.conj() * b).sum();
        let coef = overlap * C64::from_polar(1.0, -e * t);
        for (yi, vi) in y.iter_mut().zip(v) {
            *yi += coef * vi;
        }
    }
    y
}
