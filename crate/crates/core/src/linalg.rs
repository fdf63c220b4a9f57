//! Small dense symmetric helpers over row-major `Vec<f64>` storage.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigen-decomposition of a symmetric `dim × dim` matrix.
pub(crate) struct SymEigen {
    pub values: Vec<f64>,
    /// Column `k` of the row-major `dim × dim` matrix is the k-th eigenvector.
    pub vectors: Vec<f64>,
    pub dim: usize,
}

impl SymEigen {
    pub fn new(matrix: &[f64], dim: usize) -> Self {
        debug_assert_eq!(matrix.len(), dim * dim);
        let m = DMatrix::from_row_slice(dim, dim, matrix);
        let eig = SymmetricEigen::new(m);
        let mut vectors = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                vectors[r * dim + c] = eig.eigenvectors[(r, c)];
            }
        }
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors,
            dim,
        }
    }

    pub fn vector(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(move |r| self.vectors[r * self.dim + k])
    }

    /// Eigenvalue cutoff: `dim * lambda_max * 1e-12`.
    pub fn tolerance(&self) -> f64 {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        self.dim as f64 * max * 1e-12
    }

    /// Indices of eigenvalues treated as nonzero.
    pub fn support(&self) -> Vec<usize> {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        if !(max > f64::MIN_POSITIVE) {
            return Vec::new();
        }
        let tol = self.tolerance();
        (0..self.dim).filter(|&k| self.values[k] > tol).collect()
    }

    /// Moore-Penrose `A^{power}` restricted to the support (power -1 or -1/2).
    pub fn pseudo_power(&self, power: f64) -> Vec<f64> {
        let dim = self.dim;
        let mut out = vec![0.0; dim * dim];
        for k in self.support() {
            let w = self.values[k].powf(power);
            let u: Vec<f64> = self.vector(k).collect();
            for r in 0..dim {
                for c in 0..dim {
                    out[r * dim + c] += w * u[r] * u[c];
                }
            }
        }
        out
    }
}

pub(crate) fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let dim = v.len();
    (0..m.len() / dim)
        .map(|r| m[r * dim..(r + 1) * dim].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}
