//! Small dense helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factorizes `matrix`, reporting `what` on failure.
    pub fn new(matrix: DMatrix<f64>, what: &str) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid(format!("{what}: matrix is not square")));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("{what}: non-finite entry")));
        }
        let dim = matrix.nrows();
        let diag_max = matrix.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        let diag_min = matrix.diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
        match Cholesky::new(matrix) {
            Some(chol) => {
                if chol.l_dirty().diagonal().iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
                    return Err(Error::numeric(format!(
                        "{what}: degenerate Cholesky pivot (dim {dim})"
                    )));
                }
                Ok(Self { chol })
            }
            None => Err(Error::numeric(format!(
                "{what}: not positive definite (dim {dim}, diagonal range [{diag_min:.3e}, {diag_max:.3e}])"
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// Solves `L x = b` with the lower factor only.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let l = self.chol.l();
        l.solve_lower_triangular(b)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `bᵗ M⁻¹ b`.
    pub fn quad_form(&self, b: &DVector<f64>) -> f64 {
        b.dot(&self.solve_vec(b))
    }
}

/// Replaces `m` by `(m + mᵗ)/2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Dense block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let dim: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(dim, dim);
    let mut offset = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((offset, offset), (k, k)).copy_from(b);
        offset += k;
    }
    out
}

/// Row `i` of `m` as an owned column vector.
pub fn row_vector(m: &DMatrix<f64>, i: usize) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.row(i).iter().copied())
}
