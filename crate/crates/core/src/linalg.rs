//! Small dense linear-algebra helpers shared by the physics modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// `max |a_ij - b_ij|`.
pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `max |a_ij|`.
pub fn max_abs(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖A - A†‖_max`.
pub fn hermitian_residual(a: &DMatrix<Complex64>) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    max_abs_diff(a, &a.adjoint())
}

/// `‖A†A - I‖_max`.
pub fn unitary_residual(a: &DMatrix<Complex64>) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    max_abs_diff(&(a.adjoint() * a), &DMatrix::identity(n, n))
}

/// `(A + A†) / 2`.
pub fn hermitian_part(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (a + a.adjoint()).unscale(2.0)
}

pub fn commutator(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a * b - b * a
}

/// Eigendecomposition of a Hermitian matrix, split along the connected
/// components of its sparsity pattern.
///
/// Basis states that are never coupled end up in different blocks, so any
/// function of the matrix built from this decomposition is exactly zero
/// between blocks rather than zero up to rounding.
#[derive(Debug, Clone)]
pub struct BlockEigen {
    dim: usize,
    blocks: Vec<EigenBlock>,
}

#[derive(Debug, Clone)]
struct EigenBlock {
    indices: Vec<usize>,
    values: DVector<f64>,
    vectors: DMatrix<Complex64>,
}

impl BlockEigen {
    pub fn new(h: &DMatrix<Complex64>) -> Result<Self> {
        let residual = hermitian_residual(h);
        if !(residual <= 1e-12 * h.nrows().max(1) as f64 * max_abs(h).max(1.0)) {
            return Err(Error::NotHermitian { residual });
        }
        let dim = h.nrows();
        let blocks = connected_blocks(h)
            .into_iter()
            .map(|indices| {
                let k = indices.len();
                let sub = DMatrix::from_fn(k, k, |r, c| h[(indices[r], indices[c])]);
                let sub = hermitian_part(&sub);
                let eig = sub.symmetric_eigen();
                if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric(
                        "Hermitian eigendecomposition produced non-finite values".into(),
                    ));
                }
                Ok(EigenBlock {
                    indices,
                    values: eig.eigenvalues,
                    vectors: eig.eigenvectors,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim, blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.values.iter().cloned())
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// `e^{-iHt}`.
    pub fn exp_minus_i(&self, t: f64) -> DMatrix<Complex64> {
        let mut u = DMatrix::zeros(self.dim, self.dim);
        if t == 0.0 {
            u.fill_with_identity();
            return u;
        }
        for block in &self.blocks {
            let phases = DVector::from_iterator(
                block.values.len(),
                block
                    .values
                    .iter()
                    .map(|&e| Complex64::from_polar(1.0, -e * t)),
            );
            let scaled = DMatrix::from_fn(block.vectors.nrows(), block.vectors.ncols(), |r, c| {
                block.vectors[(r, c)] * phases[c]
            });
            let sub = scaled * block.vectors.adjoint();
            for (r, &gr) in block.indices.iter().enumerate() {
                for (c, &gc) in block.indices.iter().enumerate() {
                    u[(gr, gc)] = sub[(r, c)];
                }
            }
        }
        u
    }
}

/// Groups indices into connected components of the graph with an edge
/// wherever `h[(i, j)] != 0`. Components come out sorted by smallest index.
fn connected_blocks(h: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if h[(i, j)] != Complex64::new(0.0, 0.0) || h[(j, i)] != Complex64::new(0.0, 0.0) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
}
