//! Small dense kernels shared by the solvers.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, SymmetricEigen};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators keep the loop vectorisable and reduce round-off drift.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

/// Mean of `(a_i - b_i)^2`.
pub fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Column-major block of `cols` vectors of length `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub n: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Block {
    pub fn zeros(n: usize, cols: usize) -> Self {
        Self {
            n,
            cols,
            data: vec![0.0; n * cols],
        }
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn push_col(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.n);
        self.data.extend_from_slice(v);
        self.cols += 1;
    }

    pub fn truncate(&mut self, cols: usize) {
        self.cols = cols.min(self.cols);
        self.data.truncate(self.cols * self.n);
    }

    pub fn view(&self) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(&self.data, self.n, self.cols)
    }

    pub fn view_mut(&mut self) -> DMatrixViewMut<'_, f64> {
        DMatrixViewMut::from_slice(&mut self.data, self.n, self.cols)
    }

    /// Copy of columns `start..cols`.
    pub fn tail(&self, start: usize) -> Block {
        Block {
            n: self.n,
            cols: self.cols - start,
            data: self.data[start * self.n..].to_vec(),
        }
    }

    pub fn append(&mut self, other: &Block) {
        debug_assert_eq!(self.n, other.n);
        self.data.extend_from_slice(&other.data);
        self.cols += other.cols;
    }

    /// `self^T other` as a `cols × other.cols` matrix.
    pub fn gram(&self, other: &Block) -> DMatrix<f64> {
        self.view().tr_mul(&other.view())
    }

    /// `self · c` where `c` is `cols × m`.
    pub fn times(&self, c: &DMatrix<f64>) -> Block {
        assert_eq!(c.nrows(), self.cols);
        let prod = self.view() * c;
        Block {
            n: self.n,
            cols: c.ncols(),
            data: prod.as_slice().to_vec(),
        }
    }
}

/// `w ← w - basis (basisᵀ w)` for orthonormal `basis`; returns `basisᵀ w`.
pub fn project_block(basis: &Block, w: &mut Block) -> DMatrix<f64> {
    if basis.cols == 0 || w.cols == 0 {
        return DMatrix::zeros(basis.cols, w.cols);
    }
    let q = basis.view();
    let c = q.tr_mul(&w.view());
    w.view_mut().gemm(-1.0, &q, &c, 1.0);
    c
}

/// Removes from `v` its components along the orthonormal columns of `basis`
/// (two passes of classical Gram-Schmidt).
pub fn project_out(basis: &Block, v: &mut [f64]) {
    for _ in 0..2 {
        for j in 0..basis.cols {
            let q = basis.col(j);
            let c = dot(q, v);
            axpy(-c, q, v);
        }
    }
}

/// Orthonormalises the columns of `block` against every block in `bases`
/// (each orthonormal) and against each other. Columns whose norm collapses
/// below `drop_tol` times their incoming norm are replaced by `refill(j)` and
/// retried; returns the number of replacements.
pub fn orthonormalize(
    block: &mut Block,
    bases: &[&Block],
    drop_tol: f64,
    mut refill: impl FnMut(usize) -> Vec<f64>,
) -> usize {
    let n = block.n;
    let incoming: Vec<f64> = (0..block.cols).map(|j| norm(block.col(j))).collect();
    for _ in 0..2 {
        for basis in bases {
            project_block(basis, block);
        }
    }
    let mut replaced = 0;
    for j in 0..block.cols {
        let mut before = incoming[j];
        let mut attempts = 0;
        loop {
            let mut v = block.col(j).to_vec();
            for _ in 0..2 {
                for i in 0..j {
                    let q = &block.data[i * n..(i + 1) * n];
                    let c = dot(q, &v);
                    axpy(-c, q, &mut v);
                }
            }
            let after = norm(&v);
            if before > 0.0 && after > drop_tol * before && after > 1e-300 {
                scale(1.0 / after, &mut v);
                block.col_mut(j).copy_from_slice(&v);
                break;
            }
            attempts += 1;
            replaced += 1;
            assert!(attempts < 50, "could not extend orthonormal basis");
            let mut fresh = refill(j);
            before = norm(&fresh);
            for basis in bases {
                project_out(basis, &mut fresh);
            }
            block.col_mut(j).copy_from_slice(&fresh);
        }
    }
    replaced
}

/// Symmetric operator on `R^n`.
pub trait LinearOperator {
    fn size(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Conjugate gradient for symmetric positive definite `A`, run to the relative
/// residual `tol`.
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.size();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::NotConverged {
                solver: "conjugate gradient",
                iterations: it,
                residual: rr.sqrt() / bnorm,
            });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            return Ok((x, it));
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    Err(Error::NotConverged {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual: rr.sqrt() / bnorm,
    })
}

/// Eigenpairs of a dense symmetric matrix, ascending.
pub fn sym_eig_sorted(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Diag(Vec<f64>);

    impl LinearOperator for Diag {
        fn size(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..x.len() {
                y[i] = self.0[i] * x[i];
            }
        }
    }

    #[test]
    fn cg_solves_diagonal() {
        let a = Diag((1..=50).map(|i| i as f64).collect());
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let (x, _) = conjugate_gradient(&a, &b, 1e-12, 200).unwrap();
        for i in 0..50 {
            assert!((x[i] * (i + 1) as f64 - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormalize_refills_dependent_columns() {
        let n = 6;
        let mut b = Block::zeros(n, 0);
        b.push_col(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        b.push_col(&[2.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let locked = Block::zeros(n, 0);
        let mut k = 0;
        let replaced = orthonormalize(&mut b, &[&locked], 1e-8, |_| {
            k += 1;
            (0..n).map(|i| ((i + k) % 3) as f64).collect()
        });
        assert_eq!(replaced, 1);
        let g = b.gram(&b);
        assert!((g - DMatrix::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn sorted_eigen() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (v, _) = sym_eig_sorted(m);
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 3.0).abs() < 1e-14);
    }
}
