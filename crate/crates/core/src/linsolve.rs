//! Thin wrapper over the faer LU factorizations. Sequential mode is forced
//! globally so repeated runs produce bit-identical results.

use std::sync::Once;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::sparsemat::CooMatrix;

static SEQ_INIT: Once = Once::new();

pub(crate) fn ensure_sequential() {
    SEQ_INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

#[derive(Debug)]
pub(crate) struct FactorError(pub String);

impl std::fmt::Display for FactorError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

/// Factorizes a square COO matrix. Duplicate triplets are summed.
pub(crate) fn sparse_lu(n: usize, coo: &CooMatrix) -> Result<SparseLu, FactorError> {
    ensure_sequential();
    debug_assert_eq!(coo.nrows, n);
    debug_assert_eq!(coo.ncols, n);
    let triplets: Vec<Triplet<usize, usize, f64>> =
        coo.entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| FactorError(format!("sparse assembly: {e:?}")))?;
    let symbolic = SymbolicLu::try_new(a.symbolic())
        .map_err(|e| FactorError(format!("symbolic analysis: {e:?}")))?;
    let lu = Lu::try_new_with_symbolic(symbolic, a.as_ref())
        .map_err(|e| FactorError(format!("numeric factorization: {e:?}")))?;
    Ok(SparseLu { lu, n })
}

impl SparseLu {
    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.n);
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Dense LU solve of a square row-major system, for desk-scale oracle work.
pub(crate) fn dense_solve(a: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    ensure_sequential();
    let n = rhs.len();
    debug_assert_eq!(a.len(), n);
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i][j]);
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let lu = PartialPivLu::new(m.as_ref());
    let x = lu.solve(&b);
    let sol: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if sol.iter().all(|v| v.is_finite()) {
        Some(sol)
    } else {
        None
    }
}
