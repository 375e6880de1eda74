//! Small dense helpers on top of nalgebra. Sample matrices are samples x dimension.

use nalgebra::{DMatrix, DVector};

use crate::Scalar;

/// Per-column mean of a samples x dimension matrix.
pub fn column_means<T: Scalar>(m: &DMatrix<T>) -> DVector<T> {
    let n = T::of_usize(m.nrows());
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Subtract `means` from every row.
pub fn centered<T: Scalar>(m: &DMatrix<T>, means: &DVector<T>) -> DMatrix<T> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

/// Per-column population variance (1/n normalisation).
pub fn column_variances<T: Scalar>(m: &DMatrix<T>) -> DVector<T> {
    let n = T::of_usize(m.nrows());
    DVector::from_iterator(
        m.ncols(),
        m.column_iter().map(|c| {
            let mean = c.sum() / n;
            c.iter().map(|&v| (v - mean) * (v - mean)).fold(T::zero(), |a, b| a + b) / n
        }),
    )
}

/// `(m + m^T) / 2`.
pub fn symmetrized<T: Scalar>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::of(0.5)
}

/// Largest absolute entry.
pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
}
