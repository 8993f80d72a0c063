//! Small dense helpers on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis (as columns) of `{z : M z = 0}`.
///
/// A singular value counts as zero when it is at most
/// `rel_tol * max(1, sigma_max)`.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let ncols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(ncols, ncols);
    }
    if ncols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad with zero rows so the SVD returns a full right basis.
    let padded = if m.nrows() < ncols {
        let mut p = DMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max().max(1.0);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= rel_tol * smax)
        .map(|(k, _)| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(ncols, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Numerical rank with the same cutoff convention as [`null_space`].
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let smax = s.max().max(1.0);
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Minimum-norm least-squares solution of `M z = b`.
pub fn least_norm(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(m.ncols());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = RANK_TOL * smax.max(1e-300);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(m.ncols()))
}

/// Orthonormal basis of the orthogonal complement of `range(M)`.
pub fn range_complement(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    null_space(&m.transpose(), rel_tol)
}

/// Stacks row blocks that share a column count.
pub fn vstack(blocks: &[DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, ncols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), ncols);
        out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(b);
        r += b.nrows();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_one_row() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let n = null_space(&m, RANK_TOL);
        assert_eq!(n.ncols(), 2);
        assert!((&m * &n).norm() < 1e-12);
        assert!((n.transpose() * &n - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_nonsingular_is_empty() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(null_space(&m, RANK_TOL).ncols(), 0);
        assert_eq!(rank(&m, RANK_TOL), 2);
    }

    #[test]
    fn least_norm_picks_minimum() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let z = least_norm(&m, &DVector::from_vec(vec![2.0]));
        assert!((z - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-12);
    }
}
