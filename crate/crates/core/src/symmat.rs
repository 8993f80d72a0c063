//! Dense symmetric matrices and the first-order calculus of the PSD cone.
//!
//! [`SymMat`] stores one value per `(i, j)` pair, so symmetry can never be
//! violated. [`SpectralDecomp`] orders eigenvalues descending and splits the
//! index set into the positive (`alpha`), zero (`beta`) and negative
//! (`gamma`) blocks that every cone formula in this crate is written in.

use std::fmt;
use std::ops::{Add, Mul, Neg, Range, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};

/// Relative symmetry tolerance applied when reading full matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative factor of the default zero-eigenvalue threshold.
pub const ZERO_TOL_FACTOR: f64 = 1e-8;

const JACOBI_MAX_SWEEPS: usize = 64;
const JACOBI_OFF_TOL: f64 = 1e-14;

/// Real symmetric `p x p` matrix, packed upper triangle.
#[derive(Clone, PartialEq)]
pub struct SymMat {
    dim: usize,
    data: Vec<f64>,
}

#[inline]
fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Rows 0..i hold dim + (dim - 1) + ... + (dim - i + 1) entries.
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        SymMat {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Reads a row-major `p*p` array.
    ///
    /// Mirrored entries must agree to `1e-12 * max(1, |m_ij|)`; accepted
    /// pairs are averaged. Non-finite entries are rejected.
    pub fn from_row_major(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::input(format!(
                "expected {} entries for a {dim}x{dim} matrix, found {}",
                dim * dim,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite matrix entry {bad}")));
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let a = values[i * dim + j];
                let b = values[j * dim + i];
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::input(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                m.set(i, j, 0.5 * (a + b));
            }
        }
        Ok(m)
    }

    /// Symmetrizes an arbitrary square matrix by averaging `M` and `M^T`.
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "square matrix required");
        Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.dim, i, j);
        self.data[k] = v;
    }

    /// Packed upper triangle, row by row.
    pub fn packed(&self) -> &[f64] {
        &self.data
    }

    pub fn from_packed(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * (dim + 1) / 2 {
            return Err(Error::input("packed length does not match dimension"));
        }
        Ok(SymMat { dim, data })
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `tr(A B)`.
    pub fn inner(&self, other: &SymMat) -> f64 {
        assert_eq!(self.dim, other.dim, "inner product of mismatched matrices");
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let w = if i == j { 1.0 } else { 2.0 };
                s += w * self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> SymMat {
        SymMat {
            dim: self.dim,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &SymMat) -> SymMat {
        assert_eq!(self.dim, other.dim, "axpy of mismatched matrices");
        SymMat {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }

    /// `Q^T M Q` for a square `Q` with `dim` rows.
    pub fn congruence(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.to_dmatrix();
        q.transpose() * m * q
    }

    /// `Q M Q^T`, returned symmetrized.
    pub fn conjugate(&self, q: &DMatrix<f64>) -> SymMat {
        let m = self.to_dmatrix();
        SymMat::from_dmatrix(&(q * m * q.transpose()))
    }

    /// Eigenvalues in descending order (cyclic Jacobi).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(spectral_decompose_default(self)?.eigenvalues)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        if self.dim == 0 {
            return Ok(0.0);
        }
        Ok(*self.eigenvalues()?.last().unwrap())
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        if self.dim == 0 {
            return Ok(0.0);
        }
        Ok(self.eigenvalues()?[0])
    }
}

impl fmt::Debug for SymMat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMat{}[", self.dim)?;
        for i in 0..self.dim {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.dim {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:.6e}", self.get(i, j))?;
            }
        }
        write!(f, "]")
    }
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, c: f64) -> SymMat {
        self.scale(c)
    }
}

impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(serde::de::Error::custom("matrix rows must be square"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        SymMat::from_row_major(dim, &flat).map_err(serde::de::Error::custom)
    }
}

/// Eigen-decomposition `M = P diag(lambda) P^T` with the sign partition.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    source: SymMat,
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    n_pos: usize,
    n_zero: usize,
    tol_zero: f64,
    sigma: DMatrix<f64>,
}

/// `1e-8 * max(1, |M|_2)`, with the spectral norm taken from the eigenvalues.
pub fn default_zero_tol(eigenvalues: &[f64]) -> f64 {
    let spec = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    ZERO_TOL_FACTOR * spec.max(1.0)
}

/// Decomposes with the relative default threshold.
pub fn spectral_decompose_default(m: &SymMat) -> Result<SpectralDecomp> {
    let (values, vectors) = jacobi_eigen(m)?;
    let tol = default_zero_tol(&values);
    Ok(SpectralDecomp::assemble(m.clone(), values, vectors, tol))
}

/// Decomposes `m` and partitions its spectrum at `tol_zero`.
pub fn spectral_decompose(m: &SymMat, tol_zero: f64) -> Result<SpectralDecomp> {
    if !(tol_zero >= 0.0) || !tol_zero.is_finite() {
        return Err(Error::input("zero tolerance must be a finite nonnegative number"));
    }
    let (values, vectors) = jacobi_eigen(m)?;
    Ok(SpectralDecomp::assemble(m.clone(), values, vectors, tol_zero))
}

/// Cyclic Jacobi. Returns eigenvalues sorted descending with matching columns.
fn jacobi_eigen(m: &SymMat) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !m.is_finite() {
        return Err(Error::input("matrix has non-finite entries"));
    }
    let n = m.dim();
    let mut a = m.to_dmatrix();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm();
    let off_norm = |a: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[(i, j)] * a[(i, j)];
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= JACOBI_OFF_TOL * scale;
    let mut sweep = 0;
    while !converged && sweep < JACOBI_MAX_SWEEPS {
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Negligible pivot after the first sweeps: drop it.
                let g = 100.0 * apq.abs();
                if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        sweep += 1;
        converged = off_norm(&a) <= JACOBI_OFF_TOL * scale;
    }
    if !converged {
        return Err(Error::numeric(format!(
            "Jacobi eigen-iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

impl SpectralDecomp {
    fn assemble(source: SymMat, eigenvalues: Vec<f64>, basis: DMatrix<f64>, tol_zero: f64) -> Self {
        let n_pos = eigenvalues.iter().filter(|&&l| l > tol_zero).count();
        let n_zero = eigenvalues.iter().filter(|&&l| l.abs() <= tol_zero).count();
        let sigma = build_sigma(&eigenvalues, n_pos, n_zero);
        SpectralDecomp {
            source,
            basis,
            eigenvalues,
            n_pos,
            n_zero,
            tol_zero,
            sigma,
        }
    }

    pub fn source(&self) -> &SymMat {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Orthogonal `P`, columns are eigenvectors.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn tol_zero(&self) -> f64 {
        self.tol_zero
    }

    pub fn alpha(&self) -> Range<usize> {
        0..self.n_pos
    }

    pub fn beta(&self) -> Range<usize> {
        self.n_pos..self.n_pos + self.n_zero
    }

    pub fn gamma(&self) -> Range<usize> {
        self.n_pos + self.n_zero..self.dim()
    }

    /// Divided differences of `max(lambda, 0)`, `0/0 := 1`.
    ///
    /// Eigenvalues inside the zero band are treated as exact zeros. Only the
    /// `alpha x gamma` block, where the entries are `l_i / (l_i - l_j)`, is
    /// consumed by the derivative formula.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Columns of `P` for an index range.
    pub fn columns(&self, r: Range<usize>) -> DMatrix<f64> {
        self.basis.columns(r.start, r.len()).into_owned()
    }

    /// `P^T H P`.
    pub fn to_eigenbasis(&self, h: &SymMat) -> DMatrix<f64> {
        h.congruence(&self.basis)
    }

    /// `P Ht P^T`, symmetrized.
    pub fn from_eigenbasis(&self, ht: &DMatrix<f64>) -> SymMat {
        SymMat::from_dmatrix(&(&self.basis * ht * self.basis.transpose()))
    }

    /// `P diag(f(lambda)) P^T`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> SymMat {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = f(self.eigenvalues[i]);
        }
        self.from_eigenbasis(&d)
    }

    pub fn project_psd(&self) -> SymMat {
        self.spectral_map(|l| l.max(0.0))
    }

    pub fn project_nsd(&self) -> SymMat {
        self.spectral_map(|l| l.min(0.0))
    }

    /// Directional derivative of the PSD projection at the source matrix.
    pub fn dir_deriv_projection(&self, h: &SymMat) -> Result<SymMat> {
        check_dim(self.dim(), h.dim())?;
        let ht = self.to_eigenbasis(h);
        let (a, b, g) = (self.alpha(), self.beta(), self.gamma());
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for i in a.clone() {
            for j in a.start..b.end {
                out[(i, j)] = ht[(i, j)];
                out[(j, i)] = ht[(j, i)];
            }
            for j in g.clone() {
                let v = self.sigma[(i, j)] * ht[(i, j)];
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        if !b.is_empty() {
            let hbb = SymMat::from_dmatrix(&ht.view((b.start, b.start), (b.len(), b.len())).into_owned());
            let pbb = project_psd(&hbb)?;
            for (ii, i) in b.clone().enumerate() {
                for (jj, j) in b.clone().enumerate() {
                    out[(i, j)] = pbb.get(ii, jj);
                }
            }
        }
        Ok(self.from_eigenbasis(&out))
    }

    /// Residual of `P diag(lambda) P^T = source`, Frobenius.
    pub fn reconstruction_error(&self) -> f64 {
        let r = self.spectral_map(|l| l);
        (&r - &self.source).norm()
    }

    /// `|P^T P - I|_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.dim();
        (self.basis.transpose() * &self.basis - DMatrix::<f64>::identity(n, n)).norm()
    }
}

fn build_sigma(lambda: &[f64], n_pos: usize, n_zero: usize) -> DMatrix<f64> {
    let n = lambda.len();
    // Zero band clamped to exact zero.
    let lam: Vec<f64> = lambda
        .iter()
        .enumerate()
        .map(|(i, &l)| if i >= n_pos && i < n_pos + n_zero { 0.0 } else { l })
        .collect();
    DMatrix::from_fn(n, n, |i, j| {
        let (li, lj) = (lam[i], lam[j]);
        if li >= 0.0 && lj >= 0.0 {
            1.0
        } else if li < 0.0 && lj < 0.0 {
            if li == lj {
                1.0
            } else {
                0.0
            }
        } else {
            (li.max(0.0) - lj.max(0.0)) / (li - lj)
        }
    })
}

/// Standalone Σ-matrix of a decomposition.
pub fn sigma_matrix(d: &SpectralDecomp) -> DMatrix<f64> {
    d.sigma.clone()
}

/// Euclidean projection onto the PSD cone.
pub fn project_psd(m: &SymMat) -> Result<SymMat> {
    Ok(spectral_decompose_default(m)?.project_psd())
}

/// `Pi'(A; H)` for the PSD projection.
pub fn dir_deriv_projection(a: &SymMat, h: &SymMat) -> Result<SymMat> {
    check_dim(a.dim(), h.dim())?;
    spectral_decompose_default(a)?.dir_deriv_projection(h)
}

/// Moore-Penrose pseudoinverse with eigenvalues `|l| <= tol_zero` dropped.
pub fn pseudoinverse(m: &SymMat, tol_zero: f64) -> Result<SymMat> {
    let d = spectral_decompose(m, tol_zero)?;
    Ok(d.spectral_map(|l| if l.abs() > tol_zero { 1.0 / l } else { 0.0 }))
}

/// Extracts a sub-block of a dense matrix.
pub(crate) fn block(m: &DMatrix<f64>, rows: Range<usize>, cols: Range<usize>) -> DMatrix<f64> {
    m.view((rows.start, cols.start), (rows.len(), cols.len())).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::*;

    mod approx_eq {
        pub fn close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol
        }
    }

    fn sm(rows: &[&[f64]]) -> SymMat {
        let n = rows.len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        SymMat::from_row_major(n, &flat).unwrap()
    }

    #[test]
    fn packed_layout_round_trips() {
        let m = SymMat::from_fn(4, |i, j| (10 * i + j) as f64);
        for i in 0..4 {
            for j in 0..4 {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                assert_eq!(m.get(i, j), (10 * a + b) as f64);
            }
        }
        let full = m.to_row_major();
        assert_eq!(SymMat::from_row_major(4, &full).unwrap(), m);
    }

    #[test]
    fn reader_rejects_asymmetry_and_nan() {
        assert!(SymMat::from_row_major(2, &[1.0, 2.0, 2.5, 1.0]).is_err());
        assert!(SymMat::from_row_major(2, &[1.0, f64::NAN, f64::NAN, 1.0]).is_err());
        assert!(SymMat::from_row_major(2, &[1.0, 2.0]).is_err());
        let m = SymMat::from_row_major(2, &[1.0, 2.0, 2.0 + 1e-13, 1.0]).unwrap();
        assert!(close(m.get(0, 1), 2.0 + 0.5e-13, 1e-15));
    }

    #[test]
    fn diagonal_input_is_sorted_and_partitioned() {
        let d = spectral_decompose(&SymMat::from_diag(&[2.0, 0.0, -3.0]), 1e-8).unwrap();
        assert_eq!(d.eigenvalues(), &[2.0, 0.0, -3.0]);
        assert_eq!((d.alpha(), d.beta(), d.gamma()), (0..1, 1..2, 2..3));
        assert!((d.basis() - DMatrix::<f64>::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn swap_matrix_eigenvectors() {
        let d = spectral_decompose(&sm(&[&[0.0, 1.0], &[1.0, 0.0]]), 1e-8).unwrap();
        assert!(close(d.eigenvalues()[0], 1.0, 1e-14));
        assert!(close(d.eigenvalues()[1], -1.0, 1e-14));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p = d.basis();
        // Column signs are arbitrary.
        assert!(close(p[(0, 0)].abs(), s, 1e-14) && close(p[(1, 0)].abs(), s, 1e-14));
        assert!(close(p[(0, 0)] * p[(1, 0)], 0.5, 1e-14));
        assert!(close(p[(0, 1)] * p[(1, 1)], -0.5, 1e-14));
    }

    #[test]
    fn zero_matrix_is_all_beta_with_unit_sigma() {
        let d = spectral_decompose_default(&SymMat::zeros(3)).unwrap();
        assert_eq!(d.beta(), 0..3);
        assert!(d.sigma().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn projection_examples() {
        let p = project_psd(&SymMat::from_diag(&[2.0, -3.0])).unwrap();
        assert!((&p - &SymMat::from_diag(&[2.0, 0.0])).norm() < 1e-14);
        let p = project_psd(&sm(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((&p - &sm(&[&[0.5, 0.5], &[0.5, 0.5]])).norm() < 1e-14);
        let q = sm(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 1.0], &[0.0, 1.0, 2.0]]);
        assert!((&project_psd(&q).unwrap() - &q).norm() < 1e-9);
    }

    #[test]
    fn sigma_examples() {
        let d = spectral_decompose_default(&SymMat::from_diag(&[2.0, -3.0])).unwrap();
        assert!(close(d.sigma()[(0, 1)], 0.4, 1e-15));
        let d = spectral_decompose_default(&SymMat::from_diag(&[5.0, 1.0])).unwrap();
        assert!(d.sigma().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn derivative_examples() {
        let a = SymMat::from_diag(&[2.0, -3.0]);
        let h = sm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let r = dir_deriv_projection(&a, &h).unwrap();
        assert!((&r - &sm(&[&[0.0, 0.4], &[0.4, 0.0]])).norm() < 1e-14);
        let r = dir_deriv_projection(&a, &SymMat::identity(2)).unwrap();
        assert!((&r - &SymMat::from_diag(&[1.0, 0.0])).norm() < 1e-14);
        // At the origin the derivative is the projection itself.
        let h = sm(&[&[1.0, 2.0], &[2.0, -1.0]]);
        let r = dir_deriv_projection(&SymMat::zeros(2), &h).unwrap();
        assert!((&r - &project_psd(&h).unwrap()).norm() < 1e-13);
        assert!(dir_deriv_projection(&a, &SymMat::zeros(3)).is_err());
    }

    #[test]
    fn pseudoinverse_examples() {
        let r = pseudoinverse(&SymMat::from_diag(&[2.0, 0.0]), 1e-8).unwrap();
        assert!((&r - &SymMat::from_diag(&[0.5, 0.0])).norm() < 1e-15);
        assert_eq!(pseudoinverse(&SymMat::zeros(2), 1e-8).unwrap(), SymMat::zeros(2));
        let s = sm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!((&pseudoinverse(&s, 1e-8).unwrap() - &s).norm() < 1e-14);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut m = SymMat::zeros(2);
        m.set(0, 1, f64::INFINITY);
        assert!(matches!(spectral_decompose_default(&m), Err(Error::Input(_))));
    }
}
