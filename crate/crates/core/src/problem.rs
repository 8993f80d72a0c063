//! Quadratic objective, degree-two matrix-polynomial constraint
//! `G(x) = A0 + sum x_i A_i + 1/2 sum x_i x_j B_ij`, and the first-order
//! objects built on them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::least_norm;
use crate::symmat::{spectral_decompose_default, SymMat};

/// Residual bound for a certified KKT point.
pub const KKT_CERT_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct ProblemData {
    n: usize,
    p: usize,
    f_lin: DVector<f64>,
    f_quad: DMatrix<f64>,
    g_const: SymMat,
    g_lin: Vec<SymMat>,
    /// Full `n x n` table; `g_quad[i][j] == g_quad[j][i]`.
    g_quad: Vec<Vec<SymMat>>,
}

impl ProblemData {
    /// Validates and assembles problem data. `g_quad` must be `n x n` and
    /// symmetric in `(i, j)`; `f_quad` must be symmetric.
    pub fn new(
        f_lin: Vec<f64>,
        f_quad: DMatrix<f64>,
        g_const: SymMat,
        g_lin: Vec<SymMat>,
        g_quad: Vec<Vec<SymMat>>,
    ) -> Result<Self> {
        let n = f_lin.len();
        let p = g_const.dim();
        if p == 0 {
            return Err(Error::input("matrix order must be positive"));
        }
        if f_quad.nrows() != n || f_quad.ncols() != n {
            return Err(Error::input(format!("f.quad must be {n}x{n}")));
        }
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (f_quad[(i, j)], f_quad[(j, i)]);
                if !a.is_finite() {
                    return Err(Error::input("f.quad has non-finite entries"));
                }
                if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                    return Err(Error::input("f.quad is not symmetric"));
                }
            }
        }
        if f_lin.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("f.lin has non-finite entries"));
        }
        check_dim(n, g_lin.len())?;
        check_dim(n, g_quad.len())?;
        for (i, row) in g_quad.iter().enumerate() {
            check_dim(n, row.len())?;
            for (j, b) in row.iter().enumerate() {
                check_dim(p, b.dim())?;
                let d = (b - &g_quad[j][i]).max_abs();
                if d > 1e-12 * b.max_abs().max(1.0) {
                    return Err(Error::input(format!("B[{i}][{j}] differs from B[{j}][{i}]")));
                }
            }
        }
        for a in &g_lin {
            check_dim(p, a.dim())?;
        }
        let all = std::iter::once(&g_const)
            .chain(&g_lin)
            .chain(g_quad.iter().flatten());
        for m in all {
            if !m.is_finite() {
                return Err(Error::input("constraint data has non-finite entries"));
            }
        }
        let f_quad = (&f_quad + f_quad.transpose()) * 0.5;
        Ok(ProblemData {
            n,
            p,
            f_lin: DVector::from_vec(f_lin),
            f_quad,
            g_const,
            g_lin,
            g_quad,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn f_lin(&self) -> &DVector<f64> {
        &self.f_lin
    }

    pub fn f_quad(&self) -> &DMatrix<f64> {
        &self.f_quad
    }

    pub fn g_const(&self) -> &SymMat {
        &self.g_const
    }

    pub fn g_lin(&self) -> &[SymMat] {
        &self.g_lin
    }

    /// All matrices (`A0`, `A_i`, `B_ij`) diagonal.
    pub fn is_diagonal(&self) -> bool {
        let diag = |m: &SymMat| {
            (0..m.dim()).all(|i| ((i + 1)..m.dim()).all(|j| m.get(i, j) == 0.0))
        };
        diag(&self.g_const) && self.g_lin.iter().all(diag) && self.g_quad.iter().flatten().all(diag)
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        check_dim(self.n, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("x has non-finite entries"));
        }
        Ok(())
    }

    pub fn eval_f(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        let xv = DVector::from_column_slice(x);
        Ok(self.f_lin.dot(&xv) + 0.5 * xv.dot(&(&self.f_quad * &xv)))
    }

    pub fn eval_grad_f(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_x(x)?;
        Ok(&self.f_lin + &self.f_quad * DVector::from_column_slice(x))
    }

    pub fn eval_hess_f(&self) -> &DMatrix<f64> {
        &self.f_quad
    }

    pub fn eval_g(&self, x: &[f64]) -> Result<SymMat> {
        self.check_x(x)?;
        let mut g = self.g_const.clone();
        for i in 0..self.n {
            g = g.axpy(x[i], &self.g_lin[i]);
            for j in 0..self.n {
                let c = 0.5 * x[i] * x[j];
                if c != 0.0 {
                    g = g.axpy(c, &self.g_quad[i][j]);
                }
            }
        }
        Ok(g)
    }

    /// `D_i(x) = A_i + sum_j x_j B_ij`.
    pub fn eval_g_jacobian(&self, x: &[f64]) -> Result<Vec<SymMat>> {
        self.check_x(x)?;
        Ok((0..self.n)
            .map(|i| {
                let mut d = self.g_lin[i].clone();
                for j in 0..self.n {
                    if x[j] != 0.0 {
                        d = d.axpy(x[j], &self.g_quad[i][j]);
                    }
                }
                d
            })
            .collect())
    }

    pub fn eval_g_second(&self) -> &[Vec<SymMat>] {
        &self.g_quad
    }

    /// `G'(x) d`.
    pub fn jacobian_apply(&self, x: &[f64], d: &[f64]) -> Result<SymMat> {
        check_dim(self.n, d.len())?;
        let jac = self.eval_g_jacobian(x)?;
        Ok(combine(&jac, d, self.p))
    }

    /// `(G'(x)^* Y)_i = <D_i(x), Y>`.
    pub fn adjoint_jacobian_apply(&self, x: &[f64], y: &SymMat) -> Result<DVector<f64>> {
        check_dim(self.p, y.dim())?;
        let jac = self.eval_g_jacobian(x)?;
        Ok(DVector::from_iterator(self.n, jac.iter().map(|d| d.inner(y))))
    }

    /// `grad f(x) + G'(x)^* Y`.
    pub fn lagrangian_gradient(&self, x: &[f64], y: &SymMat) -> Result<DVector<f64>> {
        Ok(self.eval_grad_f(x)? + self.adjoint_jacobian_apply(x, y)?)
    }

    /// `hess f + [<Y, B_ij>]`. Independent of `x` for this data class.
    pub fn lagrangian_hessian(&self, x: &[f64], y: &SymMat) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        check_dim(self.p, y.dim())?;
        let n = self.n;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            self.f_quad[(i, j)] + self.g_quad[i][j].inner(y)
        }))
    }

    /// `(|grad_x L|, |G(x) - Pi(G(x) + Y)|_F)`.
    pub fn kkt_residual(&self, x: &[f64], y: &SymMat) -> Result<(f64, f64)> {
        let r1 = self.lagrangian_gradient(x, y)?.norm();
        let g = self.eval_g(x)?;
        let proj = spectral_decompose_default(&(&g + y))?.project_psd();
        Ok((r1, (&g - &proj).norm()))
    }

    /// Robinson's normal map
    /// `(grad f + G'^*(z - Pi(z)), G(x) - Pi(z))`.
    pub fn robinson_normal_map(&self, x: &[f64], z: &SymMat) -> Result<(DVector<f64>, SymMat)> {
        check_dim(self.p, z.dim())?;
        let pz = spectral_decompose_default(z)?.project_psd();
        let y = z - &pz;
        let psi1 = self.lagrangian_gradient(x, &y)?;
        let psi2 = &self.eval_g(x)? - &pz;
        Ok((psi1, psi2))
    }

    /// Distances of `Y` to the affine set `{y : grad_x L(x, y) = 0}` and to
    /// `N(G(x); S+)`.
    pub fn multiplier_set_residual(&self, x: &[f64], y: &SymMat) -> Result<(f64, f64)> {
        let jac = self.eval_g_jacobian(x)?;
        let r = self.lagrangian_gradient(x, y)?;
        let n = self.n;
        let gram = DMatrix::from_fn(n, n, |i, j| jac[i].inner(&jac[j]));
        let c = least_norm(&gram, &r);
        let d1 = c.dot(&(&gram * &c)).max(0.0).sqrt();

        let g = self.eval_g(x)?;
        let proj = project_normal_cone_psd(&g, y)?;
        Ok((d1, (y - &proj).norm()))
    }

    /// Data for the canonical perturbation: `f_lin - p1`, `A0 + p2`.
    pub fn shifted(&self, p1: &[f64], p2: &SymMat) -> Result<ProblemData> {
        check_dim(self.n, p1.len())?;
        check_dim(self.p, p2.dim())?;
        let mut out = self.clone();
        out.f_lin -= DVector::from_column_slice(p1);
        out.g_const = &self.g_const + p2;
        Ok(out)
    }

    /// Returns a copy with `f` multiplied by `c`.
    pub fn scale_objective(&self, c: f64) -> ProblemData {
        let mut out = self.clone();
        out.f_lin *= c;
        out.f_quad *= c;
        out
    }
}

/// `sum d_i M_i`.
pub fn combine(ms: &[SymMat], d: &[f64], p: usize) -> SymMat {
    let mut s = SymMat::zeros(p);
    for (m, &c) in ms.iter().zip(d) {
        if c != 0.0 {
            s = s.axpy(c, m);
        }
    }
    s
}

/// Projection of `W` onto `N(G; S+)` for a (numerically) PSD `G`.
pub fn project_normal_cone_psd(g: &SymMat, w: &SymMat) -> Result<SymMat> {
    check_dim(g.dim(), w.dim())?;
    let d = spectral_decompose_default(g)?;
    let tol = d.tol_zero();
    let kernel: Vec<usize> = (0..d.dim()).filter(|&i| d.eigenvalues()[i] <= tol).collect();
    let wt = d.to_eigenbasis(w);
    let k = kernel.len();
    let mut out = DMatrix::zeros(d.dim(), d.dim());
    if k > 0 {
        let kb = SymMat::from_fn(k, |a, b| wt[(kernel[a], kernel[b])]);
        let nsd = spectral_decompose_default(&kb)?.project_nsd();
        for a in 0..k {
            for b in 0..k {
                out[(kernel[a], kernel[b])] = nsd.get(a, b);
            }
        }
    }
    Ok(d.from_eigenbasis(&out))
}

/// A primal-dual pair with its KKT residuals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KktPoint {
    pub x: Vec<f64>,
    pub y: SymMat,
    pub residuals: (f64, f64),
}

impl KktPoint {
    pub fn evaluate(pd: &ProblemData, x: Vec<f64>, y: SymMat) -> Result<Self> {
        let residuals = pd.kkt_residual(&x, &y)?;
        Ok(KktPoint { x, y, residuals })
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.0.max(self.residuals.1)
    }

    pub fn is_certified(&self) -> bool {
        self.max_residual() <= KKT_CERT_TOL
    }

    /// Fails with an input error unless certified.
    pub fn certified(pd: &ProblemData, x: Vec<f64>, y: SymMat) -> Result<Self> {
        let k = Self::evaluate(pd, x, y)?;
        if k.is_certified() {
            Ok(k)
        } else {
            Err(Error::input(format!(
                "not a KKT point: residuals ({:.3e}, {:.3e}) exceed {KKT_CERT_TOL:e}",
                k.residuals.0, k.residuals.1
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{example2, example3};

    #[test]
    fn example_data_evaluation() {
        let pd = example2(0.0, &crate::families::default_example2_a()).unwrap();
        assert_eq!(pd.eval_g(&[0.0, 0.0]).unwrap(), SymMat::zeros(2));
        let pd3 = example3(0.0).unwrap();
        for d in pd3.eval_g_jacobian(&[0.0, 0.0]).unwrap() {
            assert_eq!(d, SymMat::zeros(2));
        }
        let c = ProblemData::new(
            vec![0.0],
            DMatrix::zeros(1, 1),
            SymMat::from_diag(&[1.0, 2.0]),
            vec![SymMat::zeros(2)],
            vec![vec![SymMat::zeros(2)]],
        )
        .unwrap();
        assert_eq!(c.eval_g_jacobian(&[3.0]).unwrap()[0], SymMat::zeros(2));
    }

    #[test]
    fn lagrangian_hessian_examples() {
        let pd = example3(0.0).unwrap();
        let h = pd.lagrangian_hessian(&[0.0, 0.0], &SymMat::zeros(2)).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]));
        let h = pd.lagrangian_hessian(&[0.0, 0.0], &SymMat::identity(2)).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[4.0, 3.0, 3.0, 4.0]));
    }

    #[test]
    fn adjoint_and_residual_examples() {
        let pd = example2(0.0, &crate::families::default_example2_a()).unwrap();
        let ybar = SymMat::from_diag(&[-1.0, 0.0]);
        let v = pd.adjoint_jacobian_apply(&[0.0, 0.0], &ybar).unwrap();
        assert_eq!(v.as_slice(), &[-1.0, 0.0]);
        assert_eq!(pd.kkt_residual(&[0.0, 0.0], &ybar).unwrap(), (0.0, 0.0));
        let (p1, p2) = pd.robinson_normal_map(&[0.0, 0.0], &ybar).unwrap();
        assert!(p1.norm() == 0.0 && p2.norm() == 0.0);
        let (d1, d2) = pd.multiplier_set_residual(&[0.0, 0.0], &ybar).unwrap();
        assert_eq!((d1, d2), (0.0, 0.0));
        let (d1, _) = pd.multiplier_set_residual(&[0.0, 0.0], &SymMat::zeros(2)).unwrap();
        assert!((d1 - 1.0).abs() < 1e-12);

        let pd3 = example3(0.0).unwrap();
        assert_eq!(pd3.kkt_residual(&[0.0, 0.0], &SymMat::zeros(2)).unwrap(), (0.0, 0.0));
        let y = SymMat::from_diag(&[-1.0, -2.0]);
        assert_eq!(pd3.adjoint_jacobian_apply(&[0.0, 0.0], &y).unwrap().norm(), 0.0);
        // G(x) negative definite: the natural residual is positive.
        let neg = ProblemData::new(
            vec![0.0],
            DMatrix::zeros(1, 1),
            SymMat::from_diag(&[-1.0, -1.0]),
            vec![SymMat::zeros(2)],
            vec![vec![SymMat::zeros(2)]],
        )
        .unwrap();
        assert!(neg.kkt_residual(&[0.0], &SymMat::from_diag(&[-1.0, 0.0])).unwrap().1 > 0.0);
    }

    #[test]
    fn normal_map_psd_argument() {
        let pd = example3(0.0).unwrap();
        let z = SymMat::from_diag(&[1.0, 2.0]);
        let x = [0.3, -0.2];
        let (_, psi2) = pd.robinson_normal_map(&x, &z).unwrap();
        assert!((&psi2 - &(&pd.eval_g(&x).unwrap() - &z)).norm() < 1e-14);
    }

    #[test]
    fn rejects_bad_data() {
        let bad = ProblemData::new(
            vec![0.0, 0.0],
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.0]),
            SymMat::zeros(1),
            vec![SymMat::zeros(1); 2],
            vec![vec![SymMat::zeros(1); 2]; 2],
        );
        assert!(bad.is_err());
        let pd = example3(0.0).unwrap();
        assert!(pd.eval_g(&[1.0]).is_err());
        assert!(KktPoint::certified(&pd, vec![1.0, 1.0], SymMat::zeros(2)).is_err());
    }
}
