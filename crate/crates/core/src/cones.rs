//! Tangent, normal and critical cones of the PSD cone, and the graph of its
//! normal-cone map, all expressed in the eigenbasis of `A = X + Y`.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::symmat::{
    block, project_psd, spectral_decompose, spectral_decompose_default, SpectralDecomp, SymMat,
};

/// Default absolute tolerance on compressed blocks.
pub const CONE_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub member: bool,
    pub violation: f64,
}

impl Membership {
    fn from_violation(violation: f64, tol: f64) -> Self {
        Membership { member: violation <= tol, violation }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMembership {
    pub member_blocks: bool,
    pub member_deriv: bool,
    /// Aggregate block violation.
    pub violation: f64,
    /// `|H1 - Pi'(A; H1 + H2)|_F`.
    pub deriv_residual: f64,
}

/// A point `(X, Y)` of the graph of the normal cone, `X = Pi(A)`, `Y = A - X`.
#[derive(Clone, Debug)]
pub struct ConeContext {
    x: SymMat,
    y: SymMat,
    decomp: SpectralDecomp,
}

impl ConeContext {
    /// Splits `A` by the Moreau decomposition.
    pub fn from_sum(a: &SymMat) -> Result<Self> {
        let decomp = spectral_decompose_default(a)?;
        Ok(Self::from_decomp(decomp))
    }

    pub fn from_sum_with_tol(a: &SymMat, tol_zero: f64) -> Result<Self> {
        Ok(Self::from_decomp(spectral_decompose(a, tol_zero)?))
    }

    fn from_decomp(decomp: SpectralDecomp) -> Self {
        let x = decomp.project_psd();
        let y = decomp.project_nsd();
        ConeContext { x, y, decomp }
    }

    /// Builds a context from an explicit complementary pair.
    ///
    /// Rejects pairs that are not PSD/NSD or not orthogonal to `tol`.
    pub fn from_pair(x: &SymMat, y: &SymMat, tol: f64) -> Result<Self> {
        check_dim(x.dim(), y.dim())?;
        let scale = 1.0_f64.max(x.norm()).max(y.norm());
        if x.min_eigenvalue()? < -tol * scale {
            return Err(Error::input("X is not positive semidefinite"));
        }
        if y.max_eigenvalue()? > tol * scale {
            return Err(Error::input("Y is not negative semidefinite"));
        }
        if x.inner(y).abs() > tol * scale * scale {
            return Err(Error::input("X and Y are not complementary"));
        }
        Self::from_sum(&(x + y))
    }

    pub fn x(&self) -> &SymMat {
        &self.x
    }

    pub fn y(&self) -> &SymMat {
        &self.y
    }

    pub fn decomp(&self) -> &SpectralDecomp {
        &self.decomp
    }

    pub fn dim(&self) -> usize {
        self.decomp.dim()
    }

    pub fn alpha(&self) -> Range<usize> {
        self.decomp.alpha()
    }

    pub fn beta(&self) -> Range<usize> {
        self.decomp.beta()
    }

    pub fn gamma(&self) -> Range<usize> {
        self.decomp.gamma()
    }

    /// `beta ∪ gamma`, the kernel of `X`.
    fn kernel(&self) -> Range<usize> {
        self.beta().start..self.dim()
    }

    /// `alpha ∪ beta`, the kernel of `Y`.
    fn co_kernel(&self) -> Range<usize> {
        0..self.gamma().start
    }

    pub fn tilde(&self, h: &SymMat) -> DMatrix<f64> {
        self.decomp.to_eigenbasis(h)
    }
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymMat::from_dmatrix(m).min_eigenvalue().unwrap_or(f64::NAN)
}

fn max_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymMat::from_dmatrix(m).max_eigenvalue().unwrap_or(f64::NAN)
}

/// `T(X; S+) = {H : [P_b P_g]^T H [P_b P_g] >= 0}`.
pub fn tangent_membership(ctx: &ConeContext, h: &SymMat, tol: f64) -> Result<Membership> {
    check_dim(ctx.dim(), h.dim())?;
    let ht = ctx.tilde(h);
    let k = ctx.kernel();
    let v = (-min_eig(&block(&ht, k.clone(), k))).max(0.0);
    Ok(Membership::from_violation(v, tol))
}

/// `N(X; S+) = {H : compressed kernel block <= 0, P_a^T H P = 0}`.
pub fn normal_membership(ctx: &ConeContext, h: &SymMat, tol: f64) -> Result<Membership> {
    check_dim(ctx.dim(), h.dim())?;
    let ht = ctx.tilde(h);
    let k = ctx.kernel();
    let a = ctx.alpha();
    let v = max_eig(&block(&ht, k.clone(), k)).max(0.0) + block(&ht, a, 0..ctx.dim()).norm();
    Ok(Membership::from_violation(v, tol))
}

/// `C_{S+}(X, Y) = {H : P_g^T H [P_b P_g] = 0, P_b^T H P_b >= 0}`.
pub fn critical_cone_psd_membership(ctx: &ConeContext, h: &SymMat, tol: f64) -> Result<Membership> {
    check_dim(ctx.dim(), h.dim())?;
    let ht = ctx.tilde(h);
    let (b, g) = (ctx.beta(), ctx.gamma());
    let v = block(&ht, g, ctx.kernel()).norm() + (-min_eig(&block(&ht, b.clone(), b))).max(0.0);
    Ok(Membership::from_violation(v, tol))
}

/// `C_{S-}(Y, X) = {H : P_a^T H [P_a P_b] = 0, P_b^T H P_b <= 0}`.
pub fn critical_cone_nsd_membership(ctx: &ConeContext, h: &SymMat, tol: f64) -> Result<Membership> {
    check_dim(ctx.dim(), h.dim())?;
    let ht = ctx.tilde(h);
    let (a, b) = (ctx.alpha(), ctx.beta());
    let v = block(&ht, a, ctx.co_kernel()).norm() + max_eig(&block(&ht, b.clone(), b)).max(0.0);
    Ok(Membership::from_violation(v, tol))
}

/// Block violations of the graph-tangent characterization, in order:
/// `H1_bg`, `H1_gg`, `H2_aa`, `H2_ab`, the `alpha x gamma` coupling, and the
/// `beta x beta` complementarity (sign defects plus inner product).
pub fn graph_tangent_block_violations(ctx: &ConeContext, h1: &SymMat, h2: &SymMat) -> Result<[f64; 6]> {
    check_dim(ctx.dim(), h1.dim())?;
    check_dim(ctx.dim(), h2.dim())?;
    let t1 = ctx.tilde(h1);
    let t2 = ctx.tilde(h2);
    let (a, b, g) = (ctx.alpha(), ctx.beta(), ctx.gamma());
    let sigma = ctx.decomp.sigma();
    let mut coupling = 0.0;
    for i in a.clone() {
        for j in g.clone() {
            let s = sigma[(i, j)];
            let r = (s - 1.0) * t1[(i, j)] + s * t2[(i, j)];
            coupling += 2.0 * r * r;
        }
    }
    let b1 = block(&t1, b.clone(), b.clone());
    let b2 = block(&t2, b.clone(), b.clone());
    let inner = b1.component_mul(&b2).sum();
    let comp = (-min_eig(&b1)).max(0.0) + max_eig(&b2).max(0.0) + inner.abs();
    Ok([
        block(&t1, b.clone(), g.clone()).norm(),
        block(&t1, g.clone(), g).norm(),
        block(&t2, a.clone(), a.clone()).norm(),
        block(&t2, a, b).norm(),
        coupling.sqrt(),
        comp,
    ])
}

/// Membership of `(H1, H2)` in the tangent cone of the normal-cone graph,
/// tested both blockwise and through the projection derivative.
pub fn graph_tangent_membership(
    ctx: &ConeContext,
    h1: &SymMat,
    h2: &SymMat,
    tol: f64,
) -> Result<GraphMembership> {
    let parts = graph_tangent_block_violations(ctx, h1, h2)?;
    let scale = 1.0_f64.max(h1.norm() + h2.norm());
    let violation: f64 = parts.iter().sum();
    let d = ctx.decomp.dir_deriv_projection(&(h1 + h2))?;
    let deriv_residual = (h1 - &d).norm();
    Ok(GraphMembership {
        member_blocks: violation <= tol * scale,
        member_deriv: deriv_residual <= tol * scale,
        violation,
        deriv_residual,
    })
}

/// Euclidean projection onto `C_{S+}(X, Y)`.
pub fn project_critical_cone(ctx: &ConeContext, z: &SymMat) -> Result<SymMat> {
    check_dim(ctx.dim(), z.dim())?;
    let mut zt = ctx.tilde(z);
    let (b, g) = (ctx.beta(), ctx.gamma());
    let n = ctx.dim();
    for i in g.clone() {
        for j in b.start..n {
            zt[(i, j)] = 0.0;
            zt[(j, i)] = 0.0;
        }
    }
    if !b.is_empty() {
        let pb = project_psd(&SymMat::from_dmatrix(&block(&zt, b.clone(), b.clone())))?;
        for (ii, i) in b.clone().enumerate() {
            for (jj, j) in b.clone().enumerate() {
                zt[(i, j)] = pb.get(ii, jj);
            }
        }
    }
    Ok(ctx.decomp.from_eigenbasis(&zt))
}

/// Projection onto the polar `C_{S+}(X, Y)°`, by Moreau.
pub fn project_critical_cone_polar(ctx: &ConeContext, z: &SymMat) -> Result<SymMat> {
    Ok(z - &project_critical_cone(ctx, z)?)
}

/// Membership in the polar `{W : W_a. = 0, W_bb <= 0}` (with `bg`, `gg` free).
pub fn critical_cone_polar_membership(ctx: &ConeContext, w: &SymMat, tol: f64) -> Result<Membership> {
    check_dim(ctx.dim(), w.dim())?;
    let wt = ctx.tilde(w);
    let (a, b) = (ctx.alpha(), ctx.beta());
    let v = block(&wt, a, 0..ctx.dim()).norm() + max_eig(&block(&wt, b.clone(), b)).max(0.0);
    Ok(Membership::from_violation(v, tol))
}

/// `N(X; S+)` is polyhedral iff `|alpha| >= p - 1`.
pub fn is_normal_cone_polyhedral(ctx: &ConeContext) -> bool {
    ctx.alpha().len() + 1 >= ctx.dim()
}

/// `rank X + rank Y = p`, i.e. an empty `beta` block.
pub fn strict_complementarity(ctx: &ConeContext) -> bool {
    ctx.beta().is_empty()
}

/// The critical cone (and its polar) is polyhedral iff `|beta| <= 1`.
pub fn is_critical_cone_polyhedral(ctx: &ConeContext) -> bool {
    ctx.beta().len() <= 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(x: &[f64], y: &[f64]) -> ConeContext {
        ConeContext::from_pair(&SymMat::from_diag(x), &SymMat::from_diag(y), 1e-9).unwrap()
    }

    fn sm(rows: &[&[f64]]) -> SymMat {
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        SymMat::from_row_major(rows.len(), &flat).unwrap()
    }

    #[test]
    fn tangent_and_normal_examples() {
        let c = ctx(&[2.0, 0.0], &[0.0, 0.0]);
        let m = tangent_membership(&c, &SymMat::from_diag(&[-1.0, 5.0]), CONE_TOL).unwrap();
        assert!(m.member);
        let m = tangent_membership(&c, &SymMat::from_diag(&[1.0, -1.0]), CONE_TOL).unwrap();
        assert!(!m.member && (m.violation - 1.0).abs() < 1e-12);
        assert!(tangent_membership(&c, &SymMat::zeros(2), CONE_TOL).unwrap().member);

        assert!(normal_membership(&c, &SymMat::from_diag(&[0.0, -5.0]), CONE_TOL).unwrap().member);
        let m = normal_membership(&c, &SymMat::from_diag(&[1.0, -1.0]), CONE_TOL).unwrap();
        assert!(!m.member && (m.violation - 1.0).abs() < 1e-12);
        assert!(normal_membership(&c, &SymMat::zeros(2), CONE_TOL).unwrap().member);
    }

    #[test]
    fn critical_cone_examples() {
        let c = ctx(&[2.0, 0.0], &[0.0, -3.0]);
        assert!(critical_cone_psd_membership(&c, &sm(&[&[5.0, 7.0], &[7.0, 0.0]]), CONE_TOL).unwrap().member);
        assert!(!critical_cone_psd_membership(&c, &SymMat::from_diag(&[0.0, 1.0]), CONE_TOL).unwrap().member);
        assert!(critical_cone_psd_membership(&c, &SymMat::zeros(2), CONE_TOL).unwrap().member);

        assert!(critical_cone_nsd_membership(&c, &SymMat::from_diag(&[0.0, -4.0]), CONE_TOL).unwrap().member);
        assert!(!critical_cone_nsd_membership(&c, &SymMat::from_diag(&[1.0, 0.0]), CONE_TOL).unwrap().member);
        assert!(critical_cone_nsd_membership(&c, &SymMat::zeros(2), CONE_TOL).unwrap().member);
    }

    #[test]
    fn graph_tangent_examples() {
        let c = ctx(&[2.0, 0.0], &[0.0, -3.0]);
        let g = graph_tangent_membership(&c, &SymMat::from_diag(&[1.0, 0.0]), &SymMat::from_diag(&[0.0, 1.0]), CONE_TOL)
            .unwrap();
        assert!(g.member_blocks && g.member_deriv);
        let g = graph_tangent_membership(&c, &SymMat::from_diag(&[0.0, 1.0]), &SymMat::zeros(2), CONE_TOL).unwrap();
        assert!(!g.member_blocks && !g.member_deriv);
        let g = graph_tangent_membership(&c, &SymMat::zeros(2), &SymMat::zeros(2), CONE_TOL).unwrap();
        assert!(g.member_blocks && g.member_deriv);
    }

    #[test]
    fn critical_projection_examples() {
        let c = ctx(&[2.0, 0.0], &[0.0, -3.0]);
        let z = sm(&[&[1.0, 2.0], &[2.0, 9.0]]);
        let p = project_critical_cone(&c, &z).unwrap();
        assert!((&p - &sm(&[&[1.0, 2.0], &[2.0, 0.0]])).norm() < 1e-12);
        let q = project_critical_cone_polar(&c, &z).unwrap();
        assert!(p.inner(&q).abs() < 1e-12);

        let c0 = ctx(&[0.0, 0.0], &[0.0, 0.0]);
        let z = sm(&[&[1.0, 3.0], &[3.0, -2.0]]);
        let p = project_critical_cone(&c0, &z).unwrap();
        assert!((&p - &project_psd(&z).unwrap()).norm() < 1e-12);
        assert!((&project_critical_cone(&c0, &p).unwrap() - &p).norm() < 1e-12);
    }

    #[test]
    fn polyhedrality_flags() {
        assert!(is_normal_cone_polyhedral(&ctx(&[3.0, 1.0, 0.0], &[0.0; 3])));
        assert!(!is_normal_cone_polyhedral(&ctx(&[0.0; 3], &[0.0; 3])));
        assert!(is_normal_cone_polyhedral(&ctx(&[0.0], &[0.0])));
        assert!(strict_complementarity(&ctx(&[2.0, 0.0], &[0.0, -3.0])));
        assert!(!strict_complementarity(&ctx(&[0.0, 0.0], &[0.0, 0.0])));
        assert!(!strict_complementarity(&ctx(&[1.0, 0.0], &[0.0, 0.0])));
    }

    #[test]
    fn pair_validation() {
        let x = SymMat::from_diag(&[1.0, 0.0]);
        assert!(ConeContext::from_pair(&x, &SymMat::from_diag(&[-1.0, 0.0]), 1e-9).is_err());
        assert!(ConeContext::from_pair(&x, &SymMat::from_diag(&[0.0, 1.0]), 1e-9).is_err());
    }
}
