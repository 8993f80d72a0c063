//! Second-order conditions at a fixed multiplier, and the sigma-term of the
//! second-order tangent set of the PSD cone.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::{
    critical_cone_psd_membership, is_critical_cone_polyhedral, project_critical_cone,
    project_critical_cone_polar, ConeContext, Membership, CONE_TOL,
};
use crate::criticality::CriticalitySystem;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{null_space, RANK_TOL};
use crate::problem::{combine, ProblemData};
use crate::symmat::{block, pseudoinverse, spectral_decompose_default, SymMat};

/// Positivity threshold for the second-order form.
pub const SOSC_TOL: f64 = 1e-8;

/// `2 <Y, H X^+ H>`, the support function of the second-order tangent set
/// of the PSD cone at `X` in direction `H`, evaluated at `Y`.
///
/// `H` must lie in the critical cone `C(X, Y)`.
pub fn sigma_term(ctx: &ConeContext, h: &SymMat) -> Result<f64> {
    check_dim(ctx.dim(), h.dim())?;
    let m = critical_cone_psd_membership(ctx, h, CONE_TOL * h.norm().max(1.0))?;
    if !m.member {
        return Err(Error::input(format!(
            "direction is outside the critical cone (violation {:.3e})",
            m.violation
        )));
    }
    Ok(sigma_unchecked(ctx, h))
}

fn sigma_unchecked(ctx: &ConeContext, h: &SymMat) -> f64 {
    let xp = ctx.decomp().spectral_map(|l| {
        if l > ctx.decomp().tol_zero() {
            1.0 / l
        } else {
            0.0
        }
    });
    let hm = h.to_dmatrix();
    let prod = &hm * xp.to_dmatrix() * &hm;
    2.0 * ctx.y().to_dmatrix().component_mul(&prod).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SoscVerdict {
    #[serde(rename = "SOSCy_holds")]
    Holds,
    #[serde(rename = "SOSCy_fails")]
    Fails,
    Undetermined,
}

impl std::fmt::Display for SoscVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SoscVerdict::Holds => "SOSCy_holds",
            SoscVerdict::Fails => "SOSCy_fails",
            SoscVerdict::Undetermined => "Undetermined",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoncVerdict {
    Holds,
    Fails,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SosStats {
    /// "trivial cone", "subspace", "half-space" or "multistart".
    pub method: String,
    pub starts: usize,
    pub feasible_candidates: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SecondOrderReport {
    /// Infimum estimate of the form over the unit sphere intersected with
    /// the critical cone; `None` when the cone is `{0}`.
    pub min_value: Option<f64>,
    pub minimizer: Vec<f64>,
    pub verdict: SoscVerdict,
    pub sonc_verdict: SoncVerdict,
    /// True when the verdict does not rely on the multistart search.
    pub exact: bool,
    pub search_stats: SosStats,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SoscOptions {
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SoscOptions {
    fn default() -> Self {
        SoscOptions { starts: 64, iterations: 500, seed: 42 }
    }
}

/// The quadratic form `q(d) = d^T hess L d - sigma(d)` on the critical cone,
/// reduced to coordinates of the linear hull.
pub struct SecondOrderForm<'a> {
    sys: &'a CriticalitySystem,
    /// `hess L - [<Y, D_i X^+ D_j> + <Y, D_j X^+ D_i>]`.
    q: DMatrix<f64>,
    /// Orthonormal basis of the linear constraints of `C(x)`.
    basis: DMatrix<f64>,
    /// `beta` blocks of `P^T (sum_i basis_ik D_i) P`, one per column.
    cone: Vec<SymMat>,
}

impl<'a> SecondOrderForm<'a> {
    pub fn new(sys: &'a CriticalitySystem) -> Result<Self> {
        let n = sys.n();
        let ctx = sys.ctx();
        let xp = pseudoinverse(ctx.x(), ctx.decomp().tol_zero())?.to_dmatrix();
        let y = ctx.y().to_dmatrix();
        let d: Vec<DMatrix<f64>> = sys.jacobian().iter().map(|m| m.to_dmatrix()).collect();
        let mut q = sys.hess().clone();
        for i in 0..n {
            for j in 0..n {
                let a = (&y * &d[i] * &xp * &d[j]).trace();
                let b = (&y * &d[j] * &xp * &d[i]).trace();
                q[(i, j)] -= a + b;
            }
        }
        let q = (&q + q.transpose()) * 0.5;
        let (b, g) = (ctx.beta(), ctx.gamma());
        let jt = sys.jacobian_tilde();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for r in g.clone() {
            for c in b.start..ctx.dim() {
                if c >= r || c < g.start {
                    rows.push((0..n).map(|i| jt[i][(r, c)]).collect());
                }
            }
        }
        let lin = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        let basis = null_space(&lin, RANK_TOL);
        let cone = (0..basis.ncols())
            .map(|k| {
                let mut m = DMatrix::zeros(b.len(), b.len());
                for i in 0..n {
                    m += block(&jt[i], b.clone(), b.clone()) * basis[(i, k)];
                }
                SymMat::from_dmatrix(&m)
            })
            .collect();
        Ok(SecondOrderForm { sys, q, basis, cone })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn value(&self, d: &[f64]) -> f64 {
        let v = DVector::from_column_slice(d);
        v.dot(&(&self.q * &v))
    }

    fn cone_matrix(&self, u: &DVector<f64>) -> SymMat {
        let qb = self.sys.beta_size();
        let mut m = SymMat::zeros(qb);
        for (k, c) in self.cone.iter().enumerate() {
            m = m.axpy(u[k], c);
        }
        m
    }

    /// Minimizes the form over the unit sphere of the critical cone.
    pub fn minimize(&self, opts: &SoscOptions) -> Result<SecondOrderReport> {
        let r = self.basis.ncols();
        let qb = self.sys.beta_size();
        if r == 0 {
            return Ok(SecondOrderReport {
                min_value: None,
                minimizer: vec![0.0; self.sys.n()],
                verdict: SoscVerdict::Holds,
                sonc_verdict: SoncVerdict::Holds,
                exact: true,
                search_stats: SosStats { method: "trivial cone".into(), ..Default::default() },
            });
        }
        let red = self.basis.transpose() * &self.q * &self.basis;
        let red = (&red + red.transpose()) * 0.5;
        let e = spectral_decompose_default(&SymMat::from_dmatrix(&red))?;
        let lmin = e.eigenvalues()[r - 1];
        let umin = e.basis().column(r - 1).into_owned();
        let cone_trivial = qb == 0 || self.cone.iter().all(|m| m.max_abs() == 0.0);
        // q is even, so a half-space cone (|beta| = 1) sees the full minimum.
        let exact_shortcut = cone_trivial || qb == 1 || lmin > SOSC_TOL;
        if exact_shortcut {
            let mut u = umin;
            if qb == 1 && self.cone_matrix(&u).get(0, 0) < 0.0 {
                u = -u;
            }
            let d = &self.basis * &u;
            let method = if cone_trivial {
                "subspace"
            } else if qb == 1 {
                "half-space"
            } else {
                "subspace bound"
            };
            return Ok(self.report(lmin, d, true, SosStats { method: method.into(), starts: 0, feasible_candidates: 1 }));
        }
        self.multistart(&red, opts)
    }

    fn report(&self, value: f64, d: DVector<f64>, exact: bool, stats: SosStats) -> SecondOrderReport {
        let verdict = if value > SOSC_TOL {
            SoscVerdict::Holds
        } else {
            SoscVerdict::Fails
        };
        SecondOrderReport {
            min_value: Some(value),
            minimizer: d.iter().copied().collect(),
            verdict,
            sonc_verdict: if value >= -SOSC_TOL { SoncVerdict::Holds } else { SoncVerdict::Fails },
            exact,
            search_stats: stats,
        }
    }

    /// Penalized projected gradient on the sphere from deterministic starts.
    fn multistart(&self, red: &DMatrix<f64>, opts: &SoscOptions) -> Result<SecondOrderReport> {
        let r = red.nrows();
        let scale = self.cone.iter().fold(1.0_f64, |s, m| s.max(m.norm()));
        let penalty = |u: &DVector<f64>, rho: f64| -> Result<(f64, DVector<f64>)> {
            let m = self.cone_matrix(u);
            let neg = spectral_decompose_default(&m)?.project_nsd();
            let val = u.dot(&(red * u)) + rho * neg.inner(&neg);
            let mut grad = 2.0 * (red * u);
            for k in 0..r {
                grad[k] += 2.0 * rho * neg.inner(&self.cone[k]);
            }
            Ok((val, grad))
        };
        let stages = [10.0, 1e3, 1e5];
        let per_stage = (opts.iterations / stages.len()).max(1);
        let mut best: Option<(f64, DVector<f64>)> = None;
        let mut feasible = 0;
        for s in 0..opts.starts.max(1) {
            let mut u = sphere_point(s + 1, r, opts.seed);
            for &rho in &stages {
                let rho = rho / (scale * scale);
                for _ in 0..per_stage {
                    let (f0, g) = penalty(&u, rho)?;
                    let tang = &g - &u * g.dot(&u);
                    if tang.norm() < 1e-13 {
                        break;
                    }
                    let mut step = 0.1;
                    let mut moved = false;
                    for _ in 0..50 {
                        let cand = &u - &tang * step;
                        let cand = &cand / cand.norm();
                        let (f1, _) = penalty(&cand, rho)?;
                        if f1 <= f0 - 1e-4 * step * tang.norm_squared() {
                            u = cand;
                            moved = true;
                            break;
                        }
                        step *= 0.5;
                    }
                    if !moved {
                        break;
                    }
                }
            }
            let viol = (-self.cone_matrix(&u).min_eigenvalue()?).max(0.0);
            if viol <= 1e-9 * scale {
                feasible += 1;
                let val = u.dot(&(red * &u));
                if best.as_ref().is_none_or(|(b, _)| val < *b) {
                    best = Some((val, u.clone()));
                }
            }
        }
        let stats = SosStats { method: "multistart".into(), starts: opts.starts.max(1), feasible_candidates: feasible };
        match best {
            Some((val, u)) => Ok(self.report(val, &self.basis * &u, false, stats)),
            None => Ok(SecondOrderReport {
                min_value: None,
                minimizer: vec![0.0; self.sys.n()],
                verdict: SoscVerdict::Undetermined,
                sonc_verdict: SoncVerdict::Holds,
                exact: false,
                search_stats: stats,
            }),
        }
    }
}

/// Halton point `index` in `[-1, 1]^dim`, rotated by a seeded shift and
/// normalized onto the unit sphere.
fn sphere_point(index: usize, dim: usize, seed: u64) -> DVector<f64> {
    const PRIMES: [u64; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_iterator(
        dim,
        (0..dim).map(|k| {
            let shift: f64 = rng.random();
            let base = PRIMES[k % PRIMES.len()];
            let mut f = 1.0;
            let mut x = 0.0;
            let mut i = index as u64 + (k / PRIMES.len()) as u64 * 7919;
            while i > 0 {
                f /= base as f64;
                x += f * (i % base) as f64;
                i /= base;
            }
            2.0 * ((x + shift) % 1.0) - 1.0
        }),
    );
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        let mut e = DVector::zeros(dim);
        e[0] = 1.0;
        e
    }
}

/// `d in C(x)`, i.e. `G'(x) d` in the critical cone of the PSD cone.
pub fn critical_cone_x_membership(sys: &CriticalitySystem, d: &[f64]) -> Result<Membership> {
    check_dim(sys.n(), d.len())?;
    let h = combine(sys.jacobian(), d, sys.p());
    critical_cone_psd_membership(sys.ctx(), &h, CONE_TOL * h.norm().max(1.0))
}

/// `d^T hess L d - sigma(Y, T^2(G(x), G'(x) d))`.
pub fn evaluate_second_order_form(sys: &CriticalitySystem, d: &[f64]) -> Result<f64> {
    check_dim(sys.n(), d.len())?;
    let v = DVector::from_column_slice(d);
    let h = combine(sys.jacobian(), d, sys.p());
    Ok(v.dot(&(sys.hess() * &v)) - sigma_term(sys.ctx(), &h)?)
}

pub fn check_soscy(sys: &CriticalitySystem, opts: &SoscOptions) -> Result<SecondOrderReport> {
    SecondOrderForm::new(sys)?.minimize(opts)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct DerivativeCharacterization {
    pub lhs: bool,
    pub rhs: bool,
    pub lhs_residual: f64,
    /// Critical-cone violation, polar violation, inner-product defect.
    pub rhs_parts: [f64; 3],
}

/// Tests `dA = Pi'(C; dA + dB)` against the three-part characterization
/// through the critical cone of `(Pi(C), C - Pi(C))`, with the sigma-term
/// entering through its gradient `B dA A^+ + A^+ dA B`.
pub fn lemma4_check(c: &SymMat, da: &SymMat, db: &SymMat, tol: f64) -> Result<DerivativeCharacterization> {
    check_dim(c.dim(), da.dim())?;
    check_dim(c.dim(), db.dim())?;
    let ctx = ConeContext::from_sum(c)?;
    let scale = 1.0_f64.max(da.norm() + db.norm());
    let lhs_residual = (da - &ctx.decomp().dir_deriv_projection(&(da + db))?).norm();

    let b = ctx.y().to_dmatrix();
    let ap = pseudoinverse(ctx.x(), ctx.decomp().tol_zero())?.to_dmatrix();
    let dam = da.to_dmatrix();
    let z = db + &SymMat::from_dmatrix(&(&b * &dam * &ap + &ap * &dam * &b));
    let in_cone = critical_cone_psd_membership(&ctx, da, 0.0)?.violation;
    let polar = project_critical_cone(&ctx, &z)?.norm();
    let sigma = sigma_unchecked(&ctx, da);
    let inner = (da.inner(db) + sigma).abs();
    Ok(DerivativeCharacterization {
        lhs: lhs_residual <= tol * scale,
        rhs: in_cone <= tol * scale && polar <= tol * scale && inner <= tol * scale * scale,
        lhs_residual,
        rhs_parts: [in_cone, polar, inner],
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ConditionVerdict {
    /// "holds", "fails" or "undetermined".
    pub verdict: String,
    pub evidence: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundConditionsReport {
    pub cond_i: ConditionVerdict,
    pub cond_ii: ConditionVerdict,
    /// Largest `|<Pi_K(G' xi), Pi_K(eta)>|` over accepted samples.
    pub cond_ii_max_violation: f64,
    /// Largest normalized `|<(G' xi)_bb, eta_bb>|` over accepted samples.
    pub beta_inner_diagnostic: f64,
    pub samples: usize,
    pub accepted: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct BoundConditionsOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for BoundConditionsOptions {
    fn default() -> Self {
        BoundConditionsOptions { samples: 2000, seed: 42 }
    }
}

/// Closedness of `G'(x)^* K` and the orthogonality condition on
/// `Xi ∩ C(x, y)`, with `K` the polar of the critical cone.
pub fn theorem3_conditions(sys: &CriticalitySystem, opts: &BoundConditionsOptions) -> Result<BoundConditionsReport> {
    let ctx = sys.ctx();
    let n = sys.n();
    let p = sys.p();
    let zero_jac = sys.jacobian().iter().all(|d| d.max_abs() == 0.0);
    let cond_i = if zero_jac {
        ConditionVerdict { verdict: "holds".into(), evidence: "G'(x) = 0, the image is {0}".into() }
    } else if is_critical_cone_polyhedral(ctx) {
        ConditionVerdict {
            verdict: "holds".into(),
            evidence: format!("K is polyhedral (|beta| = {})", ctx.beta().len()),
        }
    } else if sys.check_srcq()?.holds {
        ConditionVerdict {
            verdict: "holds".into(),
            evidence: "ker G'(x)^* meets K only at 0 (strict Robinson CQ)".into(),
        }
    } else {
        ConditionVerdict {
            verdict: "undetermined".into(),
            evidence: "no exact closedness test applies".into(),
        }
    };

    // Linear hull of Xi ∩ C(x, y): unknowns xi and eta~ outside the
    // alpha x (alpha ∪ beta) block.
    let (a, b, g) = (ctx.alpha(), ctx.beta(), ctx.gamma());
    let mut ent: Vec<(usize, usize)> = Vec::new();
    for i in 0..p {
        for j in i..p {
            let zero = a.contains(&i) && j < g.start;
            if !zero {
                ent.push((i, j));
            }
        }
    }
    let jt = sys.jacobian_tilde();
    let nv = n + ent.len();
    let w = |i: usize, j: usize| if i == j { 1.0 } else { 2.0 };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..n {
        let mut row = vec![0.0; nv];
        for j in 0..n {
            row[j] = sys.hess()[(i, j)];
        }
        for (k, &(r, c)) in ent.iter().enumerate() {
            row[n + k] = w(r, c) * jt[i][(r, c)];
        }
        rows.push(row);
    }
    for r in g.clone() {
        for c in b.start..p {
            if c >= r || c < g.start {
                let mut row = vec![0.0; nv];
                for i in 0..n {
                    row[i] = jt[i][(r, c)];
                }
                rows.push(row);
            }
        }
    }
    let lin = DMatrix::from_fn(rows.len(), nv, |i, j| rows[i][j]);
    let basis = null_space(&lin, RANK_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut worst, mut diag, mut accepted) = (0.0_f64, 0.0_f64, 0);
    if basis.ncols() > 0 {
        for _ in 0..opts.samples {
            let coef = DVector::from_iterator(basis.ncols(), (0..basis.ncols()).map(|_| rng.random_range(-1.0..1.0)));
            let z = &basis * coef;
            let xi: Vec<f64> = z.rows(0, n).iter().copied().collect();
            let mut et = DMatrix::zeros(p, p);
            for (k, &(r, c)) in ent.iter().enumerate() {
                et[(r, c)] = z[n + k];
                et[(c, r)] = z[n + k];
            }
            let eta = ctx.decomp().from_eigenbasis(&et);
            let h = combine(sys.jacobian(), &xi, p);
            let tol = 1e-7 * (h.norm() + eta.norm()).max(1e-300);
            let ht = ctx.tilde(&h);
            let hbb = SymMat::from_dmatrix(&block(&ht, b.clone(), b.clone()));
            let ebb = SymMat::from_dmatrix(&block(&et, b.clone(), b.clone()));
            if !b.is_empty() && (hbb.min_eigenvalue()? < -tol || ebb.max_eigenvalue()? > tol) {
                continue;
            }
            accepted += 1;
            let pk_h = project_critical_cone_polar(ctx, &h)?;
            let pk_e = project_critical_cone_polar(ctx, &eta)?;
            let s = (h.norm() * eta.norm()).max(1e-300);
            worst = worst.max(pk_h.inner(&pk_e).abs());
            if !b.is_empty() {
                diag = diag.max(hbb.inner(&ebb).abs() / s);
            }
        }
    }
    let cond_ii = ConditionVerdict {
        verdict: if worst <= 1e-7 { "holds" } else { "fails" }.into(),
        evidence: format!(
            "{accepted} of {} samples in the cone constraints; Pi_K(G' xi) vanishes on C(x) by construction",
            if basis.ncols() > 0 { opts.samples } else { 0 }
        ),
    };
    Ok(BoundConditionsReport {
        cond_i,
        cond_ii,
        cond_ii_max_violation: worst,
        beta_inner_diagnostic: diag,
        samples: if basis.ncols() > 0 { opts.samples } else { 0 },
        accepted,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MultiplierRatio {
    pub perturbation: f64,
    pub distance: f64,
    pub ratio: f64,
}

/// `(d1 + d2) / (|p1| + |p2|)` for each sample `(y, p1, p2)`, with the
/// multiplier-set residual at `x` standing in for the distance to it.
pub fn multiplier_distance_estimate(
    pd: &ProblemData,
    x: &[f64],
    samples: &[(SymMat, Vec<f64>, SymMat)],
) -> Result<Vec<MultiplierRatio>> {
    samples
        .iter()
        .map(|(y, p1, p2)| {
            let (d1, d2) = pd.multiplier_set_residual(x, y)?;
            let pert = DVector::from_column_slice(p1).norm() + p2.norm();
            let distance = d1 + d2;
            let ratio = if pert > 0.0 { distance / pert } else if distance == 0.0 { 0.0 } else { f64::INFINITY };
            Ok(MultiplierRatio { perturbation: pert, distance, ratio })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{default_example2_a, example2, example3, scalar_fixture};
    use crate::problem::KktPoint;

    fn system(pd: &ProblemData, x: Vec<f64>, y: SymMat) -> CriticalitySystem {
        CriticalitySystem::build(pd, &KktPoint::certified(pd, x, y).unwrap()).unwrap()
    }

    #[test]
    fn sigma_examples() {
        let ctx = ConeContext::from_pair(&SymMat::from_diag(&[2.0, 0.0]), &SymMat::from_diag(&[0.0, -3.0]), 1e-9).unwrap();
        let mut h = SymMat::zeros(2);
        h.set(0, 1, 1.0);
        assert!((sigma_term(&ctx, &h).unwrap() + 3.0).abs() < 1e-12);
        let ctx0 = ConeContext::from_pair(&SymMat::from_diag(&[2.0, 0.0]), &SymMat::zeros(2), 1e-9).unwrap();
        assert_eq!(sigma_term(&ctx0, &h).unwrap(), 0.0);
        let ctxx = ConeContext::from_pair(&SymMat::zeros(2), &SymMat::from_diag(&[0.0, -3.0]), 1e-9).unwrap();
        assert_eq!(sigma_term(&ctxx, &SymMat::from_diag(&[1.0, 0.0])).unwrap(), 0.0);
        assert!(sigma_term(&ctx, &SymMat::from_diag(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn critical_directions_of_example2() {
        let pd = example2(0.0, &default_example2_a()).unwrap();
        let s = system(&pd, vec![0.0, 0.0], SymMat::from_diag(&[-1.0, 0.0]));
        assert!(critical_cone_x_membership(&s, &[0.0, 1.0]).unwrap().member);
        assert!(!critical_cone_x_membership(&s, &[1.0, 0.0]).unwrap().member);
        assert!(critical_cone_x_membership(&s, &[0.0, 0.0]).unwrap().member);
        assert!((evaluate_second_order_form(&s, &[0.0, 1.0]).unwrap() - 2.0).abs() < 1e-14);
        let s3 = system(&example3(0.0).unwrap(), vec![0.0, 0.0], SymMat::zeros(2));
        assert!((evaluate_second_order_form(&s3, &[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(evaluate_second_order_form(&s3, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn soscy_examples() {
        let o = SoscOptions::default();
        let s3 = system(&example3(0.0).unwrap(), vec![0.0, 0.0], SymMat::zeros(2));
        let r = check_soscy(&s3, &o).unwrap();
        assert_eq!(r.verdict, SoscVerdict::Holds);
        assert!((r.min_value.unwrap() - 1.0).abs() < 1e-12);
        let pd = example2(0.0, &default_example2_a()).unwrap();
        let s2 = system(&pd, vec![0.0, 0.0], SymMat::from_diag(&[-1.0, 0.0]));
        let r = check_soscy(&s2, &o).unwrap();
        assert_eq!(r.verdict, SoscVerdict::Holds);
        assert!((r.min_value.unwrap() - 2.0).abs() < 1e-12);
        let sf = system(&scalar_fixture(), vec![0.0], SymMat::zeros(1));
        let r = check_soscy(&sf, &o).unwrap();
        assert_eq!(r.verdict, SoscVerdict::Fails);
        assert_eq!(r.sonc_verdict, SoncVerdict::Holds);
    }

    #[test]
    fn characterization_examples() {
        let c = SymMat::from_diag(&[2.0, -3.0]);
        let r = lemma4_check(&c, &SymMat::from_diag(&[1.0, 0.0]), &SymMat::from_diag(&[0.0, 5.0]), 1e-9).unwrap();
        assert!(r.lhs && r.rhs);
        let r = lemma4_check(&c, &SymMat::from_diag(&[0.0, 1.0]), &SymMat::zeros(2), 1e-9).unwrap();
        assert!(!r.lhs && !r.rhs);
        let r = lemma4_check(&c, &SymMat::zeros(2), &SymMat::zeros(2), 1e-9).unwrap();
        assert!(r.lhs && r.rhs);
    }

    #[test]
    fn bound_condition_examples() {
        let s3 = system(&example3(0.0).unwrap(), vec![0.0, 0.0], SymMat::zeros(2));
        let t = theorem3_conditions(&s3, &BoundConditionsOptions::default()).unwrap();
        assert_eq!(t.cond_i.verdict, "holds");
        assert_eq!(t.cond_ii.verdict, "holds");
        let pd = example2(0.0, &default_example2_a()).unwrap();
        let s2 = system(&pd, vec![0.0, 0.0], SymMat::from_diag(&[-1.0, 0.0]));
        let t = theorem3_conditions(&s2, &BoundConditionsOptions::default()).unwrap();
        assert_eq!(t.cond_i.verdict, "holds");
        assert_eq!(t.cond_ii.verdict, "holds");
        assert!(t.accepted > 0);
    }

    #[test]
    fn multiplier_ratios() {
        let pd = example2(0.0, &default_example2_a()).unwrap();
        let r = multiplier_distance_estimate(
            &pd,
            &[0.0, 0.0],
            &[(SymMat::from_diag(&[-1.0, 0.0]), vec![0.0, 0.0], SymMat::identity(2))],
        )
        .unwrap();
        assert_eq!(r[0].ratio, 0.0);
    }
}
