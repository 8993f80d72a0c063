//! Critical and noncritical multipliers.
//!
//! A multiplier `Y` at `x` is critical when the derivative system
//!
//! ```text
//! hess L xi + G'(x)^* eta = 0,   G'(x) xi = Pi'(G(x) + Y; G'(x) xi + eta)
//! ```
//!
//! has a solution with `xi != 0`. In the eigenbasis of `A = G(x) + Y` the
//! second equation splits into linear block conditions plus a
//! complementarity condition on the `beta x beta` block. Everything except
//! that block is handled by exact linear algebra. The block is handled by
//! fixing a rotation that diagonalizes both `H_bb` and `eta_bb` and
//! enumerating which side of each diagonal pair vanishes.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cones::ConeContext;
use crate::error::{Error, Result};
use crate::linalg::{null_space, range_complement, rank, RANK_TOL};
use crate::lp::{max_min_eigenvalue, Decision, LinearProgram, LpOutcome, Normalization, Relation};
use crate::problem::{combine, KktPoint, ProblemData};
use crate::symmat::{block, spectral_decompose_default, SymMat};

/// Bound on `witness_residual` for a reported witness.
pub const WITNESS_TOL: f64 = 1e-7;

/// Largest `|beta|` for which all `2^|beta|` branches are enumerated.
const MAX_ENUM_BETA: usize = 12;

#[derive(Clone, Debug)]
pub struct CriticalitySystem {
    x: Vec<f64>,
    y: SymMat,
    hess: DMatrix<f64>,
    jac: Vec<SymMat>,
    jac_t: Vec<DMatrix<f64>>,
    ctx: ConeContext,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictTag {
    Critical,
    Noncritical,
    Undetermined,
}

impl std::fmt::Display for VerdictTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            VerdictTag::Critical => "Critical",
            VerdictTag::Noncritical => "Noncritical",
            VerdictTag::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Witness {
    pub xi: Vec<f64>,
    pub eta: SymMat,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SearchStats {
    pub branches: usize,
    pub lps: usize,
    pub rotations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct CriticalityVerdict {
    pub tag: VerdictTag,
    pub witness: Option<Witness>,
    /// What was searched, and whether the search was exhaustive.
    pub certificate: String,
    pub exhaustive: bool,
    pub residual: f64,
    pub beta_size: usize,
    pub stats: SearchStats,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ClassifyOptions {
    /// Angles on `[0, pi)` for `|beta| = 2`.
    pub grid_points: usize,
    /// Random rotations for `|beta| >= 3`.
    pub samples: usize,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { grid_points: 181, samples: 64, seed: 42 }
    }
}

/// How the `beta x beta` block enters the linear system.
enum BbMode<'a> {
    /// `eta_bb` fully free, no condition on `H_bb`.
    Free,
    /// `eta_bb = Q diag(h) Q^T`; `split[r]` true means `g_r >= 0, h_r = 0`,
    /// false means `g_r = 0, h_r <= 0`. Off-diagonal entries of `Q^T H_bb Q`
    /// are equalities unless relaxed.
    Rotated { q: &'a DMatrix<f64>, split: &'a [bool], relax: bool },
}

struct Rows {
    nvars: usize,
    eq: Vec<Vec<f64>>,
    le: Vec<Vec<f64>>,
    relax: Vec<Vec<f64>>,
}

fn to_matrix(rows: &[Vec<f64>], ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

/// Searches `{z : E z = 0, I z <= 0}` for a point with nonzero leading
/// `nxi` coordinates. Exact up to LP tolerance: equalities are eliminated by
/// an SVD null space, then each `xi_k = +-1` normalization is tried.
fn cone_witness(eq: &DMatrix<f64>, le: &DMatrix<f64>, nxi: usize, lps: &mut usize) -> Result<Option<DVector<f64>>> {
    let z = null_space(eq, RANK_TOL);
    if z.ncols() == 0 {
        return Ok(None);
    }
    let xi_part = z.rows(0, nxi).into_owned();
    let targets: Vec<usize> = (0..nxi).filter(|&k| xi_part.row(k).norm() > 1e-8).collect();
    if targets.is_empty() {
        return Ok(None);
    }
    let ineq = le * &z;
    if ineq.nrows() == 0 {
        // Any null vector with a nonzero xi part will do.
        let best = (0..z.ncols())
            .max_by(|&a, &b| xi_part.column(a).norm().total_cmp(&xi_part.column(b).norm()))
            .unwrap();
        return Ok(Some(z.column(best).into_owned()));
    }
    let r = z.ncols();
    for &k in &targets {
        for sign in [1.0, -1.0] {
            let mut lp = LinearProgram::new_free(r);
            for i in 0..ineq.nrows() {
                lp.add(ineq.row(i).iter().copied().collect(), Relation::Le, 0.0);
            }
            lp.add(xi_part.row(k).iter().copied().collect(), Relation::Eq, sign);
            *lps += 1;
            match lp.solve()? {
                LpOutcome::Optimal { x, .. } => return Ok(Some(&z * DVector::from_vec(x))),
                LpOutcome::Infeasible => {}
                LpOutcome::Unbounded => return Err(Error::numeric("feasibility LP reported unbounded")),
            }
        }
    }
    Ok(None)
}

/// Smallest `t` with `|R z| <= t` over the same cone, normalized by `c^T xi = +-1`.
fn relaxed_merit(
    eq: &DMatrix<f64>,
    le: &DMatrix<f64>,
    relax: &DMatrix<f64>,
    nxi: usize,
    c: &[f64],
    lps: &mut usize,
) -> Result<Option<(f64, DVector<f64>)>> {
    let z = null_space(eq, RANK_TOL);
    if z.ncols() == 0 {
        return Ok(None);
    }
    let xi_part = z.rows(0, nxi).into_owned();
    let norm_row = DVector::from_column_slice(c).transpose() * &xi_part;
    if norm_row.norm() <= 1e-8 {
        return Ok(None);
    }
    let ineq = le * &z;
    let rel = relax * &z;
    let r = z.ncols();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for sign in [1.0, -1.0] {
        let mut lp = LinearProgram::new_free(r + 1);
        let mut obj = vec![0.0; r + 1];
        obj[r] = 1.0;
        lp.set_objective(obj);
        for i in 0..ineq.nrows() {
            let mut row: Vec<f64> = ineq.row(i).iter().copied().collect();
            row.push(0.0);
            lp.add(row, Relation::Le, 0.0);
        }
        for i in 0..rel.nrows() {
            let base: Vec<f64> = rel.row(i).iter().copied().collect();
            let mut up = base.clone();
            up.push(-1.0);
            lp.add(up, Relation::Le, 0.0);
            let mut down: Vec<f64> = base.iter().map(|v| -v).collect();
            down.push(-1.0);
            lp.add(down, Relation::Le, 0.0);
        }
        let mut nr: Vec<f64> = norm_row.iter().copied().collect();
        nr.push(0.0);
        lp.add(nr, Relation::Eq, sign);
        // Keep the LP bounded.
        for j in 0..r {
            let mut e = vec![0.0; r + 1];
            e[j] = 1.0;
            lp.add(e.clone(), Relation::Le, 1e6);
            lp.add(e, Relation::Ge, -1e6);
        }
        *lps += 1;
        if let LpOutcome::Optimal { x, .. } = lp.solve()? {
            let t = x[r];
            if best.as_ref().is_none_or(|(b, _)| t < *b) {
                best = Some((t, &z * DVector::from_column_slice(&x[..r])));
            }
        }
    }
    Ok(best)
}

impl CriticalitySystem {
    /// Assembles the derivative system at a certified KKT point.
    pub fn build(pd: &ProblemData, kkt: &KktPoint) -> Result<Self> {
        if !kkt.is_certified() {
            return Err(Error::input(format!(
                "KKT point not certified (residuals {:.3e}, {:.3e})",
                kkt.residuals.0, kkt.residuals.1
            )));
        }
        let x = kkt.x.clone();
        let g = pd.eval_g(&x)?;
        let ctx = ConeContext::from_sum(&(&g + &kkt.y))?;
        Self::assemble(pd, x, kkt.y.clone(), ctx)
    }

    /// Like [`build`](Self::build) with an explicit zero-eigenvalue threshold.
    pub fn build_with_tol(pd: &ProblemData, kkt: &KktPoint, tol_zero: f64) -> Result<Self> {
        if !kkt.is_certified() {
            return Err(Error::input("KKT point not certified"));
        }
        let g = pd.eval_g(&kkt.x)?;
        let ctx = ConeContext::from_sum_with_tol(&(&g + &kkt.y), tol_zero)?;
        Self::assemble(pd, kkt.x.clone(), kkt.y.clone(), ctx)
    }

    fn assemble(pd: &ProblemData, x: Vec<f64>, y: SymMat, ctx: ConeContext) -> Result<Self> {
        let hess = pd.lagrangian_hessian(&x, &y)?;
        let jac = pd.eval_g_jacobian(&x)?;
        let jac_t = jac.iter().map(|d| ctx.tilde(d)).collect();
        Ok(CriticalitySystem { x, y, hess, jac, jac_t, ctx })
    }

    pub fn n(&self) -> usize {
        self.hess.nrows()
    }

    pub fn p(&self) -> usize {
        self.ctx.dim()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &SymMat {
        &self.y
    }

    pub fn hess(&self) -> &DMatrix<f64> {
        &self.hess
    }

    pub fn jacobian(&self) -> &[SymMat] {
        &self.jac
    }

    /// `P^T D_i P` for each `i`.
    pub fn jacobian_tilde(&self) -> &[DMatrix<f64>] {
        &self.jac_t
    }

    pub fn ctx(&self) -> &ConeContext {
        &self.ctx
    }

    pub fn beta_size(&self) -> usize {
        self.ctx.beta().len()
    }

    /// Residual of the derivative system at `(xi, eta)`:
    /// `sqrt(|hess xi + G'^* eta|^2 + |G' xi - Pi'(A; G' xi + eta)|^2)`.
    pub fn witness_residual(&self, xi: &[f64], eta: &SymMat) -> Result<f64> {
        crate::error::check_dim(self.n(), xi.len())?;
        crate::error::check_dim(self.p(), eta.dim())?;
        let xv = DVector::from_column_slice(xi);
        let adj = DVector::from_iterator(self.n(), self.jac.iter().map(|d| d.inner(eta)));
        let r1 = (&self.hess * &xv + adj).norm();
        let h = combine(&self.jac, xi, self.p());
        let d = self.ctx.decomp().dir_deriv_projection(&(&h + eta))?;
        let r2 = (&h - &d).norm();
        Ok((r1 * r1 + r2 * r2).sqrt())
    }

    /// Off-diagonal eta entries that are free variables, in the P basis.
    fn eta_entries(&self) -> Vec<(usize, usize)> {
        let (a, b, g) = (self.ctx.alpha(), self.ctx.beta(), self.ctx.gamma());
        let mut v = Vec::new();
        for i in a {
            for j in g.clone() {
                v.push((i, j));
            }
        }
        for i in b {
            for j in g.clone() {
                v.push((i, j));
            }
        }
        for i in g.clone() {
            for j in i..g.end {
                v.push((i, j));
            }
        }
        v
    }

    fn rows(&self, mode: &BbMode) -> Rows {
        let n = self.n();
        let ent = self.eta_entries();
        let b = self.ctx.beta();
        let qb = b.len();
        let bb_free: Vec<(usize, usize)> = b.clone().flat_map(|i| (i..b.end).map(move |j| (i, j))).collect();
        let n_bb = match mode {
            BbMode::Free => bb_free.len(),
            BbMode::Rotated { .. } => qb,
        };
        let nvars = n + ent.len() + n_bb;
        let off_e = n;
        let off_b = n + ent.len();
        let w = |i: usize, j: usize| if i == j { 1.0 } else { 2.0 };
        let rot: Option<Vec<DMatrix<f64>>> = match mode {
            BbMode::Rotated { q, .. } => Some(
                self.jac_t
                    .iter()
                    .map(|d| q.transpose() * block(d, b.clone(), b.clone()) * *q)
                    .collect(),
            ),
            BbMode::Free => None,
        };
        let mut eq = Vec::new();
        let mut le = Vec::new();
        let mut relax = Vec::new();

        // Adjoint equation.
        for i in 0..n {
            let mut row = vec![0.0; nvars];
            for j in 0..n {
                row[j] = self.hess[(i, j)];
            }
            for (k, &(r, c)) in ent.iter().enumerate() {
                row[off_e + k] = w(r, c) * self.jac_t[i][(r, c)];
            }
            match &rot {
                None => {
                    for (k, &(r, c)) in bb_free.iter().enumerate() {
                        row[off_b + k] = w(r, c) * self.jac_t[i][(r, c)];
                    }
                }
                Some(rm) => {
                    for r in 0..qb {
                        row[off_b + r] = rm[i][(r, r)];
                    }
                }
            }
            eq.push(row);
        }
        // (G' xi)_bg = 0 and (G' xi)_gg = 0.
        let (a, g) = (self.ctx.alpha(), self.ctx.gamma());
        let h_row = |r: usize, c: usize| -> Vec<f64> {
            let mut row = vec![0.0; nvars];
            for i in 0..n {
                row[i] = self.jac_t[i][(r, c)];
            }
            row
        };
        for r in b.clone() {
            for c in g.clone() {
                eq.push(h_row(r, c));
            }
        }
        for r in g.clone() {
            for c in r..g.end {
                eq.push(h_row(r, c));
            }
        }
        // (Sigma - 1) H + Sigma eta = 0 on alpha x gamma.
        let sigma = self.ctx.decomp().sigma();
        for r in a.clone() {
            for c in g.clone() {
                let s = sigma[(r, c)];
                let mut row = h_row(r, c);
                row.iter_mut().take(n).for_each(|v| *v *= s - 1.0);
                let k = ent.iter().position(|&e| e == (r, c)).unwrap();
                row[off_e + k] = s;
                eq.push(row);
            }
        }
        if let (BbMode::Rotated { split, relax: rx, .. }, Some(rm)) = (mode, &rot) {
            let g_row = |r: usize, c: usize| -> Vec<f64> {
                let mut row = vec![0.0; nvars];
                for i in 0..n {
                    row[i] = rm[i][(r, c)];
                }
                row
            };
            for r in 0..qb {
                for c in (r + 1)..qb {
                    if *rx {
                        relax.push(g_row(r, c));
                    } else {
                        eq.push(g_row(r, c));
                    }
                }
            }
            for (r, &pos) in split.iter().enumerate() {
                let mut hrow = vec![0.0; nvars];
                hrow[off_b + r] = 1.0;
                if pos {
                    // g_r >= 0, h_r = 0
                    le.push(g_row(r, r).iter().map(|v| -v).collect());
                    eq.push(hrow);
                } else {
                    // g_r = 0, h_r <= 0
                    eq.push(g_row(r, r));
                    le.push(hrow);
                }
            }
        }
        Rows { nvars, eq, le, relax }
    }

    /// Turns a solution vector of [`rows`](Self::rows) into `(xi, eta)`.
    fn witness_from(&self, z: &DVector<f64>, mode: &BbMode) -> Witness {
        let n = self.n();
        let p = self.p();
        let ent = self.eta_entries();
        let b = self.ctx.beta();
        let mut et = DMatrix::zeros(p, p);
        for (k, &(r, c)) in ent.iter().enumerate() {
            et[(r, c)] = z[n + k];
            et[(c, r)] = z[n + k];
        }
        let off_b = n + ent.len();
        match mode {
            BbMode::Free => {
                let mut k = off_b;
                for r in b.clone() {
                    for c in r..b.end {
                        et[(r, c)] = z[k];
                        et[(c, r)] = z[k];
                        k += 1;
                    }
                }
            }
            BbMode::Rotated { q, .. } => {
                let h = DVector::from_iterator(b.len(), (0..b.len()).map(|r| z[off_b + r]));
                let m = *q * DMatrix::from_diagonal(&h) * q.transpose();
                et.view_mut((b.start, b.start), (b.len(), b.len())).copy_from(&m);
            }
        }
        let mut xi: Vec<f64> = z.rows(0, n).iter().copied().collect();
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        xi.iter_mut().for_each(|v| *v /= norm);
        let eta = self.ctx.decomp().from_eigenbasis(&(et / norm));
        Witness { xi, eta }
    }

    /// Solves the system for one `beta`-block mode; returns a verified witness.
    fn try_mode(&self, mode: &BbMode, stats: &mut SearchStats) -> Result<Option<(Witness, f64)>> {
        let rows = self.rows(mode);
        stats.branches += 1;
        let eq = to_matrix(&rows.eq, rows.nvars);
        let le = to_matrix(&rows.le, rows.nvars);
        if let Some(z) = cone_witness(&eq, &le, self.n(), &mut stats.lps)? {
            let w = self.witness_from(&z, mode);
            let r = self.witness_residual(&w.xi, &w.eta)?;
            if r <= WITNESS_TOL {
                return Ok(Some((w, r)));
            }
        }
        Ok(None)
    }

    /// Tries all `2^q` splits for a fixed rotation.
    fn try_rotation(&self, q: &DMatrix<f64>, stats: &mut SearchStats) -> Result<Option<(Witness, f64)>> {
        let qb = q.nrows();
        stats.rotations += 1;
        for mask in 0..(1usize << qb) {
            let split: Vec<bool> = (0..qb).map(|r| mask >> r & 1 == 1).collect();
            let mode = BbMode::Rotated { q, split: &split, relax: false };
            if let Some(found) = self.try_mode(&mode, stats)? {
                return Ok(Some(found));
            }
        }
        Ok(None)
    }

    /// Common eigenbasis of the `beta` blocks of all `P^T D_i P`, if any.
    fn common_beta_basis(&self, seed: u64) -> Result<Option<DMatrix<f64>>> {
        let b = self.ctx.beta();
        let qb = b.len();
        let blocks: Vec<SymMat> = self
            .jac_t
            .iter()
            .map(|d| SymMat::from_dmatrix(&block(d, b.clone(), b.clone())))
            .collect();
        let scale = blocks.iter().fold(0.0_f64, |s, m| s.max(m.norm()));
        if scale == 0.0 {
            return Ok(Some(DMatrix::identity(qb, qb)));
        }
        let diag_already = blocks.iter().all(|m| {
            (0..qb).all(|i| ((i + 1)..qb).all(|j| m.get(i, j).abs() <= 1e-12 * scale))
        });
        if diag_already {
            return Ok(Some(DMatrix::identity(qb, qb)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b10c);
        let mut mix = SymMat::zeros(qb);
        for m in &blocks {
            mix = mix.axpy(rng.random_range(-1.0..1.0), m);
        }
        let q = spectral_decompose_default(&mix)?.basis().clone();
        let ok = blocks.iter().all(|m| {
            let r = m.congruence(&q);
            (0..qb).all(|i| ((i + 1)..qb).all(|j| r[(i, j)].abs() <= 1e-9 * scale))
        });
        Ok(ok.then_some(q))
    }

    fn verdict(&self, tag: VerdictTag, found: Option<(Witness, f64)>, certificate: String, exhaustive: bool, stats: SearchStats) -> CriticalityVerdict {
        let (witness, residual) = match found {
            Some((w, r)) => (Some(w), r),
            None => (None, 0.0),
        };
        CriticalityVerdict {
            tag,
            witness,
            certificate,
            exhaustive,
            residual,
            beta_size: self.beta_size(),
            stats,
        }
    }

    /// Classifies the multiplier.
    pub fn classify(&self, opts: &ClassifyOptions) -> Result<CriticalityVerdict> {
        let mut stats = SearchStats::default();
        let qb = self.beta_size();

        // Dropping the beta block conditions only enlarges the solution set.
        let free = self.rows(&BbMode::Free);
        let eq = to_matrix(&free.eq, free.nvars);
        let z = null_space(&eq, RANK_TOL);
        stats.branches += 1;
        if rank(&z.rows(0, self.n()).into_owned(), 1e-8) == 0 {
            return Ok(self.verdict(
                VerdictTag::Noncritical,
                None,
                "exact: the linear part of the system forces xi = 0".into(),
                true,
                stats,
            ));
        }
        if qb == 0 {
            let found = self.try_mode(&BbMode::Free, &mut stats)?;
            return match found {
                Some(f) => Ok(self.verdict(VerdictTag::Critical, Some(f), "exact: linear system (|beta| = 0)".into(), true, stats)),
                None => Err(Error::numeric("null space has a xi component but no verified witness")),
            };
        }

        if qb <= MAX_ENUM_BETA {
            if let Some(q) = self.common_beta_basis(opts.seed)? {
                let found = self.try_rotation(&q, &mut stats)?;
                let cert = format!(
                    "exact: beta blocks share an eigenbasis, {} complementarity branches enumerated (|beta| = {qb})",
                    1usize << qb
                );
                return Ok(match found {
                    Some(f) => self.verdict(VerdictTag::Critical, Some(f), cert, true, stats),
                    None => self.verdict(VerdictTag::Noncritical, None, cert, true, stats),
                });
            }
        }
        // qb >= 2 from here on (a 1x1 block is always diagonal).
        if qb == 2 {
            if let Some(f) = self.search_angles(opts, &mut stats)? {
                let cert = format!("angle grid of {} points with refinement (|beta| = 2)", opts.grid_points);
                return Ok(self.verdict(VerdictTag::Critical, Some(f), cert, false, stats));
            }
            let cert = format!(
                "semi-decision: no witness on an angle grid of {} points with refinement (|beta| = 2)",
                opts.grid_points
            );
            return Ok(self.verdict(VerdictTag::Undetermined, None, cert, false, stats));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for s in 0..opts.samples.max(1) {
            let q = if s == 0 {
                DMatrix::identity(qb, qb)
            } else {
                random_orthogonal(qb, &mut rng)?
            };
            if qb <= MAX_ENUM_BETA {
                if let Some(f) = self.try_rotation(&q, &mut stats)? {
                    let cert = format!("random rotation {s} of {} (|beta| = {qb})", opts.samples);
                    return Ok(self.verdict(VerdictTag::Critical, Some(f), cert, false, stats));
                }
            } else {
                for _ in 0..64 {
                    let split: Vec<bool> = (0..qb).map(|_| rng.random_bool(0.5)).collect();
                    let mode = BbMode::Rotated { q: &q, split: &split, relax: false };
                    if let Some(f) = self.try_mode(&mode, &mut stats)? {
                        let cert = format!("random rotation {s} with sampled branches (|beta| = {qb})");
                        return Ok(self.verdict(VerdictTag::Critical, Some(f), cert, false, stats));
                    }
                }
            }
        }
        let cert = format!("semi-decision: no witness over {} seeded rotations (|beta| = {qb})", opts.samples.max(1));
        Ok(self.verdict(VerdictTag::Undetermined, None, cert, false, stats))
    }

    /// `|beta| = 2`: scan rotation angles, refine the best ones by golden
    /// section on the relaxed off-diagonal merit, and verify any candidate.
    fn search_angles(&self, opts: &ClassifyOptions, stats: &mut SearchStats) -> Result<Option<(Witness, f64)>> {
        let m = opts.grid_points.max(4);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let c: Vec<f64> = (0..self.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rot = |th: f64| DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let splits = [[false, false], [false, true], [true, false], [true, true]];

        for split in &splits {
            let merit = |th: f64, stats: &mut SearchStats| -> Result<Option<(f64, DVector<f64>)>> {
                let q = rot(th);
                let mode = BbMode::Rotated { q: &q, split, relax: true };
                let rows = self.rows(&mode);
                stats.branches += 1;
                relaxed_merit(
                    &to_matrix(&rows.eq, rows.nvars),
                    &to_matrix(&rows.le, rows.nvars),
                    &to_matrix(&rows.relax, rows.nvars),
                    self.n(),
                    &c,
                    &mut stats.lps,
                )
            };
            let verify = |th: f64, z: &DVector<f64>| -> Result<Option<(Witness, f64)>> {
                let q = rot(th);
                let mode = BbMode::Rotated { q: &q, split, relax: true };
                let w = self.witness_from(z, &mode);
                let r = self.witness_residual(&w.xi, &w.eta)?;
                Ok((r <= WITNESS_TOL).then_some((w, r)))
            };
            let h = std::f64::consts::PI / m as f64;
            let mut values = Vec::with_capacity(m);
            for k in 0..m {
                let th = k as f64 * h;
                stats.rotations += 1;
                let v = merit(th, stats)?;
                if let Some((t, z)) = &v {
                    if *t <= 1e-10 {
                        if let Some(f) = verify(th, z)? {
                            return Ok(Some(f));
                        }
                    }
                }
                values.push(v.map_or(f64::INFINITY, |(t, _)| t));
            }
            // Local minima on the periodic grid, best first.
            let mut minima: Vec<usize> = (0..m)
                .filter(|&k| {
                    values[k].is_finite()
                        && values[k] <= values[(k + m - 1) % m]
                        && values[k] <= values[(k + 1) % m]
                })
                .collect();
            minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            for &k in minima.iter().take(4) {
                let (mut lo, mut hi) = ((k as f64 - 1.0) * h, (k as f64 + 1.0) * h);
                let g = 0.5 * (5.0_f64.sqrt() - 1.0);
                let eval = |th: f64, stats: &mut SearchStats| -> Result<f64> {
                    Ok(merit(th, stats)?.map_or(f64::INFINITY, |(t, _)| t))
                };
                let mut x1 = hi - g * (hi - lo);
                let mut x2 = lo + g * (hi - lo);
                let mut f1 = eval(x1, stats)?;
                let mut f2 = eval(x2, stats)?;
                for _ in 0..60 {
                    if f1 <= f2 {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - g * (hi - lo);
                        f1 = eval(x1, stats)?;
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + g * (hi - lo);
                        f2 = eval(x2, stats)?;
                    }
                }
                let th = 0.5 * (lo + hi);
                if let Some((_, z)) = merit(th, stats)? {
                    if let Some(f) = verify(th, &z)? {
                        return Ok(Some(f));
                    }
                }
            }
        }
        Ok(None)
    }

    /// `hess L xi = 0` and `G' xi = Pi'(A; G' xi)` only for `xi = 0`.
    pub fn xpart_condition(&self) -> Result<XPartResult> {
        let n = self.n();
        let (a, b, g) = (self.ctx.alpha(), self.ctx.beta(), self.ctx.gamma());
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| self.hess.row(i).iter().copied().collect()).collect();
        let h_row = |r: usize, c: usize| -> Vec<f64> { (0..n).map(|i| self.jac_t[i][(r, c)]).collect() };
        for r in a.clone() {
            for c in g.clone() {
                rows.push(h_row(r, c));
            }
        }
        for r in b.clone() {
            for c in g.clone() {
                rows.push(h_row(r, c));
            }
        }
        for r in g.clone() {
            for c in r..g.end {
                rows.push(h_row(r, c));
            }
        }
        let nsp = null_space(&to_matrix(&rows, n), RANK_TOL);
        if nsp.ncols() == 0 {
            return Ok(XPartResult { holds: true, exact: true, witness: None });
        }
        let fail_with = |xi: DVector<f64>| -> Result<XPartResult> {
            let xi: Vec<f64> = (&xi / xi.norm()).iter().copied().collect();
            let r = self.xpart_residual(&xi)?;
            Ok(if r <= WITNESS_TOL {
                XPartResult { holds: false, exact: true, witness: Some(xi) }
            } else {
                XPartResult { holds: false, exact: false, witness: None }
            })
        };
        if b.is_empty() {
            return fail_with(nsp.column(0).into_owned());
        }
        let qb = b.len();
        let ms: Vec<SymMat> = (0..nsp.ncols())
            .map(|k| {
                let mut m = DMatrix::zeros(qb, qb);
                for i in 0..n {
                    m += block(&self.jac_t[i], b.clone(), b.clone()) * nsp[(i, k)];
                }
                SymMat::from_dmatrix(&m)
            })
            .collect();
        // A nonzero u with M(u) = 0 is a witness outright.
        let lin = DMatrix::from_fn(qb * qb, ms.len(), |r, k| ms[k].get(r / qb, r % qb));
        let ker = null_space(&lin, RANK_TOL);
        if ker.ncols() > 0 {
            return fail_with(&nsp * ker.column(0));
        }
        let scale = ms.iter().fold(1.0_f64, |s, m| s.max(m.norm()));
        let res = max_min_eigenvalue(&ms, Normalization::Trace { bound: 1e4 }, -1e-10 * scale, 400)?;
        match res.decision {
            Decision::NotAbove => Ok(XPartResult { holds: true, exact: true, witness: None }),
            Decision::Above => fail_with(&nsp * DVector::from_vec(res.coeffs)),
            Decision::Unknown => Ok(XPartResult { holds: false, exact: false, witness: None }),
        }
    }

    fn xpart_residual(&self, xi: &[f64]) -> Result<f64> {
        self.witness_residual(xi, &SymMat::zeros(self.p()))
    }

    /// Strict Robinson CQ at `(x, Y)`, by its dual characterization.
    pub fn check_srcq(&self) -> Result<CqResult> {
        let n = self.n();
        let (b, g) = (self.ctx.beta(), self.ctx.gamma());
        let mut free: Vec<(usize, usize)> = Vec::new();
        for r in b.clone() {
            for c in g.clone() {
                free.push((r, c));
            }
        }
        for r in g.clone() {
            for c in r..g.end {
                free.push((r, c));
            }
        }
        let w = |i: usize, j: usize| if i == j { 1.0 } else { 2.0 };
        let ell = DMatrix::from_fn(n, free.len(), |i, k| {
            let (r, c) = free[k];
            w(r, c) * self.jac_t[i][(r, c)]
        });
        if !free.is_empty() && null_space(&ell, RANK_TOL).ncols() > 0 {
            return Ok(CqResult { holds: false, exact: true, margin: 0.0 });
        }
        if b.is_empty() {
            return Ok(CqResult { holds: true, exact: true, margin: f64::INFINITY });
        }
        let u = if free.is_empty() { DMatrix::identity(n, n) } else { range_complement(&ell, RANK_TOL) };
        let ms: Vec<SymMat> = (0..u.ncols())
            .map(|k| {
                let mut m = DMatrix::zeros(b.len(), b.len());
                for i in 0..n {
                    m += block(&self.jac_t[i], b.clone(), b.clone()) * u[(i, k)];
                }
                SymMat::from_dmatrix(&m)
            })
            .collect();
        pd_combination(&ms)
    }
}

fn random_orthogonal(q: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let m = SymMat::from_fn(q, |_, _| rng.random_range(-1.0..1.0));
    Ok(spectral_decompose_default(&m)?.basis().clone())
}

/// Result of a constraint-qualification test.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct CqResult {
    pub holds: bool,
    /// False when the cutting-plane search stopped without a decision.
    pub exact: bool,
    /// Best `lambda_min` of a normalized combination found.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct XPartResult {
    pub holds: bool,
    pub exact: bool,
    pub witness: Option<Vec<f64>>,
}

/// Is some combination of `ms` positive definite?
fn pd_combination(ms: &[SymMat]) -> Result<CqResult> {
    if ms.is_empty() {
        return Ok(CqResult { holds: false, exact: true, margin: 0.0 });
    }
    let scale = ms.iter().fold(1.0_f64, |s, m| s.max(m.norm()));
    let r = max_min_eigenvalue(ms, Normalization::Box, 1e-9 * scale, 400)?;
    Ok(match r.decision {
        Decision::Above => CqResult { holds: true, exact: true, margin: r.lower },
        Decision::NotAbove => CqResult { holds: false, exact: true, margin: r.lower },
        Decision::Unknown => CqResult { holds: r.lower > 0.0, exact: false, margin: r.lower },
    })
}

/// Robinson's CQ at a feasible `x`.
pub fn check_rcq(pd: &ProblemData, x: &[f64]) -> Result<CqResult> {
    let g = pd.eval_g(x)?;
    let d = spectral_decompose_default(&g)?;
    let tol = d.tol_zero();
    if d.eigenvalues().last().is_some_and(|&l| l < -tol) {
        return Err(Error::input("RCQ needs a feasible point (G(x) is not PSD)"));
    }
    let kernel: Vec<usize> = (0..d.dim()).filter(|&i| d.eigenvalues()[i] <= tol).collect();
    if kernel.is_empty() {
        return Ok(CqResult { holds: true, exact: true, margin: f64::INFINITY });
    }
    let e = DMatrix::from_fn(d.dim(), kernel.len(), |r, c| d.basis()[(r, kernel[c])]);
    let ms: Vec<SymMat> = pd.eval_g_jacobian(x)?.iter().map(|m| SymMat::from_dmatrix(&m.congruence(&e))).collect();
    pd_combination(&ms)
}

/// Classification entry point.
pub fn classify_multiplier(sys: &CriticalitySystem, opts: &ClassifyOptions) -> Result<CriticalityVerdict> {
    sys.classify(opts)
}

/// Sign-partitioned NLP form of a problem whose data are all diagonal.
#[derive(Clone, Debug)]
pub struct NlpSystem {
    hess: DMatrix<f64>,
    /// Gradients of the active constraints `g_j = G_jj`, as rows.
    grads: Vec<DVector<f64>>,
    /// Strongly active (`Y_jj < 0`) rows.
    strong: Vec<usize>,
    /// Weakly active (`Y_jj = 0`) rows.
    weak: Vec<usize>,
}

impl NlpSystem {
    pub fn index_sets(&self) -> (&[usize], &[usize]) {
        (&self.strong, &self.weak)
    }
}

/// Builds the NLP system when `G` and `Y` are diagonal; `None` otherwise.
pub fn diagonal_reduction(pd: &ProblemData, kkt: &KktPoint, tol: f64) -> Result<Option<NlpSystem>> {
    let ydiag = (0..kkt.y.dim()).all(|i| ((i + 1)..kkt.y.dim()).all(|j| kkt.y.get(i, j) == 0.0));
    if !pd.is_diagonal() || !ydiag {
        return Ok(None);
    }
    let g = pd.eval_g(&kkt.x)?;
    let jac = pd.eval_g_jacobian(&kkt.x)?;
    let hess = pd.lagrangian_hessian(&kkt.x, &kkt.y)?;
    let mut grads = Vec::new();
    let (mut strong, mut weak) = (Vec::new(), Vec::new());
    for j in 0..pd.p() {
        if g.get(j, j) > tol {
            continue;
        }
        let row = grads.len();
        grads.push(DVector::from_iterator(pd.n(), jac.iter().map(|d| d.get(j, j))));
        if kkt.y.get(j, j) < -tol {
            strong.push(row);
        } else {
            weak.push(row);
        }
    }
    Ok(Some(NlpSystem { hess, grads, strong, weak }))
}

/// Exact branch enumeration over the weakly active set.
pub fn classify_nlp(nlp: &NlpSystem) -> Result<CriticalityVerdict> {
    let n = nlp.hess.nrows();
    let m = nlp.grads.len();
    let k = nlp.weak.len();
    if k > 20 {
        return Err(Error::input("too many weakly active constraints to enumerate"));
    }
    let nvars = n + m;
    let mut stats = SearchStats::default();
    for mask in 0..(1usize << k) {
        let mut eq: Vec<Vec<f64>> = Vec::new();
        let mut le: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            let mut row = vec![0.0; nvars];
            for j in 0..n {
                row[j] = nlp.hess[(i, j)];
            }
            for (c, gr) in nlp.grads.iter().enumerate() {
                row[n + c] = gr[i];
            }
            eq.push(row);
        }
        let grad_row = |c: usize, sign: f64| -> Vec<f64> {
            let mut row = vec![0.0; nvars];
            for i in 0..n {
                row[i] = sign * nlp.grads[c][i];
            }
            row
        };
        for &c in &nlp.strong {
            eq.push(grad_row(c, 1.0));
        }
        for (bit, &c) in nlp.weak.iter().enumerate() {
            let mut e = vec![0.0; nvars];
            e[n + c] = 1.0;
            if mask >> bit & 1 == 1 {
                // grad^T xi >= 0, eta = 0
                le.push(grad_row(c, -1.0));
                eq.push(e);
            } else {
                // grad^T xi = 0, eta <= 0
                eq.push(grad_row(c, 1.0));
                le.push(e);
            }
        }
        stats.branches += 1;
        let found = cone_witness(&to_matrix(&eq, nvars), &to_matrix(&le, nvars), n, &mut stats.lps)?;
        if let Some(z) = found {
            let xi: Vec<f64> = z.rows(0, n).iter().copied().collect();
            let nrm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let xi = xi.iter().map(|v| v / nrm).collect();
            return Ok(CriticalityVerdict {
                tag: VerdictTag::Critical,
                witness: Some(Witness { xi, eta: SymMat::zeros(1) }),
                certificate: format!("NLP branch {mask} of {}", 1usize << k),
                exhaustive: true,
                residual: 0.0,
                beta_size: k,
                stats,
            });
        }
    }
    Ok(CriticalityVerdict {
        tag: VerdictTag::Noncritical,
        witness: None,
        certificate: format!("exact: all {} NLP branches infeasible", 1usize << k),
        exhaustive: true,
        residual: 0.0,
        beta_size: k,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{default_example2_a, example2, example3, scalar_fixture};

    fn system(pd: &ProblemData, x: Vec<f64>, y: SymMat) -> CriticalitySystem {
        let k = KktPoint::certified(pd, x, y).unwrap();
        CriticalitySystem::build(pd, &k).unwrap()
    }

    #[test]
    fn partitions_of_examples() {
        let pd = example2(0.0, &default_example2_a()).unwrap();
        let s = system(&pd, vec![0.0, 0.0], SymMat::from_diag(&[-1.0, 0.0]));
        assert_eq!(s.beta_size(), 1);
        assert_eq!(s.ctx().gamma().len(), 1);
        let s3 = system(&example3(0.0).unwrap(), vec![0.0, 0.0], SymMat::zeros(2));
        assert_eq!(s3.beta_size(), 2);
        assert!(s3.ctx().alpha().is_empty() && s3.ctx().gamma().is_empty());
    }

    #[test]
    fn witness_residual_examples() {
        let s = system(&scalar_fixture(), vec![0.0], SymMat::zeros(1));
        assert_eq!(s.witness_residual(&[0.0], &SymMat::zeros(1)).unwrap(), 0.0);
        assert!(s.witness_residual(&[1.0], &SymMat::zeros(1)).unwrap() < 1e-15);
        let s3 = system(&example3(0.0).unwrap(), vec![0.0, 0.0], SymMat::zeros(2));
        let r = s3.witness_residual(&[1.0, 0.0], &SymMat::zeros(2)).unwrap();
        assert!((r - 5.0_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn classification_examples() {
        let opts = ClassifyOptions::default();
        let s = system(&scalar_fixture(), vec![0.0], SymMat::zeros(1));
        let v = s.classify(&opts).unwrap();
        assert_eq!(v.tag, VerdictTag::Critical);
        assert!((v.witness.unwrap().xi[0].abs() - 1.0).abs() < 1e-12);

        let s3 = system(&example3(0.0).unwrap(), vec![0.0, 0.0], SymMat::zeros(2));
        let v = s3.classify(&opts).unwrap();
        assert_eq!(v.tag, VerdictTag::Noncritical);
        assert!(v.exhaustive);

        let pd = example2(0.0, &default_example2_a()).unwrap();
        let s2 = system(&pd, vec![0.0, 0.0], SymMat::from_diag(&[-1.0, 0.0]));
        let v = s2.classify(&opts).unwrap();
        assert_eq!(v.tag, VerdictTag::Noncritical);
    }

    #[test]
    fn xpart_examples() {
        let s3 = system(&example3(0.0).unwrap(), vec![0.0, 0.0], SymMat::zeros(2));
        assert!(s3.xpart_condition().unwrap().holds);
        let s = system(&scalar_fixture(), vec![0.0], SymMat::zeros(1));
        let r = s.xpart_condition().unwrap();
        assert!(!r.holds && r.exact);
        assert!((r.witness.unwrap()[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constraint_qualifications() {
        let pd = example2(0.0, &default_example2_a()).unwrap();
        assert!(check_rcq(&pd, &[0.0, 0.0]).unwrap().holds);
        let s2 = system(&pd, vec![0.0, 0.0], SymMat::from_diag(&[-1.0, 0.0]));
        assert!(!s2.check_srcq().unwrap().holds);

        let constant = ProblemData::new(
            vec![0.0, 0.0],
            DMatrix::zeros(2, 2),
            SymMat::from_diag(&[1.0, 0.0, 0.0]),
            vec![SymMat::zeros(3); 2],
            vec![vec![SymMat::zeros(3); 2]; 2],
        )
        .unwrap();
        assert!(!check_rcq(&constant, &[0.0, 0.0]).unwrap().holds);
        assert!(check_rcq(&scalar_fixture(), &[0.0]).unwrap().holds);
    }

    #[test]
    fn nlp_reduction_examples() {
        let pd = example2(0.0, &default_example2_a()).unwrap();
        let k = KktPoint::certified(&pd, vec![0.0, 0.0], SymMat::from_diag(&[-1.0, 0.0])).unwrap();
        let nlp = diagonal_reduction(&pd, &k, 1e-9).unwrap().unwrap();
        assert_eq!(classify_nlp(&nlp).unwrap().tag, VerdictTag::Noncritical);

        let f = scalar_fixture();
        let k = KktPoint::certified(&f, vec![0.0], SymMat::zeros(1)).unwrap();
        let nlp = diagonal_reduction(&f, &k, 1e-9).unwrap().unwrap();
        assert_eq!(classify_nlp(&nlp).unwrap().tag, VerdictTag::Critical);

        // No weakly active constraints and a nonsingular Hessian.
        let k3 = KktPoint::certified(&pd, vec![0.0, 0.0], SymMat::from_diag(&[-1.0, 0.0])).unwrap();
        let pd_strict = pd.shifted(&[0.0, 0.0], &SymMat::from_diag(&[0.0, 1.0])).unwrap();
        let k_strict = KktPoint::certified(&pd_strict, k3.x.clone(), k3.y.clone()).unwrap();
        let nlp = diagonal_reduction(&pd_strict, &k_strict, 1e-9).unwrap().unwrap();
        assert!(nlp.index_sets().1.is_empty());
        assert_eq!(classify_nlp(&nlp).unwrap().tag, VerdictTag::Noncritical);
    }
}
