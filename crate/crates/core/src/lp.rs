//! Dense two-phase simplex and a cutting-plane search over PSD combinations.
//!
//! Both are sized for the handful of variables that appear in the
//! criticality and constraint-qualification tests: no sparsity, no
//! presolve, Bland's rule throughout.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symmat::{spectral_decompose_default, SymMat};

/// Pivot and feasibility tolerance.
pub const LP_TOL: f64 = 1e-9;

const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

/// `min c^T x` subject to the constraints; variables are nonnegative unless
/// flagged free.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    free: Vec<bool>,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

impl LinearProgram {
    /// A pure feasibility problem in `n` variables, all free.
    pub fn new_free(n: usize) -> Self {
        LinearProgram {
            n,
            objective: vec![0.0; n],
            free: vec![true; n],
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn set_objective(&mut self, c: Vec<f64>) {
        assert_eq!(c.len(), self.n);
        self.objective = c;
    }

    pub fn set_nonnegative(&mut self, j: usize) {
        self.free[j] = false;
    }

    pub fn add(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        assert_eq!(coeffs.len(), self.n, "constraint length");
        self.constraints.push(Constraint { coeffs, rel, rhs });
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    // Column bookkeeping.
    n_struct: usize,
    n_total: usize,
    artificial_start: usize,
    // For each original variable: (plus column, optional minus column).
    var_cols: Vec<(usize, Option<usize>)>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Tableau {
        let mut var_cols = Vec::with_capacity(lp.n);
        let mut col = 0;
        for j in 0..lp.n {
            if lp.free[j] {
                var_cols.push((col, Some(col + 1)));
                col += 2;
            } else {
                var_cols.push((col, None));
                col += 1;
            }
        }
        let n_struct = col;
        let n_slack = lp
            .constraints
            .iter()
            .filter(|c| c.rel != Relation::Eq)
            .count();
        let m = lp.constraints.len();
        let artificial_start = n_struct + n_slack;
        let n_total = artificial_start + m;

        let mut rows = Vec::with_capacity(m);
        let mut slack = n_struct;
        for (i, c) in lp.constraints.iter().enumerate() {
            let mut row = vec![0.0; n_total + 1];
            for (j, &a) in c.coeffs.iter().enumerate() {
                let (p, q) = var_cols[j];
                row[p] = a;
                if let Some(q) = q {
                    row[q] = -a;
                }
            }
            match c.rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            row[n_total] = c.rhs;
            let scale = row[..artificial_start]
                .iter()
                .fold(0.0_f64, |s, v| s.max(v.abs()));
            if scale > 0.0 {
                row.iter_mut().for_each(|v| *v /= scale);
            }
            if row[n_total] < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
            }
            row[artificial_start + i] = 1.0;
            rows.push(row);
        }
        Tableau {
            rows,
            basis: (artificial_start..artificial_start + m).collect(),
            n_struct,
            n_total,
            artificial_start,
            var_cols,
        }
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [f64]) {
        let piv = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= piv);
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    row.iter_mut().zip(&prow).for_each(|(v, p)| *v -= f * p);
                }
            }
        }
        let f = obj[c];
        if f != 0.0 {
            obj.iter_mut().zip(&prow).for_each(|(v, p)| *v -= f * p);
        }
        self.basis[r] = c;
    }

    /// Objective row of reduced costs; last entry is minus the objective value.
    fn objective_row(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj: Vec<f64> = cost.to_vec();
        obj.push(0.0);
        for (i, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                obj.iter_mut().zip(row).for_each(|(o, v)| *o -= cb * v);
            }
        }
        obj
    }

    /// Runs Bland's-rule simplex. Returns false if unbounded.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize) -> Result<bool> {
        let rhs = self.n_total;
        for _ in 0..MAX_PIVOTS {
            let Some(enter) = (0..allowed).find(|&j| obj[j] < -LP_TOL) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > LP_TOL {
                    let ratio = row[rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - 1e-12 * best.abs().max(1.0)
                                || (ratio <= best + 1e-12 * best.abs().max(1.0)
                                    && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, enter, obj),
            }
        }
        Err(Error::numeric("simplex pivot limit reached"))
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpOutcome> {
        let m = self.rows.len();
        let rhs = self.n_total;
        if m > 0 {
            let mut cost1 = vec![0.0; self.n_total];
            cost1[self.artificial_start..].iter_mut().for_each(|c| *c = 1.0);
            let mut obj = self.objective_row(&cost1);
            self.optimize(&mut obj, self.artificial_start)?;
            let infeas: f64 = (0..m)
                .filter(|&i| self.basis[i] >= self.artificial_start)
                .map(|i| self.rows[i][rhs])
                .sum();
            let bscale = lp
                .constraints
                .iter()
                .fold(1.0_f64, |s, c| s.max(c.rhs.abs()));
            if infeas > LP_TOL * bscale {
                return Ok(LpOutcome::Infeasible);
            }
            // Drive zero-level artificials out where possible.
            for i in 0..m {
                if self.basis[i] >= self.artificial_start {
                    if let Some(c) =
                        (0..self.artificial_start).find(|&j| self.rows[i][j].abs() > LP_TOL)
                    {
                        self.pivot(i, c, &mut obj);
                    }
                }
            }
        }
        let mut cost2 = vec![0.0; self.n_total];
        for (j, &(p, q)) in self.var_cols.iter().enumerate() {
            cost2[p] = lp.objective[j];
            if let Some(q) = q {
                cost2[q] = -lp.objective[j];
            }
        }
        let mut obj = self.objective_row(&cost2);
        if !self.optimize(&mut obj, self.artificial_start)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut colval = vec![0.0; self.n_struct];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                colval[b] = self.rows[i][rhs];
            }
        }
        let x: Vec<f64> = self
            .var_cols
            .iter()
            .map(|&(p, q)| colval[p] - q.map_or(0.0, |q| colval[q]))
            .collect();
        let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, value })
    }
}

/// Homogeneous feasibility: is there `z` with `E z = 0`, `I z <= 0` and some
/// coordinate in `target` nonzero?
///
/// Decided by normalizing `z_k = +1` and `z_k = -1` for each `k` in `target`.
pub fn homogeneous_nonzero(
    eq: &DMatrix<f64>,
    le: &DMatrix<f64>,
    target: &[usize],
) -> Result<Option<Vec<f64>>> {
    let n = eq.ncols().max(le.ncols());
    for &k in target {
        for sign in [1.0, -1.0] {
            let mut lp = LinearProgram::new_free(n);
            for r in 0..eq.nrows() {
                lp.add(eq.row(r).iter().copied().collect(), Relation::Eq, 0.0);
            }
            for r in 0..le.nrows() {
                lp.add(le.row(r).iter().copied().collect(), Relation::Le, 0.0);
            }
            let mut unit = vec![0.0; n];
            unit[k] = 1.0;
            lp.add(unit, Relation::Eq, sign);
            if let LpOutcome::Optimal { x, .. } = lp.solve()? {
                return Ok(Some(x));
            }
        }
    }
    Ok(None)
}

/// How coefficient vectors are normalized in [`max_min_eigenvalue`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Normalization {
    /// `|c_j| <= 1`.
    Box,
    /// `tr(sum c_j M_j) = 1`, with `|c_j| <= bound` to keep the LP bounded.
    Trace { bound: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    Above,
    NotAbove,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct EigenSearch {
    /// Best `lambda_min` found, with its coefficients.
    pub lower: f64,
    pub coeffs: Vec<f64>,
    /// Cutting-plane upper bound on the maximum.
    pub upper: f64,
    pub iterations: usize,
    pub decision: Decision,
}

/// Maximizes `lambda_min(sum c_j M_j)` by Kelley's cutting planes, stopping
/// as soon as the optimum is known to be above or not above `threshold`.
pub fn max_min_eigenvalue(
    ms: &[SymMat],
    norm: Normalization,
    threshold: f64,
    max_iter: usize,
) -> Result<EigenSearch> {
    let k = ms.len();
    let q = ms.first().map_or(0, |m| m.dim());
    if q == 0 {
        return Err(Error::input("eigenvalue search needs nonempty matrices"));
    }
    if k == 0 {
        // Only the zero combination exists.
        let (lower, upper) = match norm {
            Normalization::Box => (0.0, 0.0),
            Normalization::Trace { .. } => (f64::NEG_INFINITY, f64::NEG_INFINITY),
        };
        let decision = if upper > threshold { Decision::Above } else { Decision::NotAbove };
        return Ok(EigenSearch { lower, coeffs: vec![], upper, iterations: 0, decision });
    }
    let cut = |v: &[f64]| -> Vec<f64> {
        ms.iter()
            .map(|m| {
                let mut s = 0.0;
                for a in 0..q {
                    for b in 0..q {
                        s += v[a] * m.get(a, b) * v[b];
                    }
                }
                s
            })
            .collect()
    };
    // Variables: c_0..c_{k-1}, t. Minimize -t.
    let mut base = LinearProgram::new_free(k + 1);
    let mut obj = vec![0.0; k + 1];
    obj[k] = -1.0;
    base.set_objective(obj);
    let bound = match norm {
        Normalization::Box => 1.0,
        Normalization::Trace { bound } => bound,
    };
    for j in 0..k {
        let mut e = vec![0.0; k + 1];
        e[j] = 1.0;
        base.add(e.clone(), Relation::Le, bound);
        base.add(e, Relation::Ge, -bound);
    }
    if let Normalization::Trace { .. } = norm {
        let mut row: Vec<f64> = ms.iter().map(|m| m.trace()).collect();
        row.push(0.0);
        base.add(row, Relation::Eq, 1.0);
    }
    let add_cut = |lp: &mut LinearProgram, a: Vec<f64>| {
        // t - a.c <= 0
        let mut row: Vec<f64> = a.into_iter().map(|v| -v).collect();
        row.push(1.0);
        lp.add(row, Relation::Le, 0.0);
    };
    for r in 0..q {
        let mut v = vec![0.0; q];
        v[r] = 1.0;
        add_cut(&mut base, cut(&v));
    }
    // A few mixed directions help the first iterations on 2x2 blocks.
    for r in 0..q {
        for s in (r + 1)..q {
            for sign in [1.0, -1.0] {
                let mut v = vec![0.0; q];
                v[r] = std::f64::consts::FRAC_1_SQRT_2;
                v[s] = sign * std::f64::consts::FRAC_1_SQRT_2;
                add_cut(&mut base, cut(&v));
            }
        }
    }

    let mut best = EigenSearch {
        lower: f64::NEG_INFINITY,
        coeffs: vec![0.0; k],
        upper: f64::INFINITY,
        iterations: 0,
        decision: Decision::Unknown,
    };
    for it in 0..max_iter {
        best.iterations = it + 1;
        let (c, ub) = match base.solve()? {
            LpOutcome::Optimal { x, .. } => {
                let t = x[k];
                (x[..k].to_vec(), t)
            }
            LpOutcome::Infeasible => {
                best.upper = f64::NEG_INFINITY;
                best.decision = Decision::NotAbove;
                return Ok(best);
            }
            LpOutcome::Unbounded => return Err(Error::numeric("cutting-plane LP unbounded")),
        };
        best.upper = best.upper.min(ub);
        let mut mc = SymMat::zeros(q);
        for (cj, m) in c.iter().zip(ms) {
            mc = mc.axpy(*cj, m);
        }
        let d = spectral_decompose_default(&mc)?;
        let lmin = d.eigenvalues()[q - 1];
        if lmin > best.lower {
            best.lower = lmin;
            best.coeffs = c.clone();
        }
        if best.lower > threshold {
            best.decision = Decision::Above;
            return Ok(best);
        }
        if best.upper <= threshold {
            best.decision = Decision::NotAbove;
            return Ok(best);
        }
        let v: Vec<f64> = d.basis().column(q - 1).iter().copied().collect();
        add_cut(&mut base, cut(&v));
    }
    Ok(best)
}
