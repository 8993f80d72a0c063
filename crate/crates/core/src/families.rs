//! Built-in parametric problems and their canonical perturbations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemData;
use crate::symmat::SymMat;

/// Default off-diagonal matrix of the `example2` family.
pub fn default_example2_a() -> SymMat {
    let mut a = SymMat::zeros(2);
    a.set(0, 1, 1.0);
    a
}

/// `min x1 + x1^2 + x2^2  s.t.  Diag(x) + eps A >= 0`.
pub fn example2(eps: f64, a: &SymMat) -> Result<ProblemData> {
    if a.dim() != 2 {
        return Err(Error::input("example2 needs a 2x2 matrix A"));
    }
    ProblemData::new(
        vec![1.0, 0.0],
        DMatrix::from_diagonal_element(2, 2, 2.0),
        a.scale(eps),
        vec![SymMat::from_diag(&[1.0, 0.0]), SymMat::from_diag(&[0.0, 1.0])],
        vec![vec![SymMat::zeros(2); 2]; 2],
    )
}

/// `B` in the constraint shift of `example3`.
pub fn example3_b() -> SymMat {
    SymMat::from_diag(&[2.0, 1.0])
}

/// Linear objective coefficient of `example3`, multiplied by `sqrt(t)`.
pub fn example3_direction() -> [f64; 2] {
    let r3 = 3.0_f64.sqrt();
    [5.0 * r3 / 3.0, 4.0 * r3 / 3.0]
}

/// `min x1^2 + x2^2 + x1 x2 - sqrt(t) a(x)  s.t.
/// diag(x1^2 + x1 x2, x2^2 + x1 x2) - t B >= 0`.
pub fn example3(t: f64) -> Result<ProblemData> {
    if t < 0.0 {
        return Err(Error::input("example3 needs t >= 0"));
    }
    let s = t.sqrt();
    let dir = example3_direction();
    ProblemData::new(
        vec![-s * dir[0], -s * dir[1]],
        DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
        example3_b().scale(-t),
        vec![SymMat::zeros(2), SymMat::zeros(2)],
        vec![
            vec![SymMat::from_diag(&[2.0, 0.0]), SymMat::from_diag(&[1.0, 1.0])],
            vec![SymMat::from_diag(&[1.0, 1.0]), SymMat::from_diag(&[0.0, 2.0])],
        ],
    )
}

/// Closed-form KKT path of `example3`.
pub fn example3_solution(t: f64) -> [f64; 2] {
    let r3 = 3.0_f64.sqrt();
    let s = t.sqrt();
    [2.0 * r3 / 3.0 * s, r3 / 3.0 * s]
}

/// `min 0  s.t.  [x] >= 0`, with the degenerate multiplier `0` at `x = 0`.
pub fn scalar_fixture() -> ProblemData {
    ProblemData::new(
        vec![0.0],
        DMatrix::zeros(1, 1),
        SymMat::zeros(1),
        vec![SymMat::identity(1)],
        vec![vec![SymMat::zeros(1)]],
    )
    .expect("fixture data is valid")
}

/// A registered perturbation family: base problem, reference KKT pair, and
/// the canonical perturbation `(p1, p2)` at each parameter value.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Example2 { a: SymMat },
    Example3,
}

impl Family {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "example2" => Ok(Family::Example2 { a: default_example2_a() }),
            "example3" => Ok(Family::Example3),
            other => Err(Error::input(format!("unknown family '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Example2 { .. } => "example2",
            Family::Example3 => "example3",
        }
    }

    /// Unperturbed problem.
    pub fn base(&self) -> ProblemData {
        match self {
            Family::Example2 { a } => example2(0.0, a).expect("valid"),
            Family::Example3 => example3(0.0).expect("valid"),
        }
    }

    /// Reference KKT pair of the base problem.
    pub fn reference_point(&self) -> (Vec<f64>, SymMat) {
        match self {
            Family::Example2 { .. } => (vec![0.0, 0.0], SymMat::from_diag(&[-1.0, 0.0])),
            Family::Example3 => (vec![0.0, 0.0], SymMat::zeros(2)),
        }
    }

    /// `(p1, p2)` so that `base().shifted(p1, p2)` is the family member.
    pub fn perturbation(&self, s: f64) -> (Vec<f64>, SymMat) {
        match self {
            Family::Example2 { a } => (vec![0.0, 0.0], a.scale(s)),
            Family::Example3 => {
                let d = example3_direction();
                let r = s.max(0.0).sqrt();
                (vec![r * d[0], r * d[1]], example3_b().scale(-s))
            }
        }
    }
}
