//! JSON problem and point files, matrix literals, and schedule strings.
//!
//! Problem file:
//!
//! ```json
//! { "n": 2, "p": 2,
//!   "f": { "lin": [1, 0], "quad": [[2, 0], [0, 2]] },
//!   "G": { "A0": [0, 0, 0, 0],
//!          "A":  [[1, 0, 0, 0], [0, 0, 0, 1]],
//!          "B":  [[null, null], [null, null]] } }
//! ```
//!
//! Matrices in `G` are row-major `p*p` arrays. `B` is `n x n`; entries with
//! `i <= j` are required unless `B` is omitted (all zero), entries below the
//! diagonal may be `null` and otherwise must match their mirror. A `null`
//! upper entry means a zero matrix. Point file: `{"x": [...], "Y": [p*p]}`.
//! Perturbation direction file: `{"p1": [...], "p2": [p*p]}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemData;
use crate::symmat::SymMat;

/// Upper bound on `n` and `p` accepted from files.
pub const MAX_DIM: usize = 64;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveFile {
    lin: Vec<f64>,
    quad: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    #[serde(rename = "A0")]
    a0: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    b: Option<Vec<Vec<Option<Vec<f64>>>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    n: usize,
    p: usize,
    f: ObjectiveFile,
    #[serde(rename = "G")]
    g: ConstraintFile,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointFile {
    x: Vec<f64>,
    #[serde(rename = "Y")]
    y: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectionFile {
    p1: Vec<f64>,
    p2: Vec<f64>,
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn read_mat(p: usize, v: &[f64], what: &str) -> Result<SymMat> {
    SymMat::from_row_major(p, v).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

/// Parses a problem file.
pub fn parse_problem(text: &str) -> Result<ProblemData> {
    let f: ProblemFile = serde_json::from_str(text).map_err(json_err)?;
    let (n, p) = (f.n, f.p);
    if n == 0 || p == 0 || n > MAX_DIM || p > MAX_DIM {
        return Err(Error::Parse(format!("n and p must lie in 1..={MAX_DIM}")));
    }
    if f.f.lin.len() != n {
        return Err(Error::Parse(format!("f.lin must have {n} entries")));
    }
    if f.f.quad.len() != n || f.f.quad.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("f.quad must be {n}x{n}")));
    }
    let quad = DMatrix::from_fn(n, n, |i, j| f.f.quad[i][j]);
    let a0 = read_mat(p, &f.g.a0, "G.A0")?;
    if f.g.a.len() != n {
        return Err(Error::Parse(format!("G.A must have {n} matrices")));
    }
    let a = f
        .g
        .a
        .iter()
        .enumerate()
        .map(|(i, m)| read_mat(p, m, &format!("G.A[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let mut b = vec![vec![SymMat::zeros(p); n]; n];
    if let Some(rows) = &f.g.b {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse(format!("G.B must be {n}x{n}")));
        }
        for i in 0..n {
            for j in i..n {
                if let Some(m) = &rows[i][j] {
                    b[i][j] = read_mat(p, m, &format!("G.B[{i}][{j}]"))?;
                    b[j][i] = b[i][j].clone();
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                if let Some(m) = &rows[i][j] {
                    let lower = read_mat(p, m, &format!("G.B[{i}][{j}]"))?;
                    if (&lower - &b[j][i]).max_abs() > 1e-12 * b[j][i].max_abs().max(1.0) {
                        return Err(Error::Parse(format!("G.B[{i}][{j}] does not mirror G.B[{j}][{i}]")));
                    }
                }
            }
        }
    }
    ProblemData::new(f.f.lin, quad, a0, a, b).map_err(|e| match e {
        Error::Input(m) => Error::Parse(m),
        other => other,
    })
}

/// Serializes a problem in the file format (upper triangle of `B` only).
pub fn problem_to_json(pd: &ProblemData) -> String {
    let n = pd.n();
    let second = pd.eval_g_second();
    let f = ProblemFile {
        n,
        p: pd.p(),
        f: ObjectiveFile {
            lin: pd.f_lin().iter().copied().collect(),
            quad: (0..n)
                .map(|i| (0..n).map(|j| pd.f_quad()[(i, j)]).collect())
                .collect(),
        },
        g: ConstraintFile {
            a0: pd.g_const().to_row_major(),
            a: pd.g_lin().iter().map(|m| m.to_row_major()).collect(),
            b: Some(
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| (j >= i).then(|| second[i][j].to_row_major()))
                            .collect()
                    })
                    .collect(),
            ),
        },
    };
    serde_json::to_string_pretty(&f).expect("problem serializes")
}

/// Parses a point file. `p` is inferred from the length of `Y`.
pub fn parse_point(text: &str) -> Result<(Vec<f64>, SymMat)> {
    let f: PointFile = serde_json::from_str(text).map_err(json_err)?;
    let p = (f.y.len() as f64).sqrt().round() as usize;
    if p == 0 || p * p != f.y.len() || p > MAX_DIM {
        return Err(Error::Parse("Y must hold p*p entries".into()));
    }
    if f.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse("x has non-finite entries".into()));
    }
    Ok((f.x, read_mat(p, &f.y, "Y")?))
}

/// Parses a point file and checks it against a problem.
pub fn parse_point_for(text: &str, pd: &ProblemData) -> Result<(Vec<f64>, SymMat)> {
    let (x, y) = parse_point(text)?;
    if x.len() != pd.n() || y.dim() != pd.p() {
        return Err(Error::Parse(format!(
            "point has n={}, p={} but the problem has n={}, p={}",
            x.len(),
            y.dim(),
            pd.n(),
            pd.p()
        )));
    }
    Ok((x, y))
}

/// Parses a perturbation direction `(p1, p2)` for a problem.
pub fn parse_direction_for(text: &str, pd: &ProblemData) -> Result<(Vec<f64>, SymMat)> {
    let f: DirectionFile = serde_json::from_str(text).map_err(json_err)?;
    if f.p1.len() != pd.n() || f.p2.len() != pd.p() * pd.p() {
        return Err(Error::Parse(format!(
            "direction needs {} entries in p1 and {} in p2",
            pd.n(),
            pd.p() * pd.p()
        )));
    }
    if f.p1.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parse("p1 has non-finite entries".into()));
    }
    Ok((f.p1, read_mat(pd.p(), &f.p2, "p2")?))
}

pub fn point_to_json(x: &[f64], y: &SymMat) -> String {
    serde_json::to_string(&PointFile { x: x.to_vec(), y: y.to_row_major() }).expect("point serializes")
}

/// Parses a matrix literal: nested rows `[[a, b], [b, c]]`.
pub fn parse_symmat(text: &str) -> Result<SymMat> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(json_err)?;
    let p = rows.len();
    if p == 0 || p > MAX_DIM || rows.iter().any(|r| r.len() != p) {
        return Err(Error::Parse("matrix must be a nonempty square array of rows".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    read_mat(p, &flat, "matrix")
}

/// Parses `start:end:count` into a geometric schedule from `start` to `end`.
pub fn parse_geo_schedule(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.trim().split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse("schedule must look like start:end:count".into()));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number '{s}'")))
    };
    let (a, b) = (num(parts[0])?, num(parts[1])?);
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad count '{}'", parts[2])))?;
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::Parse("schedule endpoints must be positive and finite".into()));
    }
    if count == 0 || count > 10_000 {
        return Err(Error::Parse("schedule count must lie in 1..=10000".into()));
    }
    Ok(geometric(a, b, count))
}

/// `count` points from `a` to `b`, equally spaced in `log`.
pub fn geometric(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|k| {
            if k == 0 {
                a
            } else if k + 1 == count {
                b
            } else {
                (la + (lb - la) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{default_example2_a, example2, example3};

    #[test]
    fn problem_round_trip() {
        for pd in [example2(0.3, &default_example2_a()).unwrap(), example3(0.01).unwrap()] {
            let text = problem_to_json(&pd);
            let back = parse_problem(&text).unwrap();
            assert_eq!(problem_to_json(&back), text);
        }
    }

    #[test]
    fn problem_without_b() {
        let t = r#"{"n":1,"p":1,"f":{"lin":[0],"quad":[[0]]},"G":{"A0":[0],"A":[[1]]}}"#;
        let pd = parse_problem(t).unwrap();
        assert_eq!(pd.eval_g(&[2.0]).unwrap(), SymMat::from_diag(&[2.0]));
    }

    #[test]
    fn problem_errors() {
        for bad in [
            "",
            "{}",
            r#"{"n":1,"p":1,"f":{"lin":[0,1],"quad":[[0]]},"G":{"A0":[0],"A":[[1]]}}"#,
            r#"{"n":1,"p":2,"f":{"lin":[0],"quad":[[0]]},"G":{"A0":[0,1,2,0],"A":[[1,0,0,1]]}}"#,
            r#"{"n":2,"p":1,"f":{"lin":[0,0],"quad":[[0,0],[0,0]]},"G":{"A0":[0],"A":[[1],[1]],"B":[[[1],[2]],[[3],[1]]]}}"#,
            r#"{"n":0,"p":1,"f":{"lin":[],"quad":[]},"G":{"A0":[0],"A":[]}}"#,
            r#"{"n":1,"p":1,"f":{"lin":[0],"quad":[[0]]},"G":{"A0":[0],"A":[[1]]},"extra":1}"#,
        ] {
            assert!(matches!(parse_problem(bad), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn point_files() {
        let (x, y) = parse_point(r#"{"x":[0,0],"Y":[-1,0,0,0]}"#).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(y, SymMat::from_diag(&[-1.0, 0.0]));
        assert!(parse_point(r#"{"x":[0],"Y":[1,2,3]}"#).is_err());
        assert!(parse_point(r#"{"x":[0],"Y":[1,2,3,4]}"#).is_err());
        assert!(parse_point("nonsense").is_err());
        let t = point_to_json(&x, &y);
        assert_eq!(parse_point(&t).unwrap().1, y);
    }

    #[test]
    fn schedules() {
        let s = parse_geo_schedule("1e-2:1e-5:13").unwrap();
        assert_eq!(s.len(), 13);
        assert_eq!(s[0], 1e-2);
        assert_eq!(s[12], 1e-5);
        assert!((s[4] - 1e-3).abs() < 1e-15);
        for bad in ["1e-2:1e-5:0", "0:1:3", "a:b:c", "1:2", "-1:1e-3:4", "1:inf:2"] {
            assert!(parse_geo_schedule(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn matrix_literals() {
        let m = parse_symmat("[[2,1],[1,0]]").unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert!(parse_symmat("[[2,1],[0,0]]").is_err());
        assert!(parse_symmat("[]").is_err());
        assert!(parse_symmat("[[1,2]]").is_err());
    }
}
