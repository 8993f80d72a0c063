mod common;

use common::{random_sym, rng};
use kkt_spectra::families::{default_example2_a, example2, example3, example3_solution, Family};
use kkt_spectra::problem::{KktPoint, ProblemData};
use kkt_spectra::SymMat;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn random_problem(seed: u64, n: usize, p: usize) -> ProblemData {
    let mut r = rng(seed);
    let q = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    let b: Vec<Vec<SymMat>> = (0..n)
        .map(|i| (0..n).map(|j| if j >= i { random_sym(&mut rng(seed ^ (i * 31 + j) as u64), p) } else { SymMat::zeros(p) }).collect())
        .collect();
    let b: Vec<Vec<SymMat>> = (0..n).map(|i| (0..n).map(|j| if j >= i { b[i][j].clone() } else { b[j][i].clone() }).collect()).collect();
    ProblemData::new(
        (0..n).map(|_| r.random_range(-1.0..1.0)).collect(),
        &q + q.transpose(),
        random_sym(&mut r, p),
        (0..n).map(|_| random_sym(&mut r, p)).collect(),
        b,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jacobian_matches_differences(seed in any::<u64>(), n in 1usize..=3, p in 1usize..=3) {
        let pd = random_problem(seed, n, p);
        let mut r = rng(seed.wrapping_add(1));
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let jac = pd.eval_g_jacobian(&x).unwrap();
        let h = 1e-6;
        for (i, d) in jac.iter().enumerate() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (&pd.eval_g(&xp).unwrap() - &pd.eval_g(&xm).unwrap()).scale(0.5 / h);
            prop_assert!((&fd - d).norm() <= 1e-7 * d.norm().max(1.0));
        }
    }

    #[test]
    fn lagrangian_gradient_matches_differences(seed in any::<u64>(), n in 1usize..=3, p in 1usize..=3) {
        let pd = random_problem(seed, n, p);
        let mut r = rng(seed.wrapping_add(2));
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let y = random_sym(&mut r, p);
        let l = |x: &[f64]| pd.eval_f(x).unwrap() + pd.eval_g(x).unwrap().inner(&y);
        let g = pd.lagrangian_gradient(&x, &y).unwrap();
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            prop_assert!(((l(&xp) - l(&xm)) / 2e-6 - g[i]).abs() <= 1e-6 * g[i].abs().max(1.0));
        }
    }

    #[test]
    fn shift_moves_normal_map(seed in any::<u64>(), n in 1usize..=3, p in 1usize..=3) {
        let pd = random_problem(seed, n, p);
        let mut r = rng(seed.wrapping_add(3));
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let z = random_sym(&mut r, p);
        let p1: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let p2 = random_sym(&mut r, p);
        let (a, b) = pd.robinson_normal_map(&x, &z).unwrap();
        let (sa, sb) = pd.shifted(&p1, &p2).unwrap().robinson_normal_map(&x, &z).unwrap();
        for i in 0..n {
            prop_assert!((sa[i] - (a[i] - p1[i])).abs() <= 1e-12);
        }
        prop_assert!((&sb - &(&b + &p2)).norm() <= 1e-12);
    }

    #[test]
    fn uncertified_points_are_rejected(x1 in 0.01f64..1.0) {
        let pd = example2(0.0, &default_example2_a()).unwrap();
        prop_assert!(KktPoint::certified(&pd, vec![x1, 0.0], SymMat::from_diag(&[-1.0, 0.0])).is_err());
    }
}

#[test]
fn family_points_are_kkt() {
    let f = Family::from_name("example2").unwrap();
    let (x, y) = f.reference_point();
    let pd = f.base();
    assert!(KktPoint::certified(&pd, x.clone(), y.clone()).is_ok());
    let z = &pd.eval_g(&x).unwrap() + &y;
    let (a, b) = pd.robinson_normal_map(&x, &z).unwrap();
    assert!(a.norm() < 1e-15 && b.norm() < 1e-15);
    for t in [1e-1, 1e-3] {
        let pd = example3(t).unwrap();
        assert!(KktPoint::certified(&pd, example3_solution(t).to_vec(), SymMat::zeros(2)).is_ok());
    }
}
