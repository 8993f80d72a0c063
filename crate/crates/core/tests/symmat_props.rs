mod common;

use common::{random_sym, rng, structured};
use kkt_spectra::symmat::{project_psd, pseudoinverse, spectral_decompose_default};
use kkt_spectra::SymMat;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decomposition_reconstructs(seed in any::<u64>(), p in 1usize..=7) {
        let a = random_sym(&mut rng(seed), p);
        let d = spectral_decompose_default(&a).unwrap();
        prop_assert!(d.reconstruction_error() <= 1e-12 * a.norm().max(1.0));
        prop_assert!(d.orthogonality_error() <= 1e-12);
        prop_assert!(d.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
        let trace: f64 = d.eigenvalues().iter().sum();
        prop_assert!((trace - a.trace()).abs() <= 1e-12 * a.norm().max(1.0) * p as f64);
    }

    #[test]
    fn moreau_split(seed in any::<u64>(), p in 1usize..=7) {
        let a = random_sym(&mut rng(seed), p);
        let d = spectral_decompose_default(&a).unwrap();
        let (plus, minus) = (d.project_psd(), d.project_nsd());
        prop_assert!((&(&plus + &minus) - &a).norm() <= 1e-12);
        prop_assert!(plus.inner(&minus).abs() <= 1e-12);
        prop_assert!(plus.min_eigenvalue().unwrap() >= -1e-12);
        prop_assert!((&project_psd(&plus).unwrap() - &plus).norm() <= 1e-12);
    }

    #[test]
    fn projection_is_nonexpansive(seed in any::<u64>(), p in 1usize..=6) {
        let mut r = rng(seed);
        let (a, b) = (random_sym(&mut r, p), random_sym(&mut r, p));
        let d = (&project_psd(&a).unwrap() - &project_psd(&b).unwrap()).norm();
        prop_assert!(d <= (&a - &b).norm() + 1e-12);
    }

    #[test]
    fn partition_matches_construction(seed in any::<u64>(), na in 0usize..3, nb in 0usize..3, ng in 0usize..3) {
        prop_assume!(na + nb + ng > 0);
        let a = structured(&mut rng(seed), na, nb, ng);
        let d = spectral_decompose_default(&a).unwrap();
        prop_assert_eq!((d.alpha().len(), d.beta().len(), d.gamma().len()), (na, nb, ng));
    }

    #[test]
    fn derivative_is_positively_homogeneous(seed in any::<u64>(), na in 0usize..3, nb in 0usize..3, ng in 0usize..3, c in 0.1f64..10.0) {
        prop_assume!(na + nb + ng > 0);
        let mut r = rng(seed);
        let a = structured(&mut r, na, nb, ng);
        let h = random_sym(&mut r, na + nb + ng);
        let d = spectral_decompose_default(&a).unwrap();
        let lhs = d.dir_deriv_projection(&h.scale(c)).unwrap();
        let rhs = d.dir_deriv_projection(&h).unwrap().scale(c);
        prop_assert!((&lhs - &rhs).norm() <= 1e-11 * c.max(1.0));
    }

    #[test]
    fn pseudoinverse_identities(seed in any::<u64>(), na in 0usize..3, nb in 0usize..3, ng in 0usize..3) {
        prop_assume!(na + nb + ng > 0);
        let a = structured(&mut rng(seed), na, nb, ng);
        let d = spectral_decompose_default(&a).unwrap();
        let ap = pseudoinverse(&a, d.tol_zero()).unwrap();
        let am = a.to_dmatrix();
        let apm = ap.to_dmatrix();
        prop_assert!((&am * &apm * &am - &am).norm() <= 1e-10);
        prop_assert!((&apm * &am * &apm - &apm).norm() <= 1e-10);
    }

    #[test]
    fn storage_round_trips(seed in any::<u64>(), p in 1usize..=6) {
        let a = random_sym(&mut rng(seed), p);
        prop_assert_eq!(SymMat::from_row_major(p, &a.to_row_major()).unwrap(), a.clone());
        prop_assert_eq!(SymMat::from_packed(p, a.packed().to_vec()).unwrap(), a.clone());
        prop_assert_eq!(SymMat::from_dmatrix(&a.to_dmatrix()), a);
    }
}
