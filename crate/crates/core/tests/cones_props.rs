mod common;

use common::{partition, random_sym, rng, structured};
use kkt_spectra::cones::{
    critical_cone_polar_membership, critical_cone_psd_membership,
    graph_tangent_membership, normal_membership, project_critical_cone, project_critical_cone_polar,
    tangent_membership, ConeContext,
};
use kkt_spectra::symmat::spectral_decompose_default;
use proptest::prelude::*;

fn context(seed: u64, p: usize) -> (ConeContext, rand_chacha::ChaCha8Rng) {
    let mut r = rng(seed);
    let (na, nb, ng) = partition(&mut r, p);
    (ConeContext::from_sum(&structured(&mut r, na, nb, ng)).unwrap(), r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tangent_and_normal_are_polar(seed in any::<u64>(), p in 1usize..=5) {
        let (ctx, mut r) = context(seed, p);
        let h = random_sym(&mut r, p);
        let w = random_sym(&mut r, p);
        // Push h into T and w into N through the eigenbasis.
        let t = ctx.decomp().dir_deriv_projection(&h).unwrap();
        let proj = |m: &kkt_spectra::SymMat| {
            let mut mt = ctx.decomp().to_eigenbasis(m);
            let b = ctx.beta().start;
            for i in 0..p { for j in 0..p { if i < b || j < b { mt[(i, j)] = 0.0; } } }
            let blk = kkt_spectra::SymMat::from_dmatrix(&mt.view((b, b), (p - b, p - b)).into_owned());
            let neg = spectral_decompose_default(&blk).unwrap().project_nsd();
            for i in b..p { for j in b..p { mt[(i, j)] = neg.get(i - b, j - b); } }
            ctx.decomp().from_eigenbasis(&mt)
        };
        let n = proj(&w);
        prop_assert!(normal_membership(&ctx, &n, 1e-9).unwrap().member);
        if tangent_membership(&ctx, &t, 1e-9).unwrap().member {
            prop_assert!(t.inner(&n) <= 1e-9);
        }
        prop_assert!(ctx.x().inner(&n).abs() <= 1e-9);
    }

    #[test]
    fn critical_cone_moreau(seed in any::<u64>(), p in 1usize..=5) {
        let (ctx, mut r) = context(seed, p);
        let z = random_sym(&mut r, p);
        let c = project_critical_cone(&ctx, &z).unwrap();
        let w = project_critical_cone_polar(&ctx, &z).unwrap();
        prop_assert!((&(&c + &w) - &z).norm() <= 1e-10);
        prop_assert!(c.inner(&w).abs() <= 1e-10);
        prop_assert!(critical_cone_psd_membership(&ctx, &c, 1e-9).unwrap().member);
        prop_assert!(critical_cone_polar_membership(&ctx, &w, 1e-9).unwrap().member);
        prop_assert!((&project_critical_cone(&ctx, &c).unwrap() - &c).norm() <= 1e-10);
    }

    #[test]
    fn critical_cone_is_tangent_slice(seed in any::<u64>(), p in 1usize..=5) {
        let (ctx, mut r) = context(seed, p);
        let c = project_critical_cone(&ctx, &random_sym(&mut r, p)).unwrap();
        prop_assert!(tangent_membership(&ctx, &c, 1e-9).unwrap().member);
        prop_assert!(ctx.y().inner(&c).abs() <= 1e-9);
    }

    #[test]
    fn derivative_pairs_are_graph_tangent(seed in any::<u64>(), p in 1usize..=5) {
        let (ctx, mut r) = context(seed, p);
        let h = random_sym(&mut r, p);
        let dx = ctx.decomp().dir_deriv_projection(&h).unwrap();
        let dy = &h - &dx;
        let m = graph_tangent_membership(&ctx, &dx, &dy, 1e-7).unwrap();
        prop_assert!(m.member_blocks && m.member_deriv);
    }
}
