mod common;

use common::*;
use dsfusion::belief::{
    belief, combine, conflict_degree, decide, pignistic, plausibility, vacuous_extend, BeliefError, MassFunction,
};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn combine_matches_enumeration(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let f = frame(n);
        let a = random_mass(&mut r, &f, 5);
        let b = random_mass(&mut r, &f, 5);
        match (combine(&a, &b), dempster(&dense(&a), &dense(&b))) {
            (Ok(m), Some(d)) => prop_assert!(max_abs_diff(&dense(&m), &d) < 1e-12),
            (Err(BeliefError::TotalConflict { .. }), None) => {}
            (got, want) => prop_assert!(false, "library {got:?} vs oracle {want:?}"),
        }
    }

    #[test]
    fn combine_is_commutative_and_associative(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let f = frame(n);
        let (a, b, c) = (random_mass(&mut r, &f, 4), random_mass(&mut r, &f, 4), random_mass(&mut r, &f, 4));
        if let (Ok(ab), Ok(ba)) = (combine(&a, &b), combine(&b, &a)) {
            prop_assert_eq!(dense(&ab), dense(&ba));
            if let (Ok(ab_c), Ok(bc)) = (combine(&ab, &c), combine(&b, &c)) {
                if let Ok(a_bc) = combine(&a, &bc) {
                    prop_assert!(max_abs_diff(&dense(&ab_c), &dense(&a_bc)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn vacuous_is_two_sided_neutral(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let f = frame(n);
        let m = random_mass(&mut r, &f, 5);
        let v = MassFunction::vacuous(&f);
        prop_assert!(max_abs_diff(&dense(&combine(&m, &v).unwrap()), &dense(&m)) < 1e-15);
        prop_assert!(max_abs_diff(&dense(&combine(&v, &m).unwrap()), &dense(&m)) < 1e-15);
        prop_assert_eq!(conflict_degree(&m, &v).unwrap(), 0.0);
    }

    #[test]
    fn extension_preserves_belief_and_plausibility(seed in any::<u64>(), source_n in 1usize..=4, extra in 0usize..=3) {
        let mut r = rng(seed);
        let rho = random_refining(&mut r, source_n, source_n + extra);
        let m = random_mass(&mut r, rho.source(), 5);
        let ext = vacuous_extend(&m, &rho).unwrap();
        for a in 1..1usize << source_n {
            let sa = subset_of_mask(source_n, a);
            let ra = rho.apply(&sa);
            prop_assert!((belief(&ext, &ra).unwrap() - belief(&m, &sa).unwrap()).abs() < 1e-12);
            prop_assert!((plausibility(&ext, &ra).unwrap() - plausibility(&m, &sa).unwrap()).abs() < 1e-12);
        }
        let d = dense_extend(&dense(&m), &image_masks(&rho), rho.target().len());
        prop_assert!(max_abs_diff(&dense(&ext), &d) < 1e-15);
    }

    #[test]
    fn belief_and_plausibility_match_sums(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let f = frame(n);
        let m = random_mass(&mut r, &f, 6);
        let d = dense(&m);
        for a in 1..1usize << n {
            let s = subset_of_mask(n, a);
            prop_assert!((belief(&m, &s).unwrap() - dense_belief(&d, a)).abs() < 1e-12);
            prop_assert!((plausibility(&m, &s).unwrap() - dense_plausibility(&d, a)).abs() < 1e-12);
        }
    }

    #[test]
    fn pignistic_sums_to_one_and_matches_oracle(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let f = frame(n);
        let m = random_mass(&mut r, &f, 6);
        let p = pignistic(&m);
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(max_abs_diff(p.probs(), &dense_pignistic(&dense(&m), n)) < 1e-12);
    }

    #[test]
    fn pignistic_fixes_bayesian_masses(seed in any::<u64>(), n in 1usize..=6) {
        let mut r = rng(seed);
        let f = frame(n);
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let z: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / z).collect();
        let m = MassFunction::bayesian(&f, &probs).unwrap();
        prop_assert!(max_abs_diff(pignistic(&m).probs(), &probs) < 1e-15);
    }

    #[test]
    fn decision_is_invariant_under_rescaling(seed in any::<u64>(), n in 2usize..=6, scale in 0.01f64..100.0) {
        // rescale all products by a common factor before normalizing
        let mut r = rng(seed);
        let f = frame(n);
        let (a, b) = (random_mass(&mut r, &f, 4), random_mass(&mut r, &f, 4));
        if let (Ok(m), Some(mut d)) = (combine(&a, &b), dempster(&dense(&a), &dense(&b))) {
            d.iter_mut().for_each(|v| *v *= scale);
            let z: f64 = d.iter().sum();
            d.iter_mut().for_each(|v| *v /= z);
            let oracle = dense_pignistic(&d, n);
            let lib = pignistic(&m);
            let best = oracle.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(oracle[decide(&lib)] >= best - 1e-12);
        }
    }
}

#[test]
fn vacuous_pignistic_is_uniform() {
    for n in 1..=8 {
        let p = pignistic(&MassFunction::vacuous(&frame(n)));
        assert!(p.probs().iter().all(|&x| (x - 1.0 / n as f64).abs() < 1e-15));
    }
}

#[test]
fn decide_breaks_ties_by_lowest_index() {
    let f = frame(4);
    assert_eq!(decide(&pignistic(&MassFunction::vacuous(&f))), 0);
    let m = MassFunction::bayesian(&f, &[0.1, 0.4, 0.4, 0.1]).unwrap();
    assert_eq!(decide(&pignistic(&m)), 1);
}
