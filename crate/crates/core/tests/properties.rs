use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use regkit::cones;
use regkit::fixtures::{self, pt};
use regkit::linalg;
use regkit::solvers::{self, Selection};
use regkit::transversal::{self, DualPath};

fn basis(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut g = regkit::rng::stream(seed, 0);
    let cols: Vec<DVector<f64>> = (0..k).map(|_| regkit::rng::gaussian(&mut g, n)).collect();
    linalg::orthonormal_basis(&linalg::columns(n, &cols))
}

fn projector(b: &DMatrix<f64>) -> DMatrix<f64> {
    b * b.transpose()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn friedrichs_symmetric_and_complement_invariant(n in 2usize..6, k1 in 1usize..5, k2 in 1usize..5, seed in any::<u64>()) {
        let (k1, k2) = (k1.min(n - 1), k2.min(n - 1));
        let v1 = basis(n, k1, seed);
        let v2 = basis(n, k2, seed ^ 0xabcdef);
        let c = cones::friedrichs_cosine(&v1, &v2);
        prop_assert!((0.0..1.0).contains(&c));
        prop_assert!((c - cones::friedrichs_cosine(&v2, &v1)).abs() < 1e-12);
        let w1 = linalg::complement(&v1, n);
        let w2 = linalg::complement(&v2, n);
        prop_assert!((c - cones::friedrichs_cosine(&w1, &w2)).abs() < 1e-12);
    }

    #[test]
    fn fri2_min_of_squared_distances(n in 2usize..6, seed in any::<u64>()) {
        // Lines and hyperplanes in general position meet trivially when
        // their dimensions sum to at most n.
        let k1 = 1;
        let k2 = n - 1;
        let v1 = basis(n, k1, seed);
        let v2 = basis(n, k2, seed.wrapping_add(1));
        prop_assume!(cones::subspace_intersection(&v1, &v2).ncols() == 0);
        let c = cones::friedrichs_cosine(&v1, &v2);
        let sum = projector(&v1) + projector(&v2);
        let lmax = SymmetricEigen::new(sum).eigenvalues.max();
        // d²(v,V1)+d²(v,V2) = 2 − v'(P1+P2)v, minimized at the top eigenvector.
        prop_assert!(((2.0 - lmax) - (1.0 - c)).abs() < 1e-9);
    }

    #[test]
    fn dual_identities_on_random_subspaces(n in 2usize..6, seed in any::<u64>()) {
        let s = fixtures::random_subspace_pair(n, 200, seed);
        let d = transversal::dual_constants(&s).unwrap();
        if d.path == DualPath::Closed {
            for r in [d.identities.r2_rgd2, d.identities.rgdd_sqrt2_r, d.identities.rga_2r2, d.identities.rga_rgdd2].into_iter().flatten() {
                prop_assert!(r < 1e-9, "{:?}", d.identities);
            }
        }
        if transversal::transversality_condition_check(&s).unwrap().is_true() {
            let c = transversal::friedrichs_c(&s).unwrap();
            prop_assert!((d.rga.get().unwrap() - c).abs() < 1e-6);
        }
    }

    #[test]
    fn ap_is_monotone_on_convex_pairs(x in -0.5f64..0.5, y in -0.5f64..0.5, which in 0usize..4) {
        let name = ["half-planes-corner", "ball-xaxis", "halfplane-diagonal", "e2-interior"][which];
        let f = fixtures::pair_battery(50, 0).unwrap().into_iter().find(|f| f.name == name).unwrap();
        let x0 = &f.scenario.xbar + pt(&[x, y]);
        let t = solvers::alternating_projections(&f.scenario, &x0, 200, 1e-12, Selection::Lexicographic).unwrap();
        for w in t.d_int.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{name}: {:?}", t.d_int);
        }
    }

    #[test]
    fn both_solvers_stationary_on_the_intersection(t in -0.9f64..0.9) {
        let s = fixtures::e3(100, 0);
        let x0 = pt(&[t, 0.0]);
        for tr in [
            solvers::alternating_projections(&s, &x0, 50, 1e-12, Selection::Lexicographic).unwrap(),
            solvers::douglas_rachford(&s, &x0, 50, 1e-12, Selection::Lexicographic).unwrap(),
        ] {
            for it in &tr.iterates {
                prop_assert!((pt(it) - &x0).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn seeded_estimates_are_reproducible(seed in any::<u64>()) {
        let a = transversal::sr_metric_estimate(&fixtures::e5(300, seed)).unwrap();
        let b = transversal::sr_metric_estimate(&fixtures::e5(300, seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn ap_rate_is_friedrichs_cosine_squared_on_lines() {
    for i in 0..10u64 {
        let n = 2 + (i as usize % 3);
        let s = fixtures::random_line_pair(n, 100, 1000 + i);
        let c = transversal::friedrichs_c(&s).unwrap();
        if c < 0.05 {
            continue;
        }
        let x0 = pt(&vec![0.3; n]);
        let t = solvers::alternating_projections(&s, &x0, 10_000, 1e-14, Selection::Lexicographic).unwrap();
        let fit = solvers::fit_linear_rate(&t, solvers::DEFAULT_WINDOW_DROP).unwrap();
        assert!((fit.rate - c * c).abs() < 1e-4, "rate {} vs c² {}", fit.rate, c * c);
    }
}

#[test]
fn ap_on_e5_contracts_by_half() {
    let s = fixtures::e5(100, 0);
    let t = solvers::alternating_projections(&s, &pt(&[0.4, 0.1]), 10_000, 1e-12, Selection::Lexicographic).unwrap();
    let f = solvers::fit_linear_rate(&t, 0.2).unwrap();
    assert!((f.rate - 0.5).abs() < 1e-6, "{}", f.rate);
    assert!(f.r_squared > 0.999);
}

#[test]
fn dr_on_e5_converges_linearly() {
    let s = fixtures::e5(100, 0);
    let t = solvers::douglas_rachford(&s, &pt(&[0.4, 0.1]), 10_000, 1e-12, Selection::Lexicographic).unwrap();
    assert_eq!(t.termination, solvers::Termination::Converged);
    assert!(solvers::fit_linear_rate(&t, 0.2).unwrap().rate < 1.0);
}

#[test]
fn selection_rules_agree_on_rates() {
    let s = fixtures::pair_battery(200, 0).unwrap().into_iter().find(|f| f.name == "cross-diagonal").unwrap().scenario;
    let x0 = pt(&[0.2, 0.05]);
    let rates: Vec<f64> = [Selection::Lexicographic, Selection::Random { seed: 9 }, Selection::NearestToPrevious]
        .into_iter()
        .map(|r| {
            let t = solvers::alternating_projections(&s, &x0, 10_000, 1e-12, r).unwrap();
            solvers::fit_linear_rate(&t, 0.2).unwrap().rate
        })
        .collect();
    for r in &rates {
        assert!((r - rates[0]).abs() < 1e-3, "{rates:?}");
    }
}

#[test]
fn half_space_pair_with_interior_converges_finitely() {
    let s = fixtures::pair_battery(200, 0).unwrap().into_iter().find(|f| f.name == "half-planes-interior").unwrap().scenario;
    let x0 = pt(&[-0.7, -0.9]);
    let t = solvers::alternating_projections(&s, &x0, 100, 1e-12, Selection::Lexicographic).unwrap();
    assert!(t.len() <= 3);
    assert!(*t.d_int.last().unwrap() < 1e-12);
}
