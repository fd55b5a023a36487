//! Closed-form answers on the reference examples.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use nalgebra::DMatrix;
use regkit::cones::{self, ConeSpec, NormalKind};
use regkit::elemental::{self, Relative};
use regkit::estimate::Value;
use regkit::fixtures::{self, pt};
use regkit::sets::SetSpec;
use regkit::transversal::{self, DualPath};

fn t1() -> f64 {
    (2.0 + SQRT_2).sqrt() / 2.0
}

fn t2() -> f64 {
    (2.0 - SQRT_2).sqrt() / 2.0
}

fn close(got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() < tol, "got {got}, want {want} (tol {tol})");
}

fn fin(v: Value) -> f64 {
    v.finite().unwrap_or_else(|| panic!("expected a finite value, got {v:?}"))
}

#[test]
fn e5_dual_table_closed_form() {
    let d = transversal::dual_constants(&fixtures::e5(500, 1)).unwrap();
    assert_eq!(d.path, DualPath::Closed);
    close(fin(d.r_dual.value), t2(), 1e-10);
    close(fin(d.rgd.value), t1(), 1e-10);
    close(fin(d.rgdd.value), SQRT_2 * t2(), 1e-10);
    close(fin(d.rga.value), FRAC_1_SQRT_2, 1e-10);
    assert!(d.identities.max().unwrap() < 1e-10);
}

#[test]
fn e5_dual_table_sampled() {
    let d = transversal::dual_constants_with(&fixtures::e5(20_000, 3), false).unwrap();
    assert_eq!(d.path, DualPath::Sampled);
    close(fin(d.r_dual.value), t2(), 1e-2);
    close(fin(d.rgd.value), t1(), 1e-2);
    close(fin(d.rgdd.value), SQRT_2 * t2(), 1e-2);
    close(fin(d.rga.value), FRAC_1_SQRT_2, 1e-2);
}

#[test]
fn e5_metric_constants() {
    let s = fixtures::e5(4000, 5);
    close(fin(transversal::sr_metric_estimate(&s).unwrap().value), t2(), 1e-2);
    close(fin(transversal::r_metric_estimate(&s).unwrap().estimate.value), t2(), 1e-2);
    assert!(transversal::primal_subtransversality_check(&s, 0.38).unwrap().is_true());
    assert!(transversal::primal_subtransversality_check(&s, 0.40).unwrap().is_false());
    // Points on the x-axis are at distance sin 45° from the diagonal.
    close(fin(transversal::srr_estimate(&s).unwrap().value), FRAC_1_SQRT_2, 1e-9);
}

#[test]
fn e5_angle_conditions() {
    let s = fixtures::e5(2000, 5);
    close(fin(transversal::separable_sup(&s).unwrap().value), FRAC_1_SQRT_2, 1e-6);
    assert!(transversal::separable_intersection_check(&s, FRAC_1_SQRT_2 + 1e-3).unwrap().is_true());
    assert!(transversal::inherent_transversality_check(&s, FRAC_1_SQRT_2 + 1e-3).unwrap().is_true());
    assert!(transversal::ab_qualification_check(&s, FRAC_1_SQRT_2 + 1e-3).unwrap().is_true());
    assert!(transversal::transversality_condition_check(&s).unwrap().is_true());
    let itrans = fin(transversal::intrinsic_transversality_estimate(&s, NormalKind::Limiting).unwrap().value);
    assert!(itrans > 0.3, "{itrans}");
    let m = transversal::manifold_transversality_check(&s.a, &s.b, &s.xbar).unwrap();
    assert!(m.transversal);
    close(m.c_tangent, FRAC_1_SQRT_2, 1e-12);
}

#[test]
fn e5_audit_passes() {
    let rep = transversal::analyze(&fixtures::e5(1000, 2)).unwrap();
    assert!(rep.audit_ok(), "{:#?}", rep.audit.iter().filter(|a| !a.holds).collect::<Vec<_>>());
    assert_eq!(rep.chip.verdict.holds, Some(true));
}

#[test]
fn e3_subtransversal_not_transversal() {
    let s = fixtures::e3(1000, 2);
    close(fin(transversal::sr_metric_estimate(&s).unwrap().value), 1.0, 1e-9);
    assert!(transversal::primal_subtransversality_check(&s, 1.0).unwrap().is_true());
    assert!(transversal::primal_subtransversality_check(&s, 1.01).unwrap().is_false());
    close(fin(transversal::r_metric_estimate(&s).unwrap().estimate.value), 0.0, 1e-12);
    close(fin(transversal::dual_constants(&s).unwrap().r_dual.value), 0.0, 1e-12);
    assert!(transversal::transversality_condition_check(&s).unwrap().is_false());
    assert!(!transversal::manifold_transversality_check(&s.a, &s.b, &s.xbar).unwrap().transversal);
}

#[test]
fn e3_mapping_g_sandwich() {
    let s = fixtures::e3(1000, 2);
    let sr = transversal::sr_metric_estimate(&s).unwrap();
    let r = transversal::r_metric_estimate(&s).unwrap();
    let v = transversal::svm_view(&s, &sr, &r.estimate).unwrap();
    close(fin(v.sr_g.value), SQRT_2, 1e-9);
    assert_eq!(v.f3mod, Some(true));
    close(fin(v.sr_f.value), 1.0, 1e-9);
}

#[test]
fn interior_point_saturates() {
    let b1 = SetSpec::ball(pt(&[0.0, 0.0]), 1.0).unwrap();
    let b2 = SetSpec::ball(pt(&[0.0, 0.0]), 2.0).unwrap();
    let s = transversal::PairScenario::new(b1.clone(), b2, pt(&[0.0, 0.0]), b1, 0.5, 500, 0).unwrap();
    assert_eq!(transversal::sr_metric_estimate(&s).unwrap().value, Value::Saturated);
    assert_eq!(transversal::r_metric_estimate(&s).unwrap().estimate.value, Value::Saturated);
    assert!(transversal::primal_subtransversality_check(&s, 1e6).unwrap().is_true());
}

#[test]
fn friedrichs_examples() {
    let x = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let d = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
    let y = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    close(cones::friedrichs_cosine(&x, &d), FRAC_1_SQRT_2, 1e-12);
    close(cones::friedrichs_cosine(&x, &x), 0.0, 1e-12);
    close(cones::friedrichs_cosine(&x, &y), 0.0, 1e-12);
}

#[test]
fn distance_to_cone_examples() {
    let cross = fixtures::cross_at(&[0.0, 0.0]);
    let c = cones::limiting_normal_cone(&cross, &pt(&[0.0, 0.0]), 0.5, 256, 0).unwrap();
    close(cones::distance_to_cone(&c, &pt(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2])), FRAC_1_SQRT_2, 1e-9);
    let ray = ConeSpec::Subspace {
        basis: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
    };
    close(cones::distance_to_cone(&ray, &pt(&[1.0, 0.0])), 1.0, 1e-12);
}

#[test]
fn circle_normal_cone_is_the_radial_line() {
    let c = SetSpec::sphere(pt(&[0.0, 0.0]), 1.0).unwrap();
    let n = cones::limiting_normal_cone(&c, &pt(&[1.0, 0.0]), 0.2, 128, 0).unwrap();
    assert!(n.contains(&pt(&[1.0, 0.0])) && n.contains(&pt(&[-1.0, 0.0])));
    assert!(!n.contains(&pt(&[0.0, 1.0])));
}

#[test]
fn half_disk_elementally_subregular_relative_to_b() {
    let (a, b) = fixtures::half_disk_pair();
    let m = elemental::eps_delta_regularity_modulus(&a, Some(&b), &pt(&[0.0, 0.0]), 0.5, 400, 0).unwrap();
    assert!(m.get().is_some());
    let cfg = elemental::LadderConfig {
        relative: Some(b.clone()),
        restrict: Some(b),
        ..Default::default()
    };
    let rep = elemental::classify(&a, &pt(&[0.0, 0.0]), &cfg).unwrap();
    let e = rep.elemental_subregular.modulus.unwrap().get().unwrap();
    assert!(e < 1e-9, "{e}");
}

#[test]
fn cross_ladder() {
    let cross = fixtures::cross_at(&[0.0, 0.0]);
    let rep = elemental::classify(&cross, &pt(&[0.0, 0.0]), &Default::default()).unwrap();
    assert_eq!(rep.clarke.verdict.holds, Some(false));
    assert_eq!(rep.super_regular.verdict.holds, Some(false));
    close(rep.elemental_subregular.modulus.unwrap().get().unwrap(), 0.0, 1e-12);
    let sub = elemental::eps_delta_subregularity_modulus(&cross, None, &Relative::Point, &pt(&[0.0, 0.0]), 0.5, 400, 0).unwrap();
    close(sub.get().unwrap(), 0.0, 1e-12);
}

#[test]
fn circle_ladder() {
    let c = SetSpec::sphere(pt(&[0.0, 0.0]), 1.0).unwrap();
    let rep = elemental::classify(&c, &pt(&[1.0, 0.0]), &Default::default()).unwrap();
    assert_eq!(rep.convex.verdict.holds, Some(false));
    for r in [&rep.prox_regular, &rep.super_regular, &rep.clarke] {
        assert_eq!(r.verdict.holds, Some(true));
    }
    assert!(rep.violations.is_empty(), "{:?}", rep.violations);
}

#[test]
fn ladder_battery_matches_stated_classifications() {
    for f in fixtures::ladder_battery(300, 4).unwrap() {
        let rep = elemental::classify(&f.set, &f.xbar, &f.config).unwrap();
        for (name, want) in &f.expected {
            assert_eq!(fixtures::rung_holds(&rep, name), Some(Some(*want)), "{} / {name}", f.name);
        }
        assert!(rep.violations.is_empty(), "{}: {:?}", f.name, rep.violations);
    }
}

#[test]
fn mapping_bounds_closed_form() {
    let (lo, hi) = transversal::f3mod_bounds(Value::Finite(1.0)).unwrap();
    close(lo, 1.0, 1e-12);
    assert!(hi.is_infinite());
    let (lo, hi) = transversal::f3mod_bounds(Value::Finite(0.5)).unwrap();
    close(lo, (2.0f64 / 5.0).sqrt(), 1e-12);
    close(hi, 2.0, 1e-12);
}
