//! End-to-end runs across modules through the public API.

use binq4_core::correlation::{build_xn, constructed_instance, rotation_congruent, xn_to_sn_check, CorrelationInstance};
use binq4_core::curvecount::{count_fiber_curve, count_points_bruteforce, count_points_detmethod, default_ell, PlanarCurve};
use binq4_core::exactmath::BiPoly;
use binq4_core::forms::{reduced_primitive_forms, BinaryForm, QuaternaryForm};
use binq4_core::genus::{isometric, p_neighbors, r_spin, spin_closure, theorem13_report, Theorem13Params};
use binq4_core::reps::{count_representations, gram_tuple};
use binq4_core::svariety::{
    enumerate_sn, enumerate_sn_bruteforce, fiber_coordinates, fiber_curve, fiber_violations, fibers, sn_membership, sn_statistics, FiberParams,
};
use num_bigint::BigInt;
use num_traits::Zero;

fn squares() -> QuaternaryForm {
    QuaternaryForm::sum_of_four_squares()
}

#[test]
fn constructed_pair_flows_into_sn_and_its_fiber() {
    let (inst, i1, i2) = constructed_instance();
    assert!(rotation_congruent(&i1, &i2, &inst).unwrap());
    let set = build_xn(&inst).unwrap();
    assert!(set.pairs.contains(&(i1, i2)));
    let t = gram_tuple(&i1, &i2, &inst.form).unwrap();
    assert!(sn_membership(&t, &inst));
    let pts = enumerate_sn(&inst).unwrap();
    assert!(pts.contains(&t));
    let fs = fibers(&inst, &pts, FiberParams::default()).unwrap();
    let home = fs.iter().find(|f| f.members.contains(&t)).expect("tuple lies in a fiber");
    assert!(fiber_violations(home, &inst).unwrap().is_empty());
    let z = fiber_coordinates(home, &t, &inst).unwrap().expect("member has coordinates");
    let curve = fiber_curve(home, &z[1], &z[2], &z[3], &inst).unwrap();
    // z1 is a root of det2·x0² − P on the curve through the member.
    let value = curve.poly.eval(&z[0]);
    assert_eq!(value, inst.form.det2() * BigInt::from(t.x0) * BigInt::from(t.x0));
    let report = count_fiber_curve(&curve, 100);
    assert!(report.count >= 1 || curve.degenerate);
}

#[test]
fn walker_oracle_and_statistics_agree_on_small_family() {
    for q in reduced_primitive_forms(3, 120) {
        for p in [3, 5, 7] {
            let inst = CorrelationInstance::new(q, squares(), p, 1).unwrap();
            let pts = enumerate_sn(&inst).unwrap();
            assert_eq!(pts, enumerate_sn_bruteforce(&inst, u64::MAX).unwrap(), "q = {q:?}, p = {p}");
            let fs = fibers(&inst, &pts, FiberParams::default()).unwrap();
            let stats = sn_statistics(&inst, &pts, &fs).unwrap();
            assert_eq!(stats.count, pts.len());
            assert_eq!(fs.iter().map(|f| f.members.len()).sum::<usize>(), pts.len());
        }
    }
}

#[test]
fn xn_reports_have_no_violations() {
    for q in reduced_primitive_forms(3, 150) {
        let inst = CorrelationInstance::new(q, squares(), 3, 1).unwrap();
        let r = xn_to_sn_check(&inst, 0.05, 0.1).unwrap();
        assert!(r.violations.is_empty(), "q = {q:?}");
        assert_eq!(r.ordered_pairs, 2 * r.unordered_pairs);
    }
}

#[test]
fn determinant_method_on_fiber_shaped_curves() {
    // c·x² = P(y) with squarefree P
    for (c, p) in [(16, vec![(0usize, 1i64), (1, 3), (4, -2)]), (3, vec![(0, -7), (2, 5), (3, 1)])] {
        let mut terms = vec![(2usize, 0usize, c)];
        terms.extend(p.iter().map(|&(k, v)| (0usize, k, -v)));
        let curve = PlanarCurve::new(BiPoly::from_terms(&terms), 5000, 300).unwrap();
        assert_eq!(count_points_detmethod(&curve, default_ell(&curve)).unwrap(), count_points_bruteforce(&curve).unwrap());
    }
}

#[test]
fn genus_of_a_two_class_form() {
    let d = QuaternaryForm::diagonal([2, 2, 2, 18]).unwrap();
    let sg = spin_closure(&d, 5, 64).unwrap();
    assert!(sg.classes.len() >= 2);
    let from_neighbor = spin_closure(&p_neighbors(&d, 5).unwrap()[0], 5, 64).unwrap();
    assert!(sg.same_classes(&from_neighbor));
    assert!(sg.classes.iter().any(|c| isometric(&c.form, &d)));
    let q = BinaryForm::new(1, 0, 1).unwrap();
    let rs = r_spin(&q, &sg).unwrap();
    assert!(!rs.is_zero());
    let report = theorem13_report(&q, &d, 7, 11, &Theorem13Params { neighbor_prime: Some(5), class_budget: 64 }).unwrap();
    assert_eq!(report.r_q_form, count_representations(&q, &d).unwrap().1);
    assert_eq!(report.classes, sg.classes.len());
}
