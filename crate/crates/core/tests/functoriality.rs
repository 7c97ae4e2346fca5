//! Functoriality of the colimit: composing the universal cone of a
//! concretely evaluated target with a transformation yields a
//! representation of the source presentation.

use corrlim::algebra::StarHom;
use corrlim::colimit::{colim_functoriality_check, emit_presentation};
use corrlim::corr::{from_star_hom, left_unit, right_unit, Correspondence};
use corrlim::diagram::CorrFunctor;
use corrlim::fixtures::{algebra, stabilized_chain_c_m2, trivial_bundle};
use corrlim::repcheck::{assignment_from_representation, check_representation};
use corrlim::shapes::{cyclic_group, Shape};
use corrlim::transform::{
    cone_to_representation, find_modification, tensor_modifications, validate_transformation,
    Transformation,
};

#[test]
fn identity_on_a_discrete_diagram() {
    let f = CorrFunctor::from_parts(
        Shape::Discrete(2),
        3,
        vec![algebra(&[2], "M2"), algebra(&[1], "C")],
        vec![],
        vec![],
        vec![],
    )
    .unwrap();
    let phi = Transformation::identity(&f).unwrap();
    let outcome = colim_functoriality_check(&phi, 1e-9).unwrap();
    assert!(outcome.report.passed(), "{:?}", outcome.report);
    // The induced correspondence is the identity on (+) A_x: each summand
    // has the dimension of its own algebra inside the direct sum.
    assert_eq!(outcome.target_algebra.blocks(), &[2, 1]);
    assert_eq!(outcome.induced_module_dims, vec![4, 1]);
}

/// Transformation from the trivial Z/2 bundle over C to the trivial Z/2
/// bundle over M_2 along the unital embedding.
fn bundle_map_c_to_m2() -> (Transformation, CorrFunctor, CorrFunctor) {
    let f1 = trivial_bundle(cyclic_group(2), &algebra(&[1], "C")).unwrap();
    let m2 = algebra(&[2], "M2");
    let f2 = trivial_bundle(cyclic_group(2), &m2).unwrap();
    let c = algebra(&[1], "C");
    let unital = StarHom::from_fn(&c, &m2, |_| m2.identity()).unwrap();
    let gamma = from_star_hom(&unital).unwrap();
    // V_g: can(gamma (x) id_{M2}) -> can(id_C (x) gamma) through the unitors.
    let ru = right_unit(&gamma).unwrap();
    let lu = left_unit(&gamma).unwrap();
    let v = lu.matrix.adjoint() * &ru.matrix;
    let phi = Transformation::new(f1.clone(), f2.clone(), vec![gamma], vec![(1, v)]).unwrap();
    let report = validate_transformation(&phi, 1e-9).unwrap();
    assert!(report.passed(), "{:?}", report.first_failure());
    (phi, f1, f2)
}

#[test]
fn induced_representation_over_the_evaluated_target() {
    let (phi, _f1, _f2) = bundle_map_c_to_m2();
    let outcome = colim_functoriality_check(&phi, 1e-9).unwrap();
    assert!(
        outcome.report.passed(),
        "induced representation defect {:?}",
        outcome.report.max_defect()
    );
    // The target evaluates to M_2 + M_2 (character decomposition of
    // C*(Z/2) with M_2 coefficients).
    assert_eq!(outcome.target_algebra.sorted_blocks(), vec![2, 2]);
    assert!(outcome.report.max_defect() <= 1e-9);
}

#[test]
fn modification_induces_an_intertwiner_of_induced_representations() {
    let (phi, f1, f2) = bundle_map_c_to_m2();
    // A nontrivial self-modification source: find one between phi and
    // itself, tensor it with the identity modification of the universal
    // cone, and check the induced block intertwiner.
    let m = find_modification(&phi, &phi, 1e-9, 13)
        .unwrap()
        .expect("self-modification exists");
    let universal = corrlim::concrete_eval::universal_cone(&f2).unwrap();
    let id_mod = corrlim::transform::Modification::new(
        universal.cone.clone(),
        universal.cone.clone(),
        universal
            .cone
            .gammas
            .iter()
            .map(|g| corrlim::linalg::eye(g.dim()))
            .collect(),
    )
    .unwrap();
    let induced = tensor_modifications(&m, &id_mod).unwrap();
    let report = corrlim::transform::validate_modification(&induced, 1e-8).unwrap();
    assert!(report.passed(), "{:?}", report.first_failure());
    // Both composites are cones of f1; the block sum of the W's
    // intertwines the induced representations.
    let p1 = emit_presentation(&f1).unwrap();
    let (_t, defect) =
        corrlim::repcheck::modification_as_intertwiner(&p1, &induced).unwrap();
    assert!(defect <= 1e-9, "intertwining defect {defect:.3e}");
}

#[test]
fn tautological_chain_representation() {
    let chain = stabilized_chain_c_m2().unwrap();
    let p = emit_presentation(&chain).unwrap();
    let uc = corrlim::concrete_eval::universal_cone(&chain).unwrap();
    let rep = cone_to_representation(&uc.cone).unwrap();
    let assignment = assignment_from_representation(&p, &rep).unwrap();
    let report = check_representation(&p, &assignment).unwrap();
    assert!(report.passed(), "{report:?}");
    assert!(report.max_defect() <= 1e-9);
}

#[test]
fn non_evaluable_target_is_rejected() {
    let f = corrlim::fixtures::cuntz_diagram(2, 2).unwrap();
    let phi = Transformation::identity(&f).unwrap();
    match colim_functoriality_check(&phi, 1e-9) {
        Err(corrlim::Error::NotEvaluable(_)) => {}
        Err(other) => panic!("expected NotEvaluable, got {other:?}"),
        Ok(_) => panic!("expected NotEvaluable, got a successful evaluation"),
    }
}

#[test]
fn square_defects_match_representation_condition() {
    // A cone whose compatibility square fails has the same defect as
    // condition (3) of its representation data.
    let bundle = trivial_bundle(cyclic_group(2), &algebra(&[1], "C")).unwrap();
    let c = algebra(&[1], "C");
    let gamma = Correspondence::identity(&c);
    // V_g = i is unitary but not self-inverse, so the (g, g) square fails.
    let bad = Transformation::cone(
        bundle,
        &c,
        vec![gamma],
        vec![(1, corrlim::CMat::from_element(1, 1, corrlim::C64::i()))],
    )
    .unwrap();
    let report = validate_transformation(&bad, 1e-9).unwrap();
    let square = report.max_defect_matching("square");
    assert!(square > 0.5);
    let rep = cone_to_representation(&bad).unwrap();
    let rep_report = rep.validate(1e-9).unwrap();
    let cond3 = rep_report.max_defect_matching("S multiplicative");
    assert!(
        (square - cond3).abs() <= 1e-9,
        "square defect {square} vs condition (3) defect {cond3}"
    );
}
