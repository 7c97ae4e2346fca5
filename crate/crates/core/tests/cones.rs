//! Cone constructions over small shapes: the pushout cone in its reduced
//! form, closed-form metadata, and tensoring of modifications.

use corrlim::algebra::StarHom;
use corrlim::colimit::{recognize_closed_form, ClosedForm};
use corrlim::corr::{from_star_hom, tensor, Correspondence};
use corrlim::fixtures::{algebra, pushout_two_unital_m2, std_corr, trivial_bundle};
use corrlim::shapes::{cyclic_group, Shape};
use corrlim::transform::{
    compose_transformations, find_modification, tensor_modifications, validate_modification,
    validate_transformation, Transformation,
};
use corrlim::CMat;
use rand_chacha::rand_core::SeedableRng;

#[test]
fn pushout_cone_with_equal_legs_and_identity_comparison() {
    // The reduced form of a pushout cone: both leg modules are the same
    // Hilbert D-module F and the comparison unitary is the identity.
    let f = pushout_two_unital_m2().unwrap();
    let m2 = algebra(&[2], "M2");
    let c = algebra(&[1], "C");
    // F = M_2 as a module over itself; gamma at b1 and b2 is the identity
    // correspondence, gamma at a is F with the scalar action of C.
    let gamma_b = Correspondence::identity(&m2);
    let unital = StarHom::from_fn(&c, &m2, |_| m2.identity()).unwrap();
    let gamma_a = from_star_hom(&unital).unwrap();
    // Cone maps gamma_a -> can(E_i (x) gamma_b): both legs are
    // C -> M2 correspondences of dimension 4 with equal multiplicities, so
    // the intertwiner search produces the canonical unitary; with equal
    // data on both legs the comparison is the identity.
    let t1 = tensor(&f.corr(3), &gamma_b).unwrap();
    let iso = corrlim::corr::find_isomorphism(&gamma_a, &t1.corr, 1e-9)
        .unwrap()
        .unwrap();
    let vee = iso.matrix.clone();
    let cone = Transformation::cone(
        f.clone(),
        &m2,
        vec![gamma_a, gamma_b.clone(), gamma_b],
        vec![(3, vee.clone()), (4, vee)],
    )
    .unwrap();
    let report = validate_transformation(&cone, 1e-9).unwrap();
    assert!(report.passed(), "{:?}", report.first_failure());
}

#[test]
fn fell_bundle_closed_form_flags_evaluability() {
    let good = trivial_bundle(cyclic_group(2), &algebra(&[1], "C")).unwrap();
    match recognize_closed_form(&good).unwrap() {
        Some(ClosedForm::FellBundleSectionAlgebra {
            group_order,
            evaluable,
        }) => {
            assert_eq!(group_order, 2);
            assert!(evaluable);
        }
        other => panic!("unexpected closed form {other:?}"),
    }
    // A fat fibre is not an imprimitivity bimodule: flagged not evaluable.
    let c = algebra(&[1], "C");
    let fat = std_corr(2);
    let t = tensor(&fat, &fat).unwrap();
    let f = corrlim::diagram::CorrFunctor::from_parts(
        Shape::FiniteGroup(cyclic_group(2)),
        3,
        vec![c],
        vec![(1, fat)],
        vec![((1, 1), CMat::zeros(1, t.corr.dim()))],
        vec![],
    )
    .unwrap();
    match recognize_closed_form(&f).unwrap() {
        Some(ClosedForm::FellBundleSectionAlgebra { evaluable, .. }) => assert!(!evaluable),
        other => panic!("unexpected closed form {other:?}"),
    }
}

#[test]
fn tensored_modifications_relate_composites() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    let c = algebra(&[1], "C");
    let f = corrlim::diagram::CorrFunctor::from_parts(
        Shape::Coequalizer,
        3,
        vec![c.clone(), c],
        vec![(2, std_corr(2)), (3, std_corr(3))],
        vec![],
        vec![],
    )
    .unwrap();
    let mk = |rng: &mut rand_chacha::ChaCha8Rng, k: usize| {
        let gammas = vec![std_corr(k), std_corr(k)];
        let vees = vec![
            (2usize, corrlim::random::random_unitary(2 * k, rng)),
            (3usize, corrlim::random::random_unitary(3 * k, rng)),
        ];
        Transformation::new(f.clone(), f.clone(), gammas, vees).unwrap()
    };
    let t1 = mk(&mut rng, 2);
    let t2 = mk(&mut rng, 2);
    // Nontrivial self-modifications of each factor.
    let m1 = find_modification(&t1, &t1, 1e-9, 31).unwrap().unwrap();
    let m2 = find_modification(&t2, &t2, 1e-9, 32).unwrap().unwrap();
    let m12 = tensor_modifications(&m1, &m2).unwrap();
    let report = validate_modification(&m12, 1e-9).unwrap();
    assert!(report.passed(), "{:?}", report.first_failure());
    // Its endpoints really are the composites.
    let composite = compose_transformations(&t1, &t2).unwrap();
    assert_eq!(
        m12.source.gammas[0].module().mults(),
        composite.gammas[0].module().mults()
    );
}

#[test]
fn functor_and_transformation_export_to_json() {
    let bundle = trivial_bundle(cyclic_group(2), &algebra(&[1], "C")).unwrap();
    let v = bundle.to_json();
    assert_eq!(v["objects"].as_array().unwrap().len(), 1);
    assert_eq!(v["correspondences"].as_array().unwrap().len(), 1);
    assert_eq!(v["multiplications"].as_array().unwrap().len(), 1);
    // The trivial bundle over C is the constant functor, so its identity
    // transformation is literally a cone.
    let t = Transformation::identity(&bundle).unwrap();
    let tv = t.to_json();
    assert_eq!(tv["is_cone"], serde_json::json!(true));
    assert_eq!(tv["gammas"].as_array().unwrap().len(), 1);
    assert_eq!(tv["vees"].as_array().unwrap().len(), 1);
    // A non-constant diagram's identity transformation is not a cone.
    let coeq = corrlim::fixtures::coequalizer_diagram(2, 3);
    let t2 = Transformation::identity(&coeq).unwrap();
    assert_eq!(t2.to_json()["is_cone"], serde_json::json!(false));
}
