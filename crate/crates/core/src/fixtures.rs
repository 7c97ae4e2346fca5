//! Ready-made diagrams used across tests, examples and benchmarks.

use crate::algebra::{MultiMatrixAlgebra, StarHom};
use crate::corr::{from_star_hom, left_unit, tensor, Correspondence, LeftAction, ModOp};
use crate::diagram::{constant_functor, CorrFunctor};
use crate::error::Result;
use crate::shapes::{GroupData, Shape};
use crate::{C64, CMat, CVec};

pub fn algebra(blocks: &[usize], label: &str) -> MultiMatrixAlgebra {
    MultiMatrixAlgebra::new(blocks.to_vec(), label).expect("valid block sizes")
}

/// `C^n` as a correspondence from `C` to `C`.
pub fn std_corr(n: usize) -> Correspondence {
    let c = algebra(&[1], "C");
    let values = vec![ModOp {
        blocks: vec![CMat::identity(n, n)],
    }];
    Correspondence::from_parts(c.clone(), c, vec![n], LeftAction { values })
        .expect("standard correspondence")
}

/// The coequalizer diagram of `C^m`, `C^n` over `C`.
pub fn coequalizer_diagram(m: usize, n: usize) -> CorrFunctor {
    let c = algebra(&[1], "C");
    CorrFunctor::from_parts(
        Shape::Coequalizer,
        crate::DEFAULT_DEPTH,
        vec![c.clone(), c],
        vec![(2, std_corr(m)), (3, std_corr(n))],
        vec![],
        vec![],
    )
    .expect("coequalizer diagram")
}

/// Trivial bundle over a finite group: all fibres equal to `a` with the
/// canonical multiplication maps.
pub fn trivial_bundle(group: GroupData, a: &MultiMatrixAlgebra) -> Result<CorrFunctor> {
    constant_functor(&Shape::FiniteGroup(group), crate::DEFAULT_DEPTH, a)
}

/// Cocycle-twisted bundle over a finite group with one-dimensional fibres.
pub fn cocycle_bundle(
    group: GroupData,
    omega: &dyn Fn(usize, usize) -> C64,
) -> Result<CorrFunctor> {
    let c = algebra(&[1], "C");
    let shape = Shape::FiniteGroup(group);
    let expanded = shape.expand(crate::DEFAULT_DEPTH)?;
    let id = Correspondence::identity(&c);
    let corrs: Vec<(usize, Correspondence)> = expanded
        .non_identity_arrows()
        .map(|g| (g, id.clone()))
        .collect();
    let base = left_unit(&id)?;
    let mut mults = Vec::new();
    for g in expanded.non_identity_arrows() {
        for h in expanded.non_identity_arrows() {
            mults.push(((g, h), base.matrix.map(|x| x * omega(g, h))));
        }
    }
    CorrFunctor::from_parts(shape, crate::DEFAULT_DEPTH, vec![c], corrs, mults, vec![])
}

/// The crossed-product bundle `M_2 x| Z/2` with the flip `Ad(diag(1,-1))`:
/// the nontrivial fibre is `M_2` with the left action twisted by the
/// automorphism.
pub fn m2_crossed_z2() -> Result<CorrFunctor> {
    let m2 = algebra(&[2], "M2");
    let u = m2.element(vec![CMat::from_diagonal(&CVec::from_vec(vec![
        C64::ONE,
        -C64::ONE,
    ]))])?;
    let alpha = StarHom::from_fn(&m2, &m2, |r| {
        let e = m2.matrix_unit(r.block, r.row, r.col);
        u.mul(&e).mul(&u.adjoint())
    })?;
    let e_g = from_star_hom(&alpha)?;
    let shape = Shape::FiniteGroup(crate::shapes::cyclic_group(2));
    // mu_{g,g}: can(E_g (x) E_g) -> A, b1 (x) b2 -> alpha^{-1}(b1) b2.
    let t = tensor(&e_g, &e_g)?;
    let d = m2.dim();
    let mut raw_to_a = CMat::zeros(d, d * d);
    let alpha_inv = alpha.inverse()?;
    for u_idx in 0..d {
        let a1 = alpha_inv.apply(&m2.basis_element(u_idx));
        for v_idx in 0..d {
            let prod = a1.mul(&m2.basis_element(v_idx));
            for (w, c) in prod.coeffs().iter().enumerate() {
                raw_to_a[(w, u_idx * d + v_idx)] = *c;
            }
        }
    }
    let mu = raw_to_a * &t.section;
    CorrFunctor::from_parts(
        shape,
        crate::DEFAULT_DEPTH,
        vec![m2],
        vec![(1, e_g)],
        vec![((1, 1), mu)],
        vec![],
    )
}

/// The Pauli cocycle on the Klein four-group: `u_a = X`, `u_b = Z`,
/// `u_ab = XZ`; the twisted group algebra is `M_2`.
pub fn pauli_cocycle(g: usize, h: usize) -> C64 {
    let rep = |g: usize| -> CMat {
        let x = CMat::from_row_slice(2, 2, &[C64::ZERO, C64::ONE, C64::ONE, C64::ZERO]);
        let z = CMat::from_row_slice(2, 2, &[C64::ONE, C64::ZERO, C64::ZERO, -C64::ONE]);
        match g {
            0 => crate::linalg::eye(2),
            1 => x,
            2 => z,
            _ => x * z,
        }
    };
    let prod = rep(g) * rep(h);
    let target = rep(g ^ h);
    let mut omega = C64::ZERO;
    for r in 0..2 {
        for c in 0..2 {
            if target[(r, c)].norm() > 0.5 {
                omega = prod[(r, c)] / target[(r, c)];
            }
        }
    }
    omega
}

/// The canonical Cuntz diagram: the free monoid on one generator with
/// `E = C^n` over `C`, extended to the given depth.
pub fn cuntz_diagram(n: usize, depth: usize) -> Result<CorrFunctor> {
    crate::diagram::extend_from_generators(
        &Shape::EndoN { depth },
        depth,
        crate::diagram::GeneratorData::Endo {
            algebra: algebra(&[1], "C"),
            corr: std_corr(n),
        },
    )
}

/// The stabilized chain `C -> M_2 -> M_2` (unital, then the identity).
pub fn stabilized_chain_c_m2() -> Result<CorrFunctor> {
    let c = algebra(&[1], "C");
    let m2 = algebra(&[2], "M2");
    let h0 = StarHom::from_fn(&c, &m2, |_| m2.identity())?;
    let h1 = StarHom::identity(&m2);
    crate::diagram::extend_from_generators(
        &Shape::ChainPrefix {
            len: 2,
            stabilized_from: Some(1),
        },
        crate::DEFAULT_DEPTH,
        crate::diagram::GeneratorData::Chain {
            algebras: vec![c, m2.clone(), m2],
            corrs: vec![from_star_hom(&h0)?, from_star_hom(&h1)?],
        },
    )
}

/// The doubling chain `C -> M_2 -> M_4` with unital embeddings.
pub fn doubling_chain() -> Result<CorrFunctor> {
    let algebras = vec![algebra(&[1], "C"), algebra(&[2], "M2"), algebra(&[4], "M4")];
    let h0 = StarHom::from_fn(&algebras[0], &algebras[1], |_| algebras[1].identity())?;
    let h1 = StarHom::from_fn(&algebras[1], &algebras[2], |r| {
        let mut m = CMat::zeros(4, 4);
        m[(r.row, r.col)] = C64::ONE;
        m[(2 + r.row, 2 + r.col)] = C64::ONE;
        algebras[2].element(vec![m]).unwrap()
    })?;
    let corrs = vec![from_star_hom(&h0)?, from_star_hom(&h1)?];
    crate::diagram::extend_from_generators(
        &Shape::ChainPrefix {
            len: 2,
            stabilized_from: None,
        },
        crate::DEFAULT_DEPTH,
        crate::diagram::GeneratorData::Chain { algebras, corrs },
    )
}

/// The pushout of two unital embeddings `C -> M_2`.
pub fn pushout_two_unital_m2() -> Result<CorrFunctor> {
    let c = algebra(&[1], "C");
    let m2 = algebra(&[2], "M2");
    let unital = StarHom::from_fn(&c, &m2, |_| m2.identity())?;
    let e = from_star_hom(&unital)?;
    CorrFunctor::from_parts(
        Shape::Pushout,
        crate::DEFAULT_DEPTH,
        vec![c, m2.clone(), m2.with_label("M2'")],
        vec![(3, e.clone()), (4, e)],
        vec![],
        vec![],
    )
}
