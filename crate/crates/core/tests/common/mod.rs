//! Shared helpers for the integration suites: an independent
//! central-projection oracle for block structures, and random cone
//! builders.

use corrlim::algebra::MultiMatrixAlgebra;
use corrlim::corr::{left_unit, Correspondence, LeftAction, ModOp};
use corrlim::diagram::CorrFunctor;
use corrlim::transform::Transformation;
use corrlim::{C64, CMat};
use rand::Rng;

/// Brute-force oracle for the block structure of a finite-dimensional
/// *-algebra given by structure constants: computes the center dimension
/// from scratch (nullspace of all commutators) and enumerates the unique
/// multiset of block sizes with that many blocks and the right total
/// dimension.  Panics when the data does not determine the blocks, so a
/// wrong test setup cannot slip through.
pub fn oracle_blocks(dim: usize, mult: &dyn Fn(usize, usize) -> Vec<(usize, C64)>) -> Vec<usize> {
    // Left and right regular representations.
    let mut left = vec![CMat::zeros(dim, dim); dim];
    for i in 0..dim {
        for j in 0..dim {
            for (k, c) in mult(i, j) {
                left[i][(k, j)] += c;
            }
        }
    }
    let mut right = vec![CMat::zeros(dim, dim); dim];
    for j in 0..dim {
        for i in 0..dim {
            for (k, c) in mult(i, j) {
                right[j][(k, i)] += c;
            }
        }
    }
    // Brute-force center: common nullspace of all commutator maps.
    let mut stacked = CMat::zeros(dim * dim, dim);
    for i in 0..dim {
        let diff = &left[i] - &right[i];
        stacked.view_mut((i * dim, 0), (dim, dim)).copy_from(&diff);
    }
    let gram = stacked.adjoint() * &stacked;
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    let center_dim = eig
        .eigenvalues
        .iter()
        .filter(|&&v| v <= 1e-9 * lmax.max(1.0))
        .count();
    // Enumerate multisets k_1 <= ... <= k_r with sum k_i^2 = dim.
    let mut found: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    enumerate_blocks(dim, center_dim, 1, &mut current, &mut found);
    assert_eq!(
        found.len(),
        1,
        "oracle: block sizes not determined by (dim, center) = ({dim}, {center_dim}): {found:?}"
    );
    found.pop().unwrap()
}

fn enumerate_blocks(
    dim_left: usize,
    blocks_left: usize,
    min: usize,
    current: &mut Vec<usize>,
    found: &mut Vec<Vec<usize>>,
) {
    if blocks_left == 0 {
        if dim_left == 0 {
            found.push(current.clone());
        }
        return;
    }
    let mut k = min;
    while k * k * blocks_left <= dim_left {
        if k * k <= dim_left {
            current.push(k);
            enumerate_blocks(dim_left - k * k, blocks_left - 1, k, current, found);
            current.pop();
        }
        k += 1;
    }
}

/// A random canonical module over `d` with small nonzero multiplicities.
pub fn random_module_mults<R: Rng>(d: &MultiMatrixAlgebra, rng: &mut R) -> Vec<usize> {
    (0..d.num_blocks())
        .map(|_| 1 + (rng.random::<u32>() % 2) as usize)
        .collect()
}

/// A random cone over the trivial Z/2 bundle on `C` with vertex `d`:
/// gamma is a random module with the scalar action of `C`, and the cone map
/// on the nontrivial arrow is a random self-inverse unitary module map.
pub fn random_z2_cone<R: Rng>(
    bundle: &CorrFunctor,
    d: &MultiMatrixAlgebra,
    rng: &mut R,
) -> Transformation {
    let c = bundle.algebra(0).clone();
    let mults = random_module_mults(d, rng);
    let module = corrlim::corr::HilbertModule::new(d.clone(), mults.clone()).unwrap();
    let values = vec![ModOp::identity(&module)];
    let gamma = Correspondence::from_parts(c, d.clone(), mults, LeftAction { values }).unwrap();
    // Self-inverse blockwise unitary: U = W diag(+-1) W*.
    let u = ModOp {
        blocks: module
            .mults()
            .iter()
            .map(|&m| {
                let w = corrlim::random::random_unitary(m, rng);
                let mut s = CMat::zeros(m, m);
                for i in 0..m {
                    s[(i, i)] = if rng.random::<bool>() {
                        C64::ONE
                    } else {
                        -C64::ONE
                    };
                }
                &w * s * w.adjoint()
            })
            .collect(),
    };
    let u_full = u.full_matrix(&module, &module);
    let lu = left_unit(&gamma).unwrap();
    // Cone-form map gamma -> can(E_g (x) gamma) through the unitor.
    let vee = lu.matrix.adjoint() * u_full;
    Transformation::cone(bundle.clone(), d, vec![gamma], vec![(1, vee)]).unwrap()
}

/// A random even vector of signs realized as a cone conjugator: a unitary
/// module map on the cone module.
pub fn random_module_unitary<R: Rng>(
    module: &corrlim::corr::HilbertModule,
    rng: &mut R,
) -> CMat {
    let op = ModOp {
        blocks: module
            .mults()
            .iter()
            .map(|&m| corrlim::random::random_unitary(m, rng))
            .collect(),
    };
    op.full_matrix(module, module)
}

/// Conjugate a Z/2 cone by a unitary module map: gamma stays, the cone map
/// becomes `(id (x) x) V x*`.
pub fn conjugate_z2_cone(cone: &Transformation, x: &CMat) -> Transformation {
    let bundle = cone.source.clone();
    let d = cone.target.algebras[0].clone();
    let gamma = cone.gammas[0].clone();
    let v = cone.cone_vee(1).unwrap();
    let t = corrlim::corr::tensor(&bundle.corr(1), &gamma).unwrap();
    let second = corrlim::corr::map_second_factor(&t, &t, x, bundle.corr(1).dim());
    let new_vee = second * v * x.adjoint();
    Transformation::cone(bundle, &d, vec![gamma], vec![(1, new_vee)]).unwrap()
}
