//! Seeded random fixtures for tests and benchmarks.

use crate::algebra::{AlgebraElement, MultiMatrixAlgebra};
use crate::corr::{Correspondence, LeftAction, ModOp};
use crate::{C64, CMat};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_complex<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| random_complex(rng))
}

/// Haar-like random unitary: Q factor of a Ginibre matrix with the phases of
/// the R diagonal absorbed.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let g = random_matrix(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

pub fn random_hermitian<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let g = random_matrix(n, n, rng);
    (&g + g.adjoint()).scale(0.5)
}

pub fn random_element<R: Rng>(a: &MultiMatrixAlgebra, rng: &mut R) -> AlgebraElement {
    let mats = a
        .blocks()
        .iter()
        .map(|&n| random_matrix(n, n, rng))
        .collect();
    a.element(mats).unwrap()
}

pub fn random_self_adjoint_element<R: Rng>(
    a: &MultiMatrixAlgebra,
    rng: &mut R,
) -> AlgebraElement {
    let x = random_element(a, rng);
    x.add(&x.adjoint()).scale(C64::new(0.5, 0.0))
}

/// A random correspondence from `source` to `target` with the given module
/// multiplicities.  The left action is a block-diagonal multiplicity model
/// conjugated by a random unitary per target block; `mult[j][i]` is the
/// multiplicity of source block `i` inside target block `j` and must satisfy
/// `sum_i mult[j][i] * n_i = m_j` for the action to be nondegenerate.
pub fn random_correspondence<R: Rng>(
    source: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    mult: &[Vec<usize>],
    rng: &mut R,
) -> Correspondence {
    let module_mults: Vec<usize> = mult
        .iter()
        .map(|row| {
            row.iter()
                .zip(source.blocks())
                .map(|(&c, &n)| c * n)
                .sum()
        })
        .collect();
    let conj: Vec<CMat> = module_mults
        .iter()
        .map(|&m| random_unitary(m, rng))
        .collect();
    let values = (0..source.dim())
        .map(|idx| {
            let r = source.basis_ref(idx);
            let blocks = mult
                .iter()
                .enumerate()
                .map(|(j, row)| {
                    let m_j = module_mults[j];
                    let mut b = CMat::zeros(m_j, m_j);
                    let mut off = 0usize;
                    for (i, &c) in row.iter().enumerate() {
                        let n_i = source.blocks()[i];
                        for copy in 0..c {
                            if i == r.block {
                                let base = off + copy * n_i;
                                b[(base + r.row, base + r.col)] = C64::ONE;
                            }
                        }
                        off += c * n_i;
                    }
                    &conj[j] * b * conj[j].adjoint()
                })
                .collect();
            ModOp { blocks }
        })
        .collect();
    Correspondence::from_parts(
        source.clone(),
        target.clone(),
        module_mults,
        LeftAction { values },
    )
    .expect("random correspondence construction")
}
