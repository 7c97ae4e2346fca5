//! Finite-dimensional C*-algebras as direct sums of full matrix blocks,
//! their elements and *-homomorphisms.

use crate::error::{Error, Result};
use crate::linalg;
use crate::report::ValidationReport;
use crate::{C64, CMat};

/// A finite-dimensional C*-algebra presented as an ordered list of full
/// matrix blocks.  The zero algebra is the empty block list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiMatrixAlgebra {
    blocks: Vec<usize>,
    label: String,
}

/// Position of a matrix-unit basis element inside a multimatrix algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisRef {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

impl MultiMatrixAlgebra {
    /// Build an algebra from block sizes.  Sizes must all be positive; an
    /// empty list yields the zero algebra.
    pub fn new(blocks: Vec<usize>, label: impl Into<String>) -> Result<Self> {
        if blocks.contains(&0) {
            return Err(Error::InvalidBlock(0));
        }
        Ok(MultiMatrixAlgebra {
            blocks,
            label: label.into(),
        })
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(&self, label: impl Into<String>) -> Self {
        MultiMatrixAlgebra {
            blocks: self.blocks.clone(),
            label: label.into(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Total linear dimension, sum of squared block sizes.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Wedderburn isomorphism class: block sizes as a sorted multiset.
    pub fn sorted_blocks(&self) -> Vec<usize> {
        let mut b = self.blocks.clone();
        b.sort_unstable();
        b
    }

    pub fn is_isomorphic_to(&self, other: &MultiMatrixAlgebra) -> bool {
        self.sorted_blocks() == other.sorted_blocks()
    }

    /// Linear offset of a block in the flattened coordinate order.
    pub fn block_offset(&self, block: usize) -> usize {
        self.blocks[..block].iter().map(|n| n * n).sum()
    }

    pub fn basis_ref(&self, index: usize) -> BasisRef {
        let mut rest = index;
        for (block, &n) in self.blocks.iter().enumerate() {
            if rest < n * n {
                return BasisRef {
                    block,
                    row: rest / n,
                    col: rest % n,
                };
            }
            rest -= n * n;
        }
        panic!("basis index {index} out of range for {}", self.label);
    }

    pub fn basis_index(&self, r: BasisRef) -> usize {
        self.block_offset(r.block) + r.row * self.blocks[r.block] + r.col
    }

    /// Matrix-unit basis element.
    pub fn basis_element(&self, index: usize) -> AlgebraElement {
        let r = self.basis_ref(index);
        self.matrix_unit(r.block, r.row, r.col)
    }

    pub fn matrix_unit(&self, block: usize, row: usize, col: usize) -> AlgebraElement {
        let mut e = self.zero_element();
        e.mats[block][(row, col)] = C64::ONE;
        e
    }

    pub fn zero_element(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            mats: self.blocks.iter().map(|&n| CMat::zeros(n, n)).collect(),
        }
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            mats: self.blocks.iter().map(|&n| CMat::identity(n, n)).collect(),
        }
    }

    /// Identity of a single block, zero elsewhere.
    pub fn block_identity(&self, block: usize) -> AlgebraElement {
        let mut e = self.zero_element();
        let n = self.blocks[block];
        e.mats[block] = CMat::identity(n, n);
        e
    }

    pub fn element(&self, mats: Vec<CMat>) -> Result<AlgebraElement> {
        if mats.len() != self.blocks.len() {
            return Err(Error::ShapeError(format!(
                "element of {} needs {} blocks, got {}",
                self.label,
                self.blocks.len(),
                mats.len()
            )));
        }
        for (m, &n) in mats.iter().zip(&self.blocks) {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::ShapeError(format!(
                    "block of size {}x{} does not match block size {} in {}",
                    m.nrows(),
                    m.ncols(),
                    n,
                    self.label
                )));
            }
        }
        Ok(AlgebraElement {
            algebra: self.clone(),
            mats,
        })
    }

    pub fn element_from_coeffs(&self, coeffs: &[C64]) -> Result<AlgebraElement> {
        if coeffs.len() != self.dim() {
            return Err(Error::ShapeError(format!(
                "expected {} coefficients, got {}",
                self.dim(),
                coeffs.len()
            )));
        }
        let mut e = self.zero_element();
        let mut idx = 0;
        for (b, &n) in self.blocks.iter().enumerate() {
            for r in 0..n {
                for c in 0..n {
                    e.mats[b][(r, c)] = coeffs[idx];
                    idx += 1;
                }
            }
        }
        Ok(e)
    }

    /// Concatenate block lists: the C0-direct sum of finitely many algebras.
    pub fn direct_sum(parts: &[MultiMatrixAlgebra], label: impl Into<String>) -> Self {
        let blocks = parts.iter().flat_map(|a| a.blocks.iter().copied()).collect();
        MultiMatrixAlgebra {
            blocks,
            label: label.into(),
        }
    }
}

/// An element of a multimatrix algebra: one complex matrix per block.
#[derive(Debug, Clone)]
pub struct AlgebraElement {
    algebra: MultiMatrixAlgebra,
    pub mats: Vec<CMat>,
}

impl AlgebraElement {
    pub fn algebra(&self) -> &MultiMatrixAlgebra {
        &self.algebra
    }

    pub fn adjoint(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.algebra.clone(),
            mats: self.mats.iter().map(|m| m.adjoint()).collect(),
        }
    }

    pub fn mul(&self, other: &AlgebraElement) -> AlgebraElement {
        assert_eq!(
            self.algebra.blocks, other.algebra.blocks,
            "product of elements of different algebras"
        );
        AlgebraElement {
            algebra: self.algebra.clone(),
            mats: self
                .mats
                .iter()
                .zip(&other.mats)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn add(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            algebra: self.algebra.clone(),
            mats: self
                .mats
                .iter()
                .zip(&other.mats)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            algebra: self.algebra.clone(),
            mats: self
                .mats
                .iter()
                .zip(&other.mats)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, z: C64) -> AlgebraElement {
        AlgebraElement {
            algebra: self.algebra.clone(),
            mats: self.mats.iter().map(|m| m.map(|x| x * z)).collect(),
        }
    }

    /// Coefficients in the matrix-unit basis, flattened row-major per block.
    pub fn coeffs(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.algebra.dim());
        for m in &self.mats {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    out.push(m[(r, c)]);
                }
            }
        }
        out
    }

    /// Unnormalized trace, summed over blocks.
    pub fn trace(&self) -> C64 {
        self.mats
            .iter()
            .map(|m| m.diagonal().sum())
            .fold(C64::ZERO, |a, b| a + b)
    }

    pub fn norm(&self) -> f64 {
        operator_norm(self)
    }
}

/// Max over blocks of the largest singular value.
pub fn operator_norm(a: &AlgebraElement) -> f64 {
    a.mats.iter().map(linalg::op_norm).fold(0.0, f64::max)
}

/// A *-homomorphism between multimatrix algebras, stored as a dense linear
/// map: one target element per matrix unit of the source.
#[derive(Debug, Clone)]
pub struct StarHom {
    source: MultiMatrixAlgebra,
    target: MultiMatrixAlgebra,
    values: Vec<AlgebraElement>,
}

impl StarHom {
    pub fn new(
        source: MultiMatrixAlgebra,
        target: MultiMatrixAlgebra,
        values: Vec<AlgebraElement>,
    ) -> Result<Self> {
        if values.len() != source.dim() {
            return Err(Error::ShapeError(format!(
                "star-hom from {} needs {} values, got {}",
                source.label(),
                source.dim(),
                values.len()
            )));
        }
        for v in &values {
            if v.algebra().blocks() != target.blocks() {
                return Err(Error::ShapeError(format!(
                    "star-hom value does not live in target {}",
                    target.label()
                )));
            }
        }
        Ok(StarHom {
            source,
            target,
            values,
        })
    }

    /// Build from a closure on basis references.
    pub fn from_fn(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        f: impl Fn(BasisRef) -> AlgebraElement,
    ) -> Result<Self> {
        let values = (0..source.dim()).map(|i| f(source.basis_ref(i))).collect();
        StarHom::new(source.clone(), target.clone(), values)
    }

    pub fn identity(a: &MultiMatrixAlgebra) -> Self {
        let values = (0..a.dim()).map(|i| a.basis_element(i)).collect();
        StarHom {
            source: a.clone(),
            target: a.clone(),
            values,
        }
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        &self.source
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        &self.target
    }

    pub fn value(&self, basis_index: usize) -> &AlgebraElement {
        &self.values[basis_index]
    }

    pub fn apply(&self, a: &AlgebraElement) -> AlgebraElement {
        assert_eq!(a.algebra().blocks(), self.source.blocks());
        let mut out = self.target.zero_element();
        for (i, c) in a.coeffs().iter().enumerate() {
            if c.norm() != 0.0 {
                out = out.add(&self.values[i].scale(*c));
            }
        }
        out
    }

    pub fn compose(&self, inner: &StarHom) -> Result<StarHom> {
        if inner.target.blocks() != self.source.blocks() {
            return Err(Error::CompositionError(format!(
                "cannot compose {} -> {} after {} -> {}",
                self.source.label(),
                self.target.label(),
                inner.source.label(),
                inner.target.label()
            )));
        }
        let values = inner.values.iter().map(|v| self.apply(v)).collect();
        StarHom::new(inner.source.clone(), self.target.clone(), values)
    }

    /// True when the unit maps to the unit; for unital finite-dimensional
    /// algebras this is the nondegeneracy of the associated correspondence.
    pub fn is_nondegenerate(&self, tol: f64) -> bool {
        let d = self
            .apply(&self.source.identity())
            .sub(&self.target.identity());
        operator_norm(&d) <= tol
    }

    /// The full coordinate matrix of the map (target dim x source dim).
    pub fn coordinate_matrix(&self) -> CMat {
        let (td, sd) = (self.target.dim(), self.source.dim());
        let mut m = CMat::zeros(td, sd);
        for (j, v) in self.values.iter().enumerate() {
            for (i, c) in v.coeffs().iter().enumerate() {
                m[(i, j)] = *c;
            }
        }
        m
    }

    /// Multiplicity of each source block in each target block, as a
    /// (target blocks) x (source blocks) integer matrix.  Fails when the
    /// traces are not close to integers.
    pub fn multiplicity_matrix(&self) -> Result<Vec<Vec<usize>>> {
        let mut out = vec![vec![0usize; self.source.num_blocks()]; self.target.num_blocks()];
        for i in 0..self.source.num_blocks() {
            let n_i = self.source.blocks()[i] as f64;
            let p = self.apply(&self.source.block_identity(i));
            for (j, m) in p.mats.iter().enumerate() {
                let tr = m.diagonal().sum();
                let c = tr.re / n_i;
                let rounded = c.round();
                if (c - rounded).abs() > 1e-6 || tr.im.abs() > 1e-6 || rounded < -1e-9 {
                    return Err(Error::ShapeError(format!(
                        "map is not close to a direct sum of irreducibles: trace {tr} in block {j}"
                    )));
                }
                out[j][i] = rounded as usize;
            }
        }
        Ok(out)
    }

    /// Invert a *-isomorphism.  Fails when the coordinate matrix is not
    /// invertible.
    pub fn inverse(&self) -> Result<StarHom> {
        if self.source.dim() != self.target.dim() {
            return Err(Error::ShapeError(
                "only maps between algebras of equal dimension can be inverted".into(),
            ));
        }
        let m = self.coordinate_matrix();
        let inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::ShapeError("coordinate matrix is singular".into()))?;
        let values = (0..self.target.dim())
            .map(|j| {
                let col: Vec<C64> = (0..self.source.dim()).map(|i| inv[(i, j)]).collect();
                self.source.element_from_coeffs(&col).unwrap()
            })
            .collect();
        StarHom::new(self.target.clone(), self.source.clone(), values)
    }
}

/// Check the *-homomorphism axioms on all matrix units and report the
/// achieved defects.
pub fn validate_star_hom(h: &StarHom, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::new(
        format!("star-hom {} -> {}", h.source().label(), h.target().label()),
        tol,
    );
    let src = h.source();
    let mut mult_defect = 0.0f64;
    let mut star_defect = 0.0f64;
    for i in 0..src.dim() {
        let ri = src.basis_ref(i);
        let vi = h.value(i);
        // Star: e_{kl}* = e_{lk}.
        let star_idx = src.basis_index(BasisRef {
            block: ri.block,
            row: ri.col,
            col: ri.row,
        });
        let d = h.value(star_idx).sub(&vi.adjoint());
        star_defect = star_defect.max(operator_norm(&d));
        for j in 0..src.dim() {
            let rj = src.basis_ref(j);
            // e_{(b,k,l)} e_{(b',k',l')} = delta_{bb'} delta_{lk'} e_{(b,k,l')}.
            let prod = vi.mul(h.value(j));
            let expected = if ri.block == rj.block && ri.col == rj.row {
                h.value(src.basis_index(BasisRef {
                    block: ri.block,
                    row: ri.row,
                    col: rj.col,
                }))
                .clone()
            } else {
                h.target().zero_element()
            };
            mult_defect = mult_defect.max(operator_norm(&prod.sub(&expected)));
        }
    }
    report.check("multiplicative", mult_defect);
    report.check("star-preserving", star_defect);
    let nondeg = h.is_nondegenerate(tol);
    report.checks.push(crate::report::Check {
        name: "nondegenerate".into(),
        defect: 0.0,
        tol,
        passed: true,
        witness: Some(format!("{nondeg}")),
    });
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_TOL;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn new_algebra_dimensions() {
        let m2 = MultiMatrixAlgebra::new(vec![2], "M2").unwrap();
        assert_eq!(m2.dim(), 4);
        let a = MultiMatrixAlgebra::new(vec![3, 1], "A").unwrap();
        assert_eq!(a.dim(), 10);
        let zero = MultiMatrixAlgebra::new(vec![], "0").unwrap();
        assert!(zero.is_zero());
        assert_eq!(zero.dim(), 0);
        assert!(MultiMatrixAlgebra::new(vec![2, 0], "bad").is_err());
    }

    #[test]
    fn operator_norms() {
        let c1 = MultiMatrixAlgebra::new(vec![1], "C").unwrap();
        let three = c1.identity().scale(c(3.0));
        assert!((operator_norm(&three) - 3.0).abs() < 1e-12);

        let m2 = MultiMatrixAlgebra::new(vec![2], "M2").unwrap();
        let nilp = m2.matrix_unit(0, 0, 1);
        assert!((operator_norm(&nilp) - 1.0).abs() < 1e-12);

        let diag = m2
            .element(vec![CMat::from_diagonal(&nalgebra::DVector::from_vec(
                vec![c(1.0), c(2.0)],
            ))])
            .unwrap();
        assert!((operator_norm(&diag) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cstar_identity_on_random_elements() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a = MultiMatrixAlgebra::new(vec![2, 3], "A").unwrap();
        for _ in 0..20 {
            let x = crate::random::random_element(&a, &mut rng);
            let y = crate::random::random_element(&a, &mut rng);
            let nx = operator_norm(&x);
            let ny = operator_norm(&y);
            assert!(operator_norm(&x.mul(&y)) <= nx * ny + 1e-10);
            let xs = x.adjoint().mul(&x);
            assert!((operator_norm(&xs) - nx * nx).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_hom_validates_with_zero_defect() {
        for blocks in [vec![1], vec![2], vec![2, 1]] {
            let a = MultiMatrixAlgebra::new(blocks, "A").unwrap();
            let id = StarHom::identity(&a);
            let report = validate_star_hom(&id, DEFAULT_TOL);
            assert!(report.passed());
            assert_eq!(report.max_defect(), 0.0);
            assert!(id.is_nondegenerate(DEFAULT_TOL));
        }
    }

    #[test]
    fn corner_embedding_is_star_hom_but_degenerate() {
        // C -> M2, 1 |-> diag(1, 0).
        let c1 = MultiMatrixAlgebra::new(vec![1], "C").unwrap();
        let m2 = MultiMatrixAlgebra::new(vec![2], "M2").unwrap();
        let h = StarHom::from_fn(&c1, &m2, |_| m2.matrix_unit(0, 0, 0)).unwrap();
        let report = validate_star_hom(&h, DEFAULT_TOL);
        assert!(report.passed());
        assert!(!h.is_nondegenerate(DEFAULT_TOL));
    }

    #[test]
    fn diagonal_embedding_validates() {
        // C + C -> M2, (a, b) |-> diag(a, b); checked on all four matrix units.
        let cc = MultiMatrixAlgebra::new(vec![1, 1], "CC").unwrap();
        let m2 = MultiMatrixAlgebra::new(vec![2], "M2").unwrap();
        let h = StarHom::from_fn(&cc, &m2, |r| m2.matrix_unit(0, r.block, r.block)).unwrap();
        let report = validate_star_hom(&h, DEFAULT_TOL);
        assert!(report.passed());
        assert_eq!(report.max_defect(), 0.0);
        assert!(h.is_nondegenerate(DEFAULT_TOL));
        let mult = h.multiplicity_matrix().unwrap();
        assert_eq!(mult, vec![vec![1, 1]]);
    }

    #[test]
    fn hom_inverse_round_trip() {
        // Flip automorphism of C + C.
        let cc = MultiMatrixAlgebra::new(vec![1, 1], "CC").unwrap();
        let flip = StarHom::from_fn(&cc, &cc, |r| cc.matrix_unit(1 - r.block, 0, 0)).unwrap();
        let inv = flip.inverse().unwrap();
        let round = inv.compose(&flip).unwrap();
        let idm = StarHom::identity(&cc);
        for i in 0..cc.dim() {
            assert!(operator_norm(&round.value(i).sub(idm.value(i))) < 1e-12);
        }
    }
}
