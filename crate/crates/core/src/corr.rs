//! Hilbert modules over multimatrix algebras and correspondences between
//! multimatrix algebras, in a fixed canonical model.
//!
//! The canonical model of a Hilbert module over `B = (+)_j M_{n_j}` is
//! `(+)_j M_{m_j x n_j}` with the blockwise inner product `<x,y> = x* y` and
//! right action by blockwise multiplication.  Every constructor canonicalizes
//! immediately, so adjointable operators are exactly the block matrices
//! `(+)_j M_{m_j}` and unitarity checks reduce to matrix identities.

use crate::algebra::{AlgebraElement, BasisRef, MultiMatrixAlgebra, StarHom};
use crate::error::{Error, Result};
use crate::linalg;
use crate::report::ValidationReport;
use crate::{C64, CMat, CVec};

/// Rank threshold used when quotienting by the null space of a form.
const RANK_TOL: f64 = 1e-10;

/// Threshold below which certificate coefficients are dropped.
const CERT_TOL: f64 = 1e-14;

/// A Hilbert module over a multimatrix algebra in canonical form: one
/// multiplicity `m_j >= 0` per base block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertModule {
    base: MultiMatrixAlgebra,
    mults: Vec<usize>,
}

/// Coordinate position inside a canonical module: block, multiplicity row,
/// base column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModCoord {
    pub block: usize,
    pub row: usize,
    pub col: usize,
}

impl HilbertModule {
    pub fn new(base: MultiMatrixAlgebra, mults: Vec<usize>) -> Result<Self> {
        if mults.len() != base.num_blocks() {
            return Err(Error::ShapeError(format!(
                "module over {} needs {} multiplicities, got {}",
                base.label(),
                base.num_blocks(),
                mults.len()
            )));
        }
        Ok(HilbertModule { base, mults })
    }

    pub fn base(&self) -> &MultiMatrixAlgebra {
        &self.base
    }

    pub fn mults(&self) -> &[usize] {
        &self.mults
    }

    pub fn dim(&self) -> usize {
        self.mults
            .iter()
            .zip(self.base.blocks())
            .map(|(&m, &n)| m * n)
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn block_offset(&self, block: usize) -> usize {
        self.mults[..block]
            .iter()
            .zip(self.base.blocks())
            .map(|(&m, &n)| m * n)
            .sum()
    }

    pub fn coord_index(&self, c: ModCoord) -> usize {
        let n = self.base.blocks()[c.block];
        self.block_offset(c.block) + c.row * n + c.col
    }

    pub fn coord_ref(&self, index: usize) -> ModCoord {
        let mut rest = index;
        for (block, (&m, &n)) in self.mults.iter().zip(self.base.blocks()).enumerate() {
            if rest < m * n {
                return ModCoord {
                    block,
                    row: rest / n,
                    col: rest % n,
                };
            }
            rest -= m * n;
        }
        panic!("module coordinate {index} out of range");
    }

    /// B-valued inner product of two coordinate vectors.
    pub fn inner_product(&self, x: &CVec, y: &CVec) -> AlgebraElement {
        let mut out = self.base.zero_element();
        for (j, (&m, &n)) in self.mults.iter().zip(self.base.blocks()).enumerate() {
            let off = self.block_offset(j);
            for c in 0..n {
                for c2 in 0..n {
                    let mut s = C64::ZERO;
                    for p in 0..m {
                        s += x[off + p * n + c].conj() * y[off + p * n + c2];
                    }
                    out.mats[j][(c, c2)] = s;
                }
            }
        }
        out
    }

    /// Full coordinate matrix of the right action of a base element.
    pub fn right_action_matrix(&self, b: &AlgebraElement) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for (j, (&m, &n)) in self.mults.iter().zip(self.base.blocks()).enumerate() {
            let off = self.block_offset(j);
            for p in 0..m {
                for c in 0..n {
                    for c2 in 0..n {
                        out[(off + p * n + c2, off + p * n + c)] = b.mats[j][(c, c2)];
                    }
                }
            }
        }
        out
    }

    /// Module basis element with a single 1 at the given coordinate.
    pub fn basis_vector(&self, c: ModCoord) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[self.coord_index(c)] = C64::ONE;
        v
    }
}

/// An adjointable operator between canonical modules over the same base:
/// one `m'_j x m_j` matrix per base block, acting on multiplicity spaces.
#[derive(Debug, Clone)]
pub struct ModOp {
    pub blocks: Vec<CMat>,
}

impl ModOp {
    pub fn zeros(target: &HilbertModule, source: &HilbertModule) -> Self {
        let blocks = target
            .mults()
            .iter()
            .zip(source.mults())
            .map(|(&mt, &ms)| CMat::zeros(mt, ms))
            .collect();
        ModOp { blocks }
    }

    pub fn identity(module: &HilbertModule) -> Self {
        let blocks = module
            .mults()
            .iter()
            .map(|&m| CMat::identity(m, m))
            .collect();
        ModOp { blocks }
    }

    pub fn adjoint(&self) -> ModOp {
        ModOp {
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    pub fn compose(&self, other: &ModOp) -> ModOp {
        ModOp {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &ModOp) -> ModOp {
        ModOp {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &ModOp) -> ModOp {
        ModOp {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, z: C64) -> ModOp {
        ModOp {
            blocks: self.blocks.iter().map(|b| b.map(|x| x * z)).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    /// Full coordinate matrix: block diagonal of `T_j (x) I_{n_j}`.
    pub fn full_matrix(&self, target: &HilbertModule, source: &HilbertModule) -> CMat {
        let mut out = CMat::zeros(target.dim(), source.dim());
        for (j, t) in self.blocks.iter().enumerate() {
            let n = target.base().blocks()[j];
            let toff = target.block_offset(j);
            let soff = source.block_offset(j);
            for p in 0..t.nrows() {
                for q in 0..t.ncols() {
                    for c in 0..n {
                        out[(toff + p * n + c, soff + q * n + c)] = t[(p, q)];
                    }
                }
            }
        }
        out
    }

    /// Extract the block form from a full coordinate matrix; returns the
    /// operator and the defect of the extraction (how far the matrix is from
    /// commuting with the right action).
    pub fn from_full(m: &CMat, target: &HilbertModule, source: &HilbertModule) -> (ModOp, f64) {
        let mut blocks = Vec::with_capacity(target.mults().len());
        for (j, (&mt, &ms)) in target.mults().iter().zip(source.mults()).enumerate() {
            let n = target.base().blocks()[j];
            let toff = target.block_offset(j);
            let soff = source.block_offset(j);
            let mut t = CMat::zeros(mt, ms);
            for p in 0..mt {
                for q in 0..ms {
                    let mut s = C64::ZERO;
                    for c in 0..n {
                        s += m[(toff + p * n + c, soff + q * n + c)];
                    }
                    t[(p, q)] = s / C64::new(n as f64, 0.0);
                }
            }
            blocks.push(t);
        }
        let op = ModOp { blocks };
        let defect = linalg::op_norm(&(m - op.full_matrix(target, source)));
        (op, defect)
    }
}

/// The left action of an algebra on a canonical module, stored as one
/// operator per matrix unit of the acting algebra.
#[derive(Debug, Clone)]
pub struct LeftAction {
    pub values: Vec<ModOp>,
}

/// A correspondence between multimatrix algebras: a canonical Hilbert module
/// over the target with a left action of the source, together with a stored
/// rank-one expansion of every left-action value (the properness
/// certificate).
#[derive(Debug, Clone)]
pub struct Correspondence {
    source: MultiMatrixAlgebra,
    module: HilbertModule,
    left: LeftAction,
    /// For each source basis element: pairs `(xi, eta)` of module coordinate
    /// vectors with `phi(a) = sum |xi><eta|`.
    certificate: Vec<Vec<(CVec, CVec)>>,
}

impl Correspondence {
    pub fn from_parts(
        source: MultiMatrixAlgebra,
        target: MultiMatrixAlgebra,
        mults: Vec<usize>,
        left: LeftAction,
    ) -> Result<Self> {
        let module = HilbertModule::new(target, mults)?;
        if left.values.len() != source.dim() {
            return Err(Error::ShapeError(format!(
                "left action needs {} values, got {}",
                source.dim(),
                left.values.len()
            )));
        }
        for v in &left.values {
            if v.blocks.len() != module.mults().len()
                || v.blocks
                    .iter()
                    .zip(module.mults())
                    .any(|(b, &m)| b.nrows() != m || b.ncols() != m)
            {
                return Err(Error::ShapeError(
                    "left action operator does not match module multiplicities".into(),
                ));
            }
        }
        let certificate = build_certificate(&module, &left);
        Ok(Correspondence {
            source,
            module,
            left,
            certificate,
        })
    }

    /// The identity correspondence of an algebra: the algebra as a module
    /// over itself with the left regular action.
    pub fn identity(a: &MultiMatrixAlgebra) -> Self {
        let mults = a.blocks().to_vec();
        let values = (0..a.dim())
            .map(|idx| {
                let r = a.basis_ref(idx);
                let blocks = a
                    .blocks()
                    .iter()
                    .enumerate()
                    .map(|(j, &m)| {
                        let mut b = CMat::zeros(m, m);
                        if j == r.block {
                            b[(r.row, r.col)] = C64::ONE;
                        }
                        b
                    })
                    .collect();
                ModOp { blocks }
            })
            .collect();
        Correspondence::from_parts(a.clone(), a.clone(), mults, LeftAction { values })
            .expect("identity correspondence")
    }

    /// The zero correspondence between two algebras.
    pub fn zero(source: &MultiMatrixAlgebra, target: &MultiMatrixAlgebra) -> Self {
        let mults = vec![0; target.num_blocks()];
        let values = (0..source.dim())
            .map(|_| ModOp {
                blocks: target.blocks().iter().map(|_| CMat::zeros(0, 0)).collect(),
            })
            .collect();
        Correspondence::from_parts(source.clone(), target.clone(), mults, LeftAction { values })
            .expect("zero correspondence")
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        &self.source
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        self.module.base()
    }

    pub fn module(&self) -> &HilbertModule {
        &self.module
    }

    pub fn dim(&self) -> usize {
        self.module.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.module.is_zero()
    }

    pub fn left_op(&self, basis_index: usize) -> &ModOp {
        &self.left.values[basis_index]
    }

    /// Full coordinate matrix of the left action of a source basis element.
    pub fn left_full(&self, basis_index: usize) -> CMat {
        self.left.values[basis_index].full_matrix(&self.module, &self.module)
    }

    /// Full coordinate matrix of the left action of an arbitrary element.
    pub fn left_action_of(&self, a: &AlgebraElement) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for (i, c) in a.coeffs().iter().enumerate() {
            if c.norm() > 0.0 {
                out += self.left_full(i).map(|x| x * c);
            }
        }
        out
    }

    pub fn certificate(&self, basis_index: usize) -> &[(CVec, CVec)] {
        &self.certificate[basis_index]
    }

    /// Multiplicity of each source block inside each module block.
    pub fn left_multiplicities(&self) -> Result<Vec<Vec<usize>>> {
        let mut out = vec![vec![0usize; self.source.num_blocks()]; self.module.mults().len()];
        for i in 0..self.source.num_blocks() {
            let n_i = self.source.blocks()[i] as f64;
            // phi(identity of block i), summed from diagonal matrix units.
            let mut op = ModOp::zeros(&self.module, &self.module);
            for k in 0..self.source.blocks()[i] {
                let idx = self.source.basis_index(BasisRef {
                    block: i,
                    row: k,
                    col: k,
                });
                op = op.add(&self.left.values[idx]);
            }
            for (j, b) in op.blocks.iter().enumerate() {
                let tr = b.diagonal().sum();
                let c = tr.re / n_i;
                let rounded = c.round();
                if (c - rounded).abs() > 1e-6 || tr.im.abs() > 1e-6 {
                    return Err(Error::ShapeError(format!(
                        "left action trace {tr} in block {j} is not an integer multiplicity"
                    )));
                }
                out[j][i] = rounded.max(0.0) as usize;
            }
        }
        Ok(out)
    }
}

/// Rank-one expansion of every left-action operator from the canonical
/// module structure: `E_{pq} = |u_{j,p,0}><u_{j,q,0}|` per block.
fn build_certificate(module: &HilbertModule, left: &LeftAction) -> Vec<Vec<(CVec, CVec)>> {
    left.values
        .iter()
        .map(|op| {
            let mut pairs = Vec::new();
            for (j, t) in op.blocks.iter().enumerate() {
                for p in 0..t.nrows() {
                    for q in 0..t.ncols() {
                        let coeff = t[(p, q)];
                        if coeff.norm() <= CERT_TOL {
                            continue;
                        }
                        let xi = module
                            .basis_vector(ModCoord {
                                block: j,
                                row: p,
                                col: 0,
                            })
                            .map(|x| x * coeff);
                        let eta = module.basis_vector(ModCoord {
                            block: j,
                            row: q,
                            col: 0,
                        });
                        pairs.push((xi, eta));
                    }
                }
            }
            pairs
        })
        .collect()
}

/// Full coordinate matrix of the rank-one operator `|xi><eta|`, acting as
/// `x |-> xi <eta, x>`; on block `j` this is the multiplicity-space matrix
/// `xi_j eta_j^*`.
pub fn rank_one_full(module: &HilbertModule, xi: &CVec, eta: &CVec) -> CMat {
    let d = module.dim();
    let mut out = CMat::zeros(d, d);
    for (j, (&m, &n)) in module.mults().iter().zip(module.base().blocks()).enumerate() {
        let off = module.block_offset(j);
        let mut xim = CMat::zeros(m, n);
        let mut etam = CMat::zeros(m, n);
        for p in 0..m {
            for c in 0..n {
                xim[(p, c)] = xi[off + p * n + c];
                etam[(p, c)] = eta[off + p * n + c];
            }
        }
        let t = &xim * etam.adjoint();
        for p in 0..m {
            for q in 0..m {
                for c in 0..n {
                    out[(off + p * n + c, off + q * n + c)] = t[(p, q)];
                }
            }
        }
    }
    out
}

/// Raw (pre-canonical) module data: a coordinate space with a B-valued
/// sesquilinear form and a right action given on matrix units.
#[derive(Debug, Clone)]
pub struct RawModule {
    pub base: MultiMatrixAlgebra,
    pub dim: usize,
    /// Right-action matrix per base matrix unit.
    pub right: Vec<CMat>,
    /// `form[i][j] = <x_i, x_j>` in B, conjugate-linear in the first slot.
    pub form: Vec<Vec<AlgebraElement>>,
}

/// Result of canonicalizing a raw module: the canonical module, the quotient
/// map `embed` from raw coordinates onto canonical coordinates, and a
/// `section` with `embed * section = id`.
#[derive(Debug, Clone)]
pub struct Canonicalized {
    pub module: HilbertModule,
    pub embed: CMat,
    pub section: CMat,
}

/// Quotient a raw module by the null space of its form and orthonormalize
/// per block (pivoted Gram–Schmidt with deterministic pivot order).
pub fn canonicalize_module(raw: &RawModule) -> Result<Canonicalized> {
    let b = &raw.base;
    let d = raw.dim;
    // Positivity check of the B-valued Gram form, blockwise.
    for (j, &n) in b.blocks().iter().enumerate() {
        let mut g = CMat::zeros(d * n, d * n);
        for i in 0..d {
            for k in 0..d {
                for c in 0..n {
                    for c2 in 0..n {
                        g[(i * n + c, k * n + c2)] = raw.form[i][k].mats[j][(c, c2)];
                    }
                }
            }
        }
        if d * n > 0 {
            let violation = linalg::psd_violation(&g, 1e-9);
            if violation < -1e-8 {
                return Err(Error::NotPositive(violation));
            }
        }
    }

    let mut mults = Vec::with_capacity(b.num_blocks());
    let mut q_rows: Vec<CVec> = Vec::new();
    let mut s_cols: Vec<CVec> = Vec::new();
    for (j, &n) in b.blocks().iter().enumerate() {
        // Scalar matrix of <., .> at block j, entry (0, 0).
        let mut f00 = CMat::zeros(d, d);
        for i in 0..d {
            for k in 0..d {
                f00[(i, k)] = raw.form[i][k].mats[j][(0, 0)];
            }
        }
        let r00 = &raw.right[b.basis_index(BasisRef {
            block: j,
            row: 0,
            col: 0,
        })];
        // s_j(u, v) = (R_{e00} u)^* F00 (R_{e00} v).
        let s_j = r00.adjoint() * &f00 * r00;
        let basis = linalg::form_orthonormal_basis(&s_j, RANK_TOL);
        let m_j = basis.len();
        mults.push(m_j);
        for w in &basis {
            let lhs = (r00 * w).adjoint() * &f00; // row vector
            for c in 0..n {
                let r_c0 = &raw.right[b.basis_index(BasisRef {
                    block: j,
                    row: c,
                    col: 0,
                })];
                // Canonical coordinate (j, p, c) of raw x: s_j(w_p, x e_{c0}).
                let row = &lhs * r_c0;
                q_rows.push(CVec::from_fn(d, |i, _| row[(0, i)]));
                let r_0c = &raw.right[b.basis_index(BasisRef {
                    block: j,
                    row: 0,
                    col: c,
                })];
                s_cols.push(r_0c * w);
            }
        }
    }
    let module = HilbertModule::new(b.clone(), mults)?;
    let cd = module.dim();
    let mut embed = CMat::zeros(cd, d);
    let mut section = CMat::zeros(d, cd);
    for (r, row) in q_rows.iter().enumerate() {
        for i in 0..d {
            embed[(r, i)] = row[i];
        }
    }
    for (c, col) in s_cols.iter().enumerate() {
        for i in 0..d {
            section[(i, c)] = col[i];
        }
    }
    // The section must split the quotient map; a violation means the form
    // was not compatible with the right action.
    let split_defect = linalg::op_norm(&(&embed * &section - linalg::eye(cd)));
    if split_defect > 1e-7 {
        return Err(Error::ShapeError(format!(
            "form is not compatible with the right action (section defect {split_defect:.3e})"
        )));
    }
    Ok(Canonicalized {
        module,
        embed,
        section,
    })
}

/// Validate raw module data before canonicalization: the right-action
/// table must be multiplicative and unital, and the form must be hermitian
/// and compatible with the right action.  Canonicalization itself only
/// checks positivity and that the quotient splits, so untrusted data
/// should pass through here first.
pub fn validate_raw_module(raw: &RawModule, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::new("raw module", tol);
    let b = &raw.base;
    let d = raw.dim;
    let mut action_mult = 0.0f64;
    for i in 0..b.dim() {
        let ri = b.basis_ref(i);
        for j in 0..b.dim() {
            let rj = b.basis_ref(j);
            // x (e_i e_j) applies e_i first: R_{e_i e_j} = R_{e_j} R_{e_i}.
            let prod = &raw.right[j] * &raw.right[i];
            let expected = if ri.block == rj.block && ri.col == rj.row {
                raw.right[b.basis_index(BasisRef {
                    block: ri.block,
                    row: ri.row,
                    col: rj.col,
                })]
                .clone()
            } else {
                CMat::zeros(d, d)
            };
            action_mult = action_mult.max(linalg::op_norm(&(prod - expected)));
        }
    }
    report.check("right action multiplicative", action_mult);
    if !b.is_zero() {
        let mut unit = CMat::zeros(d, d);
        for (i, c) in b.identity().coeffs().iter().enumerate() {
            if c.norm() > 0.0 {
                unit += raw.right[i].map(|x| x * c);
            }
        }
        report.check("right action unital", linalg::op_norm(&(unit - linalg::eye(d))));
    }
    let mut hermitian = 0.0f64;
    let mut compatible = 0.0f64;
    for i in 0..d {
        for k in 0..d {
            hermitian = hermitian.max(crate::algebra::operator_norm(
                &raw.form[i][k].sub(&raw.form[k][i].adjoint()),
            ));
            for bidx in 0..b.dim() {
                // <x_i, x_k b> = <x_i, x_k> b.
                let moved = raw.right[bidx].column(k);
                let mut lhs = b.zero_element();
                for (kk, c) in moved.iter().enumerate() {
                    if c.norm() > 0.0 {
                        lhs = lhs.add(&raw.form[i][kk].scale(*c));
                    }
                }
                let rhs = raw.form[i][k].mul(&b.basis_element(bidx));
                compatible = compatible.max(crate::algebra::operator_norm(&lhs.sub(&rhs)));
            }
        }
    }
    report.check("form hermitian", hermitian);
    report.check("form right-compatible", compatible);
    report
}

/// Canonicalize raw module data together with a raw left action, producing a
/// correspondence.
pub fn correspondence_from_raw(
    source: &MultiMatrixAlgebra,
    raw: &RawModule,
    left_raw: &[CMat],
) -> Result<(Correspondence, Canonicalized)> {
    let canon = canonicalize_module(raw)?;
    let mut values = Vec::with_capacity(source.dim());
    for l in left_raw {
        let full = &canon.embed * l * &canon.section;
        let (op, defect) = ModOp::from_full(&full, &canon.module, &canon.module);
        if defect > 1e-7 {
            return Err(Error::ShapeError(format!(
                "left action does not descend to the canonical module (defect {defect:.3e})"
            )));
        }
        values.push(op);
    }
    let corr = Correspondence::from_parts(
        source.clone(),
        raw.base.clone(),
        canon.module.mults().to_vec(),
        LeftAction { values },
    )?;
    Ok((corr, canon))
}

/// An isomorphism of correspondences: a unitary intertwining left and right
/// actions, stored on canonical coordinates.
#[derive(Debug, Clone)]
pub struct CorrIso {
    pub source: Correspondence,
    pub target: Correspondence,
    pub matrix: CMat,
}

impl CorrIso {
    pub fn new(source: Correspondence, target: Correspondence, matrix: CMat) -> Self {
        CorrIso {
            source,
            target,
            matrix,
        }
    }

    pub fn inverse(&self) -> CorrIso {
        CorrIso {
            source: self.target.clone(),
            target: self.source.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// Check unitarity, right-action commutation (inner-product
    /// preservation) and left-action intertwining.
    pub fn verify(&self, tol: f64) -> ValidationReport {
        let mut report = ValidationReport::new("correspondence isomorphism", tol);
        let m = &self.matrix;
        let (sd, td) = (self.source.dim(), self.target.dim());
        if m.ncols() != sd || m.nrows() != td {
            report.require(
                "matrix shape",
                false,
                Some(format!("{}x{} vs {}x{}", m.nrows(), m.ncols(), td, sd)),
            );
            return report;
        }
        report.check(
            "unitary",
            linalg::op_norm(&(m.adjoint() * m - linalg::eye(sd)))
                .max(linalg::op_norm(&(m * m.adjoint() - linalg::eye(td)))),
        );
        let base = self.source.target();
        let mut right_defect = 0.0f64;
        for i in 0..base.dim() {
            let b = base.basis_element(i);
            let rs = self.source.module().right_action_matrix(&b);
            let rt = self.target.module().right_action_matrix(&b);
            right_defect = right_defect.max(linalg::op_norm(&(m * rs - rt * m)));
        }
        report.check("right-action intertwining", right_defect);
        let src_alg = self.source.source();
        let mut left_defect = 0.0f64;
        for i in 0..src_alg.dim() {
            let ls = self.source.left_full(i);
            let lt = self.target.left_full(i);
            left_defect = left_defect.max(linalg::op_norm(&(m * ls - lt * m)));
        }
        report.check("left-action intertwining", left_defect);
        report
    }
}

/// Result of an interior tensor product: the canonicalized correspondence
/// together with the simple-tensor embedding and a section of it.
#[derive(Debug, Clone)]
pub struct TensorProduct {
    pub corr: Correspondence,
    /// Map from raw coordinates `(u, v) -> u * dim_f + v` onto canonical
    /// coordinates.
    pub embed: CMat,
    pub section: CMat,
}

/// Interior tensor product of `e: A -> B` with `f: B -> C`.
pub fn tensor(e: &Correspondence, f: &Correspondence) -> Result<TensorProduct> {
    if e.target().blocks() != f.source().blocks() {
        return Err(Error::CompositionError(format!(
            "cannot tensor {} -> {} with {} -> {}",
            e.source().label(),
            e.target().label(),
            f.source().label(),
            f.target().label()
        )));
    }
    let (de, df) = (e.dim(), f.dim());
    let d = de * df;
    let b = e.target();
    let c_alg = f.target().clone();

    // B-valued inner products of e-basis pairs are sparse matrix units:
    // <(j,p,c), (j',p',c')> = delta delta e_{c c'}.
    let fmod = f.module();
    let mut form = vec![vec![c_alg.zero_element(); d]; d];
    for u in 0..de {
        let cu = e.module().coord_ref(u);
        for u2 in 0..de {
            let cu2 = e.module().coord_ref(u2);
            if cu.block != cu2.block || cu.row != cu2.row {
                continue;
            }
            let bidx = b.basis_index(BasisRef {
                block: cu.block,
                row: cu2.col,
                col: cu.col,
            });
            let op_full = f.left_full(bidx);
            for v in 0..df {
                let xv = CVec::from_fn(df, |i, _| if i == v { C64::ONE } else { C64::ZERO });
                let acted = &op_full * &xv;
                for v2 in 0..df {
                    let yv = CVec::from_fn(df, |i, _| if i == v2 { C64::ONE } else { C64::ZERO });
                    // <v2, phi(b) v> with the convention <x, T y>:
                    let val = fmod.inner_product(&yv, &acted);
                    // careful with slot order: form[(u2,v2)][(u,v)] = <x_{u2} (x) x_{v2}, x_u (x) x_v>
                    //   = <v2, phi(<u2, u>) v>.
                    let _ = &val;
                    form[u2 * df + v2][u * df + v] = val;
                }
            }
        }
    }
    let right: Vec<CMat> = (0..c_alg.dim())
        .map(|i| {
            let rb = f.module().right_action_matrix(&c_alg.basis_element(i));
            linalg::kron(&linalg::eye(de), &rb)
        })
        .collect();
    let raw = RawModule {
        base: c_alg,
        dim: d,
        right,
        form,
    };
    let left_raw: Vec<CMat> = (0..e.source().dim())
        .map(|i| linalg::kron(&e.left_full(i), &linalg::eye(df)))
        .collect();
    let (corr, canon) = correspondence_from_raw(e.source(), &raw, &left_raw)?;
    Ok(TensorProduct {
        corr,
        embed: canon.embed,
        section: canon.section,
    })
}

/// Transport a map `a: E -> E'` to `a (x) id_F : can(E (x) F) -> can(E' (x) F)`.
pub fn map_first_factor(src: &TensorProduct, dst: &TensorProduct, a: &CMat, df: usize) -> CMat {
    &dst.embed * linalg::kron(a, &linalg::eye(df)) * &src.section
}

/// Transport a map `b: F -> F'` to `id_E (x) b : can(E (x) F) -> can(E (x) F')`.
pub fn map_second_factor(src: &TensorProduct, dst: &TensorProduct, b: &CMat, de: usize) -> CMat {
    &dst.embed * linalg::kron(&linalg::eye(de), b) * &src.section
}

/// The canonical associator `can(can(E (x) F) (x) G) -> can(E (x) can(F (x) G))`.
pub fn associator(
    e: &Correspondence,
    f: &Correspondence,
    g: &Correspondence,
) -> Result<CorrIso> {
    let t_ef = tensor(e, f)?;
    let t_efg = tensor(&t_ef.corr, g)?;
    let t_fg = tensor(f, g)?;
    let t_e_fg = tensor(e, &t_fg.corr)?;
    let (de, dg) = (e.dim(), g.dim());
    let matrix = &t_e_fg.embed
        * linalg::kron(&linalg::eye(de), &t_fg.embed)
        * linalg::kron(&t_ef.section, &linalg::eye(dg))
        * &t_efg.section;
    Ok(CorrIso::new(t_efg.corr, t_e_fg.corr, matrix))
}

/// The left unitor `can(A (x) E) -> E`, the action map `a (x) xi -> a xi`.
pub fn left_unit(e: &Correspondence) -> Result<CorrIso> {
    let ida = Correspondence::identity(e.source());
    let t = tensor(&ida, e)?;
    let (da, de) = (ida.dim(), e.dim());
    let mut act = CMat::zeros(de, da * de);
    for i in 0..da {
        let l = e.left_full(i);
        for v in 0..de {
            for r in 0..de {
                act[(r, i * de + v)] = l[(r, v)];
            }
        }
    }
    let matrix = act * &t.section;
    Ok(CorrIso::new(t.corr, e.clone(), matrix))
}

/// The right unitor `can(E (x) B) -> E`, the action map `xi (x) b -> xi b`.
pub fn right_unit(e: &Correspondence) -> Result<CorrIso> {
    let idb = Correspondence::identity(e.target());
    let t = tensor(e, &idb)?;
    let (de, db) = (e.dim(), idb.dim());
    let mut act = CMat::zeros(de, de * db);
    for i in 0..db {
        let r = e
            .module()
            .right_action_matrix(&e.target().basis_element(i));
        for v in 0..de {
            for row in 0..de {
                act[(row, v * db + i)] = r[(row, v)];
            }
        }
    }
    let matrix = act * &t.section;
    Ok(CorrIso::new(t.corr, e.clone(), matrix))
}

/// Validate a correspondence: left-action *-homomorphism axioms,
/// nondegeneracy, and certificate accuracy.
pub fn validate_correspondence(c: &Correspondence, tol: f64) -> ValidationReport {
    let mut report = ValidationReport::new(
        format!(
            "correspondence {} -> {}",
            c.source().label(),
            c.target().label()
        ),
        tol,
    );
    let src = c.source();
    let mut mult_defect = 0.0f64;
    let mut star_defect = 0.0f64;
    for i in 0..src.dim() {
        let ri = src.basis_ref(i);
        let star_idx = src.basis_index(BasisRef {
            block: ri.block,
            row: ri.col,
            col: ri.row,
        });
        star_defect = star_defect.max(
            c.left_op(star_idx)
                .sub(&c.left_op(i).adjoint())
                .norm(),
        );
        for j in 0..src.dim() {
            let rj = src.basis_ref(j);
            let prod = c.left_op(i).compose(c.left_op(j));
            let expected = if ri.block == rj.block && ri.col == rj.row {
                c.left_op(src.basis_index(BasisRef {
                    block: ri.block,
                    row: ri.row,
                    col: rj.col,
                }))
                .clone()
            } else {
                ModOp::zeros(c.module(), c.module())
            };
            mult_defect = mult_defect.max(prod.sub(&expected).norm());
        }
    }
    report.check("left-action multiplicative", mult_defect);
    report.check("left-action star-preserving", star_defect);

    // Nondegeneracy: for unital sources this is phi(1) = id.
    if src.is_zero() {
        report.require(
            "nondegenerate",
            c.is_zero(),
            Some("zero algebra acts only on the zero module".into()),
        );
    } else {
        let mut one = ModOp::zeros(c.module(), c.module());
        for i in 0..src.num_blocks() {
            for k in 0..src.blocks()[i] {
                let idx = src.basis_index(BasisRef {
                    block: i,
                    row: k,
                    col: k,
                });
                one = one.add(c.left_op(idx));
            }
        }
        let defect = one.sub(&ModOp::identity(c.module())).norm();
        let spanned: usize = {
            let mats: Vec<CMat> = (0..src.dim()).map(|i| c.left_full(i)).collect();
            if c.dim() == 0 {
                0
            } else {
                let mut stacked = CMat::zeros(c.dim(), c.dim() * mats.len());
                for (k, m) in mats.iter().enumerate() {
                    stacked.view_mut((0, k * c.dim()), (c.dim(), c.dim())).copy_from(m);
                }
                linalg::rank(&stacked, 1e-9)
            }
        };
        report.check_with_tol(
            "nondegenerate (phi(1) = id)",
            defect,
            tol,
            Some(format!("span rank {} of dim {}", spanned, c.dim())),
        );
    }

    // Certificate accuracy.
    let mut cert_defect = 0.0f64;
    for i in 0..src.dim() {
        let mut rebuilt = CMat::zeros(c.dim(), c.dim());
        for (xi, eta) in c.certificate(i) {
            rebuilt += rank_one_full(c.module(), xi, eta);
        }
        cert_defect = cert_defect.max(linalg::op_norm(&(rebuilt - c.left_full(i))));
    }
    report.check("properness certificate", cert_defect);
    report
}

/// Search for an isomorphism between two correspondences with the same
/// source and target.  Returns the witnessing multiplicity data when the
/// correspondences are not isomorphic.
pub fn find_isomorphism(
    c1: &Correspondence,
    c2: &Correspondence,
    tol: f64,
) -> Result<std::result::Result<CorrIso, String>> {
    if c1.source().blocks() != c2.source().blocks()
        || c1.target().blocks() != c2.target().blocks()
    {
        return Err(Error::ShapeError(
            "isomorphism search needs identical source and target algebras".into(),
        ));
    }
    if c1.module().mults() != c2.module().mults() {
        return Ok(Err(format!(
            "module multiplicities differ: {:?} vs {:?}",
            c1.module().mults(),
            c2.module().mults()
        )));
    }
    let m1 = c1.left_multiplicities()?;
    let m2 = c2.left_multiplicities()?;
    if m1 != m2 {
        return Ok(Err(format!(
            "left multiplicity matrices differ: {m1:?} vs {m2:?}"
        )));
    }
    // Per module block, build canonical bases ordered by (source block,
    // copy, irrep vector) for both actions and map one onto the other.
    let mut blocks = Vec::new();
    for j in 0..c1.module().mults().len() {
        let b1 = canonical_rep_basis(c1, j, tol)?;
        let b2 = canonical_rep_basis(c2, j, tol)?;
        blocks.push(&b2 * b1.adjoint());
    }
    let op = ModOp { blocks };
    let iso = CorrIso::new(
        c1.clone(),
        c2.clone(),
        op.full_matrix(c2.module(), c1.module()),
    );
    let report = iso.verify(tol.max(1e-8));
    if report.passed() {
        Ok(Ok(iso))
    } else {
        Ok(Err(format!(
            "intertwiner construction failed: max defect {:.3e}",
            report.max_defect()
        )))
    }
}

/// Orthonormal basis of module block `j` adapted to the left action:
/// ordered by source block, then multiplicity copy, then irrep vector.
fn canonical_rep_basis(c: &Correspondence, j: usize, tol: f64) -> Result<CMat> {
    let m_j = c.module().mults()[j];
    let src = c.source();
    let mut cols: Vec<CVec> = Vec::new();
    for i in 0..src.num_blocks() {
        let n_i = src.blocks()[i];
        let p00 = &c
            .left_op(src.basis_index(BasisRef {
                block: i,
                row: 0,
                col: 0,
            }))
            .blocks[j];
        let range = linalg::orthonormal_range_basis(p00, 1e-9);
        for r in 0..range.ncols() {
            let v = range.column(r).into_owned();
            for l in 0..n_i {
                let el0 = &c
                    .left_op(src.basis_index(BasisRef {
                        block: i,
                        row: l,
                        col: 0,
                    }))
                    .blocks[j];
                cols.push(el0 * &v);
            }
        }
    }
    if cols.len() != m_j {
        return Err(Error::DegenerateAction(format!(
            "block {j}: adapted basis has {} vectors, module multiplicity is {m_j}",
            cols.len()
        )));
    }
    let mut out = CMat::zeros(m_j, m_j);
    for (k, v) in cols.iter().enumerate() {
        out.set_column(k, v);
    }
    // The columns are orthonormal for a valid action; verify.
    let defect = linalg::op_norm(&(out.adjoint() * &out - linalg::eye(m_j)));
    if defect > tol.max(1e-8) {
        return Err(Error::DegenerateAction(format!(
            "block {j}: adapted basis is not orthonormal (defect {defect:.3e})"
        )));
    }
    Ok(out)
}

/// Correspondence associated to a *-homomorphism: the right ideal
/// `h(A) target` with left action through `h`.
pub fn from_star_hom(h: &StarHom) -> Result<Correspondence> {
    let b = h.target();
    let d = b.dim();
    let p = h.apply(&h.source().identity());
    let basis: Vec<AlgebraElement> = (0..d).map(|i| b.basis_element(i)).collect();
    let mut form = vec![vec![b.zero_element(); d]; d];
    for i in 0..d {
        let left_i = basis[i].adjoint().mul(&p);
        for k in 0..d {
            form[i][k] = left_i.mul(&basis[k]);
        }
    }
    let right: Vec<CMat> = (0..d)
        .map(|i| {
            let e = b.basis_element(i);
            let mut m = CMat::zeros(d, d);
            for (col, bk) in basis.iter().enumerate() {
                for (row, v) in bk.mul(&e).coeffs().iter().enumerate() {
                    m[(row, col)] = *v;
                }
            }
            m
        })
        .collect();
    let left_raw: Vec<CMat> = (0..h.source().dim())
        .map(|i| {
            let hv = h.value(i);
            let mut m = CMat::zeros(d, d);
            for (col, bk) in basis.iter().enumerate() {
                for (row, v) in hv.mul(bk).coeffs().iter().enumerate() {
                    m[(row, col)] = *v;
                }
            }
            m
        })
        .collect();
    let raw = RawModule {
        base: b.clone(),
        dim: d,
        right,
        form,
    };
    let (corr, _) = correspondence_from_raw(h.source(), &raw, &left_raw)?;
    Ok(corr)
}

/// Correspondence `A_E : A -> B` from a conditional expectation
/// `E : A -> B` along an inclusion `B -> A`: the completion of `A` under
/// `<a1, a2> = E(a1* a2)` with left action by multiplication.
pub fn correspondence_from_expectation(
    a: &MultiMatrixAlgebra,
    inclusion: &StarHom,
    expectation: &dyn Fn(&AlgebraElement) -> AlgebraElement,
    tol: f64,
) -> Result<Correspondence> {
    if inclusion.target().blocks() != a.blocks() {
        return Err(Error::ShapeError(
            "inclusion must land in the ambient algebra".into(),
        ));
    }
    let b = inclusion.source().clone();
    // E o inclusion = id_B.
    for i in 0..b.dim() {
        let e = b.basis_element(i);
        let back = expectation(&inclusion.apply(&e));
        if crate::algebra::operator_norm(&back.sub(&e)) > tol.max(1e-8) {
            return Err(Error::NotAnExpectation(format!(
                "E o inclusion differs from identity on basis element {i}"
            )));
        }
    }
    // Bimodularity on basis triples.
    let mut bimod = 0.0f64;
    for i in 0..b.dim() {
        let bi = inclusion.apply(&b.basis_element(i));
        for k in 0..a.dim() {
            let ak = a.basis_element(k);
            let lhs = expectation(&bi.mul(&ak));
            let rhs = b.basis_element(i).mul(&expectation(&ak));
            bimod = bimod.max(crate::algebra::operator_norm(&lhs.sub(&rhs)));
            let lhs2 = expectation(&ak.mul(&bi));
            let rhs2 = expectation(&ak).mul(&b.basis_element(i));
            bimod = bimod.max(crate::algebra::operator_norm(&lhs2.sub(&rhs2)));
        }
    }
    if bimod > tol.max(1e-8) {
        return Err(Error::NotAnExpectation(format!(
            "bimodularity defect {bimod:.3e}"
        )));
    }
    let d = a.dim();
    let basis: Vec<AlgebraElement> = (0..d).map(|i| a.basis_element(i)).collect();
    let mut form = vec![vec![b.zero_element(); d]; d];
    for i in 0..d {
        for k in 0..d {
            form[i][k] = expectation(&basis[i].adjoint().mul(&basis[k]));
        }
    }
    let right: Vec<CMat> = (0..b.dim())
        .map(|i| {
            let bi = inclusion.apply(&b.basis_element(i));
            let mut m = CMat::zeros(d, d);
            for (col, ak) in basis.iter().enumerate() {
                for (row, v) in ak.mul(&bi).coeffs().iter().enumerate() {
                    m[(row, col)] = *v;
                }
            }
            m
        })
        .collect();
    let left_raw: Vec<CMat> = (0..d)
        .map(|i| {
            let ai = &basis[i];
            let mut m = CMat::zeros(d, d);
            for (col, ak) in basis.iter().enumerate() {
                for (row, v) in ai.mul(ak).coeffs().iter().enumerate() {
                    m[(row, col)] = *v;
                }
            }
            m
        })
        .collect();
    let raw = RawModule {
        base: b,
        dim: d,
        right,
        form,
    };
    // Positivity is rechecked inside canonicalization.
    let (corr, _) = match correspondence_from_raw(a, &raw, &left_raw) {
        Ok(x) => x,
        Err(Error::NotPositive(m)) => {
            return Err(Error::NotAnExpectation(format!(
                "Gram form not positive (min eigenvalue {m:.3e})"
            )))
        }
        Err(e) => return Err(e),
    };
    if !a.is_zero() && !corr.is_zero() {
        let rep = validate_correspondence(&corr, tol.max(1e-8));
        if !rep.passed() {
            return Err(Error::DegenerateAction(format!(
                "left action defect {:.3e} after quotient",
                rep.max_defect()
            )));
        }
    }
    Ok(corr)
}

/// Direct sum of correspondences with a common target.
pub fn direct_sum(parts: &[Correspondence], label: impl Into<String>) -> Result<Correspondence> {
    let label = label.into();
    let Some(first) = parts.first() else {
        return Err(Error::CompositionError("empty direct sum".into()));
    };
    let target = first.target().clone();
    if parts.iter().any(|p| p.target().blocks() != target.blocks()) {
        return Err(Error::CompositionError(
            "direct-sum parts must share their target".into(),
        ));
    }
    let source = MultiMatrixAlgebra::direct_sum(
        &parts.iter().map(|p| p.source().clone()).collect::<Vec<_>>(),
        label,
    );
    let mults: Vec<usize> = (0..target.num_blocks())
        .map(|j| parts.iter().map(|p| p.module().mults()[j]).sum())
        .collect();
    let module = HilbertModule::new(target.clone(), mults.clone())?;
    let mut values = Vec::with_capacity(source.dim());
    for (s, part) in parts.iter().enumerate() {
        let offsets: Vec<usize> = (0..target.num_blocks())
            .map(|j| {
                parts[..s]
                    .iter()
                    .map(|p| p.module().mults()[j])
                    .sum::<usize>()
            })
            .collect();
        for i in 0..part.source().dim() {
            let op = part.left_op(i);
            let blocks = (0..target.num_blocks())
                .map(|j| {
                    let mut b = CMat::zeros(module.mults()[j], module.mults()[j]);
                    let small = &op.blocks[j];
                    let off = offsets[j];
                    for p in 0..small.nrows() {
                        for q in 0..small.ncols() {
                            b[(off + p, off + q)] = small[(p, q)];
                        }
                    }
                    b
                })
                .collect();
            values.push(ModOp { blocks });
        }
    }
    Correspondence::from_parts(source, target, mults, LeftAction { values })
}

/// Split a correspondence from a direct-sum algebra along the summand
/// projections `p_i`; returns the components and the reassembly isomorphism
/// from their direct sum back onto the original.
pub fn decompose_by_projections(
    e: &Correspondence,
    summands: &[MultiMatrixAlgebra],
) -> Result<(Vec<Correspondence>, CorrIso)> {
    let concat: Vec<usize> = summands.iter().flat_map(|a| a.blocks().to_vec()).collect();
    if concat != e.source().blocks() {
        return Err(Error::ShapeError(
            "summand blocks do not concatenate to the source algebra".into(),
        ));
    }
    let target = e.target().clone();
    let nb = target.num_blocks();
    let mut comps: Vec<Correspondence> = Vec::new();
    // Per target block: per summand, orthonormal basis of range of phi(p_i).
    let mut embeddings: Vec<Vec<CMat>> = vec![Vec::new(); summands.len()];
    let mut block_start = 0usize;
    for (s, a_i) in summands.iter().enumerate() {
        // phi(p_i) as a ModOp.
        let mut proj = ModOp::zeros(e.module(), e.module());
        for bl in 0..a_i.num_blocks() {
            for k in 0..a_i.blocks()[bl] {
                let idx = e.source().basis_index(BasisRef {
                    block: block_start + bl,
                    row: k,
                    col: k,
                });
                proj = proj.add(e.left_op(idx));
            }
        }
        let mut mults_i = Vec::with_capacity(nb);
        let mut iso_blocks = Vec::with_capacity(nb);
        for j in 0..nb {
            let basis = linalg::orthonormal_range_basis(&proj.blocks[j], 1e-9);
            mults_i.push(basis.ncols());
            iso_blocks.push(basis);
        }
        // Compressed left action of A_i.
        let mut values = Vec::with_capacity(a_i.dim());
        for i in 0..a_i.dim() {
            let r = a_i.basis_ref(i);
            let global = e.source().basis_index(BasisRef {
                block: block_start + r.block,
                row: r.row,
                col: r.col,
            });
            let op = e.left_op(global);
            let blocks = (0..nb)
                .map(|j| iso_blocks[j].adjoint() * &op.blocks[j] * &iso_blocks[j])
                .collect();
            values.push(ModOp { blocks });
        }
        comps.push(Correspondence::from_parts(
            a_i.clone(),
            target.clone(),
            mults_i,
            LeftAction { values },
        )?);
        embeddings[s] = iso_blocks;
        block_start += a_i.num_blocks();
    }
    // Reassembly: direct sum of components -> e, columns grouped by summand.
    let rebuilt = direct_sum(&comps, e.source().label().to_string())?;
    let blocks: Vec<CMat> = (0..nb)
        .map(|j| {
            let m_j = e.module().mults()[j];
            let total: usize = embeddings.iter().map(|em| em[j].ncols()).sum();
            let mut u = CMat::zeros(m_j, total);
            let mut col = 0usize;
            for em in &embeddings {
                let b = &em[j];
                for c in 0..b.ncols() {
                    u.set_column(col, &b.column(c));
                    col += 1;
                }
            }
            u
        })
        .collect();
    let op = ModOp { blocks };
    let matrix = op.full_matrix(e.module(), rebuilt.module());
    Ok((comps, CorrIso::new(rebuilt, e.clone(), matrix)))
}

/// Split a correspondence into a direct-sum target along the marked
/// summands: `E_i = E . A_i`.
pub fn decompose_into_product(
    e: &Correspondence,
    summands: &[MultiMatrixAlgebra],
) -> Result<Vec<Correspondence>> {
    let concat: Vec<usize> = summands.iter().flat_map(|a| a.blocks().to_vec()).collect();
    if concat != e.target().blocks() {
        return Err(Error::ShapeError(
            "summand blocks do not concatenate to the target algebra".into(),
        ));
    }
    let mut out = Vec::new();
    let mut start = 0usize;
    for a_i in summands {
        let range = start..start + a_i.num_blocks();
        let mults: Vec<usize> = e.module().mults()[range.clone()].to_vec();
        let values = (0..e.source().dim())
            .map(|i| ModOp {
                blocks: e.left_op(i).blocks[range.clone()].to_vec(),
            })
            .collect();
        out.push(Correspondence::from_parts(
            e.source().clone(),
            a_i.clone(),
            mults,
            LeftAction { values },
        )?);
        start += a_i.num_blocks();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_TOL;

    fn algebra(blocks: &[usize], label: &str) -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::new(blocks.to_vec(), label).unwrap()
    }

    /// C^n as a correspondence from C to C.
    fn std_corr(n: usize) -> Correspondence {
        let c = algebra(&[1], "C");
        let values = vec![ModOp {
            blocks: vec![CMat::identity(n, n)],
        }];
        Correspondence::from_parts(c.clone(), c, vec![n], LeftAction { values }).unwrap()
    }

    #[test]
    fn canonicalize_quotient_and_rescale() {
        let c = algebra(&[1], "C");
        // Raw C^2 with form diag(1, 0): one null vector.
        let raw = RawModule {
            base: c.clone(),
            dim: 2,
            right: vec![linalg::eye(2)],
            form: vec![
                vec![c.identity(), c.zero_element()],
                vec![c.zero_element(), c.zero_element()],
            ],
        };
        let canon = canonicalize_module(&raw).unwrap();
        assert_eq!(canon.module.mults(), &[1]);

        // Raw C^2 with form 2I: dim 2, map scaled by 1/sqrt(2).
        let two = c.identity().scale(C64::new(2.0, 0.0));
        let raw2 = RawModule {
            base: c.clone(),
            dim: 2,
            right: vec![linalg::eye(2)],
            form: vec![
                vec![two.clone(), c.zero_element()],
                vec![c.zero_element(), two],
            ],
        };
        let canon2 = canonicalize_module(&raw2).unwrap();
        assert_eq!(canon2.module.mults(), &[2]);
        let q = &canon2.embed;
        for i in 0..2 {
            let col_norm = q.column(i).norm();
            assert!((col_norm - std::f64::consts::SQRT_2).abs() < 1e-10);
        }
        let qs = &canon2.embed * &canon2.section;
        assert!(linalg::op_norm(&(qs - linalg::eye(2))) < 1e-10);
    }

    #[test]
    fn canonical_module_is_fixed_point() {
        // M_{1x2} over M_2: canonicalizing the canonical data returns the
        // same multiplicities with an identity-up-to-phase map.
        let m2 = algebra(&[2], "M2");
        let module = HilbertModule::new(m2.clone(), vec![1]).unwrap();
        let d = module.dim();
        let mut form = vec![vec![m2.zero_element(); d]; d];
        for i in 0..d {
            for k in 0..d {
                let xi = CVec::from_fn(d, |r, _| if r == i { C64::ONE } else { C64::ZERO });
                let yk = CVec::from_fn(d, |r, _| if r == k { C64::ONE } else { C64::ZERO });
                form[i][k] = module.inner_product(&xi, &yk);
            }
        }
        let right = (0..m2.dim())
            .map(|i| module.right_action_matrix(&m2.basis_element(i)))
            .collect();
        let raw = RawModule {
            base: m2,
            dim: d,
            right,
            form,
        };
        let canon = canonicalize_module(&raw).unwrap();
        assert_eq!(canon.module.mults(), &[1]);
        assert!(linalg::op_norm(&(&canon.embed - linalg::eye(d))) < 1e-10);
    }

    #[test]
    fn nonpositive_form_is_rejected() {
        let c = algebra(&[1], "C");
        let raw = RawModule {
            base: c.clone(),
            dim: 1,
            right: vec![linalg::eye(1)],
            form: vec![vec![c.identity().scale(C64::new(-1.0, 0.0))]],
        };
        assert!(matches!(
            canonicalize_module(&raw),
            Err(Error::NotPositive(_))
        ));
    }

    #[test]
    fn validate_standard_and_zero_actions() {
        let e = std_corr(3);
        let rep = validate_correspondence(&e, DEFAULT_TOL);
        assert!(rep.passed(), "{:?}", rep.first_failure());
        // phi(1) = sum of three rank-one certificate pairs.
        assert_eq!(e.certificate(0).len(), 3);

        // Zero left action on a nonzero module fails nondegeneracy.
        let c = algebra(&[1], "C");
        let bad = Correspondence::from_parts(
            c.clone(),
            c,
            vec![2],
            LeftAction {
                values: vec![ModOp {
                    blocks: vec![CMat::zeros(2, 2)],
                }],
            },
        )
        .unwrap();
        let rep = validate_correspondence(&bad, DEFAULT_TOL);
        assert!(!rep.passed());
    }

    #[test]
    fn scalar_action_on_m2_certificate() {
        // E = M_2 as a module over itself with left action of C by scalars.
        let c = algebra(&[1], "C");
        let m2 = algebra(&[2], "M2");
        let values = vec![ModOp {
            blocks: vec![linalg::eye(2)],
        }];
        let e = Correspondence::from_parts(c, m2, vec![2], LeftAction { values }).unwrap();
        let rep = validate_correspondence(&e, DEFAULT_TOL);
        assert!(rep.passed());
        // Identity resolves into two rank-one pairs over the M_{1x2} rows.
        assert_eq!(e.certificate(0).len(), 2);
    }

    #[test]
    fn tensor_dimension_products() {
        let e = std_corr(2);
        let f = std_corr(3);
        let t = tensor(&e, &f).unwrap();
        assert_eq!(t.corr.dim(), 6);
        assert_eq!(t.corr.module().mults(), &[6]);
    }

    #[test]
    fn tensor_with_orthogonal_supports_is_zero() {
        // E supported on block 1 of C+C, F with left action supported on
        // block 2: tensor vanishes.
        let c = algebra(&[1], "C");
        let cc = algebra(&[1, 1], "CC");
        let e = Correspondence::from_parts(
            c.clone(),
            cc.clone(),
            vec![1, 0],
            LeftAction {
                values: vec![ModOp {
                    blocks: vec![linalg::eye(1), CMat::zeros(0, 0)],
                }],
            },
        )
        .unwrap();
        let f = Correspondence::from_parts(
            cc,
            c.clone(),
            vec![1],
            LeftAction {
                values: vec![
                    ModOp {
                        blocks: vec![CMat::zeros(1, 1)],
                    },
                    ModOp {
                        blocks: vec![linalg::eye(1)],
                    },
                ],
            },
        )
        .unwrap();
        let t = tensor(&e, &f).unwrap();
        assert!(t.corr.is_zero());
    }

    #[test]
    fn unit_tensor_gives_unitor() {
        // B (x)_B F = F with the canonical unitor.
        let f = std_corr(3);
        let lu = left_unit(&f).unwrap();
        assert!(lu.verify(1e-10).passed());
        let ru = right_unit(&f).unwrap();
        assert!(ru.verify(1e-10).passed());
    }

    #[test]
    fn associator_is_unitary_and_permutation_like() {
        let e = std_corr(2);
        let f = std_corr(3);
        let g = std_corr(2);
        let a = associator(&e, &f, &g).unwrap();
        assert_eq!(a.matrix.nrows(), 12);
        let rep = a.verify(1e-10);
        assert!(rep.passed(), "{:?}", rep.first_failure());
        // Entries are 0/1 up to numerics for standard modules.
        for v in a.matrix.iter() {
            let n = v.norm();
            assert!(n < 1e-9 || (n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pentagon_for_random_quadruple() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let a = algebra(&[2], "A");
        let e = crate::random::random_correspondence(&a, &a, &[vec![1]], &mut rng);
        let f = crate::random::random_correspondence(&a, &a, &[vec![1]], &mut rng);
        let g = crate::random::random_correspondence(&a, &a, &[vec![1]], &mut rng);
        let h = crate::random::random_correspondence(&a, &a, &[vec![1]], &mut rng);

        // Route 1: ((ef)g)h -> (ef)(gh) -> e(f(gh)).
        let t_ef = tensor(&e, &f).unwrap();
        let t_gh = tensor(&g, &h).unwrap();
        let a1 = associator(&t_ef.corr, &g, &h).unwrap();
        let a2 = associator(&e, &f, &t_gh.corr).unwrap();
        let route1 = &a2.matrix * &a1.matrix;

        // Route 2: ((ef)g)h -> (e(fg))h -> e((fg)h) -> e(f(gh)).
        let t_fg = tensor(&f, &g).unwrap();
        let a3 = associator(&e, &f, &g).unwrap(); // can((ef)g) -> can(e(fg))
        let t_e_fg = tensor(&e, &t_fg.corr).unwrap();
        let t_efg = tensor(&t_ef.corr, &g).unwrap();
        let a3h = {
            // a3 (x) id_h : can(can((ef)g) (x) h) -> can(can(e(fg)) (x) h)
            let src = tensor(&t_efg.corr, &h).unwrap();
            let dst = tensor(&t_e_fg.corr, &h).unwrap();
            map_first_factor(&src, &dst, &a3.matrix, h.dim())
        };
        let a4 = associator(&e, &t_fg.corr, &h).unwrap();
        let a5 = {
            // id_e (x) assoc(f,g,h)
            let t_fg_h = tensor(&t_fg.corr, &h).unwrap();
            let t_f_gh = tensor(&f, &t_gh.corr).unwrap();
            let afgh = associator(&f, &g, &h).unwrap();
            let src = tensor(&e, &t_fg_h.corr).unwrap();
            let dst = tensor(&e, &t_f_gh.corr).unwrap();
            map_second_factor(&src, &dst, &afgh.matrix, e.dim())
        };
        let route2 = &a5 * &a4.matrix * &a3h;
        let defect = linalg::op_norm(&(route1 - route2));
        assert!(defect < 1e-10, "pentagon defect {defect:.3e}");
    }

    #[test]
    fn find_isomorphism_decides_by_multiplicities() {
        // Identical standard correspondences: identity-like unitary.
        let e = std_corr(3);
        let f = std_corr(3);
        let iso = find_isomorphism(&e, &f, DEFAULT_TOL).unwrap().unwrap();
        assert!(iso.verify(1e-9).passed());

        // C^2 vs C^3: no isomorphism, dimension witness.
        let g = std_corr(2);
        let w = find_isomorphism(&g, &e, DEFAULT_TOL).unwrap();
        assert!(w.is_err());
        let msg = w.err().unwrap();
        assert!(msg.contains('2') && msg.contains('3'), "{msg}");
    }

    #[test]
    fn find_isomorphism_conjugated_actions() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        // Two correspondences C -> M_2 with multiplicity 2 over each block
        // but different concrete bases.
        let c = algebra(&[1], "C");
        let m2 = algebra(&[2], "M2");
        let c1 = crate::random::random_correspondence(&c, &m2, &[vec![2]], &mut rng);
        let c2 = crate::random::random_correspondence(&c, &m2, &[vec![2]], &mut rng);
        let iso = find_isomorphism(&c1, &c2, DEFAULT_TOL).unwrap().unwrap();
        let rep = iso.verify(1e-10);
        assert!(rep.passed(), "{:?}", rep.first_failure());
    }

    #[test]
    fn from_star_hom_examples() {
        // Identity on C.
        let c = algebra(&[1], "C");
        let idc = from_star_hom(&StarHom::identity(&c)).unwrap();
        assert_eq!(idc.dim(), 1);

        // Unital C -> M2: module M2 of dimension 4, scalar left action.
        let m2 = algebra(&[2], "M2");
        let unital = StarHom::from_fn(&c, &m2, |_| m2.identity()).unwrap();
        let e = from_star_hom(&unital).unwrap();
        assert_eq!(e.dim(), 4);
        assert_eq!(e.module().mults(), &[2]);

        // Corner C -> M2, 1 -> e11: module e11 M2 of dimension 2.
        let corner = StarHom::from_fn(&c, &m2, |_| m2.matrix_unit(0, 0, 0)).unwrap();
        let e2 = from_star_hom(&corner).unwrap();
        assert_eq!(e2.dim(), 2);
        assert_eq!(e2.module().mults(), &[1]);
    }

    #[test]
    fn expectation_examples() {
        // B = A, E = id: identity correspondence.
        let a = algebra(&[2], "A");
        let e = correspondence_from_expectation(
            &a,
            &StarHom::identity(&a),
            &|x: &AlgebraElement| x.clone(),
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(e.module().mults(), a.blocks());

        // A = C+C over diagonal B = C with E(a, b) = (a + b)/2: Gram = I/2.
        let cc = algebra(&[1, 1], "CC");
        let c = algebra(&[1], "C");
        let incl = StarHom::from_fn(&c, &cc, |_| cc.identity()).unwrap();
        let cc2 = cc.clone();
        let c2 = c.clone();
        let exp = move |x: &AlgebraElement| {
            let half = (x.mats[0][(0, 0)] + x.mats[1][(0, 0)]) * C64::new(0.5, 0.0);
            c2.element(vec![CMat::from_element(1, 1, half)]).unwrap()
        };
        let e2 = correspondence_from_expectation(&cc2, &incl, &exp, DEFAULT_TOL).unwrap();
        assert_eq!(e2.dim(), 2);

        // A = M2 over C 1 with normalized trace: dim 4, multiplicity 2.
        let m2 = algebra(&[2], "M2");
        let incl2 = StarHom::from_fn(&c, &m2, |_| m2.identity()).unwrap();
        let c3 = c.clone();
        let tr = move |x: &AlgebraElement| {
            let t = x.mats[0].diagonal().sum() * C64::new(0.5, 0.0);
            c3.element(vec![CMat::from_element(1, 1, t)]).unwrap()
        };
        let e3 = correspondence_from_expectation(&m2, &incl2, &tr, DEFAULT_TOL).unwrap();
        assert_eq!(e3.dim(), 4);
        assert_eq!(e3.left_multiplicities().unwrap(), vec![vec![2]]);

        // Non-expectation (not idempotent on B) is rejected.
        let bad = move |x: &AlgebraElement| {
            let t = x.mats[0].diagonal().sum();
            c.element(vec![CMat::from_element(1, 1, t)]).unwrap()
        };
        assert!(matches!(
            correspondence_from_expectation(&m2, &incl2, &bad, DEFAULT_TOL),
            Err(Error::NotAnExpectation(_))
        ));
    }

    #[test]
    fn non_faithful_expectation_drops_dimension() {
        // E(a, b) = a on C+C over the first copy of C: one null direction.
        let cc = algebra(&[1, 1], "CC");
        let c = algebra(&[1], "C");
        let incl = StarHom::from_fn(&c, &cc, |_| cc.identity()).unwrap();
        let c2 = c.clone();
        let exp = move |x: &AlgebraElement| {
            c2.element(vec![CMat::from_element(1, 1, x.mats[0][(0, 0)])])
                .unwrap()
        };
        let e = correspondence_from_expectation(&cc, &incl, &exp, DEFAULT_TOL).unwrap();
        assert_eq!(e.dim(), 1);
    }

    #[test]
    fn direct_sum_and_decompose_round_trip() {
        let e1 = std_corr(2);
        let e2 = std_corr(3);
        let s = direct_sum(&[e1.clone(), e2.clone()], "CC").unwrap();
        assert_eq!(s.dim(), 5);
        let summands = vec![e1.source().clone(), e2.source().clone()];
        let (comps, iso) = decompose_by_projections(&s, &summands).unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].dim(), 2);
        assert_eq!(comps[1].dim(), 3);
        let rep = iso.verify(1e-10);
        assert!(rep.passed(), "{:?}", rep.first_failure());
    }

    #[test]
    fn decompose_into_product_components() {
        // Identity correspondence on C+C: components are the two ideals.
        let cc = algebra(&[1, 1], "CC");
        let id = Correspondence::identity(&cc);
        let summands = vec![algebra(&[1], "C1"), algebra(&[1], "C2")];
        let comps = decompose_into_product(&id, &summands).unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].dim(), 1);
        assert_eq!(comps[1].dim(), 1);

        // E supported on the first summand.
        let c = algebra(&[1], "C");
        let e = Correspondence::from_parts(
            c.clone(),
            cc,
            vec![2, 0],
            LeftAction {
                values: vec![ModOp {
                    blocks: vec![linalg::eye(2), CMat::zeros(0, 0)],
                }],
            },
        )
        .unwrap();
        let comps = decompose_into_product(&e, &summands).unwrap();
        assert_eq!(comps[0].dim(), 2);
        assert!(comps[1].is_zero());
    }
}
