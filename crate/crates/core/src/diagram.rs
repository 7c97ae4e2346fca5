//! Diagrams of correspondences: assignments of algebras to shape objects,
//! correspondences to arrows and multiplication isomorphisms to composable
//! pairs, with coherence validation.
//!
//! Identity arrows always carry the literal identity correspondence, and
//! multiplication isomorphisms with an identity factor are the canonical
//! unitors; neither is stored.

use crate::algebra::MultiMatrixAlgebra;
use crate::corr::{
    associator, left_unit, map_first_factor, map_second_factor, right_unit, tensor,
    validate_correspondence, CorrIso, Correspondence, TensorProduct,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::report::ValidationReport;
use crate::shapes::{ArrowId, ExpandedShape, Shape};
use crate::{C64, CMat};
use std::collections::BTreeMap;

/// A diagram `F: shape -> Corr`.
#[derive(Debug, Clone)]
pub struct CorrFunctor {
    pub shape: Shape,
    pub expanded: ExpandedShape,
    pub algebras: Vec<MultiMatrixAlgebra>,
    corrs: BTreeMap<ArrowId, Correspondence>,
    /// `(g, h) -> mu_{g,h}: can(E_h (x) E_g) -> E_{g o h}` for composable
    /// pairs of non-identity arrows.
    mults: BTreeMap<(ArrowId, ArrowId), CorrIso>,
    /// Isomorphisms `v_a: E_g -> E_h` per declared 2-arrow `a: g => h`.
    twoarrow_isos: Vec<CorrIso>,
    pub generator_mode: bool,
}

impl CorrFunctor {
    /// Assemble a diagram from raw parts.  Multiplication maps are given as
    /// matrices from the canonical tensor coordinates of `E_h (x) E_g` to
    /// the coordinates of `E_{g o h}`.
    pub fn from_parts(
        shape: Shape,
        depth: usize,
        algebras: Vec<MultiMatrixAlgebra>,
        corrs: Vec<(ArrowId, Correspondence)>,
        mult_mats: Vec<((ArrowId, ArrowId), CMat)>,
        twoarrow_mats: Vec<CMat>,
    ) -> Result<Self> {
        let expanded = shape.expand(depth)?;
        if algebras.len() != expanded.objects.len() {
            return Err(Error::ShapeError(format!(
                "{} algebras for {} objects",
                algebras.len(),
                expanded.objects.len()
            )));
        }
        let mut corr_map = BTreeMap::new();
        for (g, c) in corrs {
            let arrow = &expanded.arrows[g];
            if arrow.is_identity {
                return Err(Error::ShapeError(format!(
                    "identity arrow {} carries the identity correspondence implicitly",
                    arrow.name
                )));
            }
            if c.source().blocks() != algebras[arrow.src].blocks()
                || c.target().blocks() != algebras[arrow.dst].blocks()
            {
                return Err(Error::ShapeError(format!(
                    "correspondence on {} does not match its endpoint algebras",
                    arrow.name
                )));
            }
            corr_map.insert(g, c);
        }
        let mut functor = CorrFunctor {
            shape,
            expanded,
            algebras,
            corrs: corr_map,
            mults: BTreeMap::new(),
            twoarrow_isos: Vec::new(),
            generator_mode: false,
        };
        for ((g, h), m) in mult_mats {
            let gh = functor.expanded.compose(g, h).ok_or_else(|| {
                Error::ShapeError(format!(
                    "multiplication given for non-composable pair ({}, {})",
                    functor.expanded.arrow_label(g),
                    functor.expanded.arrow_label(h)
                ))
            })?;
            let src = functor.pair_tensor(g, h)?;
            let dst = functor.corr(gh);
            functor.mults.insert((g, h), CorrIso::new(src.corr, dst, m));
        }
        for (idx, m) in twoarrow_mats.into_iter().enumerate() {
            let ta = &functor.expanded.twoarrows[idx];
            let src = functor.corr(ta.src);
            let dst = functor.corr(ta.dst);
            functor.twoarrow_isos.push(CorrIso::new(src, dst, m));
        }
        Ok(functor)
    }

    pub fn algebra(&self, object: usize) -> &MultiMatrixAlgebra {
        &self.algebras[object]
    }

    /// The correspondence on an arrow; identity arrows yield the identity
    /// correspondence of their object's algebra.
    pub fn corr(&self, g: ArrowId) -> Correspondence {
        let arrow = &self.expanded.arrows[g];
        if arrow.is_identity {
            Correspondence::identity(&self.algebras[arrow.src])
        } else {
            self.corrs
                .get(&g)
                .cloned()
                .unwrap_or_else(|| panic!("no correspondence stored for arrow {}", arrow.name))
        }
    }

    pub fn has_corr(&self, g: ArrowId) -> bool {
        self.expanded.arrows[g].is_identity || self.corrs.contains_key(&g)
    }

    /// The canonical tensor product `can(E_h (x) E_g)` for a composable pair.
    pub fn pair_tensor(&self, g: ArrowId, h: ArrowId) -> Result<TensorProduct> {
        tensor(&self.corr(h), &self.corr(g))
    }

    /// Multiplication isomorphism `mu_{g,h}`; pairs with an identity factor
    /// are the canonical unitors.
    pub fn mult(&self, g: ArrowId, h: ArrowId) -> Result<CorrIso> {
        if self.expanded.arrows[h].is_identity {
            return left_unit(&self.corr(g));
        }
        if self.expanded.arrows[g].is_identity {
            return right_unit(&self.corr(h));
        }
        self.mults.get(&(g, h)).cloned().ok_or_else(|| {
            Error::InvalidDiagram(format!(
                "missing multiplication map for pair ({}, {})",
                self.expanded.arrow_label(g),
                self.expanded.arrow_label(h)
            ))
        })
    }

    pub fn has_mult(&self, g: ArrowId, h: ArrowId) -> bool {
        self.expanded.arrows[g].is_identity
            || self.expanded.arrows[h].is_identity
            || self.mults.contains_key(&(g, h))
    }

    pub fn twoarrow_iso(&self, index: usize) -> &CorrIso {
        &self.twoarrow_isos[index]
    }

    pub fn num_twoarrows(&self) -> usize {
        self.twoarrow_isos.len()
    }

    /// Clone with one multiplication map scaled by a phase; used to probe
    /// the coherence validator.
    pub fn with_scaled_mult(&self, g: ArrowId, h: ArrowId, z: C64) -> CorrFunctor {
        let mut out = self.clone();
        if let Some(iso) = out.mults.get_mut(&(g, h)) {
            iso.matrix = iso.matrix.map(|x| x * z);
        }
        out
    }

    /// Structural equality within tolerance: same shape, algebras, module
    /// multiplicities, left actions and multiplication matrices.
    pub fn approx_eq(&self, other: &CorrFunctor, tol: f64) -> bool {
        if self.expanded != other.expanded {
            return false;
        }
        if self
            .algebras
            .iter()
            .zip(&other.algebras)
            .any(|(a, b)| a.blocks() != b.blocks())
        {
            return false;
        }
        for g in self.expanded.non_identity_arrows() {
            if !self.has_corr(g) || !other.has_corr(g) {
                return false;
            }
            let (c1, c2) = (self.corr(g), other.corr(g));
            if c1.module().mults() != c2.module().mults() {
                return false;
            }
            for i in 0..c1.source().dim() {
                if c1.left_op(i).sub(c2.left_op(i)).norm() > tol {
                    return false;
                }
            }
        }
        for (key, iso) in &self.mults {
            match other.mults.get(key) {
                Some(iso2) => {
                    if linalg::op_norm(&(&iso.matrix - &iso2.matrix)) > tol {
                        return false;
                    }
                }
                None => return false,
            }
        }
        true
    }

    fn depth_hint(&self) -> usize {
        match &self.shape {
            Shape::EndoN { depth } => *depth,
            Shape::FreeMonoid { depth, .. } => *depth,
            _ => crate::DEFAULT_DEPTH,
        }
    }
}

/// All triples of non-identity arrows whose coherence square is fully
/// defined in the (possibly truncated) shape.
pub fn coherence_triples(shape: &ExpandedShape) -> Vec<(ArrowId, ArrowId, ArrowId)> {
    let mut out = Vec::new();
    for g01 in shape.non_identity_arrows() {
        for g12 in shape.non_identity_arrows() {
            if shape.arrows[g01].dst != shape.arrows[g12].src {
                continue;
            }
            let Some(g02) = shape.compose(g12, g01) else {
                continue;
            };
            for g23 in shape.non_identity_arrows() {
                if shape.arrows[g12].dst != shape.arrows[g23].src {
                    continue;
                }
                let (Some(g13), Some(g03)) = (shape.compose(g23, g12), shape.compose(g23, g02))
                else {
                    continue;
                };
                if shape.compose(g13, g01) != Some(g03) {
                    continue;
                }
                out.push((g01, g12, g23));
            }
        }
    }
    out
}

/// Evaluate both routes of the coherence square for one triple and return
/// the defect.
fn coherence_defect(f: &CorrFunctor, g01: ArrowId, g12: ArrowId, g23: ArrowId) -> Result<f64> {
    let shape = &f.expanded;
    let g02 = shape.compose(g12, g01).unwrap();
    let g13 = shape.compose(g23, g12).unwrap();
    let (e01, e12, e23) = (f.corr(g01), f.corr(g12), f.corr(g23));
    let t01_12 = tensor(&e01, &e12)?;
    let t_top = tensor(&t01_12.corr, &e23)?;

    // Top route: (mu_{g12,g01} (x) id) then mu_{g23,g02}.
    let mu_a = f.mult(g12, g01)?;
    let t02_23 = tensor(&f.corr(g02), &e23)?;
    let step1 = map_first_factor(&t_top, &t02_23, &mu_a.matrix, e23.dim());
    let mu_b = f.mult(g23, g02)?;
    let top = &mu_b.matrix * step1;

    // Bottom route: associator, then id (x) mu_{g23,g12}, then mu_{g13,g01}.
    let assoc = associator(&e01, &e12, &e23)?;
    let t12_23 = tensor(&e12, &e23)?;
    let t01_1223 = tensor(&e01, &t12_23.corr)?;
    let mu_c = f.mult(g23, g12)?;
    let t01_13 = tensor(&e01, &f.corr(g13))?;
    let step2 = map_second_factor(&t01_1223, &t01_13, &mu_c.matrix, e01.dim());
    let mu_d = f.mult(g13, g01)?;
    let bottom = &mu_d.matrix * step2 * &assoc.matrix;

    Ok(linalg::op_norm(&(top - bottom)))
}

/// Validate a diagram: correspondence axioms per arrow, unitarity and
/// intertwining of every multiplication map, coherence on all defined
/// triples (triples containing an identity arrow commute automatically and
/// are skipped), and 2-arrow compatibility for 2-category shapes.
pub fn validate_functor(f: &CorrFunctor, tol: f64) -> Result<ValidationReport> {
    let mut report = ValidationReport::new("diagram", tol);
    let shape_report = crate::shapes::validate_shape(&f.shape, f.depth_hint())?;
    let ok = shape_report.passed();
    report.require(
        "shape valid",
        ok,
        shape_report.first_failure().map(|c| c.name.clone()),
    );
    if !ok {
        return Ok(report);
    }
    for g in f.expanded.non_identity_arrows() {
        if !f.has_corr(g) {
            report.require(
                "correspondence present",
                false,
                Some(f.expanded.arrow_label(g).to_string()),
            );
            continue;
        }
        let c = f.corr(g);
        let sub = validate_correspondence(&c, tol);
        report.check_witness(
            format!("correspondence on {}", f.expanded.arrow_label(g)),
            sub.max_defect(),
            sub.first_failure()
                .map(|x| x.name.clone())
                .unwrap_or_else(|| "ok".into()),
        );
    }
    for (g, h) in f.expanded.composable_pairs() {
        if !f.has_mult(g, h) {
            report.require(
                "multiplication present",
                false,
                Some(format!(
                    "({}, {})",
                    f.expanded.arrow_label(g),
                    f.expanded.arrow_label(h)
                )),
            );
            continue;
        }
        let iso = f.mult(g, h)?;
        let sub = iso.verify(tol);
        report.check_witness(
            format!(
                "mu({}, {}) isomorphism",
                f.expanded.arrow_label(g),
                f.expanded.arrow_label(h)
            ),
            sub.max_defect(),
            sub.first_failure()
                .map(|x| x.name.clone())
                .unwrap_or_else(|| "ok".into()),
        );
    }
    for (g01, g12, g23) in coherence_triples(&f.expanded) {
        let defect = coherence_defect(f, g01, g12, g23)?;
        let witness = format!(
            "({}, {}, {})",
            f.expanded.arrow_label(g01),
            f.expanded.arrow_label(g12),
            f.expanded.arrow_label(g23)
        );
        report.check_witness(format!("coherence {witness}"), defect, witness);
    }
    for (idx, iso) in f.twoarrow_isos.iter().enumerate() {
        let sub = iso.verify(tol);
        report.check_witness(
            format!("v({}) isomorphism", f.expanded.twoarrows[idx].name),
            sub.max_defect(),
            sub.first_failure()
                .map(|x| x.name.clone())
                .unwrap_or_else(|| "ok".into()),
        );
    }
    if let Shape::TwoCategory(tc) = &f.shape {
        for (&(b, a), &c) in &tc.vcompose {
            let composed = &f.twoarrow_isos[b].matrix * &f.twoarrow_isos[a].matrix;
            let defect = linalg::op_norm(&(composed - &f.twoarrow_isos[c].matrix));
            report.check_witness(
                format!(
                    "vertical compatibility {} . {} = {}",
                    tc.twoarrows[b].name, tc.twoarrows[a].name, tc.twoarrows[c].name
                ),
                defect,
                "vertical composition".into(),
            );
        }
    }
    Ok(report)
}

/// Optional naturality check of the multiplication maps against 2-arrow
/// data: for declared 2-arrows `a: g => g'`, `b: h => h'` with `g, h`
/// composable and a declared 2-arrow `c: g o h => g' o h'`, the square
/// `mu_{g',h'} (v_b (x) v_a) = v_c mu_{g,h}` must commute.  Squares whose
/// composite 2-arrow is not declared are skipped.
pub fn horizontal_naturality_report(f: &CorrFunctor, tol: f64) -> Result<ValidationReport> {
    let mut report = ValidationReport::new("horizontal naturality", tol);
    let tas = f.expanded.twoarrows.clone();
    for (ia, ta) in tas.iter().enumerate() {
        for (ib, tb) in tas.iter().enumerate() {
            let (g, g2) = (ta.src, ta.dst);
            let (h, h2) = (tb.src, tb.dst);
            if f.expanded.arrows[h].dst != f.expanded.arrows[g].src {
                continue;
            }
            let (Some(gh), Some(g2h2)) = (f.expanded.compose(g, h), f.expanded.compose(g2, h2))
            else {
                continue;
            };
            let Some(ic) = tas.iter().position(|t| t.src == gh && t.dst == g2h2) else {
                continue;
            };
            let t_src = f.pair_tensor(g, h)?;
            let t_mid = f.pair_tensor(g, h2)?;
            let t_dst = f.pair_tensor(g2, h2)?;
            let vb_first = map_first_factor(
                &t_src,
                &t_mid,
                &f.twoarrow_isos[ib].matrix,
                f.corr(g).dim(),
            );
            let va_second = map_second_factor(
                &t_mid,
                &t_dst,
                &f.twoarrow_isos[ia].matrix,
                f.corr(h2).dim(),
            );
            let lhs = &f.mult(g2, h2)?.matrix * va_second * vb_first;
            let rhs = &f.twoarrow_isos[ic].matrix * &f.mult(g, h)?.matrix;
            report.check_witness(
                format!("naturality ({}, {}, {})", ta.name, tb.name, tas[ic].name),
                linalg::op_norm(&(lhs - rhs)),
                "horizontal".into(),
            );
        }
    }
    Ok(report)
}

/// Generating data for preset shapes.
pub enum GeneratorData {
    /// One endomorphism correspondence `E: A -> A`.
    Endo {
        algebra: MultiMatrixAlgebra,
        corr: Correspondence,
    },
    /// `k` correspondences `A -> A`, one per letter.
    FreeMonoid {
        algebra: MultiMatrixAlgebra,
        corrs: Vec<Correspondence>,
    },
    /// Algebras `A_0..A_N` and step correspondences `E_n: A_n -> A_{n+1}`.
    Chain {
        algebras: Vec<MultiMatrixAlgebra>,
        corrs: Vec<Correspondence>,
    },
}

fn power(
    cache: &mut BTreeMap<Vec<usize>, Correspondence>,
    gens: &[Correspondence],
    word: &[usize],
) -> Result<Correspondence> {
    if let Some(c) = cache.get(word) {
        return Ok(c.clone());
    }
    let c = if word.len() == 1 {
        gens[word[0]].clone()
    } else {
        let prefix = power(cache, gens, &word[..word.len() - 1])?;
        tensor(&prefix, &gens[word[word.len() - 1]])?.corr
    };
    cache.insert(word.to_vec(), c.clone());
    Ok(c)
}

/// `iota(wh, wg): can(T_wh (x) T_wg) -> T_{wh ++ wg}` by recursion on the
/// right factor, peeling one generator at a time through associators.
fn iota(
    cache: &mut BTreeMap<Vec<usize>, Correspondence>,
    gens: &[Correspondence],
    wh: &[usize],
    wg: &[usize],
) -> Result<CMat> {
    let t_h = power(cache, gens, wh)?;
    if wg.len() == 1 {
        // T_{wh ++ wg} is literally can(T_wh (x) E_last).
        let t = tensor(&t_h, &gens[wg[0]])?;
        return Ok(linalg::eye(t.corr.dim()));
    }
    let (prefix, last) = (&wg[..wg.len() - 1], wg[wg.len() - 1]);
    let t_gprefix = power(cache, gens, prefix)?;
    let e_last = gens[last].clone();
    // can(T_h (x) can(T_g' (x) E)) --assoc*--> can(can(T_h (x) T_g') (x) E)
    let assoc = associator(&t_h, &t_gprefix, &e_last)?;
    let inner = iota(cache, gens, wh, prefix)?;
    let mut whg = wh.to_vec();
    whg.extend_from_slice(prefix);
    let t_hg = power(cache, gens, &whg)?;
    let src = tensor(&tensor(&t_h, &t_gprefix)?.corr, &e_last)?;
    let dst = tensor(&t_hg, &e_last)?;
    let lifted = map_first_factor(&src, &dst, &inner, e_last.dim());
    Ok(lifted * assoc.matrix.adjoint())
}

/// Extend generating data to a full diagram on a preset shape: arrows carry
/// iterated tensor powers and the multiplication maps are associator
/// composites, so the result passes validation by construction.
pub fn extend_from_generators(
    shape: &Shape,
    depth: usize,
    gen: GeneratorData,
) -> Result<CorrFunctor> {
    let expanded = shape.expand(depth)?;
    let (algebras, gen_corrs, words): (
        Vec<MultiMatrixAlgebra>,
        Vec<Correspondence>,
        BTreeMap<ArrowId, Vec<usize>>,
    ) = match (shape, gen) {
        (Shape::EndoN { .. }, GeneratorData::Endo { algebra, corr }) => {
            if corr.source().blocks() != algebra.blocks()
                || corr.target().blocks() != algebra.blocks()
            {
                return Err(Error::CompositionError(
                    "endomorphism correspondence endpoints must equal the algebra".into(),
                ));
            }
            let mut words = BTreeMap::new();
            for g in expanded.non_identity_arrows() {
                let n: usize = expanded.arrows[g].name.parse().unwrap();
                words.insert(g, vec![0usize; n]);
            }
            (vec![algebra], vec![corr], words)
        }
        (Shape::FreeMonoid { letters, .. }, GeneratorData::FreeMonoid { algebra, corrs }) => {
            if corrs.len() != *letters {
                return Err(Error::CompositionError(format!(
                    "{} generator correspondences for {} letters",
                    corrs.len(),
                    letters
                )));
            }
            for c in &corrs {
                if c.source().blocks() != algebra.blocks()
                    || c.target().blocks() != algebra.blocks()
                {
                    return Err(Error::CompositionError(
                        "free monoid correspondences must be endomorphisms of the algebra".into(),
                    ));
                }
            }
            let mut words = BTreeMap::new();
            for g in expanded.non_identity_arrows() {
                let w: Vec<usize> = expanded.arrows[g]
                    .name
                    .split('.')
                    .map(|part| part[1..].parse::<usize>().unwrap() - 1)
                    .collect();
                words.insert(g, w);
            }
            (vec![algebra], corrs, words)
        }
        (Shape::ChainPrefix { len, .. }, GeneratorData::Chain { algebras, corrs }) => {
            if algebras.len() != len + 1 || corrs.len() != *len {
                return Err(Error::CompositionError(format!(
                    "chain of length {len} needs {} algebras and {len} steps",
                    len + 1
                )));
            }
            for (n, c) in corrs.iter().enumerate() {
                if c.source().blocks() != algebras[n].blocks()
                    || c.target().blocks() != algebras[n + 1].blocks()
                {
                    return Err(Error::CompositionError(format!(
                        "chain step {n} does not run A_{n} -> A_{}",
                        n + 1
                    )));
                }
            }
            let mut words = BTreeMap::new();
            for g in expanded.non_identity_arrows() {
                let name = &expanded.arrows[g].name;
                let (m, n) = name.split_once("->").unwrap();
                let (m, n): (usize, usize) = (m.parse().unwrap(), n.parse().unwrap());
                words.insert(g, (m..n).collect());
            }
            (algebras, corrs, words)
        }
        _ => {
            return Err(Error::ShapeError(
                "generator extension applies to endo, free-monoid and chain shapes".into(),
            ))
        }
    };

    let mut cache: BTreeMap<Vec<usize>, Correspondence> = BTreeMap::new();
    let mut corrs_by_arrow = Vec::new();
    for (&g, w) in &words {
        corrs_by_arrow.push((g, power(&mut cache, &gen_corrs, w)?));
    }
    let mut mult_mats = Vec::new();
    for (&g, wg) in &words {
        for (&h, wh) in &words {
            if expanded.arrows[h].dst != expanded.arrows[g].src
                || expanded.compose(g, h).is_none()
            {
                continue;
            }
            let m = iota(&mut cache, &gen_corrs, wh, wg)?;
            mult_mats.push(((g, h), m));
        }
    }

    let all_algebras = if algebras.len() == expanded.objects.len() {
        algebras
    } else {
        vec![algebras[0].clone(); expanded.objects.len()]
    };
    let mut f = CorrFunctor::from_parts(
        shape.clone(),
        depth,
        all_algebras,
        corrs_by_arrow,
        mult_mats,
        Vec::new(),
    )?;
    f.generator_mode = true;
    Ok(f)
}

/// The constant diagram on an algebra: every object maps to `D`, every
/// arrow to the identity correspondence, every pair to the canonical
/// multiplication `can(D (x) D) -> D`.
pub fn constant_functor(
    shape: &Shape,
    depth: usize,
    d: &MultiMatrixAlgebra,
) -> Result<CorrFunctor> {
    let expanded = shape.expand(depth)?;
    let id_d = Correspondence::identity(d);
    let corrs: Vec<(ArrowId, Correspondence)> = expanded
        .non_identity_arrows()
        .map(|g| (g, id_d.clone()))
        .collect();
    let canonical = left_unit(&id_d)?;
    let mut mult_mats = Vec::new();
    for g in expanded.non_identity_arrows() {
        for h in expanded.non_identity_arrows() {
            if expanded.arrows[h].dst == expanded.arrows[g].src && expanded.compose(g, h).is_some()
            {
                mult_mats.push(((g, h), canonical.matrix.clone()));
            }
        }
    }
    let twoarrow_mats = expanded
        .twoarrows
        .iter()
        .map(|_| linalg::eye(id_d.dim()))
        .collect();
    let algebras = vec![d.clone(); expanded.objects.len()];
    CorrFunctor::from_parts(
        shape.clone(),
        depth,
        algebras,
        corrs,
        mult_mats,
        twoarrow_mats,
    )
}

/// True when the diagram is a constant diagram on its first algebra.
pub fn is_constant_functor(f: &CorrFunctor, tol: f64) -> bool {
    let Some(d) = f.algebras.first() else {
        return false;
    };
    if f.algebras.iter().any(|a| a.blocks() != d.blocks()) {
        return false;
    }
    let id_d = Correspondence::identity(d);
    for g in f.expanded.non_identity_arrows() {
        if !f.has_corr(g) {
            return false;
        }
        let c = f.corr(g);
        if c.module().mults() != id_d.module().mults() {
            return false;
        }
        for i in 0..d.dim() {
            if c.left_op(i).sub(id_d.left_op(i)).norm() > tol {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::cyclic_group;

    fn algebra(blocks: &[usize], label: &str) -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::new(blocks.to_vec(), label).unwrap()
    }

    fn std_corr(n: usize) -> Correspondence {
        let c = algebra(&[1], "C");
        let values = vec![crate::corr::ModOp {
            blocks: vec![CMat::identity(n, n)],
        }];
        Correspondence::from_parts(c.clone(), c, vec![n], crate::corr::LeftAction { values })
            .unwrap()
    }

    #[test]
    fn endo_extension_passes_validation() {
        let a = algebra(&[1], "C");
        let f = extend_from_generators(
            &Shape::EndoN { depth: 3 },
            3,
            GeneratorData::Endo {
                algebra: a,
                corr: std_corr(2),
            },
        )
        .unwrap();
        assert!(f.generator_mode);
        // E_n = C^(2^n).
        for g in f.expanded.non_identity_arrows() {
            let n: usize = f.expanded.arrows[g].name.parse().unwrap();
            assert_eq!(f.corr(g).dim(), 1 << n);
        }
        let report = validate_functor(&f, 1e-9).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
        assert!(report.max_defect_matching("coherence") < 1e-10);
    }

    #[test]
    fn perturbed_mult_fails_coherence_at_111() {
        let a = algebra(&[1], "C");
        let f = extend_from_generators(
            &Shape::EndoN { depth: 3 },
            3,
            GeneratorData::Endo {
                algebra: a,
                corr: std_corr(2),
            },
        )
        .unwrap();
        let phase = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        // Scaling mu_{2,1} touches exactly one route of the coherence
        // square, so the triple (1,1,1) fails by |phase - 1|.
        let bad = f.with_scaled_mult(2, 1, phase);
        let report = validate_functor(&bad, 1e-9).unwrap();
        let failing = report.first_failure().expect("must fail");
        assert!(failing.name.contains("coherence (1, 1, 1)"), "{failing:?}");
        let expected = (phase - C64::ONE).norm();
        assert!((failing.defect - expected).abs() < 1e-10);
    }

    #[test]
    fn scaled_mu11_stays_coherent() {
        // A phase on mu_{1,1} hits both routes of the only depth-3 triple
        // and cancels: the twisted diagram is still a valid functor.
        let a = algebra(&[1], "C");
        let f = extend_from_generators(
            &Shape::EndoN { depth: 3 },
            3,
            GeneratorData::Endo {
                algebra: a,
                corr: std_corr(2),
            },
        )
        .unwrap();
        let phase = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let twisted = f.with_scaled_mult(1, 1, phase);
        let report = validate_functor(&twisted, 1e-9).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
    }

    #[test]
    fn discrete_shape_passes_vacuously() {
        let shape = Shape::Discrete(3);
        let algebras = vec![
            algebra(&[2], "A0"),
            algebra(&[1, 1], "A1"),
            algebra(&[3], "A2"),
        ];
        let f = CorrFunctor::from_parts(shape, 3, algebras, vec![], vec![], vec![]).unwrap();
        let report = validate_functor(&f, 1e-9).unwrap();
        assert!(report.passed());
        assert!(coherence_triples(&f.expanded).is_empty());
    }

    #[test]
    fn chain_extension_from_homs() {
        use crate::algebra::StarHom;
        // C -> M2 unital, then identity M2 -> M2.
        let c = algebra(&[1], "C");
        let m2 = algebra(&[2], "M2");
        let h0 = StarHom::from_fn(&c, &m2, |_| m2.identity()).unwrap();
        let h1 = StarHom::identity(&m2);
        let e0 = crate::corr::from_star_hom(&h0).unwrap();
        let e1 = crate::corr::from_star_hom(&h1).unwrap();
        let f = extend_from_generators(
            &Shape::ChainPrefix {
                len: 2,
                stabilized_from: Some(1),
            },
            3,
            GeneratorData::Chain {
                algebras: vec![c, m2.clone(), m2],
                corrs: vec![e0, e1],
            },
        )
        .unwrap();
        let report = validate_functor(&f, 1e-9).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
    }

    #[test]
    fn free_monoid_extension_dims() {
        let a = algebra(&[1], "C");
        let f = extend_from_generators(
            &Shape::FreeMonoid {
                letters: 2,
                depth: 2,
            },
            2,
            GeneratorData::FreeMonoid {
                algebra: a,
                corrs: vec![std_corr(2), std_corr(3)],
            },
        )
        .unwrap();
        // Words of length 2 have dims {4, 6, 6, 9}.
        let mut dims: Vec<usize> = f
            .expanded
            .non_identity_arrows()
            .filter(|&g| f.expanded.arrows[g].name.matches('.').count() == 1)
            .map(|g| f.corr(g).dim())
            .collect();
        dims.sort_unstable();
        assert_eq!(dims, vec![4, 6, 6, 9]);
        let report = validate_functor(&f, 1e-9).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
    }

    #[test]
    fn constant_functor_over_group_and_pushout() {
        let d = algebra(&[1], "C");
        let f = constant_functor(&Shape::FiniteGroup(cyclic_group(2)), 3, &d).unwrap();
        let report = validate_functor(&f, 1e-9).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
        assert!(is_constant_functor(&f, 1e-10));

        let m2 = algebra(&[2], "M2");
        let fp = constant_functor(&Shape::Pushout, 3, &m2).unwrap();
        let report = validate_functor(&fp, 1e-9).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn truncation_monotone() {
        // Extension passes at every depth; deeper runs cover a superset of
        // triples.
        let a = algebra(&[1], "C");
        for depth in [2usize, 3] {
            let f = extend_from_generators(
                &Shape::EndoN { depth },
                depth,
                GeneratorData::Endo {
                    algebra: a.clone(),
                    corr: std_corr(2),
                },
            )
            .unwrap();
            let report = validate_functor(&f, 1e-9).unwrap();
            assert!(report.passed());
        }
    }
}

#[cfg(test)]
mod two_category_tests {
    use super::*;
    use crate::shapes::{Arrow, CategoryData, TwoArrow, TwoCategoryData};
    use std::collections::BTreeMap;

    fn algebra(blocks: &[usize], label: &str) -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::new(blocks.to_vec(), label).unwrap()
    }

    fn std_corr(n: usize) -> Correspondence {
        let c = algebra(&[1], "C");
        let values = vec![crate::corr::ModOp {
            blocks: vec![CMat::identity(n, n)],
        }];
        Correspondence::from_parts(c.clone(), c, vec![n], crate::corr::LeftAction { values })
            .unwrap()
    }

    /// Three parallel arrows with 2-arrows a: g => h, b: h => k and the
    /// vertical composite c = b . a.
    fn parallel_triple(v_defect: bool) -> CorrFunctor {
        let objects = vec!["x".to_string(), "y".to_string()];
        let mut arrows = vec![
            Arrow { name: "id_x".into(), src: 0, dst: 0, is_identity: true },
            Arrow { name: "id_y".into(), src: 1, dst: 1, is_identity: true },
        ];
        for name in ["g", "h", "k"] {
            arrows.push(Arrow { name: name.into(), src: 0, dst: 1, is_identity: false });
        }
        let cat = CategoryData { objects, arrows, compose: BTreeMap::new() };
        let twoarrows = vec![
            TwoArrow { name: "a".into(), src: 2, dst: 3 },
            TwoArrow { name: "b".into(), src: 3, dst: 4 },
            TwoArrow { name: "c".into(), src: 2, dst: 4 },
        ];
        let mut vcompose = BTreeMap::new();
        vcompose.insert((1usize, 0usize), 2usize); // b . a = c
        let shape = Shape::TwoCategory(TwoCategoryData { category: cat, twoarrows, vcompose });
        let swap = CMat::from_row_slice(
            2,
            2,
            &[C64::ZERO, C64::ONE, C64::ONE, C64::ZERO],
        );
        // v_a = swap, v_c = id; v_b = swap satisfies v_c = v_b v_a, the
        // identity breaks it.
        let v_b = if v_defect { linalg::eye(2) } else { swap.clone() };
        let algebras = vec![algebra(&[1], "C"), algebra(&[1], "C")];
        CorrFunctor::from_parts(
            shape,
            3,
            algebras,
            vec![(2, std_corr(2)), (3, std_corr(2)), (4, std_corr(2))],
            vec![],
            vec![swap.clone(), v_b, linalg::eye(2)],
        )
        .unwrap()
    }

    #[test]
    fn vertical_composition_compatibility() {
        // v_c = v_b v_a: with v_a = swap, v_b = swap, v_c = id this holds.
        let good = parallel_triple(false);
        let report = validate_functor(&good, 1e-9).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
        // Replacing v_b with the identity breaks v_c = v_b v_a.
        let bad = parallel_triple(true);
        let report = validate_functor(&bad, 1e-9).unwrap();
        let failing = report.first_failure().unwrap();
        assert!(failing.name.contains("vertical compatibility"));
    }

    /// Composable arrows with declared composite 2-arrows: the optional
    /// horizontal naturality check has real squares to verify.
    #[test]
    fn horizontal_naturality_check() {
        let objects = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let mut arrows = vec![
            Arrow { name: "id_x".into(), src: 0, dst: 0, is_identity: true },
            Arrow { name: "id_y".into(), src: 1, dst: 1, is_identity: true },
            Arrow { name: "id_z".into(), src: 2, dst: 2, is_identity: true },
        ];
        // h, h': x -> y (indices 3, 4); g, g': y -> z (5, 6);
        // composites k_{gh}, k_{g'h'}: x -> z (7, 8), plus the two mixed
        // composites (9, 10) to keep composition total.
        for (name, src, dst) in [
            ("h", 0, 1),
            ("h'", 0, 1),
            ("g", 1, 2),
            ("g'", 1, 2),
            ("kgh", 0, 2),
            ("kg'h'", 0, 2),
            ("kgh'", 0, 2),
            ("kg'h", 0, 2),
        ] {
            arrows.push(Arrow { name: name.into(), src, dst, is_identity: false });
        }
        let mut compose = BTreeMap::new();
        compose.insert((5usize, 3usize), 7usize); // g o h
        compose.insert((6, 4), 8); // g' o h'
        compose.insert((5, 4), 9); // g o h'
        compose.insert((6, 3), 10); // g' o h
        let cat = CategoryData { objects, arrows, compose };
        let twoarrows = vec![
            TwoArrow { name: "b".into(), src: 3, dst: 4 },  // h => h'
            TwoArrow { name: "a".into(), src: 5, dst: 6 },  // g => g'
            TwoArrow { name: "c".into(), src: 7, dst: 8 },  // gh => g'h'
        ];
        let shape = Shape::TwoCategory(TwoCategoryData {
            category: cat,
            twoarrows,
            vcompose: BTreeMap::new(),
        });
        let c1 = algebra(&[1], "C");
        let algebras = vec![c1.clone(), c1.clone(), c1];
        let one = std_corr(1);
        let corrs: Vec<(usize, Correspondence)> =
            (3..=10).map(|g| (g, one.clone())).collect();
        let mu = crate::corr::left_unit(&one).unwrap().matrix;
        let mut mult_mats = Vec::new();
        for (g, h) in [(5usize, 3usize), (6, 4), (5, 4), (6, 3)] {
            mult_mats.push(((g, h), mu.clone()));
        }
        let visos = vec![linalg::eye(1); 3];
        let f = CorrFunctor::from_parts(shape, 3, algebras, corrs, mult_mats, visos).unwrap();
        assert!(validate_functor(&f, 1e-9).unwrap().passed());
        let report = horizontal_naturality_report(&f, 1e-9).unwrap();
        assert!(!report.checks.is_empty(), "a square must be checked");
        assert!(report.passed(), "{:?}", report.first_failure());
        // A phase on v_c breaks naturality.
        let mut bad_visos = vec![linalg::eye(1); 3];
        bad_visos[2] = CMat::from_element(1, 1, -C64::ONE);
        let bad = CorrFunctor::from_parts(
            f.shape.clone(),
            3,
            f.algebras.clone(),
            (3..=10).map(|g| (g, std_corr(1))).collect(),
            [(5usize, 3usize), (6, 4), (5, 4), (6, 3)]
                .iter()
                .map(|&(g, h)| ((g, h), mu.clone()))
                .collect(),
            bad_visos,
        )
        .unwrap();
        let report = horizontal_naturality_report(&bad, 1e-9).unwrap();
        assert!(!report.passed());
    }
}

impl CorrFunctor {
    /// Serialize the full functor data: algebras, correspondence modules
    /// with their left actions, multiplication matrices and 2-arrow
    /// isomorphisms.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        let corrs: Vec<serde_json::Value> = self
            .expanded
            .non_identity_arrows()
            .filter(|&g| self.has_corr(g))
            .map(|g| {
                let c = self.corr(g);
                json!({
                    "arrow": self.expanded.arrow_label(g),
                    "source": crate::json::algebra_to_json(c.source()),
                    "target": crate::json::algebra_to_json(c.target()),
                    "mults": c.module().mults().to_vec(),
                    "left_action": (0..c.source().dim())
                        .map(|i| crate::json::matrix_to_json(&c.left_full(i)))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        let mults: Vec<serde_json::Value> = self
            .mults
            .iter()
            .map(|((g, h), iso)| {
                json!({
                    "outer": self.expanded.arrow_label(*g),
                    "inner": self.expanded.arrow_label(*h),
                    "matrix": crate::json::matrix_to_json(&iso.matrix),
                })
            })
            .collect();
        let twoarrows: Vec<serde_json::Value> = self
            .twoarrow_isos
            .iter()
            .enumerate()
            .map(|(i, iso)| {
                json!({
                    "name": self.expanded.twoarrows[i].name,
                    "matrix": crate::json::matrix_to_json(&iso.matrix),
                })
            })
            .collect();
        json!({
            "objects": self.expanded.objects,
            "algebras": self
                .algebras
                .iter()
                .map(crate::json::algebra_to_json)
                .collect::<Vec<_>>(),
            "arrows": self
                .expanded
                .arrows
                .iter()
                .map(|a| json!({
                    "name": a.name,
                    "src": a.src,
                    "dst": a.dst,
                    "identity": a.is_identity,
                }))
                .collect::<Vec<_>>(),
            "correspondences": corrs,
            "multiplications": mults,
            "twoarrows": twoarrows,
            "generator_mode": self.generator_mode,
        })
    }
}
