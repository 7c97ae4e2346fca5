//! Verification of concrete matrix representations of emitted presentations
//! and the round trip between cones and representations of the presented
//! colimit.

use crate::algebra::{BasisRef, MultiMatrixAlgebra};
use crate::colimit::{Clause, GenKind, Presentation, Relation, Term};
use crate::corr::{HilbertModule, ModOp};
use crate::error::{Error, Result};
use crate::linalg;
use crate::transform::{Modification, RepresentationData, Transformation};
use crate::{C64, CMat};
use serde_json::{json, Value};
use std::collections::BTreeMap;

/// A concrete assignment of matrices over a Hilbert module to the
/// generators of a presentation.
#[derive(Debug, Clone)]
pub struct RepAssignment {
    pub base: MultiMatrixAlgebra,
    pub module: HilbertModule,
    /// One matrix per presentation generator, acting on module coordinates.
    pub matrices: Vec<CMat>,
    pub tol: f64,
}

impl RepAssignment {
    pub fn to_json(&self) -> Value {
        json!({
            "base": crate::json::algebra_to_json(&self.base),
            "mults": self.module.mults().to_vec(),
            "tol": crate::json::jnum(self.tol),
            "matrices": self
                .matrices
                .iter()
                .enumerate()
                .map(|(i, m)| (i.to_string(), crate::json::matrix_to_json(m)))
                .collect::<BTreeMap<String, Value>>(),
        })
    }

    pub fn from_json(v: &Value, num_generators: usize) -> Result<RepAssignment> {
        let base = crate::json::algebra_from_json(
            v.get("base")
                .ok_or_else(|| Error::InvalidInput("assignment needs a base algebra".into()))?,
        )?;
        let mults: Vec<usize> = v
            .get("mults")
            .and_then(|m| m.as_array())
            .ok_or_else(|| Error::InvalidInput("assignment needs module mults".into()))?
            .iter()
            .map(|x| x.as_u64().unwrap_or(0) as usize)
            .collect();
        let module = HilbertModule::new(base.clone(), mults)?;
        let tol = v.get("tol").and_then(|t| t.as_f64()).unwrap_or(crate::DEFAULT_TOL);
        let mats_json = v
            .get("matrices")
            .and_then(|m| m.as_object())
            .ok_or_else(|| Error::InvalidInput("assignment needs matrices".into()))?;
        let mut matrices = Vec::with_capacity(num_generators);
        for i in 0..num_generators {
            let m = mats_json
                .get(&i.to_string())
                .ok_or_else(|| Error::InvalidInput(format!("missing matrix for generator {i}")))?;
            matrices.push(crate::json::matrix_from_json(m)?);
        }
        Ok(RepAssignment {
            base,
            module,
            matrices,
            tol,
        })
    }
}

/// Defects of a representation against a presentation, per clause.
#[derive(Debug, Clone)]
pub struct DefectReport {
    pub per_clause: BTreeMap<&'static str, f64>,
    /// Worst relation per clause, with its label.
    pub worst: BTreeMap<&'static str, String>,
    pub star_hom_defect: f64,
    pub adjointable_defect: f64,
    pub algebra_part_nondegenerate: bool,
    pub tol: f64,
}

impl DefectReport {
    pub fn max_defect(&self) -> f64 {
        self.per_clause
            .values()
            .fold(self.star_hom_defect.max(self.adjointable_defect), |m, &d| {
                m.max(d)
            })
    }

    pub fn clause_defect(&self, clause: Clause) -> f64 {
        self.per_clause.get(clause.as_str()).copied().unwrap_or(0.0)
    }

    pub fn passed(&self) -> bool {
        self.max_defect() <= self.tol
    }

    pub fn to_json(&self) -> Value {
        json!({
            "passed": self.passed(),
            "tol": crate::json::jnum(self.tol),
            "max_defect": crate::json::jnum(self.max_defect()),
            "per_clause": self
                .per_clause
                .iter()
                .map(|(k, v)| (k.to_string(), crate::json::jnum(*v)))
                .collect::<BTreeMap<String, Value>>(),
            "worst_relation": self
                .worst
                .iter()
                .map(|(k, v)| (k.to_string(), json!(v)))
                .collect::<BTreeMap<String, Value>>(),
            "star_hom_defect": crate::json::jnum(self.star_hom_defect),
            "adjointable_defect": crate::json::jnum(self.adjointable_defect),
            "algebra_part_nondegenerate": self.algebra_part_nondegenerate,
        })
    }
}

fn eval_term(t: &Term, r: &RepAssignment) -> CMat {
    let d = r.module.dim();
    let mut acc = linalg::eye(d);
    for atom in &t.monomial {
        let m = &r.matrices[atom.gen];
        let m = if atom.star { m.adjoint() } else { m.clone() };
        acc *= m;
    }
    acc.map(|x| x * t.coeff)
}

fn eval_side(terms: &[Term], r: &RepAssignment) -> CMat {
    let d = r.module.dim();
    let mut acc = CMat::zeros(d, d);
    for t in terms {
        acc += eval_term(t, r);
    }
    acc
}

/// Defect of one relation under an assignment.
pub fn relation_defect(rel: &Relation, r: &RepAssignment) -> f64 {
    linalg::op_norm(&(eval_side(&rel.lhs, r) - eval_side(&rel.rhs, r)))
}

/// Evaluate every relation of a presentation under an assignment; report
/// the per-clause and maximal defects, whether the algebra-part assignment
/// is a *-homomorphism on every object, and whether the algebra part acts
/// nondegenerately.
pub fn check_representation(p: &Presentation, r: &RepAssignment) -> Result<DefectReport> {
    let d = r.module.dim();
    if r.matrices.len() != p.generators.len() {
        return Err(Error::ShapeError(format!(
            "{} matrices assigned to {} generators",
            r.matrices.len(),
            p.generators.len()
        )));
    }
    for m in &r.matrices {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::ShapeError(format!(
                "assigned matrix is {}x{}, expected {d}x{d}",
                m.nrows(),
                m.ncols()
            )));
        }
    }
    // Module-map check: every assigned matrix commutes with the right
    // action of the base.
    let mut adjointable = 0.0f64;
    for m in &r.matrices {
        let (_, defect) = ModOp::from_full(m, &r.module, &r.module);
        adjointable = adjointable.max(defect);
    }
    // Algebra-part *-homomorphism check per object.
    let mut star_defect = 0.0f64;
    let mut alg_by_object: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (gi, g) in p.generators.iter().enumerate() {
        if let GenKind::Alg { object, basis } = g.kind {
            alg_by_object.entry(object).or_default().insert(basis, gi);
        }
    }
    for (&object, basis_map) in &alg_by_object {
        let Some((_, a)) = p.objects.get(object) else {
            continue;
        };
        for (&i, &gi) in basis_map {
            let ri = a.basis_ref(i);
            let star_i = a.basis_index(BasisRef {
                block: ri.block,
                row: ri.col,
                col: ri.row,
            });
            if let Some(&gs) = basis_map.get(&star_i) {
                star_defect = star_defect
                    .max(linalg::op_norm(&(&r.matrices[gs] - r.matrices[gi].adjoint())));
            }
            for (&j, &gj) in basis_map {
                let rj = a.basis_ref(j);
                let prod = &r.matrices[gi] * &r.matrices[gj];
                let expected = if ri.block == rj.block && ri.col == rj.row {
                    let k = a.basis_index(BasisRef {
                        block: ri.block,
                        row: ri.row,
                        col: rj.col,
                    });
                    r.matrices[basis_map[&k]].clone()
                } else {
                    CMat::zeros(d, d)
                };
                star_defect = star_defect.max(linalg::op_norm(&(prod - expected)));
            }
        }
    }
    // Relations per clause.
    let mut per_clause: BTreeMap<&'static str, f64> = BTreeMap::new();
    let mut worst: BTreeMap<&'static str, String> = BTreeMap::new();
    for rel in &p.relations {
        let defect = relation_defect(rel, r);
        let entry = per_clause.entry(rel.clause.as_str()).or_insert(0.0);
        if defect > *entry {
            *entry = defect;
            worst.insert(rel.clause.as_str(), rel.label.clone());
        } else {
            worst.entry(rel.clause.as_str()).or_insert_with(|| rel.label.clone());
        }
    }
    // Nondegeneracy of the (+) A_x part.
    let mut unit_sum = CMat::zeros(d, d);
    for (&object, basis_map) in &alg_by_object {
        if let Some((_, a)) = p.objects.get(object) {
            for b in 0..a.num_blocks() {
                for k in 0..a.blocks()[b] {
                    let idx = a.basis_index(BasisRef {
                        block: b,
                        row: k,
                        col: k,
                    });
                    unit_sum += &r.matrices[basis_map[&idx]];
                }
            }
        }
    }
    let nondeg = linalg::op_norm(&(unit_sum - linalg::eye(d))) <= r.tol.max(1e-8);
    Ok(DefectReport {
        per_clause,
        worst,
        star_hom_defect: star_defect,
        adjointable_defect: adjointable,
        algebra_part_nondegenerate: nondeg,
        tol: r.tol,
    })
}

/// Assemble the assignment of an emitted presentation from representation
/// data: the module is the direct sum of the cone modules, algebra
/// generators act on their own summand and arrow generators map between
/// summands.
pub fn assignment_from_representation(
    p: &Presentation,
    rep: &RepresentationData,
) -> Result<RepAssignment> {
    let d_alg = &rep.base;
    let nb = d_alg.num_blocks();
    let mults: Vec<usize> = (0..nb)
        .map(|j| rep.gammas.iter().map(|g| g.mults()[j]).sum())
        .collect();
    let module = HilbertModule::new(d_alg.clone(), mults)?;
    // Embedding of each gamma_x into the direct sum.
    let mut embeddings = Vec::new();
    for (x, gamma) in rep.gammas.iter().enumerate() {
        let blocks = (0..nb)
            .map(|j| {
                let off: usize = rep.gammas[..x].iter().map(|g| g.mults()[j]).sum();
                let mut b = CMat::zeros(module.mults()[j], gamma.mults()[j]);
                for r in 0..gamma.mults()[j] {
                    b[(off + r, r)] = C64::ONE;
                }
                b
            })
            .collect();
        embeddings.push(ModOp { blocks });
    }
    let emb_full: Vec<CMat> = embeddings
        .iter()
        .enumerate()
        .map(|(x, e)| e.full_matrix(&module, &rep.gammas[x]))
        .collect();
    let mut matrices = Vec::with_capacity(p.generators.len());
    for g in &p.generators {
        let m = match &g.kind {
            GenKind::Alg { object, basis } => {
                &emb_full[*object] * &rep.phis[*object][*basis] * emb_full[*object].adjoint()
            }
            GenKind::Mod { arrow, basis } => {
                let diagram = rep
                    .diagram
                    .expanded
                    .arrows
                    .get(*arrow)
                    .ok_or_else(|| Error::ShapeError("arrow out of range".into()))?;
                let (x, y) = (diagram.src, diagram.dst);
                &emb_full[x] * &rep.esses[arrow][*basis] * emb_full[y].adjoint()
            }
            GenKind::Corner { .. } => {
                return Err(Error::InvalidAssignment(
                    "closed-form generators have no canonical representation data".into(),
                ))
            }
        };
        matrices.push(m);
    }
    Ok(RepAssignment {
        base: d_alg.clone(),
        module,
        matrices,
        tol: crate::DEFAULT_TOL,
    })
}

/// Split a representation of the presentation by the images of the unit
/// projections `p_x` and restrict the arrow generators, recovering
/// representation data for the diagram.
pub fn induced_cone_from_representation(
    p: &Presentation,
    r: &RepAssignment,
) -> Result<RepresentationData> {
    let diagram = p
        .diagram
        .clone()
        .ok_or_else(|| Error::InvalidInput("presentation carries no diagram".into()))?;
    let report = check_representation(p, r)?;
    if !report.passed() {
        return Err(Error::InvalidAssignment(format!(
            "assignment fails the presentation with defect {:.3e}",
            report.max_defect()
        )));
    }
    let mut alg_by_object: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut mod_by_arrow: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (gi, g) in p.generators.iter().enumerate() {
        match g.kind {
            GenKind::Alg { object, basis } => {
                alg_by_object.entry(object).or_default().insert(basis, gi);
            }
            GenKind::Mod { arrow, basis } => {
                mod_by_arrow.entry(arrow).or_default().insert(basis, gi);
            }
            GenKind::Corner { .. } => {}
        }
    }
    let d = r.module.dim();
    let mut gammas = Vec::new();
    let mut isometries = Vec::new();
    for (x, (_, a)) in p.objects.iter().enumerate() {
        let mut proj = CMat::zeros(d, d);
        if let Some(basis_map) = alg_by_object.get(&x) {
            for b in 0..a.num_blocks() {
                for k in 0..a.blocks()[b] {
                    let idx = a.basis_index(BasisRef {
                        block: b,
                        row: k,
                        col: k,
                    });
                    proj += &r.matrices[basis_map[&idx]];
                }
            }
        }
        let proj_defect = linalg::op_norm(&(&proj * &proj - &proj))
            .max(linalg::op_norm(&(proj.adjoint() - &proj)));
        if proj_defect > r.tol.max(1e-8) {
            return Err(Error::InvalidAssignment(format!(
                "unit sum at object {x} is not a projection (defect {proj_defect:.3e})"
            )));
        }
        let (proj_op, od) = ModOp::from_full(&proj, &r.module, &r.module);
        if od > r.tol.max(1e-8) {
            return Err(Error::InvalidAssignment(
                "unit projection does not commute with the right action".into(),
            ));
        }
        let range_blocks: Vec<CMat> = proj_op
            .blocks
            .iter()
            .map(|b| linalg::orthonormal_range_basis(b, 1e-9))
            .collect();
        let mults: Vec<usize> = range_blocks.iter().map(|b| b.ncols()).collect();
        let gamma = HilbertModule::new(r.base.clone(), mults)?;
        let iso = ModOp {
            blocks: range_blocks,
        }
        .full_matrix(&r.module, &gamma);
        gammas.push(gamma);
        isometries.push(iso);
    }
    let mut phis = Vec::new();
    for (x, (_, a)) in p.objects.iter().enumerate() {
        let mut ops = Vec::new();
        let basis_map = alg_by_object.get(&x);
        for i in 0..a.dim() {
            let m = match basis_map.and_then(|bm| bm.get(&i)) {
                Some(&gi) => isometries[x].adjoint() * &r.matrices[gi] * &isometries[x],
                None => CMat::zeros(gammas[x].dim(), gammas[x].dim()),
            };
            ops.push(m);
        }
        phis.push(ops);
    }
    let mut esses = BTreeMap::new();
    for (&arrow, basis_map) in &mod_by_arrow {
        let a = &diagram.expanded.arrows[arrow];
        let (x, y) = (a.src, a.dst);
        let e = diagram.corr(arrow);
        let mut ops = Vec::new();
        for u in 0..e.dim() {
            let gi = basis_map[&u];
            ops.push(isometries[x].adjoint() * &r.matrices[gi] * &isometries[y]);
        }
        esses.insert(arrow, ops);
    }
    // In generator mode only generating arrows carry generators; derive the
    // remaining arrow maps through the multiplication isomorphisms is not
    // needed for the cone round trip, which only validates the stored data.
    Ok(RepresentationData {
        diagram,
        base: r.base.clone(),
        gammas,
        phis,
        esses,
    })
}

/// The block-diagonal operator of a modification between cones, as an
/// intertwiner of the induced representations; returns the operator and
/// its worst intertwining defect over all generators.
pub fn modification_as_intertwiner(
    p: &Presentation,
    m: &Modification,
) -> Result<(CMat, f64)> {
    let rep1 = crate::transform::cone_to_representation(&m.source)?;
    let rep2 = crate::transform::cone_to_representation(&m.target)?;
    let a1 = assignment_from_representation(p, &rep1)?;
    let a2 = assignment_from_representation(p, &rep2)?;
    // Assemble (+) W_x using the same embeddings as the assignments.
    let nb = rep1.base.num_blocks();
    let mults1: Vec<usize> = (0..nb)
        .map(|j| rep1.gammas.iter().map(|g| g.mults()[j]).sum())
        .collect();
    let mults2: Vec<usize> = (0..nb)
        .map(|j| rep2.gammas.iter().map(|g| g.mults()[j]).sum())
        .collect();
    let module1 = HilbertModule::new(rep1.base.clone(), mults1)?;
    let module2 = HilbertModule::new(rep2.base.clone(), mults2)?;
    let mut blocks = Vec::new();
    for j in 0..nb {
        let mut b = CMat::zeros(module2.mults()[j], module1.mults()[j]);
        let mut off1 = 0usize;
        let mut off2 = 0usize;
        for x in 0..rep1.gammas.len() {
            let (m1j, m2j) = (rep1.gammas[x].mults()[j], rep2.gammas[x].mults()[j]);
            let (w_op, defect) =
                ModOp::from_full(&m.dubs[x].matrix, &rep2.gammas[x], &rep1.gammas[x]);
            if defect > 1e-7 {
                return Err(Error::InvalidAssignment(
                    "modification operator is not a module map".into(),
                ));
            }
            let wj = &w_op.blocks[j];
            for r2 in 0..m2j {
                for c1 in 0..m1j {
                    b[(off2 + r2, off1 + c1)] = wj[(r2, c1)];
                }
            }
            off1 += m1j;
            off2 += m2j;
        }
        blocks.push(b);
    }
    let t = ModOp { blocks }.full_matrix(&module2, &module1);
    let mut defect = 0.0f64;
    for gi in 0..p.generators.len() {
        defect = defect.max(linalg::op_norm(
            &(&t * &a1.matrices[gi] - &a2.matrices[gi] * &t),
        ));
    }
    Ok((t, defect))
}

/// Decompose an intertwiner of induced representations along the unit
/// projections into a modification; fails when the operator does not
/// commute with the projections.
pub fn intertwiner_as_modification(
    p: &Presentation,
    c1: &Transformation,
    c2: &Transformation,
    t: &CMat,
    tol: f64,
) -> Result<Modification> {
    let rep1 = crate::transform::cone_to_representation(c1)?;
    let rep2 = crate::transform::cone_to_representation(c2)?;
    let a1 = assignment_from_representation(p, &rep1)?;
    let a2 = assignment_from_representation(p, &rep2)?;
    // Check intertwining on all generators.
    let mut defect = 0.0f64;
    for gi in 0..p.generators.len() {
        defect = defect.max(linalg::op_norm(
            &(t * &a1.matrices[gi] - &a2.matrices[gi] * t),
        ));
    }
    if defect > tol.max(1e-8) {
        return Err(Error::InvalidAssignment(format!(
            "operator does not intertwine the induced representations (defect {defect:.3e})"
        )));
    }
    // Slice out the object blocks.
    let nb = rep1.base.num_blocks();
    let (t_op, od) = {
        let mults1: Vec<usize> = (0..nb)
            .map(|j| rep1.gammas.iter().map(|g| g.mults()[j]).sum())
            .collect();
        let mults2: Vec<usize> = (0..nb)
            .map(|j| rep2.gammas.iter().map(|g| g.mults()[j]).sum())
            .collect();
        let module1 = HilbertModule::new(rep1.base.clone(), mults1)?;
        let module2 = HilbertModule::new(rep2.base.clone(), mults2)?;
        ModOp::from_full(t, &module2, &module1)
    };
    if od > tol.max(1e-8) {
        return Err(Error::InvalidAssignment(
            "operator is not a module map".into(),
        ));
    }
    let mut dub_mats = Vec::new();
    for x in 0..rep1.gammas.len() {
        let blocks: Vec<CMat> = (0..nb)
            .map(|j| {
                let off1: usize = rep1.gammas[..x].iter().map(|g| g.mults()[j]).sum();
                let off2: usize = rep2.gammas[..x].iter().map(|g| g.mults()[j]).sum();
                let (m1j, m2j) = (rep1.gammas[x].mults()[j], rep2.gammas[x].mults()[j]);
                let mut b = CMat::zeros(m2j, m1j);
                for r in 0..m2j {
                    for c in 0..m1j {
                        b[(r, c)] = t_op.blocks[j][(off2 + r, off1 + c)];
                    }
                }
                b
            })
            .collect();
        // Off-diagonal mass of the block column measures failure to
        // commute with p_x.
        let w = ModOp { blocks };
        let wx = w.full_matrix(&rep2.gammas[x], &rep1.gammas[x]);
        dub_mats.push(wx);
    }
    // Verify blockwise consistency: the reassembled block-diagonal equals t.
    let rebuilt;
    {
        let mults1: Vec<usize> = (0..nb)
            .map(|j| rep1.gammas.iter().map(|g| g.mults()[j]).sum())
            .collect();
        let mults2: Vec<usize> = (0..nb)
            .map(|j| rep2.gammas.iter().map(|g| g.mults()[j]).sum())
            .collect();
        let module1 = HilbertModule::new(rep1.base.clone(), mults1)?;
        let module2 = HilbertModule::new(rep2.base.clone(), mults2)?;
        let blocks: Vec<CMat> = (0..nb)
            .map(|j| {
                let mut b = CMat::zeros(module2.mults()[j], module1.mults()[j]);
                let mut off1 = 0usize;
                let mut off2 = 0usize;
                for x in 0..rep1.gammas.len() {
                    let (m1j, m2j) = (rep1.gammas[x].mults()[j], rep2.gammas[x].mults()[j]);
                    let (wx_op, _) = ModOp::from_full(
                        &dub_mats[x],
                        &rep2.gammas[x],
                        &rep1.gammas[x],
                    );
                    for r in 0..m2j {
                        for c in 0..m1j {
                            b[(off2 + r, off1 + c)] = wx_op.blocks[j][(r, c)];
                        }
                    }
                    off1 += m1j;
                    off2 += m2j;
                }
                b
            })
            .collect();
        rebuilt = ModOp { blocks }.full_matrix(&module2, &module1);
    }
    let cross_defect = linalg::op_norm(&(t - rebuilt));
    if cross_defect > tol.max(1e-8) {
        return Err(Error::InvalidAssignment(format!(
            "operator does not commute with the unit projections (defect {cross_defect:.3e})"
        )));
    }
    Modification::new(c1.clone(), c2.clone(), dub_mats)
}
