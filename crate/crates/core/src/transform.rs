//! Transformations between parallel diagrams, modifications between
//! transformations, cones over diagrams and the equivalent representation
//! data of a cone.
//!
//! A transformation between diagrams `F0, F1` on the same shape consists of
//! correspondences `gamma_x: A0_x -> A1_x` and isomorphisms
//! `V_g: can(gamma_x (x) E1_g) -> can(E0_g (x) gamma_y)`, with `V` at
//! identity arrows the canonical isomorphism (not stored).

use crate::algebra::{BasisRef, MultiMatrixAlgebra};
use crate::corr::{
    associator, left_unit, map_first_factor, map_second_factor, right_unit, tensor,
    validate_correspondence, CorrIso, Correspondence, HilbertModule, LeftAction, ModOp,
};
use crate::diagram::{constant_functor, is_constant_functor, CorrFunctor};
use crate::error::{Error, Result};
use crate::linalg;
use crate::report::ValidationReport;
use crate::shapes::ArrowId;
use crate::{C64, CMat};
use rand::SeedableRng;
use std::collections::BTreeMap;

/// A transformation between two diagrams on the same shape.
#[derive(Debug, Clone)]
pub struct Transformation {
    pub source: CorrFunctor,
    pub target: CorrFunctor,
    pub gammas: Vec<Correspondence>,
    vees: BTreeMap<ArrowId, CorrIso>,
}

impl Transformation {
    /// Assemble from V-matrices on the canonical tensor coordinates.
    pub fn new(
        source: CorrFunctor,
        target: CorrFunctor,
        gammas: Vec<Correspondence>,
        vee_mats: Vec<(ArrowId, CMat)>,
    ) -> Result<Self> {
        if source.expanded != target.expanded {
            return Err(Error::ShapeError(
                "transformation needs parallel diagrams on one shape".into(),
            ));
        }
        if gammas.len() != source.expanded.objects.len() {
            return Err(Error::ShapeError(format!(
                "{} gammas for {} objects",
                gammas.len(),
                source.expanded.objects.len()
            )));
        }
        for (x, g) in gammas.iter().enumerate() {
            if g.source().blocks() != source.algebras[x].blocks()
                || g.target().blocks() != target.algebras[x].blocks()
            {
                return Err(Error::ShapeError(format!(
                    "gamma at object {} does not run A0 -> A1",
                    source.expanded.objects[x]
                )));
            }
        }
        let mut t = Transformation {
            source,
            target,
            gammas,
            vees: BTreeMap::new(),
        };
        for (g, m) in vee_mats {
            if t.source.expanded.arrows[g].is_identity {
                return Err(Error::ShapeError(
                    "V at identity arrows is canonical and not stored".into(),
                ));
            }
            let src = t.vee_source(g)?;
            let dst = t.vee_target(g)?;
            t.vees.insert(g, CorrIso::new(src.corr, dst.corr, m));
        }
        Ok(t)
    }

    /// `can(gamma_x (x) E1_g)` for an arrow `g: x -> y`.
    pub fn vee_source(&self, g: ArrowId) -> Result<crate::corr::TensorProduct> {
        let x = self.source.expanded.arrows[g].src;
        tensor(&self.gammas[x], &self.target.corr(g))
    }

    /// `can(E0_g (x) gamma_y)` for an arrow `g: x -> y`.
    pub fn vee_target(&self, g: ArrowId) -> Result<crate::corr::TensorProduct> {
        let y = self.source.expanded.arrows[g].dst;
        tensor(&self.source.corr(g), &self.gammas[y])
    }

    /// `V_g`; at identity arrows the canonical isomorphism through gamma.
    pub fn vee(&self, g: ArrowId) -> Result<CorrIso> {
        if self.source.expanded.arrows[g].is_identity {
            let x = self.source.expanded.arrows[g].src;
            let gamma = &self.gammas[x];
            let ru = right_unit(gamma)?;
            let lu = left_unit(gamma)?;
            let src = self.vee_source(g)?;
            let dst = self.vee_target(g)?;
            return Ok(CorrIso::new(
                src.corr,
                dst.corr,
                lu.matrix.adjoint() * &ru.matrix,
            ));
        }
        self.vees.get(&g).cloned().ok_or_else(|| {
            Error::ShapeError(format!(
                "missing V on arrow {}",
                self.source.expanded.arrow_label(g)
            ))
        })
    }

    /// The identity transformation of a diagram.
    pub fn identity(f: &CorrFunctor) -> Result<Self> {
        let gammas: Vec<Correspondence> = f
            .algebras
            .iter()
            .map(Correspondence::identity)
            .collect();
        let mut vee_mats = Vec::new();
        for g in f.expanded.non_identity_arrows() {
            let e = f.corr(g);
            let lu = left_unit(&e)?;
            let ru = right_unit(&e)?;
            vee_mats.push((g, ru.matrix.adjoint() * &lu.matrix));
        }
        Transformation::new(f.clone(), f.clone(), gammas, vee_mats)
    }

    /// Build a cone: a transformation to the constant diagram on `d`, from
    /// cone-form maps `gamma_x -> can(E_g (x) gamma_y)`.
    pub fn cone(
        source: CorrFunctor,
        d: &MultiMatrixAlgebra,
        gammas: Vec<Correspondence>,
        cone_vee_mats: Vec<(ArrowId, CMat)>,
    ) -> Result<Self> {
        let depth = crate::DEFAULT_DEPTH.max(match &source.shape {
            crate::shapes::Shape::EndoN { depth } => *depth,
            crate::shapes::Shape::FreeMonoid { depth, .. } => *depth,
            _ => 0,
        });
        let target = constant_functor(&source.shape, depth, d)?;
        let mut vee_mats = Vec::new();
        for (g, m) in cone_vee_mats {
            let x = source.expanded.arrows[g].src;
            let ru = right_unit(&gammas[x])?;
            vee_mats.push((g, m * &ru.matrix));
        }
        Transformation::new(source, target, gammas, vee_mats)
    }

    /// True when the target is a constant diagram.
    pub fn is_cone(&self, tol: f64) -> bool {
        is_constant_functor(&self.target, tol)
    }

    /// Cone-form map `gamma_x -> can(E_g (x) gamma_y)` (target must be
    /// constant).
    pub fn cone_vee(&self, g: ArrowId) -> Result<CMat> {
        let x = self.source.expanded.arrows[g].src;
        let ru = right_unit(&self.gammas[x])?;
        Ok(self.vee(g)?.matrix * ru.matrix.adjoint())
    }
}

/// Validate a transformation: gamma axioms, unitarity/intertwining of the
/// `V_g`, the compatibility square per composable pair (pairs with an
/// identity arrow commute automatically and are skipped), and for
/// 2-category shapes the square over every declared 2-arrow.
pub fn validate_transformation(t: &Transformation, tol: f64) -> Result<ValidationReport> {
    let mut report = ValidationReport::new("transformation", tol);
    for (x, gamma) in t.gammas.iter().enumerate() {
        let sub = validate_correspondence(gamma, tol);
        report.check_witness(
            format!("gamma at {}", t.source.expanded.objects[x]),
            sub.max_defect(),
            sub.first_failure()
                .map(|c| c.name.clone())
                .unwrap_or_else(|| "ok".into()),
        );
    }
    for g in t.source.expanded.non_identity_arrows() {
        let v = t.vee(g)?;
        let sub = v.verify(tol);
        report.check_witness(
            format!("V({}) isomorphism", t.source.expanded.arrow_label(g)),
            sub.max_defect(),
            sub.first_failure()
                .map(|c| c.name.clone())
                .unwrap_or_else(|| "ok".into()),
        );
    }
    for (g, h) in t.source.expanded.composable_pairs() {
        let defect = transformation_square_defect(t, g, h)?;
        let witness = format!(
            "({}, {})",
            t.source.expanded.arrow_label(g),
            t.source.expanded.arrow_label(h)
        );
        report.check_witness(format!("square {witness}"), defect, witness);
    }
    for (idx, ta) in t.source.expanded.twoarrows.iter().enumerate() {
        let defect = twoarrow_square_defect(t, idx)?;
        report.check_witness(
            format!("2-arrow square {}", ta.name),
            defect,
            ta.name.clone(),
        );
    }
    Ok(report)
}

/// Defect of the square relating `V_h`, `V_g` and `V_{gh}` for a composable
/// pair `g: y -> z`, `h: x -> y`.
fn transformation_square_defect(t: &Transformation, g: ArrowId, h: ArrowId) -> Result<f64> {
    let shape = &t.source.expanded;
    let gh = shape
        .compose(g, h)
        .ok_or_else(|| Error::ShapeError("pair does not compose".into()))?;
    let x = shape.arrows[h].src;
    let y = shape.arrows[h].dst;
    let z = shape.arrows[g].dst;
    let gamma_x = &t.gammas[x];
    let gamma_y = &t.gammas[y];
    let gamma_z = &t.gammas[z];
    let (e1_h, e1_g) = (t.target.corr(h), t.target.corr(g));
    let (e0_h, e0_g) = (t.source.corr(h), t.source.corr(g));

    // Common domain: can(can(gamma_x (x) E1_h) (x) E1_g).
    let t_gx_h = tensor(gamma_x, &e1_h)?;
    let domain = tensor(&t_gx_h.corr, &e1_g)?;

    // Route 1: assoc, id (x) mu1, V_{gh}.
    let assoc1 = associator(gamma_x, &e1_h, &e1_g)?;
    let t_hg1 = tensor(&e1_h, &e1_g)?;
    let t_gx_hg = tensor(gamma_x, &t_hg1.corr)?;
    let mu1 = t.target.mult(g, h)?;
    let t_gx_e1gh = tensor(gamma_x, &t.target.corr(gh))?;
    let step_mu = map_second_factor(&t_gx_hg, &t_gx_e1gh, &mu1.matrix, gamma_x.dim());
    let v_gh = t.vee(gh)?;
    let route1 = &v_gh.matrix * step_mu * &assoc1.matrix;

    // Route 2: V_h (x) id, assoc, id (x) V_g, assoc*, mu0 (x) id.
    let v_h = t.vee(h)?;
    let t_e0h_gy = tensor(&e0_h, gamma_y)?;
    let dom2 = tensor(&t_e0h_gy.corr, &e1_g)?;
    let step1 = map_first_factor(&domain, &dom2, &v_h.matrix, e1_g.dim());
    let assoc2 = associator(&e0_h, gamma_y, &e1_g)?;
    let t_gy_e1g = tensor(gamma_y, &e1_g)?;
    let t_e0h_gy_e1g = tensor(&e0_h, &t_gy_e1g.corr)?;
    let v_g = t.vee(g)?;
    let t_e0g_gz = tensor(&e0_g, gamma_z)?;
    let t_e0h_e0g_gz = tensor(&e0_h, &t_e0g_gz.corr)?;
    let step2 = map_second_factor(&t_e0h_gy_e1g, &t_e0h_e0g_gz, &v_g.matrix, e0_h.dim());
    let assoc3 = associator(&e0_h, &e0_g, gamma_z)?;
    let t_e0hg = tensor(&e0_h, &e0_g)?;
    let t_e0hg_gz = tensor(&t_e0hg.corr, gamma_z)?;
    let mu0 = t.source.mult(g, h)?;
    let t_e0gh_gz = tensor(&t.source.corr(gh), gamma_z)?;
    let step3 = map_first_factor(&t_e0hg_gz, &t_e0gh_gz, &mu0.matrix, gamma_z.dim());
    let route2 = step3 * assoc3.matrix.adjoint() * step2 * &assoc2.matrix * step1;

    Ok(linalg::op_norm(&(route1 - route2)))
}

/// Defect of the square over a declared 2-arrow `a: g => h`:
/// `V_h (id (x) v1_a) = (v0_a (x) id) V_g`.
fn twoarrow_square_defect(t: &Transformation, idx: usize) -> Result<f64> {
    let ta = &t.source.expanded.twoarrows[idx];
    let (g, h) = (ta.src, ta.dst);
    let x = t.source.expanded.arrows[g].src;
    let y = t.source.expanded.arrows[g].dst;
    let gamma_x = &t.gammas[x];
    let gamma_y = &t.gammas[y];
    let v1 = t.target.twoarrow_iso(idx);
    let v0 = t.source.twoarrow_iso(idx);
    let src = tensor(gamma_x, &t.target.corr(g))?;
    let mid = tensor(gamma_x, &t.target.corr(h))?;
    let lhs_step = map_second_factor(&src, &mid, &v1.matrix, gamma_x.dim());
    let lhs = &t.vee(h)?.matrix * lhs_step;
    let dst0 = tensor(&t.source.corr(g), gamma_y)?;
    let dst1 = tensor(&t.source.corr(h), gamma_y)?;
    let rhs_step = map_first_factor(&dst0, &dst1, &v0.matrix, gamma_y.dim());
    let rhs = rhs_step * &t.vee(g)?.matrix;
    Ok(linalg::op_norm(&(lhs - rhs)))
}

/// A modification between parallel transformations: isomorphisms
/// `W_x: gamma1_x -> gamma2_x` commuting with the `V` data.
#[derive(Debug, Clone)]
pub struct Modification {
    pub source: Transformation,
    pub target: Transformation,
    pub dubs: Vec<CorrIso>,
}

impl Modification {
    pub fn new(
        source: Transformation,
        target: Transformation,
        dub_mats: Vec<CMat>,
    ) -> Result<Self> {
        if dub_mats.len() != source.gammas.len() {
            return Err(Error::ShapeError("one W per object required".into()));
        }
        let dubs = dub_mats
            .into_iter()
            .enumerate()
            .map(|(x, m)| CorrIso::new(source.gammas[x].clone(), target.gammas[x].clone(), m))
            .collect();
        Ok(Modification {
            source,
            target,
            dubs,
        })
    }
}

/// Validate a modification: each `W_x` a verified isomorphism and the
/// square per non-identity arrow (identity arrows commute automatically).
pub fn validate_modification(m: &Modification, tol: f64) -> Result<ValidationReport> {
    let mut report = ValidationReport::new("modification", tol);
    for (x, w) in m.dubs.iter().enumerate() {
        let sub = w.verify(tol);
        report.check_witness(
            format!("W at {}", m.source.source.expanded.objects[x]),
            sub.max_defect(),
            sub.first_failure()
                .map(|c| c.name.clone())
                .unwrap_or_else(|| "ok".into()),
        );
    }
    for g in m.source.source.expanded.non_identity_arrows() {
        let shape = &m.source.source.expanded;
        let (x, y) = (shape.arrows[g].src, shape.arrows[g].dst);
        let src1 = m.source.vee_source(g)?;
        let src2 = m.target.vee_source(g)?;
        let lhs_step = map_first_factor(
            &src1,
            &src2,
            &m.dubs[x].matrix,
            m.source.target.corr(g).dim(),
        );
        let lhs = &m.target.vee(g)?.matrix * lhs_step;
        let dst1 = m.source.vee_target(g)?;
        let dst2 = m.target.vee_target(g)?;
        let rhs_step = map_second_factor(
            &dst1,
            &dst2,
            &m.dubs[y].matrix,
            m.source.source.corr(g).dim(),
        );
        let rhs = rhs_step * &m.source.vee(g)?.matrix;
        let witness = shape.arrow_label(g).to_string();
        report.check_witness(
            format!("square on {witness}"),
            linalg::op_norm(&(lhs - rhs)),
            witness,
        );
    }
    Ok(report)
}

/// Compose transformations `t01: F0 -> F1` and `t12: F1 -> F2`:
/// `gamma02_x = can(gamma01_x (x) gamma12_x)` with the composite `V`.
pub fn compose_transformations(t01: &Transformation, t12: &Transformation) -> Result<Transformation> {
    if !t01.target.approx_eq(&t12.source, 1e-9) {
        return Err(Error::CompositionError(
            "middle diagrams of the composition do not agree".into(),
        ));
    }
    let shape = &t01.source.expanded;
    let mut gammas = Vec::new();
    for x in 0..shape.objects.len() {
        gammas.push(tensor(&t01.gammas[x], &t12.gammas[x])?.corr);
    }
    let mut vee_mats = Vec::new();
    for g in shape.non_identity_arrows() {
        let (x, y) = (shape.arrows[g].src, shape.arrows[g].dst);
        let g01x = &t01.gammas[x];
        let g12x = &t12.gammas[x];
        let g01y = &t01.gammas[y];
        let g12y = &t12.gammas[y];
        let e2 = t12.target.corr(g);
        let e1 = t01.target.corr(g);
        let e0 = t01.source.corr(g);

        // can(can(g01x (x) g12x) (x) E2) --assoc--> can(g01x (x) can(g12x (x) E2))
        let assoc1 = associator(g01x, g12x, &e2)?;
        // id (x) V12
        let t_g12x_e2 = tensor(g12x, &e2)?;
        let t_a = tensor(g01x, &t_g12x_e2.corr)?;
        let t_e1_g12y = tensor(&e1, g12y)?;
        let t_b = tensor(g01x, &t_e1_g12y.corr)?;
        let step1 = map_second_factor(&t_a, &t_b, &t12.vee(g)?.matrix, g01x.dim());
        // assoc back: can(g01x (x) can(E1 (x) g12y)) -> can(can(g01x (x) E1) (x) g12y)
        let assoc2 = associator(g01x, &e1, g12y)?;
        // V01 (x) id
        let t_g01x_e1 = tensor(g01x, &e1)?;
        let t_c = tensor(&t_g01x_e1.corr, g12y)?;
        let t_e0_g01y = tensor(&e0, g01y)?;
        let t_d = tensor(&t_e0_g01y.corr, g12y)?;
        let step2 = map_first_factor(&t_c, &t_d, &t01.vee(g)?.matrix, g12y.dim());
        // assoc: can(can(E0 (x) g01y) (x) g12y) -> can(E0 (x) can(g01y (x) g12y))
        let assoc3 = associator(&e0, g01y, g12y)?;
        let v = &assoc3.matrix * step2 * assoc2.matrix.adjoint() * step1 * &assoc1.matrix;
        vee_mats.push((g, v));
    }
    Transformation::new(t01.source.clone(), t12.target.clone(), gammas, vee_mats)
}

/// Tensor two modifications along composition: a modification between the
/// composites whenever `m1, m2` are modifications.
pub fn tensor_modifications(m1: &Modification, m2: &Modification) -> Result<Modification> {
    let s = compose_transformations(&m1.source, &m2.source)?;
    let t = compose_transformations(&m1.target, &m2.target)?;
    let shape = &s.source.expanded;
    let mut dub_mats = Vec::new();
    for x in 0..shape.objects.len() {
        let src = tensor(&m1.source.gammas[x], &m2.source.gammas[x])?;
        let mid = tensor(&m1.target.gammas[x], &m2.source.gammas[x])?;
        let dst = tensor(&m1.target.gammas[x], &m2.target.gammas[x])?;
        let first = map_first_factor(&src, &mid, &m1.dubs[x].matrix, m2.source.gammas[x].dim());
        let second = map_second_factor(&mid, &dst, &m2.dubs[x].matrix, m1.target.gammas[x].dim());
        dub_mats.push(second * first);
    }
    Modification::new(s, t, dub_mats)
}

/// The representation data of a cone over a diagram: Hilbert modules over
/// the cone vertex with compatible algebra representations and arrow maps.
#[derive(Debug, Clone)]
pub struct RepresentationData {
    pub diagram: CorrFunctor,
    pub base: MultiMatrixAlgebra,
    pub gammas: Vec<HilbertModule>,
    /// Per object, per source-algebra basis element: a full-coordinate
    /// operator on `gamma_x`.
    pub phis: Vec<Vec<CMat>>,
    /// Per non-identity arrow, per module basis element of `E_g`: an
    /// operator `gamma_y -> gamma_x`.
    pub esses: BTreeMap<ArrowId, Vec<CMat>>,
}

impl RepresentationData {
    /// `S` on an arbitrary arrow: identity arrows act through `phi`.
    pub fn s_op(&self, g: ArrowId, basis_index: usize) -> CMat {
        let arrow = &self.diagram.expanded.arrows[g];
        if arrow.is_identity {
            self.phis[arrow.src][basis_index].clone()
        } else {
            self.esses[&g][basis_index].clone()
        }
    }

    /// Validate the bimodularity, inner-product compatibility,
    /// nondegeneracy and multiplicativity conditions.
    pub fn validate(&self, tol: f64) -> Result<ValidationReport> {
        let mut report = ValidationReport::new("representation data", tol);
        let shape = &self.diagram.expanded;
        for (x, phi) in self.phis.iter().enumerate() {
            let a = &self.diagram.algebras[x];
            let module = &self.gammas[x];
            let mut mult = 0.0f64;
            let mut star = 0.0f64;
            let mut modmap = 0.0f64;
            for i in 0..a.dim() {
                let ri = a.basis_ref(i);
                let star_idx = a.basis_index(BasisRef {
                    block: ri.block,
                    row: ri.col,
                    col: ri.row,
                });
                star = star.max(linalg::op_norm(&(&phi[star_idx] - phi[i].adjoint())));
                let (_, d) = ModOp::from_full(&phi[i], module, module);
                modmap = modmap.max(d);
                for j in 0..a.dim() {
                    let rj = a.basis_ref(j);
                    let prod = &phi[i] * &phi[j];
                    let expected = if ri.block == rj.block && ri.col == rj.row {
                        phi[a.basis_index(BasisRef {
                            block: ri.block,
                            row: ri.row,
                            col: rj.col,
                        })]
                        .clone()
                    } else {
                        CMat::zeros(module.dim(), module.dim())
                    };
                    mult = mult.max(linalg::op_norm(&(prod - expected)));
                }
            }
            let name = &shape.objects[x];
            report.check(format!("phi at {name} multiplicative"), mult);
            report.check(format!("phi at {name} star-preserving"), star);
            report.check(format!("phi at {name} adjointable"), modmap);
            if !a.is_zero() {
                let mut one = CMat::zeros(module.dim(), module.dim());
                for b in 0..a.num_blocks() {
                    for k in 0..a.blocks()[b] {
                        one += &phi[a.basis_index(BasisRef {
                            block: b,
                            row: k,
                            col: k,
                        })];
                    }
                }
                report.check(
                    format!("phi at {name} nondegenerate"),
                    linalg::op_norm(&(one - linalg::eye(module.dim()))),
                );
            }
        }
        for g in shape.non_identity_arrows() {
            let arrow = &shape.arrows[g];
            let (x, y) = (arrow.src, arrow.dst);
            let e = self.diagram.corr(g);
            let s = &self.esses[&g];
            let name = shape.arrow_label(g);
            // (1a) bimodularity on bases.
            let mut bimod = 0.0f64;
            for i in 0..self.diagram.algebras[x].dim() {
                let l = e.left_full(i);
                for u in 0..e.dim() {
                    let mut lhs = CMat::zeros(self.gammas[x].dim(), self.gammas[y].dim());
                    for w in 0..e.dim() {
                        if l[(w, u)].norm() > 0.0 {
                            lhs += s[w].map(|v| v * l[(w, u)]);
                        }
                    }
                    let rhs = &self.phis[x][i] * &s[u];
                    bimod = bimod.max(linalg::op_norm(&(lhs - rhs)));
                }
            }
            for i in 0..self.diagram.algebras[y].dim() {
                let r = e
                    .module()
                    .right_action_matrix(&self.diagram.algebras[y].basis_element(i));
                for u in 0..e.dim() {
                    let mut lhs = CMat::zeros(self.gammas[x].dim(), self.gammas[y].dim());
                    for w in 0..e.dim() {
                        if r[(w, u)].norm() > 0.0 {
                            lhs += s[w].map(|v| v * r[(w, u)]);
                        }
                    }
                    let rhs = &s[u] * &self.phis[y][i];
                    bimod = bimod.max(linalg::op_norm(&(lhs - rhs)));
                }
            }
            report.check(format!("S({name}) bimodular"), bimod);
            // (1b) inner products.
            let mut ip = 0.0f64;
            for u in 0..e.dim() {
                let cu = e.module().coord_ref(u);
                for v in 0..e.dim() {
                    let cv = e.module().coord_ref(v);
                    let lhs = s[u].adjoint() * &s[v];
                    let rhs = if cu.block == cv.block && cu.row == cv.row {
                        let idx = self.diagram.algebras[y].basis_index(BasisRef {
                            block: cu.block,
                            row: cu.col,
                            col: cv.col,
                        });
                        self.phis[y][idx].clone()
                    } else {
                        CMat::zeros(self.gammas[y].dim(), self.gammas[y].dim())
                    };
                    ip = ip.max(linalg::op_norm(&(lhs - rhs)));
                }
            }
            report.check(format!("S({name}) inner products"), ip);
            // (1c) nondegeneracy: the span of S(E) gamma_y is gamma_x.
            let dx = self.gammas[x].dim();
            let dy = self.gammas[y].dim();
            if dx > 0 {
                let mut stacked = CMat::zeros(dx, e.dim() * dy);
                for (u, m) in s.iter().enumerate() {
                    stacked.view_mut((0, u * dy), (dx, dy)).copy_from(m);
                }
                let rank = linalg::rank(&stacked, 1e-9);
                report.require(
                    format!("S({name}) nondegenerate"),
                    rank == dx,
                    Some(format!("rank {rank} of {dx}")),
                );
            }
        }
        // (3) multiplicativity across composable pairs.
        for (g, h) in shape.composable_pairs() {
            let gh = shape.compose(g, h).unwrap();
            let t = self.diagram.pair_tensor(g, h)?;
            let mu = self.diagram.mult(g, h)?;
            let (eh, eg) = (self.diagram.corr(h), self.diagram.corr(g));
            let mut defect = 0.0f64;
            for u in 0..eh.dim() {
                for v in 0..eg.dim() {
                    let lhs = self.s_op(h, u) * self.s_op(g, v);
                    let coords = &mu.matrix * t.embed.column(u * eg.dim() + v);
                    let mut rhs = CMat::zeros(lhs.nrows(), lhs.ncols());
                    for (w, c) in coords.iter().enumerate() {
                        if c.norm() > 1e-14 {
                            rhs += self.s_op(gh, w).map(|x| x * c);
                        }
                    }
                    defect = defect.max(linalg::op_norm(&(lhs - rhs)));
                }
            }
            report.check(
                format!(
                    "S multiplicative ({}, {})",
                    shape.arrow_label(g),
                    shape.arrow_label(h)
                ),
                defect,
            );
        }
        Ok(report)
    }
}

/// Convert a cone (transformation to a constant diagram) into its
/// representation data: `S_g(xi)(eta) = V_g^*(xi (x) eta)`.
pub fn cone_to_representation(t: &Transformation) -> Result<RepresentationData> {
    if !t.is_cone(1e-9) {
        return Err(Error::NotACone);
    }
    let d = t.target.algebras[0].clone();
    let shape = &t.source.expanded;
    let gammas: Vec<HilbertModule> = t.gammas.iter().map(|g| g.module().clone()).collect();
    let phis: Vec<Vec<CMat>> = t
        .gammas
        .iter()
        .map(|g| (0..g.source().dim()).map(|i| g.left_full(i)).collect())
        .collect();
    let mut esses = BTreeMap::new();
    for g in shape.non_identity_arrows() {
        let (x, y) = (shape.arrows[g].src, shape.arrows[g].dst);
        let e = t.source.corr(g);
        let cone_v = t.cone_vee(g)?; // gamma_x -> can(E_g (x) gamma_y)
        let v_star = cone_v.adjoint();
        let t_e_gy = tensor(&e, &t.gammas[y])?;
        let dy = t.gammas[y].dim();
        let mut ops = Vec::with_capacity(e.dim());
        for u in 0..e.dim() {
            let mut m = CMat::zeros(t.gammas[x].dim(), dy);
            for v in 0..dy {
                let col = &v_star * t_e_gy.embed.column(u * dy + v);
                m.set_column(v, &col);
            }
            ops.push(m);
        }
        esses.insert(g, ops);
    }
    Ok(RepresentationData {
        diagram: t.source.clone(),
        base: d,
        gammas,
        phis,
        esses,
    })
}

/// Convert representation data back into a cone.  Fails with
/// `NotSurjective` when the nondegeneracy condition does not hold.
pub fn representation_to_cone(r: &RepresentationData, tol: f64) -> Result<Transformation> {
    let shape = &r.diagram.expanded;
    // Rebuild the gammas as correspondences A_x -> D.
    let mut gammas = Vec::new();
    for (x, module) in r.gammas.iter().enumerate() {
        let a = &r.diagram.algebras[x];
        let mut values = Vec::with_capacity(a.dim());
        for i in 0..a.dim() {
            let (op, defect) = ModOp::from_full(&r.phis[x][i], module, module);
            if defect > tol.max(1e-8) {
                return Err(Error::InvalidAssignment(format!(
                    "phi at object {x} does not commute with the right action (defect {defect:.3e})"
                )));
            }
            values.push(op);
        }
        gammas.push(Correspondence::from_parts(
            a.clone(),
            r.base.clone(),
            module.mults().to_vec(),
            LeftAction { values },
        )?);
    }
    let mut cone_vee_mats = Vec::new();
    for g in shape.non_identity_arrows() {
        let (x, y) = (shape.arrows[g].src, shape.arrows[g].dst);
        let e = r.diagram.corr(g);
        let dy = r.gammas[y].dim();
        let dx = r.gammas[x].dim();
        let mut raw = CMat::zeros(dx, e.dim() * dy);
        for u in 0..e.dim() {
            raw.view_mut((0, u * dy), (dx, dy)).copy_from(&r.esses[&g][u]);
        }
        let t_e_gy = tensor(&e, &gammas[y])?;
        let w = raw * &t_e_gy.section; // can(E (x) gamma_y) -> gamma_x
        let iso_defect = linalg::op_norm(&(w.adjoint() * &w - linalg::eye(w.ncols())));
        if iso_defect > tol.max(1e-7) {
            return Err(Error::InvalidAssignment(format!(
                "S on arrow {} is not inner-product compatible (defect {iso_defect:.3e})",
                shape.arrow_label(g)
            )));
        }
        let rank = linalg::rank(&w, 1e-8);
        if rank < dx {
            return Err(Error::NotSurjective {
                arrow: shape.arrow_label(g).to_string(),
                rank,
                dim: dx,
            });
        }
        cone_vee_mats.push((g, w.adjoint()));
    }
    Transformation::cone(r.diagram.clone(), &r.base, gammas, cone_vee_mats)
}

/// Search for a modification between two parallel transformations by
/// solving the intertwiner equations and unitarizing a generic solution.
pub fn find_modification(
    t1: &Transformation,
    t2: &Transformation,
    tol: f64,
    seed: u64,
) -> Result<Option<Modification>> {
    if t1.source.expanded != t2.source.expanded {
        return Err(Error::ShapeError(
            "modification search needs parallel transformations".into(),
        ));
    }
    let shape = t1.source.expanded.clone();
    let nobj = shape.objects.len();
    let dims: Vec<(usize, usize)> = (0..nobj)
        .map(|x| (t2.gammas[x].dim(), t1.gammas[x].dim()))
        .collect();
    // A unitary right-module map needs equal multiplicities per block.
    if (0..nobj).any(|x| t1.gammas[x].module().mults() != t2.gammas[x].module().mults()) {
        return Ok(None);
    }
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0usize, |acc, (r, c)| {
            let o = *acc;
            *acc += r * c;
            Some(o)
        })
        .collect();
    let total: usize = dims.iter().map(|(r, c)| r * c).sum();
    if total == 0 {
        // All gammas are zero modules; the empty modification works.
        let m = Modification::new(
            t1.clone(),
            t2.clone(),
            (0..nobj).map(|x| CMat::zeros(dims[x].0, dims[x].1)).collect(),
        )?;
        return Ok(Some(m));
    }
    let var = |x: usize, i: usize, j: usize| offsets[x] + j * dims[x].0 + i;

    let mut rows: Vec<Vec<(usize, C64)>> = Vec::new();
    // Right-action and left-action intertwining per object.
    for x in 0..nobj {
        let (rw, cw) = dims[x];
        let base = t1.gammas[x].target();
        for b in 0..base.dim() {
            let a1 = t1
                .gammas[x]
                .module()
                .right_action_matrix(&base.basis_element(b));
            let a2 = t2
                .gammas[x]
                .module()
                .right_action_matrix(&base.basis_element(b));
            push_sandwich_rows(&mut rows, total, rw, cw, &a1, &a2, |i, j| var(x, i, j));
        }
        let src = t1.gammas[x].source();
        for a in 0..src.dim() {
            let a1 = t1.gammas[x].left_full(a);
            let a2 = t2.gammas[x].left_full(a);
            push_sandwich_rows(&mut rows, total, rw, cw, &a1, &a2, |i, j| var(x, i, j));
        }
    }
    // Square per non-identity arrow: V2 (W_x (x) id) = (id (x) W_y) V1.
    for g in shape.non_identity_arrows() {
        let (x, y) = (shape.arrows[g].src, shape.arrows[g].dst);
        let e1 = t1.target.corr(g);
        let e0 = t1.source.corr(g);
        let src1 = t1.vee_source(g)?;
        let src2 = t2.vee_source(g)?;
        // LHS = [V2 * embed2] (W_x (x) I_{e1}) [section1].
        let m1 = &t2.vee(g)?.matrix * &src2.embed;
        let m2 = src1.section.clone();
        let dst1 = t1.vee_target(g)?;
        let dst2 = t2.vee_target(g)?;
        // RHS = [embed2'] (I_{e0} (x) W_y) [section1' * V1].
        let n1 = dst2.embed.clone();
        let n2 = &dst1.section * &t1.vee(g)?.matrix;
        let d1 = e1.dim();
        let e0d = e0.dim();
        let (rwx, cwx) = dims[x];
        let (rwy, cwy) = dims[y];
        let nrows_eq = m1.nrows();
        let ncols_eq = m2.ncols();
        for r in 0..nrows_eq {
            for c in 0..ncols_eq {
                let mut row: Vec<(usize, C64)> = Vec::new();
                // coeff of W_x[i,j]: sum_k m1[r, i*d1+k] m2[j*d1+k, c]
                for i in 0..rwx {
                    for j in 0..cwx {
                        let mut s = C64::ZERO;
                        for k in 0..d1 {
                            s += m1[(r, i * d1 + k)] * m2[(j * d1 + k, c)];
                        }
                        if s.norm() > 1e-15 {
                            row.push((var(x, i, j), s));
                        }
                    }
                }
                // minus coeff of W_y[i,j]: sum_k n1[r, k*rwy+i] n2[k*cwy+j, c]
                for i in 0..rwy {
                    for j in 0..cwy {
                        let mut s = C64::ZERO;
                        for k in 0..e0d {
                            s += n1[(r, k * rwy + i)] * n2[(k * cwy + j, c)];
                        }
                        if s.norm() > 1e-15 {
                            row.push((var(y, i, j), -s));
                        }
                    }
                }
                if !row.is_empty() {
                    rows.push(row);
                }
            }
        }
    }
    let mut constraint = CMat::zeros(rows.len(), total);
    for (r, row) in rows.iter().enumerate() {
        for &(c, v) in row {
            constraint[(r, c)] += v;
        }
    }
    let kernel = linalg::nullspace(&constraint, 1e-8);
    if kernel.is_empty() {
        return Ok(None);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        let mut vec = crate::CVec::zeros(total);
        for k in &kernel {
            let c = crate::random::random_complex(&mut rng);
            vec += k.map(|v| v * c);
        }
        let mut dub_mats = Vec::with_capacity(nobj);
        let mut ok = true;
        for x in 0..nobj {
            let (rw, cw) = dims[x];
            let mut w = CMat::zeros(rw, cw);
            for i in 0..rw {
                for j in 0..cw {
                    w[(i, j)] = vec[var(x, i, j)];
                }
            }
            if rw != cw {
                ok = false;
                break;
            }
            if rw == 0 {
                dub_mats.push(w);
                continue;
            }
            match linalg::polar_unitary(&w, 1e-10) {
                Some(u) => dub_mats.push(u),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let m = Modification::new(t1.clone(), t2.clone(), dub_mats)?;
        let report = validate_modification(&m, tol.max(1e-8))?;
        if report.passed() {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Append rows for the equation `W a1 - a2 W = 0` over the variables of a
/// single `W`.
fn push_sandwich_rows(
    rows: &mut Vec<Vec<(usize, C64)>>,
    _total: usize,
    rw: usize,
    cw: usize,
    a1: &CMat,
    a2: &CMat,
    var: impl Fn(usize, usize) -> usize,
) {
    for i in 0..rw {
        for j in 0..cw {
            let mut row: Vec<(usize, C64)> = Vec::new();
            // (W a1)[i, j] = sum_k W[i, k] a1[k, j]
            for k in 0..cw {
                let v = a1[(k, j)];
                if v.norm() > 1e-15 {
                    row.push((var(i, k), v));
                }
            }
            // -(a2 W)[i, j] = -sum_k a2[i, k] W[k, j]
            for k in 0..rw {
                let v = a2[(i, k)];
                if v.norm() > 1e-15 {
                    row.push((var(k, j), -v));
                }
            }
            if !row.is_empty() {
                rows.push(row);
            }
        }
    }
}


#[cfg(test)]
mod unitor_tests {
    use super::*;
    use crate::diagram::CorrFunctor;
    use crate::shapes::Shape;

    #[test]
    fn unitor_is_a_modification_between_composite_and_original() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let c = MultiMatrixAlgebra::new(vec![1], "C").unwrap();
        let mkstd = |n: usize| {
            let values = vec![ModOp { blocks: vec![CMat::identity(n, n)] }];
            Correspondence::from_parts(c.clone(), c.clone(), vec![n], LeftAction { values }).unwrap()
        };
        let f = CorrFunctor::from_parts(
            Shape::Coequalizer, 3,
            vec![c.clone(), c.clone()],
            vec![(2, mkstd(2)), (3, mkstd(3))],
            vec![], vec![],
        ).unwrap();
        let k = 2usize;
        let gammas = vec![mkstd(k), mkstd(k)];
        let vees = vec![
            (2usize, crate::random::random_unitary(2 * k, &mut rng)),
            (3usize, crate::random::random_unitary(3 * k, &mut rng)),
        ];
        let t = Transformation::new(f.clone(), f.clone(), gammas, vees).unwrap();
        let id = Transformation::identity(&f).unwrap();
        let composed = compose_transformations(&t, &id).unwrap();
        // Known W: right unitor can(gamma (x) id) -> gamma.
        let dubs: Vec<CMat> = (0..2).map(|x| right_unit(&t.gammas[x]).unwrap().matrix).collect();
        let m = Modification::new(composed, t, dubs).unwrap();
        let report = validate_modification(&m, 1e-8).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
        assert!(report.max_defect() < 1e-10);
    }
}

impl Transformation {
    /// Serialize the transformation data: the gamma correspondences and
    /// the compatibility unitaries per arrow.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        let gammas: Vec<serde_json::Value> = self
            .gammas
            .iter()
            .enumerate()
            .map(|(x, g)| {
                json!({
                    "object": self.source.expanded.objects[x],
                    "source": crate::json::algebra_to_json(g.source()),
                    "target": crate::json::algebra_to_json(g.target()),
                    "mults": g.module().mults().to_vec(),
                    "left_action": (0..g.source().dim())
                        .map(|i| crate::json::matrix_to_json(&g.left_full(i)))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
        let vees: Vec<serde_json::Value> = self
            .vees
            .iter()
            .map(|(g, iso)| {
                json!({
                    "arrow": self.source.expanded.arrow_label(*g),
                    "matrix": crate::json::matrix_to_json(&iso.matrix),
                })
            })
            .collect();
        json!({
            "is_cone": crate::diagram::is_constant_functor(&self.target, 1e-9),
            "gammas": gammas,
            "vees": vees,
        })
    }
}
