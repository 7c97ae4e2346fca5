//! Lowering of parsed documents into diagrams, cones and transformations.

use crate::dsl::{ConeBlock, CorrExpr, DslDocument, ElementLit, HomEntry, ShapeSpec, Stmt};
use corrlim::algebra::{AlgebraElement, MultiMatrixAlgebra, StarHom};
use corrlim::corr::{
    correspondence_from_expectation, from_star_hom, Correspondence, LeftAction, ModOp,
};
use corrlim::diagram::{extend_from_generators, CorrFunctor, GeneratorData};
use corrlim::shapes::{Arrow, CategoryData, GroupData, Shape, TwoArrow, TwoCategoryData};
use corrlim::transform::Transformation;
use corrlim::{C64, CMat};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum LowerError {
    #[error("{0}")]
    Core(#[from] corrlim::Error),
    #[error("name error: {0}")]
    Name(String),
}

type Result<T> = std::result::Result<T, LowerError>;

pub struct Lowered {
    pub diagram: CorrFunctor,
    pub cones: BTreeMap<String, Transformation>,
    pub transformations: BTreeMap<String, Transformation>,
}

fn matrix_to_cmat(m: &[Vec<(f64, f64)>]) -> Result<CMat> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if m.iter().any(|r| r.len() != cols) {
        return Err(LowerError::Name("ragged matrix literal".into()));
    }
    Ok(CMat::from_fn(rows, cols, |r, c| {
        C64::new(m[r][c].0, m[r][c].1)
    }))
}

fn element_to_alg(a: &MultiMatrixAlgebra, e: &ElementLit) -> Result<AlgebraElement> {
    let mats = e.iter().map(|m| matrix_to_cmat(m)).collect::<Result<Vec<_>>>()?;
    a.element(mats).map_err(Into::into)
}

fn lower_shape(spec: &ShapeSpec, depth: usize) -> Result<Shape> {
    Ok(match spec {
        ShapeSpec::Discrete(n) => Shape::Discrete(*n),
        ShapeSpec::Pushout => Shape::Pushout,
        ShapeSpec::Coequalizer => Shape::Coequalizer,
        ShapeSpec::Endo => Shape::EndoN { depth },
        ShapeSpec::FreeMonoid(k) => Shape::FreeMonoid {
            letters: *k,
            depth,
        },
        ShapeSpec::Chain {
            len,
            stabilized_from,
        } => Shape::ChainPrefix {
            len: *len,
            stabilized_from: *stabilized_from,
        },
        ShapeSpec::Group {
            elements,
            unit,
            table,
        } => {
            let index = |name: &str| -> Result<usize> {
                elements
                    .iter()
                    .position(|e| e == name)
                    .ok_or_else(|| LowerError::Name(format!("unknown group element {name}")))
            };
            let n = elements.len();
            let mut t = vec![vec![usize::MAX; n]; n];
            for (a, b, c) in table {
                t[index(a)?][index(b)?] = index(c)?;
            }
            if t.iter().flatten().any(|&x| x == usize::MAX) {
                return Err(LowerError::Name(
                    "incomplete group multiplication table".into(),
                ));
            }
            Shape::FiniteGroup(GroupData {
                elements: elements.clone(),
                unit: index(unit)?,
                table: t,
            })
        }
        ShapeSpec::Category {
            objects,
            arrows,
            compose,
            twoarrows,
            vcompose,
            strict2,
        } => {
            let obj_index = |name: &str| -> Result<usize> {
                objects
                    .iter()
                    .position(|o| o == name)
                    .ok_or_else(|| LowerError::Name(format!("unknown object {name}")))
            };
            let mut all_arrows: Vec<Arrow> = objects
                .iter()
                .enumerate()
                .map(|(i, name)| Arrow {
                    name: format!("id_{name}"),
                    src: i,
                    dst: i,
                    is_identity: true,
                })
                .collect();
            for (name, src, dst) in arrows {
                all_arrows.push(Arrow {
                    name: name.clone(),
                    src: obj_index(src)?,
                    dst: obj_index(dst)?,
                    is_identity: false,
                });
            }
            let arrow_index = |name: &str| -> Result<usize> {
                all_arrows
                    .iter()
                    .position(|a| a.name == name)
                    .ok_or_else(|| LowerError::Name(format!("unknown arrow {name}")))
            };
            let mut ctable = BTreeMap::new();
            for (g, h, gh) in compose {
                ctable.insert((arrow_index(g)?, arrow_index(h)?), arrow_index(gh)?);
            }
            let cat = CategoryData {
                objects: objects.clone(),
                arrows: all_arrows.clone(),
                compose: ctable,
            };
            if !strict2 {
                Shape::ExplicitCategory(cat)
            } else {
                let mut tas = Vec::new();
                for (name, src, dst) in twoarrows {
                    tas.push(TwoArrow {
                        name: name.clone(),
                        src: arrow_index(src)?,
                        dst: arrow_index(dst)?,
                    });
                }
                let ta_index = |name: &str| -> Result<usize> {
                    tas.iter()
                        .position(|t| t.name == name)
                        .ok_or_else(|| LowerError::Name(format!("unknown 2-arrow {name}")))
                };
                let mut vtable = BTreeMap::new();
                for (b, a, c) in vcompose {
                    vtable.insert((ta_index(b)?, ta_index(a)?), ta_index(c)?);
                }
                Shape::TwoCategory(TwoCategoryData {
                    category: cat,
                    twoarrows: tas,
                    vcompose: vtable,
                })
            }
        }
    })
}

struct Env {
    algebras: Vec<(String, MultiMatrixAlgebra)>,
    homs: BTreeMap<String, StarHom>,
    expectations: BTreeMap<String, (MultiMatrixAlgebra, MultiMatrixAlgebra, Vec<AlgebraElement>)>,
}

impl Env {
    fn algebra(&self, name: &str) -> Result<&MultiMatrixAlgebra> {
        self.algebras
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, a)| a)
            .ok_or_else(|| LowerError::Name(format!("unknown algebra {name}")))
    }
}

fn lower_hom(
    env: &Env,
    src: &str,
    dst: &str,
    entries: &[HomEntry],
) -> Result<StarHom> {
    let a = env.algebra(src)?.clone();
    let b = env.algebra(dst)?.clone();
    let mut values = vec![b.zero_element(); a.dim()];
    for e in entries {
        let idx = a.basis_index(corrlim::algebra::BasisRef {
            block: e.block,
            row: e.row,
            col: e.col,
        });
        values[idx] = element_to_alg(&b, &e.value)?;
    }
    StarHom::new(a, b, values).map_err(Into::into)
}

fn lower_corr_expr(
    env: &Env,
    expr: &CorrExpr,
    src: &MultiMatrixAlgebra,
    dst: &MultiMatrixAlgebra,
    tol: f64,
) -> Result<Correspondence> {
    match expr {
        CorrExpr::Std(n) => {
            if src.blocks() != [1] || dst.blocks() != [1] {
                return Err(LowerError::Name(
                    "std(n) is a correspondence over the one-dimensional algebra".into(),
                ));
            }
            let values = vec![ModOp {
                blocks: vec![CMat::identity(*n, *n)],
            }];
            Correspondence::from_parts(src.clone(), dst.clone(), vec![*n], LeftAction { values })
                .map_err(Into::into)
        }
        CorrExpr::Ident(name) => {
            let a = env.algebra(name)?;
            if a.blocks() != src.blocks() || a.blocks() != dst.blocks() {
                return Err(LowerError::Name(format!(
                    "ident({name}) endpoints do not match the declared endpoints"
                )));
            }
            Ok(Correspondence::identity(a))
        }
        CorrExpr::FromHom(name) => {
            let h = env
                .homs
                .get(name)
                .ok_or_else(|| LowerError::Name(format!("unknown hom {name}")))?;
            if h.source().blocks() != src.blocks() || h.target().blocks() != dst.blocks() {
                return Err(LowerError::Name(format!(
                    "from_hom({name}) endpoints do not match"
                )));
            }
            from_star_hom(h).map_err(Into::into)
        }
        CorrExpr::FromExpectation(incl, exp) => {
            let incl = env
                .homs
                .get(incl)
                .ok_or_else(|| LowerError::Name(format!("unknown hom {incl}")))?;
            let (ea, eb, values) = env
                .expectations
                .get(exp)
                .ok_or_else(|| LowerError::Name(format!("unknown expectation {exp}")))?;
            if ea.blocks() != src.blocks() || eb.blocks() != dst.blocks() {
                return Err(LowerError::Name(format!(
                    "from_expectation({exp}) endpoints do not match"
                )));
            }
            let values = values.clone();
            let ea2 = ea.clone();
            let exp_fn = move |x: &AlgebraElement| -> AlgebraElement {
                let mut acc = values[0].algebra().zero_element();
                for (i, c) in x.coeffs().iter().enumerate() {
                    if c.norm() > 0.0 {
                        acc = acc.add(&values[i].scale(*c));
                    }
                }
                acc
            };
            let _ = ea2;
            correspondence_from_expectation(src, incl, &exp_fn, tol).map_err(Into::into)
        }
        CorrExpr::Module { mults, acts } => {
            if mults.len() != dst.num_blocks() {
                return Err(LowerError::Name(format!(
                    "module needs {} multiplicities for the target",
                    dst.num_blocks()
                )));
            }
            let zero = ModOp {
                blocks: mults.iter().map(|&m| CMat::zeros(m, m)).collect(),
            };
            let mut values = vec![zero; src.dim()];
            for a in acts {
                let idx = src.basis_index(corrlim::algebra::BasisRef {
                    block: a.block,
                    row: a.row,
                    col: a.col,
                });
                let blocks = a
                    .value
                    .iter()
                    .map(|m| matrix_to_cmat(m))
                    .collect::<Result<Vec<_>>>()?;
                if blocks.len() != mults.len()
                    || blocks
                        .iter()
                        .zip(mults)
                        .any(|(b, &m)| b.nrows() != m || b.ncols() != m)
                {
                    return Err(LowerError::Name(
                        "act entry does not match the module multiplicities".into(),
                    ));
                }
                values[idx] = ModOp { blocks };
            }
            Correspondence::from_parts(
                src.clone(),
                dst.clone(),
                mults.clone(),
                LeftAction { values },
            )
            .map_err(Into::into)
        }
    }
}

/// Lower a parsed document at the given truncation depth and tolerance.
pub fn lower_document(doc: &DslDocument, depth: usize, tol: f64) -> Result<Lowered> {
    let mut shape = None;
    for s in &doc.stmts {
        if let Stmt::Shape(spec) = s {
            if shape.is_some() {
                return Err(LowerError::Name("multiple shape statements".into()));
            }
            shape = Some(lower_shape(spec, depth)?);
        }
    }
    let shape = shape.ok_or_else(|| LowerError::Name("missing shape statement".into()))?;
    let expanded = shape.expand(depth)?;

    // Algebras bind to objects in declaration order.
    let mut env = Env {
        algebras: Vec::new(),
        homs: BTreeMap::new(),
        expectations: BTreeMap::new(),
    };
    for s in &doc.stmts {
        if let Stmt::Algebra { name, blocks } = s {
            env.algebras.push((
                name.clone(),
                MultiMatrixAlgebra::new(blocks.clone(), name.clone())?,
            ));
        }
    }
    if env.algebras.len() != expanded.objects.len() {
        return Err(LowerError::Name(format!(
            "{} algebra statements for {} shape objects",
            env.algebras.len(),
            expanded.objects.len()
        )));
    }
    for s in &doc.stmts {
        match s {
            Stmt::Hom {
                name,
                src,
                dst,
                entries,
            } => {
                let h = lower_hom(&env, src, dst, entries)?;
                env.homs.insert(name.clone(), h);
            }
            Stmt::Expectation {
                name,
                src,
                dst,
                entries,
            } => {
                let a = env.algebra(src)?.clone();
                let b = env.algebra(dst)?.clone();
                let mut values = vec![b.zero_element(); a.dim()];
                for e in entries {
                    let idx = a.basis_index(corrlim::algebra::BasisRef {
                        block: e.block,
                        row: e.row,
                        col: e.col,
                    });
                    values[idx] = element_to_alg(&b, &e.value)?;
                }
                env.expectations.insert(name.clone(), (a, b, values));
            }
            _ => {}
        }
    }

    // Correspondences bind by `on` name or generator order.
    let algebra_of_object = |x: usize| -> &MultiMatrixAlgebra { &env.algebras[x].1 };
    let arrow_by_name = |name: &str| -> Result<usize> {
        expanded
            .arrows
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| LowerError::Name(format!("unknown arrow {name}")))
    };
    let mut corr_binds: Vec<(usize, Correspondence)> = Vec::new();
    let mut next_gen = 0usize;
    for s in &doc.stmts {
        if let Stmt::Corr {
            name,
            on,
            src,
            dst,
            expr,
        } = s
        {
            let g = match on {
                Some(a) => arrow_by_name(a)?,
                None => {
                    let g = *expanded.generators.get(next_gen).ok_or_else(|| {
                        LowerError::Name(format!(
                            "correspondence {name} has no generator arrow to bind to"
                        ))
                    })?;
                    next_gen += 1;
                    g
                }
            };
            let (x, y) = (expanded.arrows[g].src, expanded.arrows[g].dst);
            let sa = env.algebra(src)?;
            let da = env.algebra(dst)?;
            if sa.blocks() != algebra_of_object(x).blocks()
                || da.blocks() != algebra_of_object(y).blocks()
            {
                return Err(LowerError::Name(format!(
                    "correspondence {name} endpoints do not match arrow {}",
                    expanded.arrows[g].name
                )));
            }
            let c = lower_corr_expr(&env, expr, sa, da, tol)?;
            corr_binds.push((g, c));
        }
    }

    let algebras: Vec<MultiMatrixAlgebra> =
        env.algebras.iter().map(|(_, a)| a.clone()).collect();
    let generator_shape = matches!(
        shape,
        Shape::EndoN { .. } | Shape::FreeMonoid { .. } | Shape::ChainPrefix { .. }
    );
    let diagram = if generator_shape {
        for s in &doc.stmts {
            if matches!(s, Stmt::Mult { .. }) {
                return Err(LowerError::Name(
                    "preset shapes take generator data only; multiplication maps are canonical"
                        .into(),
                ));
            }
        }
        let mut by_arrow: BTreeMap<usize, Correspondence> = corr_binds.into_iter().collect();
        let gens: Vec<Correspondence> = expanded
            .generators
            .iter()
            .map(|g| {
                by_arrow.remove(g).ok_or_else(|| {
                    LowerError::Name(format!(
                        "missing correspondence for generator arrow {}",
                        expanded.arrows[*g].name
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let gen = match &shape {
            Shape::EndoN { .. } => GeneratorData::Endo {
                algebra: algebras[0].clone(),
                corr: gens.into_iter().next().unwrap(),
            },
            Shape::FreeMonoid { .. } => GeneratorData::FreeMonoid {
                algebra: algebras[0].clone(),
                corrs: gens,
            },
            Shape::ChainPrefix { .. } => GeneratorData::Chain {
                algebras: algebras.clone(),
                corrs: gens,
            },
            _ => unreachable!(),
        };
        extend_from_generators(&shape, depth, gen)?
    } else {
        let mut mult_mats = Vec::new();
        let mut viso_mats: Vec<(usize, CMat)> = Vec::new();
        for s in &doc.stmts {
            match s {
                Stmt::Mult { g, h, matrix } => {
                    mult_mats.push((
                        (arrow_by_name(g)?, arrow_by_name(h)?),
                        matrix_to_cmat(matrix)?,
                    ));
                }
                Stmt::TwoArrowIso { name, matrix } => {
                    let idx = expanded
                        .twoarrows
                        .iter()
                        .position(|t| &t.name == name)
                        .ok_or_else(|| {
                            LowerError::Name(format!("unknown 2-arrow {name}"))
                        })?;
                    viso_mats.push((idx, matrix_to_cmat(matrix)?));
                }
                _ => {}
            }
        }
        viso_mats.sort_by_key(|(i, _)| *i);
        if viso_mats.len() != expanded.twoarrows.len() {
            return Err(LowerError::Name(format!(
                "{} viso statements for {} declared 2-arrows",
                viso_mats.len(),
                expanded.twoarrows.len()
            )));
        }
        CorrFunctor::from_parts(
            shape.clone(),
            depth,
            algebras.clone(),
            corr_binds,
            mult_mats,
            viso_mats.into_iter().map(|(_, m)| m).collect(),
        )?
    };

    // Cone and transformation blocks.
    let object_by_name = |name: &str| -> Result<usize> {
        if let Some(i) = expanded.objects.iter().position(|o| o == name) {
            return Ok(i);
        }
        if let Some(i) = env.algebras.iter().position(|(n, _)| n == name) {
            return Ok(i);
        }
        Err(LowerError::Name(format!("unknown object {name}")))
    };
    let mut cones = BTreeMap::new();
    let mut transformations = BTreeMap::new();
    for s in &doc.stmts {
        let (block, is_cone) = match s {
            Stmt::Cone(c) => (c, true),
            Stmt::Transformation(t) => (t, false),
            _ => continue,
        };
        let lowered = lower_cone_block(&env, &diagram, block, is_cone, tol, &object_by_name)?;
        if is_cone {
            cones.insert(block.name.clone(), lowered);
        } else {
            transformations.insert(block.name.clone(), lowered);
        }
    }
    Ok(Lowered {
        diagram,
        cones,
        transformations,
    })
}

fn lower_cone_block(
    env: &Env,
    diagram: &CorrFunctor,
    block: &ConeBlock,
    is_cone: bool,
    tol: f64,
    object_by_name: &dyn Fn(&str) -> Result<usize>,
) -> Result<Transformation> {
    let expanded = &diagram.expanded;
    let vertex = if is_cone {
        let (label, blocks) = block.vertex.as_ref().ok_or_else(|| {
            LowerError::Name(format!("cone {} needs a vertex algebra", block.name))
        })?;
        Some(MultiMatrixAlgebra::new(blocks.clone(), label.clone())?)
    } else {
        None
    };
    let mut gammas: Vec<Option<Correspondence>> = vec![None; expanded.objects.len()];
    for (obj, expr) in &block.gammas {
        let x = object_by_name(obj)?;
        let src = diagram.algebra(x);
        let dst = vertex.as_ref().unwrap_or(src);
        gammas[x] = Some(lower_corr_expr(env, expr, src, dst, tol)?);
    }
    let gammas: Vec<Correspondence> = gammas
        .into_iter()
        .enumerate()
        .map(|(x, g)| {
            g.ok_or_else(|| {
                LowerError::Name(format!(
                    "{} {} is missing gamma at object {}",
                    if is_cone { "cone" } else { "transformation" },
                    block.name,
                    expanded.objects[x]
                ))
            })
        })
        .collect::<Result<_>>()?;
    let mut vees = Vec::new();
    for (arrow, m) in &block.vees {
        let g = expanded
            .arrows
            .iter()
            .position(|a| &a.name == arrow)
            .ok_or_else(|| LowerError::Name(format!("unknown arrow {arrow}")))?;
        vees.push((g, matrix_to_cmat(m)?));
    }
    Ok(if let Some(d) = vertex {
        Transformation::cone(diagram.clone(), &d, gammas, vees)?
    } else {
        Transformation::new(diagram.clone(), diagram.clone(), gammas, vees)?
    })
}
