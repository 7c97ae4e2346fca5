//! Concrete evaluation of finite-dimensional colimits: direct sums,
//! Fell-bundle section algebras over finite groups via a numerical
//! Wedderburn decomposition, and stabilized inductive chains.

use crate::algebra::{AlgebraElement, BasisRef, MultiMatrixAlgebra, StarHom};
use crate::corr::{Correspondence, HilbertModule, LeftAction, ModOp};
use crate::diagram::CorrFunctor;
use crate::error::{Error, Result};
use crate::linalg;
use crate::shapes::Shape;
use crate::transform::{representation_to_cone, RepresentationData, Transformation};
use crate::{C64, CMat, CVec};
use rand::SeedableRng;
use std::collections::BTreeMap;

/// An abstract finite-dimensional associative *-algebra given by structure
/// data on a fixed basis.
#[derive(Debug, Clone)]
pub struct FiniteStarAlgebra {
    pub dim: usize,
    /// Left-multiplication matrix of each basis element.
    pub left_mult: Vec<CMat>,
    /// Conjugate-linear involution: `star(x) = invol * conj(x)`.
    pub invol: CMat,
    pub unit: CVec,
    /// Linear functional giving the canonical trace.
    pub trace_vec: CVec,
}

impl FiniteStarAlgebra {
    pub fn mul(&self, x: &CVec, y: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim);
        for (i, c) in x.iter().enumerate() {
            if c.norm() > 0.0 {
                out += (&self.left_mult[i] * y).map(|v| v * c);
            }
        }
        out
    }

    pub fn star(&self, x: &CVec) -> CVec {
        &self.invol * x.map(|v| v.conj())
    }

    pub fn tau(&self, x: &CVec) -> C64 {
        self.trace_vec.iter().zip(x.iter()).map(|(t, v)| t * v).sum()
    }

    /// Trace form `<x, y> = tau(x* y)`, as a matrix on coordinates.
    pub fn trace_form(&self) -> CMat {
        let mut g = CMat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let mut ei = CVec::zeros(self.dim);
            ei[i] = C64::ONE;
            let si = self.star(&ei);
            for j in 0..self.dim {
                let mut ej = CVec::zeros(self.dim);
                ej[j] = C64::ONE;
                g[(i, j)] = self.tau(&self.mul(&si, &ej));
            }
        }
        g
    }

    /// Right-multiplication matrix of a basis element.
    fn right_mult(&self, j: usize) -> CMat {
        let mut m = CMat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let col = self.left_mult[i].column(j);
            for (r, v) in col.iter().enumerate() {
                m[(r, i)] = *v;
            }
        }
        m
    }

    /// Check associativity, unit and involution axioms; returns the largest
    /// defect found.
    pub fn structure_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        let e = |i: usize| {
            let mut v = CVec::zeros(self.dim);
            v[i] = C64::ONE;
            v
        };
        for i in 0..self.dim {
            defect = defect.max((self.mul(&self.unit, &e(i)) - e(i)).norm());
            defect = defect.max((self.mul(&e(i), &self.unit) - e(i)).norm());
            for j in 0..self.dim {
                let ij = self.mul(&e(i), &e(j));
                // (e_i e_j)* = e_j* e_i*
                let lhs = self.star(&ij);
                let rhs = self.mul(&self.star(&e(j)), &self.star(&e(i)));
                defect = defect.max((lhs - rhs).norm());
                for k in 0..self.dim {
                    let a = self.mul(&ij, &e(k));
                    let b = self.mul(&e(i), &self.mul(&e(j), &e(k)));
                    defect = defect.max((a - b).norm());
                }
            }
        }
        defect
    }
}

/// The convolution *-algebra of a saturated bundle over a finite group,
/// assembled from the diagram's multiplication isomorphisms.
#[derive(Debug, Clone)]
pub struct ConvolutionAlgebra {
    pub algebra: FiniteStarAlgebra,
    /// Offset of each arrow's fibre inside the coordinate space.
    pub offsets: Vec<usize>,
    pub fibre_dims: Vec<usize>,
}

impl ConvolutionAlgebra {
    pub fn fibre_coord(&self, arrow: usize, u: usize) -> usize {
        self.offsets[arrow] + u
    }
}

/// Build the convolution algebra of a finite-group diagram.
pub fn convolution_algebra(f: &CorrFunctor) -> Result<ConvolutionAlgebra> {
    let Shape::FiniteGroup(group) = &f.shape else {
        return Err(Error::ShapeError(
            "convolution algebra needs a finite group shape".into(),
        ));
    };
    let shape = &f.expanded;
    let n_arrows = shape.arrows.len();
    let fibre_dims: Vec<usize> = (0..n_arrows).map(|g| f.corr(g).dim()).collect();
    let offsets: Vec<usize> = fibre_dims
        .iter()
        .scan(0usize, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let dim: usize = fibre_dims.iter().sum();

    // Products: (eta at h) (xi at g) = mu_{g,h}(eta (x) xi) at g o h.
    let mut left_mult = vec![CMat::zeros(dim, dim); dim];
    for h in 0..n_arrows {
        for g in 0..n_arrows {
            let gh = shape.compose(g, h).unwrap();
            let t = f.pair_tensor(g, h)?;
            let mu = f.mult(g, h)?;
            let dg = fibre_dims[g];
            for u in 0..fibre_dims[h] {
                for v in 0..dg {
                    let coords = &mu.matrix * t.embed.column(u * dg + v);
                    let row_base = offsets[gh];
                    let li = offsets[h] + u;
                    for (w, c) in coords.iter().enumerate() {
                        if c.norm() > 1e-14 {
                            left_mult[li][(row_base + w, offsets[g] + v)] += c;
                        }
                    }
                }
            }
        }
    }
    // Unit: identity of A at the unit arrow.
    let unit_arrow = shape.identity_arrow(0);
    let a = &f.algebras[0];
    let mut unit = CVec::zeros(dim);
    for (i, c) in a.identity().coeffs().iter().enumerate() {
        unit[offsets[unit_arrow] + i] = *c;
    }
    // Trace: matrix trace of the identity-fibre component.
    let mut trace_vec = CVec::zeros(dim);
    for i in 0..a.dim() {
        let r = a.basis_ref(i);
        if r.row == r.col {
            trace_vec[offsets[unit_arrow] + i] = C64::ONE;
        }
    }
    // Involution: for eta in E_g, eta* in E_{g inverse} is determined by
    // <eta*, zeta>_A = mu_{g^{-1}, g}(eta (x) zeta) for all zeta.
    let inverse_of = |g: usize| -> usize {
        group.table[g].iter().position(|&x| x == group.unit).unwrap()
    };
    let mut invol = CMat::zeros(dim, dim);
    for g in 0..n_arrows {
        let ginv = inverse_of(g);
        let e_g = f.corr(g);
        let e_ginv = f.corr(ginv);
        let (dg, dinv) = (e_g.dim(), e_ginv.dim());
        if shape.arrows[g].is_identity {
            // Identity fibre: the algebra adjoint.
            for i in 0..a.dim() {
                let r = a.basis_ref(i);
                let star = a.basis_index(BasisRef {
                    block: r.block,
                    row: r.col,
                    col: r.row,
                });
                invol[(offsets[g] + star, offsets[g] + i)] = C64::ONE;
            }
            continue;
        }
        // Linear system M conj(c) = rhs with rows (zeta basis v, A coord).
        let t = f.pair_tensor(g, ginv)?;
        let mu = f.mult(g, ginv)?;
        let adim = a.dim();
        let mut m = CMat::zeros(dinv * adim, dinv);
        for w in 0..dinv {
            let cw = e_ginv.module().coord_ref(w);
            for v in 0..dinv {
                let cv = e_ginv.module().coord_ref(v);
                if cw.block == cv.block && cw.row == cv.row {
                    let idx = a.basis_index(BasisRef {
                        block: cw.block,
                        row: cw.col,
                        col: cv.col,
                    });
                    m[(v * adim + idx, w)] = C64::ONE;
                }
            }
        }
        let pinv_lhs = (m.adjoint() * &m)
            .try_inverse()
            .ok_or(Error::DecompositionFailed { residual: f64::NAN })?;
        for u in 0..dg {
            let mut rhs = CVec::zeros(dinv * adim);
            for v in 0..dinv {
                // mu_{g^{-1}, g}(eta_u (x) zeta_v): the pair tensor of
                // (outer g^{-1}, inner g) has raw index u * dinv + v.
                let coords = &mu.matrix * t.embed.column(u * dinv + v);
                for (alpha, c) in coords.iter().enumerate() {
                    rhs[v * adim + alpha] = *c;
                }
            }
            let sol = &pinv_lhs * (m.adjoint() * rhs);
            for w in 0..dinv {
                invol[(offsets[ginv] + w, offsets[g] + u)] = sol[w].conj();
            }
        }
    }
    let algebra = FiniteStarAlgebra {
        dim,
        left_mult,
        invol,
        unit,
        trace_vec,
    };
    Ok(ConvolutionAlgebra {
        algebra,
        offsets,
        fibre_dims,
    })
}

/// Result of a numerical Wedderburn decomposition.
#[derive(Debug, Clone)]
pub struct Wedderburn {
    pub algebra: MultiMatrixAlgebra,
    /// Image of each input basis element under the isomorphism.
    pub iso: Vec<AlgebraElement>,
    pub residual: f64,
}

/// Decompose a finite-dimensional *-algebra with positive definite trace
/// form into matrix blocks and produce an explicit *-isomorphism.
pub fn wedderburn_decompose(
    alg: &FiniteStarAlgebra,
    tol: f64,
    seed: u64,
) -> Result<Wedderburn> {
    let d = alg.dim;
    if d == 0 {
        return Ok(Wedderburn {
            algebra: MultiMatrixAlgebra::new(vec![], "W")?,
            iso: Vec::new(),
            residual: 0.0,
        });
    }
    let gram = alg.trace_form();
    let min_eig = linalg::hermitian_eigenvalues(&gram)[0];
    if min_eig <= 1e-10 {
        return Err(Error::DecompositionFailed { residual: min_eig });
    }
    // Basis change to a trace-orthonormal basis.
    let onb = linalg::form_orthonormal_basis(&gram, 1e-12);
    if onb.len() != d {
        return Err(Error::DecompositionFailed {
            residual: onb.len() as f64 - d as f64,
        });
    }
    let mut w = CMat::zeros(d, d);
    for (k, v) in onb.iter().enumerate() {
        w.set_column(k, v);
    }
    let w_inv = w.adjoint() * &gram;

    // Center: nullspace of the stacked commutators.
    let mut comm = CMat::zeros(d * d, d);
    for i in 0..d {
        let li = &alg.left_mult[i];
        let ri = alg.right_mult(i);
        let diff = li - ri;
        comm.view_mut((i * d, 0), (d, d)).copy_from(&diff);
    }
    let center = linalg::nullspace(&comm, 1e-9);
    let r = center.len();
    if std::env::var("CORRLIM_DEBUG_WED").is_ok() {
        eprintln!("center dim {}", r);
        for c in &center { eprintln!("  center vec {:?}", c.as_slice()); }
    }
    if r == 0 {
        return Err(Error::DecompositionFailed { residual: f64::NAN });
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut last_residual = f64::NAN;
    'attempt: for _ in 0..5 {
        // Random self-adjoint central element.
        let mut z = CVec::zeros(d);
        for c in &center {
            let coeff = crate::random::random_complex(&mut rng);
            z += c.map(|v| v * coeff);
        }
        z = (z.clone() + alg.star(&z)).map(|v| v * C64::new(0.5, 0.0));
        let lz = {
            let mut m = CMat::zeros(d, d);
            for (i, c) in z.iter().enumerate() {
                if c.norm() > 0.0 {
                    m += alg.left_mult[i].map(|v| v * c);
                }
            }
            m
        };
        let lz_onb = &w_inv * lz * &w;
        let (vals, vecs) = linalg::hermitian_eig(&lz_onb);
        // Cluster eigenvalues with a spectral-gap threshold.
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (i, &v) in vals.iter().enumerate() {
            match clusters.last_mut() {
                Some(cl) if (v - vals[*cl.last().unwrap()]).abs() < 1e-6 => cl.push(i),
                _ => clusters.push(vec![i]),
            }
        }
        if clusters.len() != r {
            if std::env::var("CORRLIM_DEBUG_WED").is_ok() { eprintln!("clusters {} != center {}; vals {:?}", clusters.len(), r, vals); }
            continue 'attempt;
        }
        // Ideals and their data.
        struct IdealData {
            k: usize,
            units: Vec<CVec>, // x_1..x_k with x_r* x_s = delta p
            key: f64,
        }
        let mut ideals: Vec<IdealData> = Vec::new();
        for cl in &clusters {
            let dim_i = cl.len();
            let k = (dim_i as f64).sqrt().round() as usize;
            if k * k != dim_i {
                if std::env::var("CORRLIM_DEBUG_WED").is_ok() { eprintln!("ideal dim {} not a square", dim_i); }
                continue 'attempt;
            }
            // Ideal basis in original coordinates.
            let basis: Vec<CVec> = cl
                .iter()
                .map(|&i| &w * vecs.column(i).into_owned())
                .collect();
            // Central projection: component of the unit in this ideal.
            let u_new = &w_inv * &alg.unit;
            let mut q_new = CVec::zeros(d);
            for &i in cl {
                let v = vecs.column(i);
                let coef = v.dotc(&u_new);
                q_new += v.into_owned().map(|x| x * coef);
            }
            let mut q = &w * q_new;
            q = (q.clone() + alg.star(&q)).map(|v| v * C64::new(0.5, 0.0));
            // Minimal projection via spectral calculus of a random
            // self-adjoint element of the ideal.
            let mut found = None;
            for _ in 0..5 {
                let mut h = CVec::zeros(d);
                for b in &basis {
                    let coeff = crate::random::random_complex(&mut rng);
                    h += b.map(|v| v * coeff);
                }
                let a = {
                    let t = alg.mul(&q, &alg.mul(&h, &q));
                    (t.clone() + alg.star(&t)).map(|v| v * C64::new(0.5, 0.0))
                };
                // Spectrum of `a` inside the ideal via its left action.
                let la = {
                    let mut m = CMat::zeros(d, d);
                    for (i, c) in a.iter().enumerate() {
                        if c.norm() > 0.0 {
                            m += alg.left_mult[i].map(|v| v * c);
                        }
                    }
                    m
                };
                // Restrict to the ideal (basis is trace-orthonormal).
                let mut bmat = CMat::zeros(d, dim_i);
                for (c, b) in basis.iter().enumerate() {
                    bmat.set_column(c, b);
                }
                let b_pinv = bmat.adjoint() * &gram;
                let la_restr = &b_pinv * la * &bmat;
                let (avals, _) = linalg::hermitian_eig(&la_restr);
                let mut aclusters: Vec<(f64, usize)> = Vec::new();
                for &v in &avals {
                    match aclusters.last_mut() {
                        Some((mean, count)) if (v - *mean).abs() < 1e-6 => {
                            *mean = (*mean * *count as f64 + v) / (*count as f64 + 1.0);
                            *count += 1;
                        }
                        _ => aclusters.push((v, 1)),
                    }
                }
                if aclusters.len() != k || aclusters.iter().any(|&(_, c)| c != k) {
                    if std::env::var("CORRLIM_DEBUG_WED").is_ok() { eprintln!("aclusters {:?} for k {}", aclusters, k); }
                    continue;
                }
                // Lagrange interpolation: projection onto the lowest
                // eigenvalue of a.
                let lam: Vec<f64> = aclusters.iter().map(|&(m, _)| m).collect();
                let mut p = q.clone();
                for j in 1..k {
                    let shifted = &a - &q.map(|v| v * C64::new(lam[j], 0.0));
                    p = alg
                        .mul(&p, &shifted)
                        .map(|v| v / C64::new(lam[0] - lam[j], 0.0));
                }
                // Idempotent polish.
                for _ in 0..2 {
                    let p2 = alg.mul(&p, &p);
                    let p3 = alg.mul(&p2, &p);
                    p = p2.map(|v| v * C64::new(3.0, 0.0)) - p3.map(|v| v * C64::new(2.0, 0.0));
                    p = (p.clone() + alg.star(&p)).map(|v| v * C64::new(0.5, 0.0));
                }
                let idem_defect = (alg.mul(&p, &p) - p.clone()).norm();
                if idem_defect > 1e-8 {
                    if std::env::var("CORRLIM_DEBUG_WED").is_ok() { eprintln!("idem defect {:.3e}", idem_defect); }
                    continue;
                }
                found = Some(p);
                break;
            }
            let Some(p) = found else {
                if std::env::var("CORRLIM_DEBUG_WED").is_ok() { eprintln!("no minimal projection found"); }
                continue 'attempt
            };
            // Minimal left ideal I p, orthonormalized so that
            // x_r* x_s = delta_{rs} p.
            let tau_p = alg.tau(&p).re;
            if tau_p <= 1e-12 {
                continue 'attempt;
            }
            let cands: Vec<CVec> = basis.iter().map(|b| alg.mul(b, &p)).collect();
            let ip = |x: &CVec, y: &CVec| -> C64 {
                alg.tau(&alg.mul(&alg.star(x), y)) / C64::new(tau_p, 0.0)
            };
            let mut units: Vec<CVec> = Vec::new();
            // Pivoted Gram-Schmidt over the candidate list.
            let mut residue = cands;
            while units.len() < k {
                let mut best = usize::MAX;
                let mut best_norm = 1e-8;
                for (i, c) in residue.iter().enumerate() {
                    let n = ip(c, c).re;
                    if n > best_norm {
                        best = i;
                        best_norm = n;
                    }
                }
                if best == usize::MAX {
                    if std::env::var("CORRLIM_DEBUG_WED").is_ok() { eprintln!("GS exhausted at {} of {}", units.len(), k); }
                    continue 'attempt;
                }
                let mut v = residue[best].clone();
                for u in &units {
                    let c = ip(u, &v);
                    v -= u.map(|x| x * c);
                }
                let n = ip(&v, &v).re;
                if n <= 1e-10 {
                    residue.remove(best);
                    continue;
                }
                let v = v.map(|x| x / C64::new(n.sqrt(), 0.0));
                for rvec in residue.iter_mut() {
                    let c = ip(&v, rvec);
                    *rvec -= v.map(|x| x * c);
                }
                units.push(v);
            }
            let key = vals[cl[0]];
            ideals.push(IdealData { k, units, key });
        }
        // Deterministic block order: size ascending, then eigenvalue key.
        ideals.sort_by(|a, b| {
            a.k.cmp(&b.k)
                .then(a.key.partial_cmp(&b.key).unwrap_or(std::cmp::Ordering::Equal))
        });
        let blocks: Vec<usize> = ideals.iter().map(|i| i.k).collect();
        let out_alg = MultiMatrixAlgebra::new(blocks, "W")?;
        // iso(c)[block][r][s] = tau(x_r* c x_s) / tau(p).
        let mut iso = Vec::with_capacity(d);
        for i in 0..d {
            let mut e = CVec::zeros(d);
            e[i] = C64::ONE;
            let mut mats = Vec::with_capacity(ideals.len());
            for ideal in &ideals {
                let k = ideal.k;
                let tau_p = {
                    // tau(x_1* x_1) equals tau(p); recompute for stability.
                    alg.tau(&alg.mul(&alg.star(&ideal.units[0]), &ideal.units[0]))
                        .re
                };
                let mut m = CMat::zeros(k, k);
                for rr in 0..k {
                    for ss in 0..k {
                        let v = alg.mul(
                            &alg.star(&ideal.units[rr]),
                            &alg.mul(&e, &ideal.units[ss]),
                        );
                        m[(rr, ss)] = alg.tau(&v) / C64::new(tau_p, 0.0);
                    }
                }
                mats.push(m);
            }
            iso.push(out_alg.element(mats)?);
        }
        // Verify the isomorphism on basis pairs.
        let mut residual = 0.0f64;
        for i in 0..d {
            let mut ei = CVec::zeros(d);
            ei[i] = C64::ONE;
            let star_img = alg.star(&ei);
            let star_mapped = apply_iso(&iso, &star_img, &out_alg);
            residual =
                residual.max(crate::algebra::operator_norm(&star_mapped.sub(&iso[i].adjoint())));
            for j in 0..d {
                let mut ej = CVec::zeros(d);
                ej[j] = C64::ONE;
                let prod = alg.mul(&ei, &ej);
                let mapped = apply_iso(&iso, &prod, &out_alg);
                residual = residual
                    .max(crate::algebra::operator_norm(&mapped.sub(&iso[i].mul(&iso[j]))));
            }
        }
        let unit_img = apply_iso(&iso, &alg.unit, &out_alg);
        residual =
            residual.max(crate::algebra::operator_norm(&unit_img.sub(&out_alg.identity())));
        // Linear bijectivity: the coordinate matrix of the iso must be
        // invertible; dimensions already match.
        last_residual = residual;
        if std::env::var("CORRLIM_DEBUG_WED").is_ok() { eprintln!("attempt residual {:.3e}", residual); }
        if residual <= tol {
            return Ok(Wedderburn {
                algebra: out_alg,
                iso,
                residual,
            });
        }
    }
    Err(Error::DecompositionFailed {
        residual: last_residual,
    })
}

fn apply_iso(iso: &[AlgebraElement], x: &CVec, out: &MultiMatrixAlgebra) -> AlgebraElement {
    let mut acc = out.zero_element();
    for (i, c) in x.iter().enumerate() {
        if c.norm() > 0.0 {
            acc = acc.add(&iso[i].scale(*c));
        }
    }
    acc
}

/// Evaluate the colimit of a discrete diagram: the direct sum with stable
/// block order by object index.
pub fn eval_direct_sum(f: &CorrFunctor) -> Result<MultiMatrixAlgebra> {
    if !matches!(f.shape, Shape::Discrete(_)) {
        return Err(Error::ShapeError("direct-sum evaluation needs a discrete shape".into()));
    }
    Ok(MultiMatrixAlgebra::direct_sum(
        &f.algebras,
        f.algebras
            .iter()
            .map(|a| a.label().to_string())
            .collect::<Vec<_>>()
            .join("+"),
    ))
}

/// Result of evaluating a finite-group diagram.
pub struct FellEvaluation {
    pub algebra: MultiMatrixAlgebra,
    pub conv: ConvolutionAlgebra,
    pub iso: Vec<AlgebraElement>,
    pub iso_defect: f64,
}

/// Evaluate the section algebra of a saturated bundle over a finite group:
/// build the convolution algebra and decompose it.
pub fn eval_fell_bundle(f: &CorrFunctor, tol: f64, seed: u64) -> Result<FellEvaluation> {
    if !matches!(f.shape, Shape::FiniteGroup(_)) {
        return Err(Error::ShapeError("fell-bundle evaluation needs a group shape".into()));
    }
    // Saturation: every fibre a full bimodule with permutation multiplicity.
    for g in f.expanded.non_identity_arrows() {
        let e = f.corr(g);
        if e.is_zero() {
            return Err(Error::NotSaturated(format!(
                "fibre on {} is zero",
                f.expanded.arrow_label(g)
            )));
        }
        let mult = e.left_multiplicities()?;
        let perm = mult.iter().all(|row| row.iter().sum::<usize>() == 1)
            && (0..mult[0].len()).all(|i| mult.iter().map(|row| row[i]).sum::<usize>() == 1)
            && e.module().mults().iter().all(|&m| m > 0);
        if !perm {
            return Err(Error::NotSaturated(format!(
                "fibre on {} is not an imprimitivity bimodule (multiplicities {mult:?})",
                f.expanded.arrow_label(g)
            )));
        }
    }
    let conv = convolution_algebra(f)?;
    let structural = conv.algebra.structure_defect();
    if structural > 1e-8 {
        return Err(Error::DecompositionFailed {
            residual: structural,
        });
    }
    let w = wedderburn_decompose(&conv.algebra, tol.max(1e-8), seed)?;
    Ok(FellEvaluation {
        algebra: w.algebra,
        conv,
        iso: w.iso,
        iso_defect: w.residual,
    })
}

/// Result of evaluating an inductive chain.
pub struct ChainEvaluation {
    /// The stabilized value `A_N` when evaluable.
    pub algebra: Option<MultiMatrixAlgebra>,
    /// Multiplicity matrix of each step.
    pub bratteli: Vec<Vec<Vec<usize>>>,
    pub evaluable: bool,
    /// Composed maps `A_n -> A_N` when evaluable.
    pub maps_to_limit: Vec<StarHom>,
}

/// Extract the *-homomorphism of a nondegenerate hom-like chain step.
fn hom_from_step(e: &Correspondence) -> Result<StarHom> {
    if e.module().mults() != e.target().blocks() {
        return Err(Error::NotEvaluable(
            "chain step is not the correspondence of a nondegenerate *-homomorphism".into(),
        ));
    }
    let values = (0..e.source().dim())
        .map(|i| {
            e.target()
                .element(e.left_op(i).blocks.clone())
                .expect("module operator blocks match the target")
        })
        .collect();
    StarHom::new(e.source().clone(), e.target().clone(), values)
}

/// Evaluate a chain diagram: the stabilized value for chains constant from
/// an index on, Bratteli data otherwise.
pub fn eval_stabilized_chain(f: &CorrFunctor) -> Result<ChainEvaluation> {
    let Shape::ChainPrefix {
        len,
        stabilized_from,
    } = f.shape
    else {
        return Err(Error::ShapeError("chain evaluation needs a chain shape".into()));
    };
    let steps: Vec<Correspondence> = f.expanded.generators.iter().map(|&g| f.corr(g)).collect();
    let mut bratteli = Vec::new();
    for e in &steps {
        bratteli.push(e.left_multiplicities()?);
    }
    let homs: Result<Vec<StarHom>> = steps.iter().map(hom_from_step).collect();
    let homs = homs?;
    let Some(n0) = stabilized_from else {
        return Ok(ChainEvaluation {
            algebra: None,
            bratteli,
            evaluable: false,
            maps_to_limit: Vec::new(),
        });
    };
    // Stabilization: every step from n0 on must be a *-isomorphism.
    for h in homs.iter().take(len).skip(n0) {
        let iso = h.source().dim() == h.target().dim()
            && h.is_nondegenerate(1e-9)
            && h.inverse().is_ok();
        if !iso {
            return Ok(ChainEvaluation {
                algebra: None,
                bratteli,
                evaluable: false,
                maps_to_limit: Vec::new(),
            });
        }
    }
    let a_n = f.algebras[n0].clone();
    // Composites phi_n^infty: A_n -> A_N.
    let mut maps: Vec<Option<StarHom>> = vec![None; len + 1];
    maps[n0] = Some(StarHom::identity(&a_n));
    for n in (0..n0).rev() {
        maps[n] = Some(maps[n + 1].as_ref().unwrap().compose(&homs[n])?);
    }
    for n in n0..len {
        let inv = homs[n].inverse()?;
        maps[n + 1] = Some(maps[n].as_ref().unwrap().compose(&inv)?);
    }
    Ok(ChainEvaluation {
        algebra: Some(a_n),
        bratteli,
        evaluable: true,
        maps_to_limit: maps.into_iter().map(|m| m.unwrap()).collect(),
    })
}

/// A concretely evaluated colimit together with its universal cone.
pub struct UniversalCone {
    pub algebra: MultiMatrixAlgebra,
    pub cone: Transformation,
}

/// The universal cone of a concretely evaluable diagram: discrete shapes,
/// saturated finite-group bundles, and stabilized chains of unital
/// *-homomorphisms.
pub fn universal_cone(f: &CorrFunctor) -> Result<UniversalCone> {
    match &f.shape {
        Shape::Discrete(_) => {
            let d = eval_direct_sum(f)?;
            let mut gammas = Vec::new();
            let mut block_start = 0usize;
            for a in &f.algebras {
                let mults: Vec<usize> = (0..d.num_blocks())
                    .map(|j| {
                        if j >= block_start && j < block_start + a.num_blocks() {
                            d.blocks()[j]
                        } else {
                            0
                        }
                    })
                    .collect();
                let values = (0..a.dim())
                    .map(|i| {
                        let r = a.basis_ref(i);
                        let blocks = (0..d.num_blocks())
                            .map(|j| {
                                let m = mults[j];
                                let mut b = CMat::zeros(m, m);
                                if j == block_start + r.block {
                                    b[(r.row, r.col)] = C64::ONE;
                                }
                                b
                            })
                            .collect();
                        ModOp { blocks }
                    })
                    .collect();
                gammas.push(Correspondence::from_parts(
                    a.clone(),
                    d.clone(),
                    mults,
                    LeftAction { values },
                )?);
                block_start += a.num_blocks();
            }
            let cone = Transformation::cone(f.clone(), &d, gammas, Vec::new())?;
            Ok(UniversalCone { algebra: d, cone })
        }
        Shape::FiniteGroup(_) => {
            let eval = eval_fell_bundle(f, 1e-8, 0)?;
            let d = eval.algebra.clone();
            let module = HilbertModule::new(d.clone(), d.blocks().to_vec())?;
            let a = &f.algebras[0];
            let unit_arrow = f.expanded.identity_arrow(0);
            let phi: Vec<CMat> = (0..a.dim())
                .map(|i| {
                    let img = &eval.iso[eval.conv.fibre_coord(unit_arrow, i)];
                    ModOp {
                        blocks: img.mats.clone(),
                    }
                    .full_matrix(&module, &module)
                })
                .collect();
            let mut esses = BTreeMap::new();
            for g in f.expanded.non_identity_arrows() {
                let e = f.corr(g);
                let ops: Vec<CMat> = (0..e.dim())
                    .map(|u| {
                        let img = &eval.iso[eval.conv.fibre_coord(g, u)];
                        ModOp {
                            blocks: img.mats.clone(),
                        }
                        .full_matrix(&module, &module)
                    })
                    .collect();
                esses.insert(g, ops);
            }
            let rep = RepresentationData {
                diagram: f.clone(),
                base: d.clone(),
                gammas: vec![module],
                phis: vec![phi],
                esses,
            };
            let cone = representation_to_cone(&rep, 1e-7)?;
            Ok(UniversalCone { algebra: d, cone })
        }
        Shape::ChainPrefix { len, .. } => {
            let eval = eval_stabilized_chain(f)?;
            if !eval.evaluable {
                return Err(Error::NotEvaluable(
                    "chain does not stabilize; only Bratteli data is available".into(),
                ));
            }
            let d = eval.algebra.clone().unwrap();
            for h in &eval.maps_to_limit {
                if !h.is_nondegenerate(1e-9) {
                    return Err(Error::NotEvaluable(
                        "universal cone construction needs unital chain maps".into(),
                    ));
                }
            }
            for g in f.expanded.generators.iter().copied() {
                let e = f.corr(g);
                if e.module().mults() != e.target().blocks() {
                    return Err(Error::NotEvaluable(
                        "universal cone construction needs unital chain steps".into(),
                    ));
                }
            }
            // gamma_n = D as a module over itself with A_n acting through
            // phi_n^infty; S on a step (m, m+1) is multiplication by the
            // image of the step element.
            let module = HilbertModule::new(d.clone(), d.blocks().to_vec())?;
            let mut phis = Vec::new();
            for n in 0..=*len {
                let h = &eval.maps_to_limit[n];
                phis.push(
                    (0..f.algebras[n].dim())
                        .map(|i| {
                            ModOp {
                                blocks: h.value(i).mats.clone(),
                            }
                            .full_matrix(&module, &module)
                        })
                        .collect::<Vec<_>>(),
                );
            }
            // S on arbitrary arrows (m, n) by expanding the module basis of
            // the tensor-chain correspondence through its sections.
            let mut esses: BTreeMap<usize, Vec<CMat>> = BTreeMap::new();
            let mut s_cache: BTreeMap<(usize, usize), Vec<CMat>> = BTreeMap::new();
            // Steps first: basis of a unital hom-correspondence is the
            // target algebra basis.
            for (m, g) in f.expanded.generators.iter().copied().enumerate() {
                let e = f.corr(g);
                let target_n = m + 1;
                let h = &eval.maps_to_limit[target_n];
                let ops: Vec<CMat> = (0..e.dim())
                    .map(|u| {
                        let elem = f.algebras[target_n]
                            .element_from_coeffs(
                                &(0..f.algebras[target_n].dim())
                                    .map(|i| if i == u { C64::ONE } else { C64::ZERO })
                                    .collect::<Vec<_>>(),
                            )
                            .unwrap();
                        ModOp {
                            blocks: h.apply(&elem).mats.clone(),
                        }
                        .full_matrix(&module, &module)
                    })
                    .collect();
                s_cache.insert((m, m + 1), ops);
            }
            for span in 2..=*len {
                for m in 0..=(len - span) {
                    let n = m + span;
                    // E_m^n = can(E_m^{n-1} (x) E_{n-1}^n).
                    let e_prefix = chain_corr(f, m, n - 1)?;
                    let e_last = chain_corr(f, n - 1, n)?;
                    let t = crate::corr::tensor(&e_prefix, &e_last)?;
                    let s_pre = s_cache[&(m, n - 1)].clone();
                    let s_last = s_cache[&(n - 1, n)].clone();
                    let dl = e_last.dim();
                    let ops: Vec<CMat> = (0..t.corr.dim())
                        .map(|wi| {
                            let coords = t.section.column(wi);
                            let mut acc = CMat::zeros(module.dim(), module.dim());
                            for (raw, c) in coords.iter().enumerate() {
                                if c.norm() > 1e-14 {
                                    let (u, v) = (raw / dl, raw % dl);
                                    acc += (&s_pre[u] * &s_last[v]).map(|x| x * c);
                                }
                            }
                            acc
                        })
                        .collect();
                    s_cache.insert((m, n), ops);
                }
            }
            for g in f.expanded.non_identity_arrows() {
                let name = f.expanded.arrow_label(g);
                let (m, n) = name.split_once("->").unwrap();
                let (m, n): (usize, usize) = (m.parse().unwrap(), n.parse().unwrap());
                esses.insert(g, s_cache[&(m, n)].clone());
            }
            let rep = RepresentationData {
                diagram: f.clone(),
                base: d.clone(),
                gammas: vec![module; *len + 1],
                phis,
                esses,
            };
            let cone = representation_to_cone(&rep, 1e-7)?;
            Ok(UniversalCone { algebra: d, cone })
        }
        _ => Err(Error::NotEvaluable(format!(
            "no concrete evaluation for shape {:?}",
            f.shape
        ))),
    }
}

/// The diagram's correspondence on the chain arrow `m -> n`.
fn chain_corr(f: &CorrFunctor, m: usize, n: usize) -> Result<Correspondence> {
    let name = format!("{m}->{n}");
    for g in f.expanded.non_identity_arrows() {
        if f.expanded.arrow_label(g) == name {
            return Ok(f.corr(g));
        }
    }
    Err(Error::ShapeError(format!("no chain arrow {name}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr::from_star_hom;
    use crate::diagram::validate_functor;
    use crate::shapes::{cyclic_group, klein_four_group, symmetric_group_3, GroupData};

    fn algebra(blocks: &[usize], label: &str) -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::new(blocks.to_vec(), label).unwrap()
    }

    use crate::fixtures::{cocycle_bundle, m2_crossed_z2};

    fn trivial_bundle(group: GroupData, a: &MultiMatrixAlgebra) -> CorrFunctor {
        crate::fixtures::trivial_bundle(group, a).unwrap()
    }

    #[test]
    fn direct_sum_evaluation() {
        let f = CorrFunctor::from_parts(
            Shape::Discrete(2),
            3,
            vec![algebra(&[2], "M2"), algebra(&[3, 1], "B")],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(eval_direct_sum(&f).unwrap().blocks(), &[2, 3, 1]);

        let single = CorrFunctor::from_parts(
            Shape::Discrete(1),
            3,
            vec![algebra(&[2], "M2")],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(eval_direct_sum(&single).unwrap().blocks(), &[2]);

        let three = CorrFunctor::from_parts(
            Shape::Discrete(3),
            3,
            vec![algebra(&[1], "C"); 3],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(eval_direct_sum(&three).unwrap().blocks(), &[1, 1, 1]);
    }

    #[test]
    fn trivial_z2_bundle_evaluates_to_two_characters() {
        let f = trivial_bundle(cyclic_group(2), &algebra(&[1], "C"));
        assert!(validate_functor(&f, 1e-9).unwrap().passed());
        let eval = eval_fell_bundle(&f, 1e-8, 0).unwrap();
        assert_eq!(eval.algebra.blocks(), &[1, 1]);
        assert!(eval.iso_defect <= 1e-8);
    }

    #[test]
    fn m2_crossed_z2_evaluates_to_two_m2_blocks() {
        let f = m2_crossed_z2().unwrap();
        let report = validate_functor(&f, 1e-9).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
        let eval = eval_fell_bundle(&f, 1e-8, 0).unwrap();
        assert_eq!(eval.algebra.blocks(), &[2, 2]);
        assert!(eval.iso_defect <= 1e-8);
    }

    #[test]
    fn klein_cocycle_bundle_is_simple() {
        let f = cocycle_bundle(klein_four_group(), &crate::fixtures::pauli_cocycle).unwrap();
        let report = validate_functor(&f, 1e-9).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
        let eval = eval_fell_bundle(&f, 1e-8, 0).unwrap();
        assert_eq!(eval.algebra.blocks(), &[2]);
    }

    #[test]
    fn s3_group_algebra_blocks() {
        let f = trivial_bundle(symmetric_group_3(), &algebra(&[1], "C"));
        let eval = eval_fell_bundle(&f, 1e-8, 0).unwrap();
        assert_eq!(eval.algebra.blocks(), &[1, 1, 2]);
        assert!(eval.iso_defect <= 1e-8);
    }

    #[test]
    fn wedderburn_on_known_algebras() {
        // M_2 presented abstractly.
        let m2 = algebra(&[2], "M2");
        let d = m2.dim();
        let left_mult = (0..d)
            .map(|i| {
                let e = m2.basis_element(i);
                let mut m = CMat::zeros(d, d);
                for j in 0..d {
                    for (r, v) in e.mul(&m2.basis_element(j)).coeffs().iter().enumerate() {
                        m[(r, j)] = *v;
                    }
                }
                m
            })
            .collect();
        let mut invol = CMat::zeros(d, d);
        for i in 0..d {
            let r = m2.basis_ref(i);
            invol[(
                m2.basis_index(BasisRef {
                    block: r.block,
                    row: r.col,
                    col: r.row,
                }),
                i,
            )] = C64::ONE;
        }
        let alg = FiniteStarAlgebra {
            dim: d,
            left_mult,
            invol,
            unit: CVec::from_vec(m2.identity().coeffs()),
            trace_vec: CVec::from_vec(
                (0..d)
                    .map(|i| {
                        let r = m2.basis_ref(i);
                        if r.row == r.col {
                            C64::ONE
                        } else {
                            C64::ZERO
                        }
                    })
                    .collect(),
            ),
        };
        let w = wedderburn_decompose(&alg, 1e-8, 0).unwrap();
        assert_eq!(w.algebra.blocks(), &[2]);

        // C^3 diagonal.
        let c3 = algebra(&[1, 1, 1], "C3");
        let d = c3.dim();
        let left_mult = (0..d)
            .map(|i| {
                let mut m = CMat::zeros(d, d);
                m[(i, i)] = C64::ONE;
                m
            })
            .collect();
        let alg = FiniteStarAlgebra {
            dim: d,
            left_mult,
            invol: linalg::eye(d),
            unit: CVec::from_element(d, C64::ONE),
            trace_vec: CVec::from_element(d, C64::ONE),
        };
        let w = wedderburn_decompose(&alg, 1e-8, 0).unwrap();
        assert_eq!(w.algebra.blocks(), &[1, 1, 1]);
    }

    #[test]
    fn degenerate_bundle_rejected() {
        // A fibre with multiplicity 2 is not an imprimitivity bimodule.
        let c = algebra(&[1], "C");
        let shape = Shape::FiniteGroup(cyclic_group(2));
        let values = vec![ModOp {
            blocks: vec![linalg::eye(2)],
        }];
        let fat =
            Correspondence::from_parts(c.clone(), c.clone(), vec![2], LeftAction { values })
                .unwrap();
        let t = crate::corr::tensor(&fat, &fat).unwrap();
        let f = CorrFunctor::from_parts(
            shape,
            3,
            vec![c],
            vec![(1, fat)],
            vec![((1, 1), CMat::zeros(1, t.corr.dim()))],
            vec![],
        )
        .unwrap();
        assert!(matches!(
            eval_fell_bundle(&f, 1e-8, 0),
            Err(Error::NotSaturated(_))
        ));
    }

    #[test]
    fn stabilized_chain_evaluates() {
        use crate::diagram::{extend_from_generators, GeneratorData};
        let c = algebra(&[1], "C");
        let m2 = algebra(&[2], "M2");
        let h0 = StarHom::from_fn(&c, &m2, |_| m2.identity()).unwrap();
        let h1 = StarHom::identity(&m2);
        let f = extend_from_generators(
            &Shape::ChainPrefix {
                len: 2,
                stabilized_from: Some(1),
            },
            3,
            GeneratorData::Chain {
                algebras: vec![c, m2.clone(), m2],
                corrs: vec![from_star_hom(&h0).unwrap(), from_star_hom(&h1).unwrap()],
            },
        )
        .unwrap();
        let eval = eval_stabilized_chain(&f).unwrap();
        assert!(eval.evaluable);
        assert_eq!(eval.algebra.as_ref().unwrap().blocks(), &[2]);
        assert_eq!(eval.bratteli, vec![vec![vec![2]], vec![vec![1]]]);
    }

    #[test]
    fn doubling_chain_not_evaluable() {
        use crate::diagram::{extend_from_generators, GeneratorData};
        let algebras = vec![
            algebra(&[1], "C"),
            algebra(&[2], "M2"),
            algebra(&[4], "M4"),
        ];
        let homs = [
            StarHom::from_fn(&algebras[0], &algebras[1], |_| algebras[1].identity()).unwrap(),
            StarHom::from_fn(&algebras[1], &algebras[2], |r| {
                // a -> diag(a, a)
                let mut m = CMat::zeros(4, 4);
                m[(r.row, r.col)] = C64::ONE;
                m[(2 + r.row, 2 + r.col)] = C64::ONE;
                algebras[2].element(vec![m]).unwrap()
            })
            .unwrap(),
        ];
        let corrs = homs.iter().map(|h| from_star_hom(h).unwrap()).collect();
        let f = extend_from_generators(
            &Shape::ChainPrefix {
                len: 2,
                stabilized_from: None,
            },
            3,
            GeneratorData::Chain {
                algebras,
                corrs,
            },
        )
        .unwrap();
        let eval = eval_stabilized_chain(&f).unwrap();
        assert!(!eval.evaluable);
        assert!(eval.algebra.is_none());
        assert_eq!(eval.bratteli[1], vec![vec![2]]);
    }

    #[test]
    fn universal_cone_over_trivial_z2() {
        let f = trivial_bundle(cyclic_group(2), &algebra(&[1], "C"));
        let uc = universal_cone(&f).unwrap();
        assert_eq!(uc.algebra.blocks(), &[1, 1]);
        let report = crate::transform::validate_transformation(&uc.cone, 1e-8).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
    }

    #[test]
    fn universal_cone_over_discrete_and_chain() {
        let f = CorrFunctor::from_parts(
            Shape::Discrete(2),
            3,
            vec![algebra(&[2], "M2"), algebra(&[1], "C")],
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        let uc = universal_cone(&f).unwrap();
        assert_eq!(uc.algebra.blocks(), &[2, 1]);
        assert!(crate::transform::validate_transformation(&uc.cone, 1e-8)
            .unwrap()
            .passed());

        use crate::diagram::{extend_from_generators, GeneratorData};
        let c = algebra(&[1], "C");
        let m2 = algebra(&[2], "M2");
        let h0 = StarHom::from_fn(&c, &m2, |_| m2.identity()).unwrap();
        let h1 = StarHom::identity(&m2);
        let chain = extend_from_generators(
            &Shape::ChainPrefix {
                len: 2,
                stabilized_from: Some(1),
            },
            3,
            GeneratorData::Chain {
                algebras: vec![c, m2.clone(), m2],
                corrs: vec![from_star_hom(&h0).unwrap(), from_star_hom(&h1).unwrap()],
            },
        )
        .unwrap();
        let uc = universal_cone(&chain).unwrap();
        assert_eq!(uc.algebra.blocks(), &[2]);
        let report = crate::transform::validate_transformation(&uc.cone, 1e-8).unwrap();
        assert!(report.passed(), "{:?}", report.first_failure());
    }
}

#[cfg(test)]
mod scratch {
    use super::*;
    use crate::algebra::BasisRef;

    #[test]
    fn debug_center_of_m2() {
        let m2 = MultiMatrixAlgebra::new(vec![2], "M2").unwrap();
        let d = m2.dim();
        let left_mult: Vec<CMat> = (0..d)
            .map(|i| {
                let e = m2.basis_element(i);
                let mut m = CMat::zeros(d, d);
                for j in 0..d {
                    for (r, v) in e.mul(&m2.basis_element(j)).coeffs().iter().enumerate() {
                        m[(r, j)] = *v;
                    }
                }
                m
            })
            .collect();
        let mut invol = CMat::zeros(d, d);
        for i in 0..d {
            let r = m2.basis_ref(i);
            invol[(m2.basis_index(BasisRef { block: r.block, row: r.col, col: r.row }), i)] = C64::ONE;
        }
        let alg = FiniteStarAlgebra {
            dim: d,
            left_mult,
            invol,
            unit: CVec::from_vec(m2.identity().coeffs()),
            trace_vec: CVec::from_vec((0..d).map(|i| {
                let r = m2.basis_ref(i);
                if r.row == r.col { C64::ONE } else { C64::ZERO }
            }).collect()),
        };
        eprintln!("structure defect: {:.3e}", alg.structure_defect());
        let mut comm = CMat::zeros(d * d, d);
        for i in 0..d {
            let li = &alg.left_mult[i];
            let ri = alg.right_mult(i);
            let diff = li - ri;
            comm.view_mut((i * d, 0), (d, d)).copy_from(&diff);
        }
        let unit_res = (&comm * &alg.unit).norm();
        eprintln!("comm * unit residual: {:.3e}", unit_res);
        let gram = comm.adjoint() * &comm;
        eprintln!("gram eigenvalues: {:?}", linalg::hermitian_eigenvalues(&gram));
        let ns = linalg::nullspace(&comm, 1e-9);
        eprintln!("nullspace dim: {}", ns.len());
    }
}
