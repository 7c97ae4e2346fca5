//! Dense complex linear algebra helpers shared by the whole crate.
//!
//! Spectral computations are routed through Hermitian eigendecompositions
//! so that only the symmetric eigensolver is needed.

use crate::{C64, CMat, CVec};
use nalgebra::DVector;

/// Operator norm (largest singular value) of a complex matrix.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    // Largest eigenvalue of the Hermitian PSD matrix m* m.
    let gram = m.adjoint() * m;
    let eigs = hermitian_eigenvalues(&gram);
    eigs.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    hermitian_eig(m).0
}

/// Eigendecomposition of a Hermitian matrix: (ascending eigenvalues, column
/// eigenvectors in matching order).  The input is symmetrized to guard
/// against round-off.  Falls back to a cyclic Jacobi sweep when the
/// tridiagonalization-based solver fails to converge.
pub fn hermitian_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "hermitian_eig: matrix must be square");
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let se = sym.clone().symmetric_eigen();
    let finite = se.eigenvalues.iter().all(|v| v.is_finite())
        && se.eigenvectors.iter().all(|v| v.re.is_finite() && v.im.is_finite());
    let (raw_vals, raw_vecs) = if finite {
        (
            se.eigenvalues.iter().copied().collect::<Vec<f64>>(),
            se.eigenvectors,
        )
    } else {
        jacobi_hermitian(&sym)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_vals[a].partial_cmp(&raw_vals[b]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| raw_vals[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &raw_vecs.column(i));
    }
    (vals, vecs)
}

/// Cyclic Jacobi eigensolver for Hermitian matrices: robust for the
/// moderate sizes used here.
fn jacobi_hermitian(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = CMat::identity(n, n);
    let scale = op_norm_bound(&a).max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = a[(p, q)];
                let gn = g.norm();
                if gn <= 1e-300 {
                    continue;
                }
                let phase = g / gn;
                let alpha = a[(p, p)].re;
                let beta = a[(q, q)].re;
                let tau = (beta - alpha) / (2.0 * gn);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let cp = C64::new(c, 0.0);
                // U = diag(1, e^{-i phi}) [[c, s], [-s, c]]: columns
                // (c, -s e^{-i phi}) and (s, c e^{-i phi}).
                let sp = phase.conj() * s;
                let cq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * cp - akq * sp;
                    a[(k, q)] = akp * C64::new(s, 0.0) + akq * cq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * cp - vkq * sp;
                    v[(k, q)] = vkp * C64::new(s, 0.0) + vkq * cq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * cp - aqk * sp.conj();
                    a[(q, k)] = apk * C64::new(s, 0.0) + aqk * cq.conj();
                }
            }
        }
    }
    let vals = (0..n).map(|i| a[(i, i)].re).collect();
    (vals, v)
}

/// Cheap upper bound on the operator norm (max row sum), avoiding a
/// recursive eigensolve.
fn op_norm_bound(m: &CMat) -> f64 {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)].norm()).sum())
        .fold(0.0f64, f64::max)
}

/// Numerical rank with absolute singular-value threshold `tol`.
pub fn rank(m: &CMat, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let gram = m.adjoint() * m;
    let vals = hermitian_eigenvalues(&gram);
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    // The eigenvalue noise floor scales with the largest eigenvalue; keep
    // the cut above it so exact nulls are never promoted to rank.
    let cut = (tol * tol).max(lmax * 1e-12);
    vals.iter().filter(|&&l| l > cut).count()
}

/// Orthonormal basis of the null space of `m` (columns), threshold `tol` on
/// singular values.
pub fn nullspace(m: &CMat, tol: f64) -> Vec<CVec> {
    let ncols = m.ncols();
    if ncols == 0 {
        return Vec::new();
    }
    if m.nrows() == 0 {
        return (0..ncols)
            .map(|i| CVec::from_fn(ncols, |r, _| if r == i { C64::ONE } else { C64::ZERO }))
            .collect();
    }
    let gram = m.adjoint() * m;
    let (vals, vecs) = hermitian_eig(&gram);
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let cut = (tol * tol).max(lmax * 1e-12);
    let mut out = Vec::new();
    for (i, &l) in vals.iter().enumerate() {
        if l <= cut {
            out.push(CVec::from(vecs.column(i).into_owned()));
        }
    }
    out
}

/// Orthonormal basis of the column space of `m`, chosen by pivoted
/// Gram–Schmidt with deterministic pivot order (largest residual norm,
/// lowest index on ties).  Returns a matrix whose columns are the basis.
pub fn orthonormal_range_basis(m: &CMat, tol: f64) -> CMat {
    let n = m.nrows();
    let k = m.ncols();
    let mut residual: Vec<CVec> = (0..k).map(|j| m.column(j).into_owned()).collect();
    let mut basis: Vec<CVec> = Vec::new();
    let scale = residual
        .iter()
        .map(|c| c.norm())
        .fold(0.0f64, f64::max)
        .max(1.0);
    loop {
        let (mut best, mut best_norm) = (usize::MAX, tol * scale);
        for (j, r) in residual.iter().enumerate() {
            let nr = r.norm();
            if nr > best_norm {
                best = j;
                best_norm = nr;
            }
        }
        if best == usize::MAX {
            break;
        }
        let mut v = residual[best].clone();
        // One reorthogonalization pass for stability.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let nv = v.norm();
        if nv <= tol * scale {
            residual[best] = CVec::zeros(n);
            continue;
        }
        v /= C64::new(nv, 0.0);
        for r in residual.iter_mut() {
            let c = v.dotc(r);
            *r -= &v * c;
        }
        basis.push(v);
    }
    let mut out = CMat::zeros(n, basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// Pivoted Gram–Schmidt with respect to a PSD Hermitian form `s` on
/// coordinate space: returns coefficient vectors `w_1..w_r` with
/// `w_i* s w_j = delta_ij`, spanning coordinate space modulo the null space
/// of the form.  Pivot order: largest residual form-norm, lowest index on
/// ties.
pub fn form_orthonormal_basis(s: &CMat, tol: f64) -> Vec<CVec> {
    let d = s.nrows();
    assert_eq!(d, s.ncols());
    let mut basis: Vec<CVec> = Vec::new();
    let scale = (0..d)
        .map(|i| s[(i, i)].re.abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let form_ip = |a: &CVec, b: &CVec| -> C64 { (a.adjoint() * s * b)[(0, 0)] };
    let mut used = vec![false; d];
    loop {
        // Residual squared form-norm of each remaining coordinate vector.
        let mut best = usize::MAX;
        let mut best_norm = tol * scale;
        for i in 0..d {
            if used[i] {
                continue;
            }
            let mut v = CVec::zeros(d);
            v[i] = C64::ONE;
            for w in &basis {
                let c = form_ip(w, &v);
                v -= w * c;
            }
            let n2 = form_ip(&v, &v).re;
            if n2 > best_norm {
                best = i;
                best_norm = n2;
            }
        }
        if best == usize::MAX {
            break;
        }
        used[best] = true;
        let mut v = CVec::zeros(d);
        v[best] = C64::ONE;
        for _ in 0..2 {
            for w in &basis {
                let c = form_ip(w, &v);
                v -= w * c;
            }
        }
        let n2 = form_ip(&v, &v).re;
        if n2 <= tol * scale {
            continue;
        }
        v /= C64::new(n2.sqrt(), 0.0);
        basis.push(v);
    }
    basis
}

/// Kronecker product a (x) b.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Hermitian inverse square root via eigendecomposition.  Eigenvalues below
/// `tol` make the matrix singular; returns None in that case.
pub fn inv_sqrt_hermitian(m: &CMat, tol: f64) -> Option<CMat> {
    let (vals, vecs) = hermitian_eig(m);
    if vals.iter().any(|&l| l <= tol) {
        return None;
    }
    let n = m.nrows();
    let mut d = CMat::zeros(n, n);
    for (i, &l) in vals.iter().enumerate() {
        d[(i, i)] = C64::new(1.0 / l.sqrt(), 0.0);
    }
    Some(&vecs * d * vecs.adjoint())
}

/// Unitary polar factor of an invertible square matrix, or None if the
/// matrix is numerically singular.
pub fn polar_unitary(m: &CMat, tol: f64) -> Option<CMat> {
    let gram = m.adjoint() * m;
    let isq = inv_sqrt_hermitian(&gram, tol)?;
    Some(m * isq)
}

/// Identity matrix shortcut.
pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Real vector convenience: max |entry|.
pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_of_shift_and_diag() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[C64::ZERO, C64::ONE, C64::ZERO, C64::ZERO],
        );
        assert!((op_norm(&m) - 1.0).abs() < 1e-12);
        let d = CMat::from_row_slice(
            2,
            2,
            &[C64::ONE, C64::ZERO, C64::ZERO, C64::new(2.0, 0.0)],
        );
        assert!((op_norm(&d) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn form_basis_respects_degenerate_form() {
        // diag(1, 0): one basis vector.
        let s = CMat::from_row_slice(2, 2, &[C64::ONE, C64::ZERO, C64::ZERO, C64::ZERO]);
        let b = form_orthonormal_basis(&s, 1e-10);
        assert_eq!(b.len(), 1);
        // 2*I: two vectors of form-norm one.
        let s2 = CMat::from_diagonal(&CVec::from_element(2, C64::new(2.0, 0.0)));
        let b2 = form_orthonormal_basis(&s2, 1e-10);
        assert_eq!(b2.len(), 2);
        let ip = (b2[0].adjoint() * &s2 * &b2[0])[(0, 0)];
        assert!((ip.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nullspace_of_rank_one() {
        let m = CMat::from_row_slice(2, 2, &[C64::ONE, C64::ONE, C64::ONE, C64::ONE]);
        let ns = nullspace(&m, 1e-10);
        assert_eq!(ns.len(), 1);
        assert!((&m * &ns[0]).norm() < 1e-10);
    }

    #[test]
    fn polar_factor_is_unitary() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(2.0, 1.0),
                C64::new(0.5, 0.0),
                C64::new(0.0, -1.0),
                C64::new(1.0, 0.0),
            ],
        );
        let u = polar_unitary(&m, 1e-12).unwrap();
        let defect = op_norm(&(u.adjoint() * &u - eye(2)));
        assert!(defect < 1e-10);
    }
}

#[cfg(test)]
mod jacobi_tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn jacobi_agrees_with_tridiagonal_solver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for n in [2usize, 5, 9] {
            let h = crate::random::random_hermitian(n, &mut rng);
            let (vals, vecs) = super::jacobi_hermitian(&h);
            // Residual of the eigendecomposition.
            let mut d = CMat::zeros(n, n);
            for (i, &l) in vals.iter().enumerate() {
                d[(i, i)] = C64::new(l, 0.0);
            }
            let res = op_norm(&(&h * &vecs - &vecs * d));
            assert!(res < 1e-10, "residual {res:.3e}");
            let unit = op_norm(&(vecs.adjoint() * &vecs - eye(n)));
            assert!(unit < 1e-10, "unitarity {unit:.3e}");
            let mut a = hermitian_eigenvalues(&h);
            let mut b = vals.clone();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

/// Positive-semidefiniteness check for a Hermitian matrix via outer-product
/// elimination with diagonal pivoting; returns the most negative pivot
/// found (0.0 when the matrix is PSD within `tol`).
pub fn psd_violation(h: &CMat, tol: f64) -> f64 {
    let n = h.nrows();
    let mut a = (h + h.adjoint()).scale(0.5);
    let scale = (0..n).map(|i| a[(i, i)].re.abs()).fold(1.0f64, f64::max);
    let mut worst = 0.0f64;
    for _ in 0..n {
        // Largest remaining diagonal entry.
        let (mut p, mut dmax) = (usize::MAX, tol * scale);
        let mut dmin = 0.0f64;
        for i in 0..n {
            let d = a[(i, i)].re;
            if d > dmax {
                dmax = d;
                p = i;
            }
            dmin = dmin.min(d);
        }
        if p == usize::MAX {
            // All remaining diagonal entries are ~ 0; for a PSD matrix the
            // residual must vanish entirely.
            if dmin < -tol * scale {
                worst = worst.min(dmin);
            }
            let mut offmax = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        offmax = offmax.max(a[(i, j)].norm());
                    }
                }
            }
            if offmax > tol.sqrt() * scale {
                worst = worst.min(-offmax);
            }
            break;
        }
        let d = a[(p, p)].re;
        let col = a.column(p).into_owned();
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] -= col[i] * col[j].conj() / C64::new(d, 0.0);
            }
        }
        a[(p, p)] = C64::ZERO;
        for i in 0..n {
            a[(i, p)] = C64::ZERO;
            a[(p, i)] = C64::ZERO;
        }
    }
    worst
}
