//! Small dense helpers for the M <= 8 complex algebra used throughout.

use nalgebra::SymmetricEigen;

use crate::{CMatrix, CVector, C64};

/// `Re(h^H S h)`.
pub(crate) fn quad_form(h: &CVector, s: &CMatrix) -> f64 {
    h.dotc(&(s * h)).re
}

/// `|h^H w|^2`.
pub(crate) fn gain(h: &CVector, w: &CVector) -> f64 {
    h.dotc(w).norm_sqr()
}

pub(crate) fn outer(w: &CVector) -> CMatrix {
    w * w.adjoint()
}

/// Removes from `v` its components along the orthonormal vectors in `basis`.
/// Two passes of modified Gram-Schmidt keep the result orthogonal to machine
/// precision even when `v` is nearly inside the span.
pub(crate) fn project_out(v: &CVector, basis: &[CVector]) -> CVector {
    let mut r = v.clone();
    for _ in 0..2 {
        for q in basis {
            let c = q.dotc(&r);
            r -= q * c;
        }
    }
    r
}

/// Extends `basis` with the normalized components of `vectors` that are not
/// already in its span. Components shorter than `rel_tol` times the original
/// vector norm are treated as dependent and skipped.
pub(crate) fn extend_orthonormal(basis: &mut Vec<CVector>, vectors: &[&CVector], rel_tol: f64) {
    for v in vectors {
        let norm = v.norm();
        if norm == 0.0 {
            continue;
        }
        let r = project_out(v, basis);
        let rn = r.norm();
        if rn > rel_tol * norm {
            basis.push(r / C64::new(rn, 0.0));
        }
    }
}

/// Orthonormal basis of the orthogonal complement of `span_basis` in `C^dim`.
pub(crate) fn complement_basis(span_basis: &[CVector], dim: usize) -> Vec<CVector> {
    let mut all = span_basis.to_vec();
    let start = all.len();
    for i in 0..dim {
        if all.len() == dim {
            break;
        }
        let e = CVector::from_fn(dim, |r, _| if r == i { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        extend_orthonormal(&mut all, &[&e], 1e-8);
    }
    all.split_off(start)
}

/// Stacks column vectors into a `dim x n` matrix.
pub(crate) fn columns(vectors: &[CVector], dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, vectors.len(), |r, c| vectors[c][r])
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub(crate) fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).norm() <= tol * m.norm().max(1.0)
}

pub(crate) fn trace_re(m: &CMatrix) -> f64 {
    m.trace().re
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(re, im)| C64::new(re, im)))
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal() {
        let a = cv(&[(1.0, 0.5), (0.2, -0.1), (0.0, 1.0)]);
        let mut span = Vec::new();
        extend_orthonormal(&mut span, &[&a], 1e-12);
        let comp = complement_basis(&span, 3);
        assert_eq!(comp.len(), 2);
        for q in &comp {
            assert!((q.norm() - 1.0).abs() < 1e-12);
            assert!(a.dotc(q).norm() < 1e-12);
        }
        assert!(comp[0].dotc(&comp[1]).norm() < 1e-12);
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let a = cv(&[(1.0, 0.0), (0.0, 2.0)]);
        let m = outer(&a) + CMatrix::identity(2, 2);
        let (vals, vecs) = hermitian_eigen(&m);
        assert!(vals[0] <= vals[1]);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 6.0).abs() < 1e-12);
        let d = CMatrix::from_diagonal(&CVector::from_iterator(2, vals.iter().map(|&v| C64::new(v, 0.0))));
        let rec = &vecs * d * vecs.adjoint();
        assert!((rec - m).norm() < 1e-12);
    }
}
