//! Small dense complex linear-algebra helpers.

use num_complex::Complex64;

use crate::CMatrix;

/// `log2 det(A)` for a Hermitian positive-definite `n x n` matrix stored
/// column-major in `a`. The buffer is overwritten with the Cholesky factor.
///
/// Returns `None` when a pivot is not strictly positive.
pub fn log2_det_hpd_in_place(a: &mut [Complex64], n: usize) -> Option<f64> {
    debug_assert_eq!(a.len(), n * n);
    let mut log_det = 0.0;
    for j in 0..n {
        let mut diag = a[j + j * n].re;
        for p in 0..j {
            diag -= a[j + p * n].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        a[j + j * n] = Complex64::new(ljj, 0.0);
        log_det += diag.log2();
        for i in (j + 1)..n {
            let mut s = a[i + j * n];
            for p in 0..j {
                s -= a[i + p * n] * a[j + p * n].conj();
            }
            a[i + j * n] = s / ljj;
        }
    }
    Some(log_det)
}

/// `log2 det(A)` for a Hermitian positive-definite matrix.
pub fn log2_det_hpd(a: &CMatrix) -> Option<f64> {
    assert!(a.is_square());
    let n = a.nrows();
    let mut buf = a.as_slice().to_vec();
    log2_det_hpd_in_place(&mut buf, n)
}

/// Squared Frobenius norm.
pub fn frobenius_sq(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest absolute deviation of `A* A` from the identity.
pub fn orthonormality_error(a: &CMatrix) -> f64 {
    let gram = a.adjoint() * a;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Replaces the columns of `q` listed in `replace` with unit vectors
/// orthogonal to every other column, using modified Gram-Schmidt over the
/// canonical basis. Columns not listed must already be orthonormal.
pub fn complete_orthonormal(q: &mut CMatrix, replace: &[usize]) {
    let rows = q.nrows();
    let mut replace = replace.to_vec();
    replace.sort_unstable();
    let mut candidate = 0usize;
    for &col in &replace {
        loop {
            assert!(
                candidate < rows,
                "cannot complete an orthonormal basis with more columns than rows"
            );
            let mut v = nalgebra::DVector::<Complex64>::zeros(rows);
            v[candidate] = Complex64::new(1.0, 0.0);
            candidate += 1;
            for other in 0..q.ncols() {
                if other == col || (replace.contains(&other) && other > col) {
                    continue;
                }
                let u = q.column(other).into_owned();
                let proj = u.dotc(&v);
                v -= u * proj;
            }
            let norm = v.norm();
            if norm > 1e-6 {
                q.set_column(col, &(v / Complex64::new(norm, 0.0)));
                break;
            }
        }
    }
}
